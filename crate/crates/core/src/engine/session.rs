use std::sync::mpsc;
use std::thread;

use ed25519_dalek::SigningKey;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha3::{Digest, Sha3_256};

use super::party::{Event, LocalDeviation, PartyContext, PartyNet};
use super::proof::Roster;
use super::{EngineConfig, EngineError};
use crate::field::Fp;
use crate::preprocessing::{DealerView, PreprocBundle, PreprocCounts, PreprocError, PreprocStore};
use crate::transport::{
    AdversarySpec, Behavior, Fabric, Inbox, Submission, Transcript, TransportError, TransportStats,
};

/// 32-byte seed for a labelled sub-stream of the session randomness.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha3_256::new();
    h.update(label.as_bytes());
    h.update(seed.to_le_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

/// Everything needed to start the parties of one session.
pub struct Session<const P: u64> {
    pub bundle: PreprocBundle<P>,
    pub roster: Roster,
    pub signing_keys: Vec<SigningKey>,
    pub adversary: AdversarySpec,
    pub config: EngineConfig,
    pub seed: u64,
}

impl<const P: u64> Session<P> {
    /// Honest session with a roster derived from `seed`.
    pub fn new(bundle: PreprocBundle<P>, seed: u64) -> Self {
        let (roster, signing_keys) = Roster::generate(bundle.n(), seed);
        Self { bundle, roster, signing_keys, adversary: AdversarySpec::honest(), config: EngineConfig::default(), seed }
    }

    /// Deals fresh preprocessing from a dealer seeded by `seed`.
    pub fn dealt(n: usize, counts: PreprocCounts, seed: u64) -> Result<(Self, DealerView<P>), PreprocError> {
        let mut rng = ChaCha20Rng::from_seed(derive_seed(seed, "dealer", 0));
        let (bundle, view) = PreprocBundle::generate(n, seed, counts, &mut rng)?;
        Ok((Self::new(bundle, seed), view))
    }

    pub fn with_adversary(mut self, adversary: AdversarySpec) -> Self {
        self.adversary = adversary;
        self
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartyReport {
    pub consumed: PreprocCounts,
    pub multiplications: u64,
    pub opened: u64,
}

pub struct PartiesOutcome<T> {
    pub results: Vec<Result<T, EngineError>>,
    pub reports: Vec<PartyReport>,
    pub transcript: Transcript,
    pub stats: TransportStats,
}

/// Sends `Finished` even if the party's code panics, so the fabric never waits forever.
struct FinishGuard {
    id: usize,
    tx: mpsc::Sender<(usize, Event)>,
}

impl Drop for FinishGuard {
    fn drop(&mut self) {
        let _ = self.tx.send((self.id, Event::Finished));
    }
}

/// Runs `f` as every party, one thread each, with the fabric on the calling thread.
pub fn run_parties<const P: u64, T, F>(session: Session<P>, f: F) -> Result<PartiesOutcome<T>, EngineError>
where
    T: Send,
    F: Fn(&mut PartyContext<P>) -> Result<T, EngineError> + Sync,
{
    let n = session.bundle.n();
    session.adversary.validate(n).map_err(EngineError::Usage)?;
    if session.roster.n() != n || session.signing_keys.len() != n {
        return Err(EngineError::Usage(format!("roster has {} keys for {n} parties", session.roster.n())));
    }
    let Session { bundle, roster, signing_keys, adversary, config, seed } = session;
    let session_id = bundle.session_id;

    let (to_fabric, from_parties) = mpsc::channel::<(usize, Event)>();
    let mut replies = Vec::with_capacity(n);
    let mut contexts = Vec::with_capacity(n);
    for (id, (mut data, key)) in bundle.parties.into_iter().zip(signing_keys).enumerate() {
        for b in adversary.behaviors_of(id) {
            if let Behavior::CorruptTriple { index, offset } = *b {
                if let Some(t) = data.triples.get_mut(index) {
                    t.c.value_share += Fp::from_i64(offset);
                }
            }
        }
        let (reply_tx, reply_rx) = mpsc::channel::<Result<Inbox, TransportError>>();
        replies.push(reply_tx);
        let rng = ChaCha20Rng::from_seed(derive_seed(seed, "party rng", id as u64));
        contexts.push(PartyContext::new(
            id,
            n,
            session_id,
            PreprocStore::new(data),
            rng,
            config,
            LocalDeviation::from_behaviors(adversary.behaviors_of(id)),
            key,
            roster.clone(),
            PartyNet { tx: to_fabric.clone(), rx: reply_rx },
        ));
    }
    drop(to_fabric);

    let mut fabric = Fabric::new(n, P, adversary).with_timeout(config.timeout_rounds);
    let f = &f;
    let finished: Vec<(Result<T, EngineError>, PartyReport)> = thread::scope(|scope| {
        let handles: Vec<_> = contexts
            .into_iter()
            .map(|mut ctx| {
                scope.spawn(move || {
                    let _guard = FinishGuard { id: ctx.id(), tx: ctx.fabric_sender() };
                    let result = f(&mut ctx);
                    let report = PartyReport {
                        consumed: ctx.consumed(),
                        multiplications: ctx.multiplications(),
                        opened: ctx.opened_total(),
                    };
                    (result, report)
                })
            })
            .collect();
        drive(&mut fabric, &from_parties, &replies);
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    });

    let (results, reports) = finished.into_iter().unzip();
    let (transcript, stats) = fabric.into_parts();
    Ok(PartiesOutcome { results, reports, transcript, stats })
}

/// Fabric loop: gather one event per live party, exchange, reply.
fn drive(
    fabric: &mut Fabric,
    events: &mpsc::Receiver<(usize, Event)>,
    replies: &[mpsc::Sender<Result<Inbox, TransportError>>],
) {
    let n = replies.len();
    let mut active = vec![true; n];
    let mut gone: Option<usize> = None;
    while active.iter().any(|&a| a) {
        let mut pending: Vec<Option<Vec<crate::transport::OutMsg>>> = vec![None; n];
        for _ in 0..active.iter().filter(|&&a| a).count() {
            let Ok((id, ev)) = events.recv() else { return };
            match ev {
                Event::Submit(msgs) => pending[id] = Some(msgs),
                Event::Finished => {
                    active[id] = false;
                    gone.get_or_insert(id);
                }
            }
        }
        let submitters: Vec<usize> = (0..n).filter(|&i| pending[i].is_some()).collect();
        if submitters.is_empty() {
            continue;
        }
        if let Some(party) = gone {
            for &s in &submitters {
                let _ = replies[s].send(Err(TransportError::PeerGone { party }));
            }
            continue;
        }
        let subs = pending.into_iter().map(|m| Submission::Outbox(m.expect("all submitted"))).collect();
        match fabric.round_exchange(subs) {
            Ok(inboxes) => {
                for (reply, inbox) in replies.iter().zip(inboxes) {
                    let _ = reply.send(Ok(inbox));
                }
            }
            Err(e) => {
                for reply in replies {
                    let _ = reply.send(Err(e.clone()));
                }
            }
        }
    }
}
