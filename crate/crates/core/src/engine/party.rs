use std::sync::mpsc::{Receiver, Sender};

use ed25519_dalek::SigningKey;
use rand_chacha::ChaCha20Rng;

use super::commit::{commit, Commitment, Opening};
use super::mac::{combine_log, power_coefficients, seed_coefficients, LogEntry};
use super::proof::{ComputationProof, Roster};
use super::{Abort, AbortReason, EngineConfig, EngineError, OutputCheck};
use crate::field::{decode_elements, encode_elements, Fp};
use crate::preprocessing::{PreprocCounts, PreprocStore};
use crate::sharing::{AuthShare, MacKeyShare, PartyId, PublicValue};
use crate::transport::{Behavior, Inbox, MsgType, OutMsg, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Running,
    Checking,
    Done,
    Aborted,
}

pub(crate) enum Event {
    Submit(Vec<OutMsg>),
    Finished,
}

/// A party's connection to the fabric.
pub(crate) struct PartyNet {
    pub(crate) tx: Sender<(PartyId, Event)>,
    pub(crate) rx: Receiver<Result<Inbox, TransportError>>,
}

/// Deviations a corrupted party applies to its own computation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LocalDeviation {
    pub(crate) tamper_mac: Option<i64>,
    pub(crate) tamper_output: Option<(i64, Option<u64>)>,
}

impl LocalDeviation {
    pub(crate) fn from_behaviors<'a>(bs: impl Iterator<Item = &'a Behavior>) -> Self {
        let mut d = Self::default();
        for b in bs {
            match *b {
                Behavior::TamperMac { offset } => d.tamper_mac = Some(offset),
                Behavior::TamperOutput { offset, at } => d.tamper_output = Some((offset, at)),
                _ => {}
            }
        }
        d
    }
}

/// One party's protocol state. All interaction goes through the fabric.
pub struct PartyContext<const P: u64> {
    id: PartyId,
    n: usize,
    session_id: u64,
    key: MacKeyShare<P>,
    store: PreprocStore<P>,
    log: Vec<LogEntry<P>>,
    opened_total: u64,
    muls: u64,
    outputs_sent: u64,
    round: u64,
    phase: Phase,
    rng: ChaCha20Rng,
    config: EngineConfig,
    deviation: LocalDeviation,
    signing_key: SigningKey,
    roster: Roster,
    net: PartyNet,
}

fn fe_from_signed<const P: u64>(offset: i64) -> Fp<P> {
    Fp::from_i64(offset)
}

impl<const P: u64> PartyContext<P> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        id: PartyId,
        n: usize,
        session_id: u64,
        store: PreprocStore<P>,
        rng: ChaCha20Rng,
        config: EngineConfig,
        deviation: LocalDeviation,
        signing_key: SigningKey,
        roster: Roster,
        net: PartyNet,
    ) -> Self {
        Self {
            id,
            n,
            session_id,
            key: store.mac_key(),
            store,
            log: Vec::new(),
            opened_total: 0,
            muls: 0,
            outputs_sent: 0,
            round: 0,
            phase: Phase::Init,
            rng,
            config,
            deviation,
            signing_key,
            roster,
            net,
        }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn key(&self) -> &MacKeyShare<P> {
        &self.key
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn consumed(&self) -> PreprocCounts {
        self.store.consumed()
    }

    pub fn multiplications(&self) -> u64 {
        self.muls
    }

    pub fn opened_total(&self) -> u64 {
        self.opened_total
    }

    /// Openings not yet covered by a MAC check.
    pub fn unchecked(&self) -> usize {
        self.log.len()
    }

    pub(crate) fn fabric_sender(&self) -> Sender<(PartyId, Event)> {
        self.net.tx.clone()
    }

    pub fn constant(&self, c: Fp<P>) -> AuthShare<P> {
        AuthShare::constant(PublicValue::constant(c), &self.key)
    }

    pub fn add_const(&self, s: AuthShare<P>, c: Fp<P>) -> AuthShare<P> {
        s.add_public(PublicValue::constant(c), &self.key)
    }

    fn add_opened(&self, s: AuthShare<P>, c: Fp<P>) -> AuthShare<P> {
        s.add_public(PublicValue::opened(c), &self.key)
    }

    pub fn take_bits(&mut self, count: usize) -> Result<Vec<AuthShare<P>>, EngineError> {
        Ok(self.store.take_bits(count)?)
    }

    fn abort(&mut self, reason: AbortReason, blamed: Option<PartyId>) -> EngineError {
        self.phase = Phase::Aborted;
        Abort { reason, blamed, round: self.round }.into()
    }

    fn exchange(&mut self, out: Vec<OutMsg>) -> Result<Inbox, EngineError> {
        if self.phase == Phase::Init {
            self.phase = Phase::Running;
        }
        let next = self.round + 1;
        if self.net.tx.send((self.id, Event::Submit(out))).is_err() {
            self.phase = Phase::Aborted;
            return Err(Abort { reason: AbortReason::PeerFailed, blamed: None, round: next }.into());
        }
        match self.net.rx.recv() {
            Ok(Ok(inbox)) => {
                self.round = inbox.round;
                Ok(inbox)
            }
            Ok(Err(e)) => {
                self.phase = Phase::Aborted;
                Err(Abort::from_transport(&e, next).into())
            }
            Err(_) => {
                self.phase = Phase::Aborted;
                Err(Abort { reason: AbortReason::PeerFailed, blamed: None, round: next }.into())
            }
        }
    }

    fn decode_from(&mut self, sender: PartyId, bytes: &[u8], expected: usize) -> Result<Vec<Fp<P>>, EngineError> {
        match decode_elements::<P>(bytes) {
            Ok(v) if v.len() == expected => Ok(v),
            _ => Err(self.abort(AbortReason::MalformedMessage, Some(sender))),
        }
    }

    fn collect(&mut self, inbox: &Inbox, t: MsgType) -> Result<Vec<Vec<u8>>, EngineError> {
        match inbox.from_each(t, self.n) {
            Ok(v) => Ok(v.into_iter().map(<[u8]>::to_vec).collect()),
            Err(e) => {
                self.phase = Phase::Aborted;
                Err(Abort::from_transport(&e, self.round).into())
            }
        }
    }

    /// Authenticated inputs. `providers[k]` supplies input `k`; `mine` holds
    /// this party's values for its own inputs, in order.
    pub fn input_batch(&mut self, providers: &[PartyId], mine: &[Fp<P>]) -> Result<Vec<AuthShare<P>>, EngineError> {
        let own = providers.iter().filter(|&&p| p == self.id).count();
        if own != mine.len() {
            return Err(EngineError::Usage(format!(
                "party {} provides {own} inputs but was given {}",
                self.id,
                mine.len()
            )));
        }
        if let Some(&p) = providers.iter().find(|&&p| p >= self.n) {
            return Err(EngineError::Usage(format!("input provider {p} out of range")));
        }
        if providers.is_empty() {
            return Ok(vec![]);
        }
        let masks = self.store.take_masks(providers.len())?;

        // Partial opening of each mask to its provider.
        let mut per_provider: Vec<Vec<Fp<P>>> = vec![Vec::new(); self.n];
        for (k, &p) in providers.iter().enumerate() {
            per_provider[p].push(masks[k].value_share);
        }
        let out: Vec<OutMsg> = per_provider
            .iter()
            .enumerate()
            .filter(|(p, v)| *p != self.id && !v.is_empty())
            .map(|(p, v)| OutMsg::to(p, MsgType::InputShare, encode_elements(v)))
            .collect();
        let inbox = self.exchange(out)?;
        let mut r_clear = per_provider[self.id].clone();
        let (me, n) = (self.id, self.n);
        for sender in (0..n).filter(|&s| s != me && own > 0) {
            let Some(bytes) = inbox.from(sender, MsgType::InputShare) else {
                return Err(self.abort(AbortReason::MalformedMessage, Some(sender)));
            };
            let parts = self.decode_from(sender, bytes, own)?;
            r_clear.iter_mut().zip(parts).for_each(|(r, s)| *r += s);
        }

        let eps: Vec<Fp<P>> = mine.iter().zip(&r_clear).map(|(&x, &r)| x - r).collect();
        let out = if own > 0 { vec![OutMsg::broadcast(MsgType::InputEps, encode_elements(&eps))] } else { vec![] };
        let inbox = self.exchange(out)?;
        let mut counts = vec![0usize; self.n];
        providers.iter().for_each(|&p| counts[p] += 1);
        let mut eps_by: Vec<std::vec::IntoIter<Fp<P>>> = Vec::with_capacity(self.n);
        for (p, &c) in counts.iter().enumerate() {
            let v = if c == 0 {
                vec![]
            } else {
                let Some(bytes) = inbox.from(p, MsgType::InputEps) else {
                    return Err(self.abort(AbortReason::MalformedMessage, Some(p)));
                };
                self.decode_from(p, bytes, c)?
            };
            eps_by.push(v.into_iter());
        }
        Ok(providers
            .iter()
            .zip(masks)
            .map(|(&p, r)| {
                let e = eps_by[p].next().expect("count matched");
                self.add_opened(r, e)
            })
            .collect())
    }

    /// Opens several batches in one round, one message type per batch.
    /// Every opened value enters the log with this party's MAC share.
    pub fn open_many(&mut self, groups: &[(MsgType, &[AuthShare<P>])]) -> Result<Vec<Vec<Fp<P>>>, EngineError> {
        if groups.iter().all(|(_, g)| g.is_empty()) {
            return Ok(groups.iter().map(|_| vec![]).collect());
        }
        let out = groups
            .iter()
            .filter(|(_, g)| !g.is_empty())
            .map(|(t, g)| {
                let vals: Vec<Fp<P>> = g.iter().map(|s| s.value_share).collect();
                OutMsg::broadcast(*t, encode_elements(&vals))
            })
            .collect();
        let inbox = self.exchange(out)?;
        let mut opened = Vec::with_capacity(groups.len());
        for (t, g) in groups {
            if g.is_empty() {
                opened.push(vec![]);
                continue;
            }
            let payloads = self.collect(&inbox, *t)?;
            let mut sum = vec![Fp::ZERO; g.len()];
            for (sender, bytes) in payloads.iter().enumerate() {
                let parts = self.decode_from(sender, bytes, g.len())?;
                sum.iter_mut().zip(parts).for_each(|(a, b)| *a += b);
            }
            for (v, s) in sum.iter().zip(g.iter()) {
                self.log.push(LogEntry { value: *v, mac_share: s.mac_share });
            }
            self.opened_total += g.len() as u64;
            opened.push(sum);
        }
        Ok(opened)
    }

    pub fn open(&mut self, shares: &[AuthShare<P>]) -> Result<Vec<Fp<P>>, EngineError> {
        Ok(self.open_many(&[(MsgType::Open, shares)])?.pop().expect("one group"))
    }

    /// Beaver multiplication of each pair, three rounds for the whole batch.
    /// Each product uses one triple, sacrifices another against a fresh `t`.
    pub fn mul_batch(&mut self, pairs: &[(AuthShare<P>, AuthShare<P>)]) -> Result<Vec<AuthShare<P>>, EngineError> {
        let k = pairs.len();
        if k == 0 {
            return Ok(vec![]);
        }
        let triples = self.store.take_triples(2 * k)?;
        let ts = self.store.take_singles(k)?;
        let t = self.open(&ts)?;

        let mut check_open = Vec::with_capacity(2 * k);
        let mut eps_open = Vec::with_capacity(2 * k);
        for (i, (x, _)) in pairs.iter().enumerate() {
            let (used, spent) = (&triples[2 * i], &triples[2 * i + 1]);
            check_open.push(used.a * t[i] - spent.a);
            eps_open.push(*x - used.a);
        }
        for (i, (_, y)) in pairs.iter().enumerate() {
            let (used, spent) = (&triples[2 * i], &triples[2 * i + 1]);
            check_open.push(used.b - spent.b);
            eps_open.push(*y - used.b);
        }
        let opened = self.open_many(&[(MsgType::Open, &check_open), (MsgType::MulOpen, &eps_open)])?;
        let (rho, sigma) = opened[0].split_at(k);
        let (eps, delta) = opened[1].split_at(k);

        let zero_checks: Vec<AuthShare<P>> = (0..k)
            .map(|i| {
                let (used, spent) = (&triples[2 * i], &triples[2 * i + 1]);
                let lin = used.c * t[i] - spent.c - spent.a * sigma[i] - spent.b * rho[i];
                self.add_opened(lin, -(sigma[i] * rho[i]))
            })
            .collect();
        let checks = self.open(&zero_checks)?;
        if checks.iter().any(|c| !c.is_zero()) {
            return Err(self.abort(AbortReason::PreprocessingCorrupt, None));
        }

        self.muls += k as u64;
        Ok((0..k)
            .map(|i| {
                let used = &triples[2 * i];
                let z = used.c + used.b * eps[i] + used.a * delta[i];
                self.add_opened(z, eps[i] * delta[i])
            })
            .collect())
    }

    fn commit_round(&mut self, values: Vec<Vec<u8>>) -> Result<(Vec<Opening>, Vec<Vec<Commitment>>), EngineError> {
        let k = values.len();
        let mut openings = Vec::with_capacity(k);
        let mut payload = Vec::with_capacity(32 * k);
        for v in values {
            let (c, o) = commit(v, &mut self.rng);
            payload.extend_from_slice(&c.digest);
            openings.push(o);
        }
        let inbox = self.exchange(vec![OutMsg::broadcast(MsgType::Commit, payload)])?;
        let payloads = self.collect(&inbox, MsgType::Commit)?;
        let mut all = Vec::with_capacity(self.n);
        for (sender, bytes) in payloads.iter().enumerate() {
            if bytes.len() != 32 * k {
                return Err(self.abort(AbortReason::MalformedMessage, Some(sender)));
            }
            all.push(
                bytes
                    .chunks_exact(32)
                    .map(|c| Commitment { digest: c.try_into().expect("32 bytes") })
                    .collect(),
            );
        }
        Ok((openings, all))
    }

    /// Publishes the openings of items `which` and checks everyone's against
    /// their commitments. Returns revealed values as `[party][item]`.
    fn reveal_round(
        &mut self,
        openings: &[Opening],
        commitments: &[Vec<Commitment>],
        which: &[usize],
    ) -> Result<Vec<Vec<Vec<u8>>>, EngineError> {
        let mut payload = Vec::new();
        for &w in which {
            openings[w].encode_into(&mut payload);
        }
        let inbox = self.exchange(vec![OutMsg::broadcast(MsgType::Reveal, payload)])?;
        let payloads = self.collect(&inbox, MsgType::Reveal)?;
        let mut all = Vec::with_capacity(self.n);
        for (sender, bytes) in payloads.iter().enumerate() {
            let mut rest = &bytes[..];
            let mut vals = Vec::with_capacity(which.len());
            for &w in which {
                let Some((o, tail)) = Opening::decode_from(rest) else {
                    return Err(self.abort(AbortReason::MalformedMessage, Some(sender)));
                };
                if !o.matches(&commitments[sender][w]) {
                    return Err(self.abort(AbortReason::BadCommitment, Some(sender)));
                }
                vals.push(o.value);
                rest = tail;
            }
            if !rest.is_empty() {
                return Err(self.abort(AbortReason::MalformedMessage, Some(sender)));
            }
            all.push(vals);
        }
        Ok(all)
    }

    fn decode_revealed(&mut self, revealed: &[Vec<Vec<u8>>], item: usize, len: usize) -> Result<Vec<Vec<Fp<P>>>, EngineError> {
        revealed
            .iter()
            .enumerate()
            .map(|(sender, items)| self.decode_from(sender, &items[item], len))
            .collect()
    }

    /// Commit-then-open of sigma; passes iff the broadcast values sum to zero.
    fn sigma_round(&mut self, sigma: Fp<P>) -> Result<(Vec<Fp<P>>, Vec<Commitment>), EngineError> {
        let sigma = match self.deviation.tamper_mac {
            Some(off) => sigma + fe_from_signed(off),
            None => sigma,
        };
        let (openings, commitments) = self.commit_round(vec![encode_elements(&[sigma])])?;
        let revealed = self.reveal_round(&openings, &commitments, &[0])?;
        let sigmas: Vec<Fp<P>> = self.decode_revealed(&revealed, 0, 1)?.into_iter().map(|v| v[0]).collect();
        if !sigmas.iter().copied().sum::<Fp<P>>().is_zero() {
            return Err(self.abort(AbortReason::MacCheckFailed, None));
        }
        Ok((sigmas, commitments.into_iter().map(|c| c[0]).collect()))
    }

    /// MAC check over all unchecked openings with hash-expanded coefficients
    /// from a jointly committed seed. Four rounds; a no-op on an empty log.
    pub fn mac_check(&mut self) -> Result<(), EngineError> {
        if self.log.is_empty() {
            return Ok(());
        }
        self.phase = Phase::Checking;
        let s_i = Fp::<P>::random(&mut self.rng);
        let (openings, commitments) = self.commit_round(vec![encode_elements(&[s_i])])?;
        let revealed = self.reveal_round(&openings, &commitments, &[0])?;
        let seed: Fp<P> = self.decode_revealed(&revealed, 0, 1)?.into_iter().map(|v| v[0]).sum();
        let coeffs = seed_coefficients(seed, self.log.len());
        let (_, _, sigma) = combine_log(&self.log, &coeffs, self.key.alpha);
        self.sigma_round(sigma)?;
        self.log.clear();
        self.phase = Phase::Running;
        Ok(())
    }

    /// Runs [`Self::mac_check`] if the configured interval has been reached.
    pub fn maybe_periodic_check(&mut self) -> Result<(), EngineError> {
        match self.config.mac_check_interval {
            Some(k) if self.log.len() >= k.max(1) => self.mac_check(),
            _ => Ok(()),
        }
    }

    fn output_value_shares(&mut self, ys: &[AuthShare<P>]) -> Vec<Fp<P>> {
        let base = self.outputs_sent;
        self.outputs_sent += ys.len() as u64;
        ys.iter()
            .enumerate()
            .map(|(k, y)| match self.deviation.tamper_output {
                Some((off, at)) if at.is_none_or(|a| a == base + k as u64) => y.value_share + fe_from_signed(off),
                _ => y.value_share,
            })
            .collect()
    }

    /// Reveals `ys` only if the MAC check over every opening and the outputs
    /// passes, then collects all parties' signatures into a proof.
    pub fn output(&mut self, ys: &[AuthShare<P>]) -> Result<(Vec<Fp<P>>, ComputationProof<P>), EngineError> {
        self.phase = Phase::Checking;
        let e_share = self.store.take_singles(1)?[0].value_share;
        let y_vals = self.output_value_shares(ys);
        let y_macs: Vec<Fp<P>> = ys.iter().map(|y| y.mac_share).collect();
        let m = ys.len();

        let mut items = vec![encode_elements(&y_vals), encode_elements(&[e_share])];
        if self.config.output_check == OutputCheck::OpenAlpha {
            items.push(encode_elements(&y_macs));
            items.push(encode_elements(&[self.key.alpha]));
        }
        let (openings, commitments) = self.commit_round(items)?;

        let (results, e) = match self.config.output_check {
            OutputCheck::SigmaSum => {
                let revealed = self.reveal_round(&openings, &commitments, &[0, 1])?;
                let ys_all = self.decode_revealed(&revealed, 0, m)?;
                let e: Fp<P> = self.decode_revealed(&revealed, 1, 1)?.into_iter().map(|v| v[0]).sum();
                let results: Vec<Fp<P>> = (0..m).map(|k| ys_all.iter().map(|v| v[k]).sum()).collect();
                for (v, mac) in results.iter().zip(&y_macs) {
                    self.log.push(LogEntry { value: *v, mac_share: *mac });
                }
                (Some(results), e)
            }
            OutputCheck::OpenAlpha => {
                let revealed = self.reveal_round(&openings, &commitments, &[1])?;
                let e: Fp<P> = self.decode_revealed(&revealed, 0, 1)?.into_iter().map(|v| v[0]).sum();
                (None, e)
            }
        };

        let coeffs = power_coefficients(e, self.log.len());
        let (_, _, sigma) = combine_log(&self.log, &coeffs, self.key.alpha);
        let (sigmas, sigma_commitments) = self.sigma_round(sigma)?;
        self.log.clear();

        self.opened_total += m as u64;
        let results = match results {
            Some(r) => r,
            None => {
                let revealed = self.reveal_round(&openings, &commitments, &[0, 2, 3])?;
                let ys_all = self.decode_revealed(&revealed, 0, m)?;
                let gammas = self.decode_revealed(&revealed, 1, m)?;
                let alpha: Fp<P> = self.decode_revealed(&revealed, 2, 1)?.into_iter().map(|v| v[0]).sum();
                let results: Vec<Fp<P>> = (0..m).map(|k| ys_all.iter().map(|v| v[k]).sum()).collect();
                for (k, y) in results.iter().enumerate() {
                    let gamma: Fp<P> = gammas.iter().map(|g| g[k]).sum();
                    if alpha * *y != gamma {
                        return Err(self.abort(AbortReason::MacCheckFailed, None));
                    }
                }
                results
            }
        };

        let my_sig = ComputationProof::sign(&self.signing_key, self.session_id, &results, self.id, sigmas[self.id]);
        let inbox = self.exchange(vec![OutMsg::broadcast(MsgType::Sign, my_sig.to_vec())])?;
        let payloads = self.collect(&inbox, MsgType::Sign)?;
        let mut signatures = Vec::with_capacity(self.n);
        for (sender, bytes) in payloads.iter().enumerate() {
            let Ok(sig) = <[u8; 64]>::try_from(&bytes[..]) else {
                return Err(self.abort(AbortReason::MalformedMessage, Some(sender)));
            };
            signatures.push(sig);
        }
        let proof = ComputationProof {
            session_id: self.session_id,
            results: results.clone(),
            sigmas,
            digests: sigma_commitments.iter().map(|c| c.digest).collect(),
            signatures,
        };
        for p in 0..self.n {
            let valid = self.roster.key(p).is_some_and(|k| proof.signature_valid(p, k));
            if !valid {
                return Err(self.abort(AbortReason::BadSignature, Some(p)));
            }
        }
        self.phase = Phase::Done;
        Ok((results, proof))
    }
}
