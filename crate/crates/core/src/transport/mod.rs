//! Deterministic synchronous message fabric.
//!
//! Parties submit one outbox per round; the fabric applies adversary
//! transforms to corrupted senders, sorts deliveries, records them in a
//! hash-chained transcript and hands each party its inbox.

mod adversary;
mod transcript;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::sharing::PartyId;

pub use adversary::{AdversaryParseError, AdversarySpec, Behavior};
pub use transcript::{Transcript, TranscriptEntry, TranscriptError, GENESIS_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MsgType {
    /// Mask share sent privately to an input provider.
    InputShare,
    /// Masked input `x - r` broadcast by its provider.
    InputEps,
    /// Openings inside the sacrifice step and gadget openings.
    Open,
    /// `epsilon` and `delta` openings of a multiplication.
    MulOpen,
    Commit,
    Reveal,
    Sign,
}

impl MsgType {
    pub const ALL: [MsgType; 7] = [
        MsgType::InputShare,
        MsgType::InputEps,
        MsgType::Open,
        MsgType::MulOpen,
        MsgType::Commit,
        MsgType::Reveal,
        MsgType::Sign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgType::InputShare => "input-share",
            MsgType::InputEps => "input-eps",
            MsgType::Open => "open",
            MsgType::MulOpen => "mul-open",
            MsgType::Commit => "commit",
            MsgType::Reveal => "reveal",
            MsgType::Sign => "sign",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MsgType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        MsgType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown message type {s:?}"))
    }
}

/// Destination of a message. Broadcast sorts after every point-to-point receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Receiver {
    To(PartyId),
    Broadcast,
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Receiver::To(p) => write!(f, "{p}"),
            Receiver::Broadcast => f.write_str("*"),
        }
    }
}

impl FromStr for Receiver {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "*" {
            return Ok(Receiver::Broadcast);
        }
        s.parse().map(Receiver::To).map_err(|_| format!("bad receiver {s:?}"))
    }
}

/// A message as submitted by its sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutMsg {
    pub receiver: Receiver,
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl OutMsg {
    pub fn broadcast(msg_type: MsgType, payload: Vec<u8>) -> Self {
        Self { receiver: Receiver::Broadcast, msg_type, payload }
    }

    pub fn to(party: PartyId, msg_type: MsgType, payload: Vec<u8>) -> Self {
        Self { receiver: Receiver::To(party), msg_type, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub round: u64,
    pub sender: PartyId,
    pub receiver: Receiver,
    pub msg_type: MsgType,
    pub payload: Arc<[u8]>,
}

impl Envelope {
    fn sort_key(&self) -> (u64, PartyId, Receiver, MsgType) {
        (self.round, self.sender, self.receiver, self.msg_type)
    }
}

/// Everything delivered to one party in one round, in schedule order.
#[derive(Debug, Clone, Default)]
pub struct Inbox {
    pub round: u64,
    pub envelopes: Vec<Envelope>,
}

impl Inbox {
    /// First message of the given type from `sender`.
    pub fn from(&self, sender: PartyId, msg_type: MsgType) -> Option<&[u8]> {
        self.envelopes
            .iter()
            .find(|e| e.sender == sender && e.msg_type == msg_type)
            .map(|e| &e.payload[..])
    }

    /// One payload of `msg_type` from each of the `n` parties, indexed by sender.
    pub fn from_each(&self, msg_type: MsgType, n: usize) -> Result<Vec<&[u8]>, TransportError> {
        (0..n)
            .map(|s| {
                self.from(s, msg_type).ok_or(TransportError::MissingMessage {
                    sender: s,
                    msg_type,
                    round: self.round,
                })
            })
            .collect()
    }
}

/// What a party hands the fabric for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Submission {
    Outbox(Vec<OutMsg>),
    Silent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("timeout: party {party} silent, surfaced at round {round}")]
    Timeout { party: PartyId, round: u64 },
    #[error("round {round}: no {msg_type} message from party {sender}")]
    MissingMessage { sender: PartyId, msg_type: MsgType, round: u64 },
    #[error("party {sender} addressed unknown receiver {receiver}")]
    BadReceiver { sender: PartyId, receiver: PartyId },
    #[error("expected {expected} submissions, got {got}")]
    WrongSubmissionCount { expected: usize, got: usize },
    #[error("party {party} left the session")]
    PeerGone { party: PartyId },
}

/// Message and element counters. An element is one 8-byte field element.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub rounds: u64,
    pub messages: u64,
    pub bytes: u64,
    /// Field elements placed on the wire, summed over senders, by type.
    pub elements_sent: BTreeMap<MsgType, u64>,
    /// Field elements received by parties other than the sender, by type.
    pub element_deliveries: BTreeMap<MsgType, u64>,
}

impl TransportStats {
    pub fn sent(&self, t: MsgType) -> u64 {
        self.elements_sent.get(&t).copied().unwrap_or(0)
    }

    pub fn delivered(&self, t: MsgType) -> u64 {
        self.element_deliveries.get(&t).copied().unwrap_or(0)
    }
}

/// Analytic count of `epsilon`/`delta` share deliveries for `muls`
/// multiplications among `n` parties: two openings each, every party
/// sending its share to the `n-1` others.
pub fn mul_open_deliveries(muls: u64, n: u64) -> u64 {
    2 * muls * n * (n - 1)
}

pub const DEFAULT_TIMEOUT_ROUNDS: u64 = 1;

pub struct Fabric {
    n: usize,
    modulus: u64,
    timeout_rounds: u64,
    adversary: AdversarySpec,
    round: u64,
    transcript: Transcript,
    stats: TransportStats,
    /// Per sender, count of open/mul-open elements already sent.
    open_counter: Vec<u64>,
    eps_counter: Vec<u64>,
}

impl Fabric {
    pub fn new(n: usize, modulus: u64, adversary: AdversarySpec) -> Self {
        Self {
            n,
            modulus,
            timeout_rounds: DEFAULT_TIMEOUT_ROUNDS,
            adversary,
            round: 0,
            transcript: Transcript::new(),
            stats: TransportStats::default(),
            open_counter: vec![0; n],
            eps_counter: vec![0; n],
        }
    }

    pub fn with_timeout(mut self, rounds: u64) -> Self {
        self.timeout_rounds = rounds.max(1);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of the last completed round. Rounds are numbered from 1.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn stats(&self) -> &TransportStats {
        &self.stats
    }

    pub fn into_parts(self) -> (Transcript, TransportStats) {
        (self.transcript, self.stats)
    }

    pub fn round_exchange(&mut self, submissions: Vec<Submission>) -> Result<Vec<Inbox>, TransportError> {
        if submissions.len() != self.n {
            return Err(TransportError::WrongSubmissionCount { expected: self.n, got: submissions.len() });
        }
        let round = self.round + 1;
        let silent = submissions.iter().enumerate().find_map(|(party, s)| {
            let aborting = self.adversary.abort_round(party).is_some_and(|k| round >= k);
            (aborting || *s == Submission::Silent).then_some(party)
        });
        if let Some(party) = silent {
            return Err(TransportError::Timeout { party, round: round + self.timeout_rounds - 1 });
        }
        self.round = round;

        let mut envelopes = Vec::new();
        for (sender, sub) in submissions.into_iter().enumerate() {
            let Submission::Outbox(msgs) = sub else { unreachable!() };
            for mut msg in msgs {
                if let Receiver::To(r) = msg.receiver {
                    if r >= self.n {
                        return Err(TransportError::BadReceiver { sender, receiver: r });
                    }
                }
                self.apply_adversary(sender, &mut msg);
                envelopes.push(Envelope {
                    round,
                    sender,
                    receiver: msg.receiver,
                    msg_type: msg.msg_type,
                    payload: msg.payload.into(),
                });
            }
        }
        envelopes.sort_by_key(Envelope::sort_key);

        let mut inboxes: Vec<Inbox> = (0..self.n).map(|_| Inbox { round, envelopes: vec![] }).collect();
        self.stats.rounds += 1;
        for env in envelopes {
            let elems = (env.payload.len() / 8) as u64;
            self.stats.messages += 1;
            self.stats.bytes += env.payload.len() as u64;
            *self.stats.elements_sent.entry(env.msg_type).or_default() += elems;
            let others = match env.receiver {
                Receiver::Broadcast => self.n as u64 - 1,
                Receiver::To(r) if r == env.sender => 0,
                Receiver::To(_) => 1,
            };
            *self.stats.element_deliveries.entry(env.msg_type).or_default() += elems * others;
            self.transcript.record(env.clone());
            match env.receiver {
                Receiver::Broadcast => inboxes.iter_mut().for_each(|ib| ib.envelopes.push(env.clone())),
                Receiver::To(r) => inboxes[r].envelopes.push(env),
            }
        }
        Ok(inboxes)
    }

    fn apply_adversary(&mut self, sender: PartyId, msg: &mut OutMsg) {
        let counted = matches!(msg.msg_type, MsgType::Open | MsgType::MulOpen);
        if !counted {
            return;
        }
        let elems = msg.payload.len() / 8;
        let open_base = self.open_counter[sender];
        self.open_counter[sender] += elems as u64;
        let eps_base = self.eps_counter[sender];
        if msg.msg_type == MsgType::MulOpen {
            self.eps_counter[sender] += elems as u64;
        }
        for behavior in self.adversary.behaviors_of(sender) {
            let (offset, at, base) = match *behavior {
                Behavior::TamperOpen { offset, at } => (offset, at, open_base),
                Behavior::WrongEpsilon { offset, at } if msg.msg_type == MsgType::MulOpen => (offset, at, eps_base),
                _ => continue,
            };
            for i in 0..elems {
                if at.is_none_or(|a| a == base + i as u64) {
                    perturb(&mut msg.payload[i * 8..i * 8 + 8], offset, self.modulus);
                }
            }
        }
    }
}

/// Adds a signed offset to the little-endian field element in `slot`.
fn perturb(slot: &mut [u8], offset: i64, modulus: u64) {
    let v = u64::from_le_bytes(slot.try_into().expect("8-byte slot")) as i128;
    let m = modulus as i128;
    let w = (v + offset as i128).rem_euclid(m) as u64;
    slot.copy_from_slice(&w.to_le_bytes());
}
