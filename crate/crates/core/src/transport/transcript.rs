use std::fmt::Write as _;
use std::sync::Arc;

use sha3::{Digest, Sha3_256};
use thiserror::Error;

use super::{Envelope, MsgType, Receiver};

pub const GENESIS_LABEL: &[u8] = b"mpc transcript genesis";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("hash chain broken at entry {0}")]
    BrokenChain(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub envelope: Envelope,
    pub prev_hash: [u8; 32],
    pub hash: [u8; 32],
}

/// Append-only log where every entry commits to its predecessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Default for Transcript {
    fn default() -> Self {
        Self::new()
    }
}

fn entry_hash(prev: &[u8; 32], env: &Envelope) -> [u8; 32] {
    let receiver = match env.receiver {
        Receiver::To(r) => r as u64,
        Receiver::Broadcast => u64::MAX,
    };
    let mut h = Sha3_256::new();
    h.update(prev);
    h.update(env.round.to_le_bytes());
    h.update((env.sender as u64).to_le_bytes());
    h.update(receiver.to_le_bytes());
    h.update([env.msg_type as u8]);
    h.update((env.payload.len() as u64).to_le_bytes());
    h.update(&env.payload);
    h.finalize().into()
}

impl Transcript {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn genesis_hash() -> [u8; 32] {
        Sha3_256::digest(GENESIS_LABEL).into()
    }

    /// Hash of the last entry, or the genesis hash when empty.
    pub fn head(&self) -> [u8; 32] {
        self.entries.last().map_or_else(Self::genesis_hash, |e| e.hash)
    }

    pub fn head_hex(&self) -> String {
        hex::encode(self.head())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn record(&mut self, envelope: Envelope) -> &TranscriptEntry {
        let prev_hash = self.head();
        let hash = entry_hash(&prev_hash, &envelope);
        self.entries.push(TranscriptEntry { envelope, prev_hash, hash });
        self.entries.last().expect("just pushed")
    }

    /// Recomputes every link and reports the first entry that does not match.
    pub fn verify_chain(&self) -> Result<(), TranscriptError> {
        let mut prev = Self::genesis_hash();
        for (i, e) in self.entries.iter().enumerate() {
            if e.prev_hash != prev || entry_hash(&prev, &e.envelope) != e.hash {
                return Err(TranscriptError::BrokenChain(i));
            }
            prev = e.hash;
        }
        Ok(())
    }

    /// One line per entry: `round <k> <sender> <receiver|*> <msg-type> <hex-payload>`.
    /// An empty payload is written as `-`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let env = &e.envelope;
            let payload = if env.payload.is_empty() { "-".to_string() } else { hex::encode(&env.payload) };
            writeln!(out, "round {} {} {} {} {}", env.round, env.sender, env.receiver, env.msg_type, payload)
                .expect("write to String");
        }
        out
    }

    /// Parses the text form and rebuilds the hash chain from genesis.
    pub fn from_text(text: &str) -> Result<Self, TranscriptError> {
        let mut t = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| TranscriptError::Parse { line: line_no, reason };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 || f[0] != "round" {
                return Err(err(format!("expected 6 fields starting with 'round', got {line:?}")));
            }
            let round = f[1].parse().map_err(|_| err(format!("bad round {:?}", f[1])))?;
            let sender = f[2].parse().map_err(|_| err(format!("bad sender {:?}", f[2])))?;
            let receiver: Receiver = f[3].parse().map_err(err)?;
            let msg_type: MsgType = f[4].parse().map_err(err)?;
            let payload = if f[5] == "-" {
                Vec::new()
            } else {
                hex::decode(f[5]).map_err(|e| err(format!("bad payload hex: {e}")))?
            };
            t.record(Envelope { round, sender, receiver, msg_type, payload: Arc::from(payload) });
        }
        Ok(t)
    }
}
