use std::collections::BTreeMap;

use ed25519_dalek::{Signature, Signer, SigningKey};
use sha3::{Digest, Sha3_256};
use thiserror::Error;

use crate::engine::Roster;
use crate::field::Fp;
use crate::sharing::PartyId;

/// A party's signed MAC-check value for one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacRecord<const P: u64> {
    pub session_id: u64,
    pub party: PartyId,
    pub sigma: Fp<P>,
    pub signature: [u8; 64],
}

impl<const P: u64> MacRecord<P> {
    fn message(session_id: u64, party: PartyId, sigma: Fp<P>) -> Vec<u8> {
        let mut m = b"mac record".to_vec();
        m.extend_from_slice(&P.to_le_bytes());
        m.extend_from_slice(&session_id.to_le_bytes());
        m.extend_from_slice(&(party as u64).to_le_bytes());
        m.extend_from_slice(&sigma.to_le_bytes());
        m
    }

    pub fn signed(key: &SigningKey, session_id: u64, party: PartyId, sigma: Fp<P>) -> Self {
        let signature = key.sign(&Self::message(session_id, party, sigma)).to_bytes();
        Self { session_id, party, sigma, signature }
    }

    pub fn signature_valid(&self, roster: &Roster) -> bool {
        roster.key(self.party).is_some_and(|k| {
            let msg = Self::message(self.session_id, self.party, self.sigma);
            k.verify_strict(&msg, &Signature::from_bytes(&self.signature)).is_ok()
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(88);
        b.extend_from_slice(&self.session_id.to_le_bytes());
        b.extend_from_slice(&(self.party as u64).to_le_bytes());
        b.extend_from_slice(&self.sigma.to_le_bytes());
        b.extend_from_slice(&self.signature);
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        if b.len() != 88 {
            return None;
        }
        let u = |r: std::ops::Range<usize>| u64::from_le_bytes(b[r].try_into().expect("8 bytes"));
        let sigma = Fp::from_le_bytes(b[16..24].try_into().expect("8 bytes")).ok()?;
        Some(Self {
            session_id: u(0..8),
            party: u(8..16) as PartyId,
            sigma,
            signature: b[24..88].try_into().expect("64 bytes"),
        })
    }

    /// Content address: SHA3-256 of the encoded record.
    pub fn key(&self) -> [u8; 32] {
        Sha3_256::digest(self.to_bytes()).into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("no record under that key")]
    Absent,
    #[error("forged-record")]
    Forged,
    #[error("stored bytes do not hash to their key")]
    ContentMismatch,
}

/// Content-addressed store standing in for the DHT. Entries are kept as
/// raw bytes so a misbehaving storage node can be simulated.
#[derive(Debug, Clone, Default)]
pub struct MacStore {
    entries: BTreeMap<[u8; 32], Vec<u8>>,
}

impl MacStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores a record signed by its party's roster key. Storing the same
    /// record twice is a no-op.
    pub fn put<const P: u64>(&mut self, record: &MacRecord<P>, roster: &Roster) -> Result<[u8; 32], StoreError> {
        if !record.signature_valid(roster) {
            return Err(StoreError::Forged);
        }
        let key = record.key();
        self.entries.entry(key).or_insert_with(|| record.to_bytes());
        Ok(key)
    }

    /// Overwrites raw bytes under a key, as a dishonest storage node could.
    pub fn put_raw(&mut self, key: [u8; 32], bytes: Vec<u8>) {
        self.entries.insert(key, bytes);
    }

    pub fn fetch<const P: u64>(&self, key: &[u8; 32], roster: &Roster) -> Result<MacRecord<P>, StoreError> {
        let bytes = self.entries.get(key).ok_or(StoreError::Absent)?;
        let digest: [u8; 32] = Sha3_256::digest(bytes).into();
        if &digest != key {
            return Err(StoreError::ContentMismatch);
        }
        let record = MacRecord::from_bytes(bytes).ok_or(StoreError::ContentMismatch)?;
        if !record.signature_valid(roster) {
            return Err(StoreError::Forged);
        }
        Ok(record)
    }
}
