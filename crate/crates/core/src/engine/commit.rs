use rand::Rng;
use sha3::{Digest, Sha3_256};

pub const NONCE_LEN: usize = 16;

/// `SHA3-256(value || nonce)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Commitment {
    pub digest: [u8; 32],
}

/// The private half of a commitment, published at reveal time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opening {
    pub value: Vec<u8>,
    pub nonce: [u8; NONCE_LEN],
}

impl Opening {
    pub fn commitment(&self) -> Commitment {
        let mut h = Sha3_256::new();
        h.update(&self.value);
        h.update(self.nonce);
        Commitment { digest: h.finalize().into() }
    }

    pub fn matches(&self, c: &Commitment) -> bool {
        self.commitment() == *c
    }

    /// `u32 length || value || nonce`.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.value.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.value);
        out.extend_from_slice(&self.nonce);
    }

    /// Reads one encoded opening from the front of `bytes`, returning the rest.
    pub fn decode_from(bytes: &[u8]) -> Option<(Self, &[u8])> {
        let len = u32::from_le_bytes(bytes.get(..4)?.try_into().ok()?) as usize;
        let rest = &bytes[4..];
        let value = rest.get(..len)?.to_vec();
        let nonce: [u8; NONCE_LEN] = rest.get(len..len + NONCE_LEN)?.try_into().ok()?;
        Some((Opening { value, nonce }, &rest[len + NONCE_LEN..]))
    }
}

pub fn commit<R: Rng + ?Sized>(value: Vec<u8>, rng: &mut R) -> (Commitment, Opening) {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill(&mut nonce);
    let opening = Opening { value, nonce };
    (opening.commitment(), opening)
}
