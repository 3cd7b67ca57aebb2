use std::fmt::Write as _;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use sha3::{Digest, Sha3_256};
use thiserror::Error;

use crate::field::Fp;
use crate::sharing::PartyId;

/// Registered verification keys, one per party, indexed by party id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    keys: Vec<VerifyingKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("roster line {line}: {reason}")]
pub struct RosterParseError {
    pub line: usize,
    pub reason: String,
}

impl Roster {
    pub fn new(keys: Vec<VerifyingKey>) -> Self {
        Self { keys }
    }

    /// Deterministic keypairs derived from `seed`.
    pub fn generate(n: usize, seed: u64) -> (Self, Vec<SigningKey>) {
        let signing: Vec<SigningKey> = (0..n)
            .map(|i| {
                let mut h = Sha3_256::new();
                h.update(b"roster signing key");
                h.update(seed.to_le_bytes());
                h.update((i as u64).to_le_bytes());
                SigningKey::from_bytes(&h.finalize().into())
            })
            .collect();
        let roster = Self { keys: signing.iter().map(|k| k.verifying_key()).collect() };
        (roster, signing)
    }

    pub fn n(&self) -> usize {
        self.keys.len()
    }

    pub fn key(&self, party: PartyId) -> Option<&VerifyingKey> {
        self.keys.get(party)
    }

    /// `party <id> <hex public key>` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, k) in self.keys.iter().enumerate() {
            writeln!(out, "party {i} {}", hex::encode(k.as_bytes())).expect("write to String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RosterParseError> {
        let mut keys = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |reason: String| RosterParseError { line: i + 1, reason };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 || f[0] != "party" {
                return Err(err("expected 'party <id> <hex key>'".into()));
            }
            let id: usize = f[1].parse().map_err(|_| err(format!("bad party id {:?}", f[1])))?;
            if id != keys.len() {
                return Err(err(format!("party ids must be consecutive from 0, got {id}")));
            }
            let bytes: [u8; 32] = hex::decode(f[2])
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| err("key must be 32 hex-encoded bytes".into()))?;
            keys.push(VerifyingKey::from_bytes(&bytes).map_err(|e| err(format!("invalid key: {e}")))?);
        }
        Ok(Self { keys })
    }
}

/// Session result with per-party MAC-check values and signatures over them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationProof<const P: u64> {
    pub session_id: u64,
    pub results: Vec<Fp<P>>,
    pub sigmas: Vec<Fp<P>>,
    /// Each party's commitment to its sigma.
    pub digests: Vec<[u8; 32]>,
    pub signatures: Vec<[u8; 64]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("proof line {line}: {reason}")]
pub struct ProofParseError {
    pub line: usize,
    pub reason: String,
}

impl<const P: u64> ComputationProof<P> {
    pub fn n(&self) -> usize {
        self.sigmas.len()
    }

    /// Bytes signed by `party`: session id, results and that party's sigma.
    pub fn signing_message(session_id: u64, results: &[Fp<P>], party: PartyId, sigma: Fp<P>) -> Vec<u8> {
        let mut m = Vec::with_capacity(40 + 8 * results.len());
        m.extend_from_slice(b"computation proof");
        m.extend_from_slice(&P.to_le_bytes());
        m.extend_from_slice(&session_id.to_le_bytes());
        m.extend_from_slice(&(party as u64).to_le_bytes());
        m.extend_from_slice(&(results.len() as u64).to_le_bytes());
        for r in results {
            m.extend_from_slice(&r.to_le_bytes());
        }
        m.extend_from_slice(&sigma.to_le_bytes());
        m
    }

    pub fn sign(key: &SigningKey, session_id: u64, results: &[Fp<P>], party: PartyId, sigma: Fp<P>) -> [u8; 64] {
        key.sign(&Self::signing_message(session_id, results, party, sigma)).to_bytes()
    }

    pub fn signature_valid(&self, party: PartyId, key: &VerifyingKey) -> bool {
        let msg = Self::signing_message(self.session_id, &self.results, party, self.sigmas[party]);
        key.verify_strict(&msg, &Signature::from_bytes(&self.signatures[party])).is_ok()
    }

    pub fn sigma_sum(&self) -> Fp<P> {
        self.sigmas.iter().sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut w = |s: String| out.push_str(&s);
        w(format!("session {}\n", self.session_id));
        w(format!("modulus {P}\n"));
        for r in &self.results {
            w(format!("result {r}\n"));
        }
        for i in 0..self.n() {
            w(format!(
                "party {i} sigma {} digest {} signature {}\n",
                self.sigmas[i],
                hex::encode(self.digests[i]),
                hex::encode(self.signatures[i])
            ));
        }
        out
    }

    /// Reads just the modulus line so callers can pick the field.
    pub fn peek_modulus(text: &str) -> Option<u64> {
        text.lines()
            .find_map(|l| l.trim().strip_prefix("modulus "))
            .and_then(|v| v.trim().parse().ok())
    }

    pub fn from_text(text: &str) -> Result<Self, ProofParseError> {
        let mut session_id = None;
        let mut results = Vec::new();
        let (mut sigmas, mut digests, mut signatures) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in text.lines().enumerate() {
            let err = |reason: String| ProofParseError { line: i + 1, reason };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            match f[0] {
                "session" if f.len() == 2 => {
                    session_id = Some(f[1].parse().map_err(|_| err("bad session id".into()))?);
                }
                "modulus" if f.len() == 2 => {
                    let m: u64 = f[1].parse().map_err(|_| err("bad modulus".into()))?;
                    if m != P {
                        return Err(err(format!("proof modulus {m} does not match {P}")));
                    }
                }
                "result" if f.len() == 2 => {
                    results.push(f[1].parse().map_err(|e| err(format!("bad result: {e}")))?);
                }
                "party" if f.len() == 8 && f[2] == "sigma" && f[4] == "digest" && f[6] == "signature" => {
                    let id: usize = f[1].parse().map_err(|_| err("bad party id".into()))?;
                    if id != sigmas.len() {
                        return Err(err(format!("party ids must be consecutive from 0, got {id}")));
                    }
                    sigmas.push(f[3].parse().map_err(|e| err(format!("bad sigma: {e}")))?);
                    digests.push(
                        hex::decode(f[5])
                            .ok()
                            .and_then(|b| b.try_into().ok())
                            .ok_or_else(|| err("digest must be 32 hex bytes".into()))?,
                    );
                    signatures.push(
                        hex::decode(f[7])
                            .ok()
                            .and_then(|b| b.try_into().ok())
                            .ok_or_else(|| err("signature must be 64 hex bytes".into()))?,
                    );
                }
                _ => return Err(err(format!("unrecognized line {line:?}"))),
            }
        }
        let session_id = session_id.ok_or(ProofParseError { line: 0, reason: "missing session line".into() })?;
        Ok(Self { session_id, results, sigmas, digests, signatures })
    }
}
