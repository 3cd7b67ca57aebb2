//! Mock contract layer: proof verification, staking arithmetic, task
//! accounting, collusion odds, the additive backing system and a
//! content-addressed store for signed MAC records.

mod ledger;
mod store;

use thiserror::Error;

use crate::engine::{ComputationProof, Roster};
use crate::sharing::PartyId;

pub use ledger::{Account, DatasetId, Event, Ledger, LedgerError, Outcome, Task, TaskId, TaskState};
pub use store::{MacRecord, MacStore, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("proof has {proof} parties, roster has {roster}")]
    PartyCount { proof: usize, roster: usize },
    #[error("mac-sum-nonzero")]
    MacSumNonzero,
    #[error("bad-signature from party {0}")]
    BadSignature(PartyId),
}

impl Rejection {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rejection::PartyCount { .. } => "party-count",
            Rejection::MacSumNonzero => "mac-sum-nonzero",
            Rejection::BadSignature(_) => "bad-signature",
        }
    }
}

/// Accepts iff the sigmas sum to zero and every party's signature verifies.
/// The work is n field additions and n signature checks whatever the circuit.
pub fn verify_proof<const P: u64>(proof: &ComputationProof<P>, roster: &Roster) -> Result<(), Rejection> {
    let n = proof.sigmas.len();
    if n != roster.n() || proof.signatures.len() != n || proof.digests.len() != n {
        return Err(Rejection::PartyCount { proof: n, roster: roster.n() });
    }
    if !proof.sigma_sum().is_zero() {
        return Err(Rejection::MacSumNonzero);
    }
    for p in 0..n {
        let key = roster.key(p).expect("length checked");
        if !proof.signature_valid(p, key) {
            return Err(Rejection::BadSignature(p));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("stake inputs must be non-negative")]
pub struct NegativeStake;

/// `max(computation_stake, intel_value_stake) * multiplier`.
pub fn stake_required(computation_stake: i64, intel_value_stake: i64, multiplier: i64) -> Result<u64, NegativeStake> {
    if computation_stake < 0 || intel_value_stake < 0 || multiplier < 0 {
        return Err(NegativeStake);
    }
    Ok(computation_stake.max(intel_value_stake) as u64 * multiplier as u64)
}

/// Resources the other `n - 1` parties risk if one party aborts.
pub fn computation_stake(resource_estimate: u64, n: usize) -> u64 {
    resource_estimate * (n as u64).saturating_sub(1)
}

/// Smallest deposit meeting the stake formula and strictly exceeding the
/// abort bound `resource_estimate * (n - 1)`.
pub fn min_deposit(resource_estimate: u64, n: usize, intel_value_stake: u64, multiplier: u64) -> u64 {
    let cs = computation_stake(resource_estimate, n);
    (cs.max(intel_value_stake) * multiplier).max(cs + 1)
}

/// Chance that all `quorum` members drawn from a large pool belong to a
/// coalition holding `fraction` of the nodes.
pub fn coordinated_chance(fraction: f64, quorum: u32) -> f64 {
    fraction.powi(quorum as i32)
}

pub const TABLE_FRACTIONS: [f64; 8] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99];

/// `(coalition %, quorum, chance %)` rows, percentages at two decimals.
pub fn coordinated_table(quorum: u32) -> Vec<(String, u32, String)> {
    TABLE_FRACTIONS
        .iter()
        .map(|&f| (format!("{:.0}%", f * 100.0), quorum, format!("{:.2}%", coordinated_chance(f, quorum) * 100.0)))
        .collect()
}

/// Node reputation from its task history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CreditRecord {
    pub completed: u64,
    pub aborts: u64,
    pub slashes: u64,
}

impl CreditRecord {
    /// `completed / (completed + 2 aborts + 5 slashes)`; 1 with no history.
    pub fn weight(&self) -> f64 {
        let denom = self.completed + 2 * self.aborts + 5 * self.slashes;
        if denom == 0 {
            return 1.0;
        }
        (self.completed as f64 / denom as f64).clamp(0.0, 1.0)
    }
}
