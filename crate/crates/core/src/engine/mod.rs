//! Online phase: inputs, openings, multiplication with sacrifice, MAC checks,
//! output with a signed proof, and the multi-party session driver.

mod commit;
mod exec;
mod mac;
mod party;
mod proof;
mod session;

use std::fmt;

use thiserror::Error;

use crate::preprocessing::Exhausted;
use crate::sharing::PartyId;
use crate::transport::TransportError;

pub use commit::{commit, Commitment, Opening, NONCE_LEN};
pub use exec::{evaluate, run_session, SessionFailure, SessionResult};
pub use mac::{combine_log, power_coefficients, sacrifice_residual, seed_coefficients, LogEntry};
pub use proof::{ComputationProof, ProofParseError, Roster, RosterParseError};
pub use session::{derive_seed, run_parties, PartiesOutcome, PartyReport, Session};
pub use party::{PartyContext, Phase};

/// How outputs are authenticated before release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputCheck {
    /// Outputs join the opened log and one combined check covers everything.
    #[default]
    SigmaSum,
    /// Outputs and `gamma(y)` stay committed through the log check, then
    /// `alpha` is opened and `alpha * y = sum gamma(y)_i` is checked directly.
    OpenAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub output_check: OutputCheck,
    /// Run a seeded MAC check whenever this many openings are unchecked.
    pub mac_check_interval: Option<usize>,
    pub timeout_rounds: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            output_check: OutputCheck::SigmaSum,
            mac_check_interval: None,
            timeout_rounds: crate::transport::DEFAULT_TIMEOUT_ROUNDS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    PreprocessingCorrupt,
    MacCheckFailed,
    BadCommitment,
    BadSignature,
    AbortAttack,
    MalformedMessage,
    PeerFailed,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::PreprocessingCorrupt => "preprocessing-corrupt",
            AbortReason::MacCheckFailed => "mac-check-failed",
            AbortReason::BadCommitment => "bad-commitment",
            AbortReason::BadSignature => "bad-signature",
            AbortReason::AbortAttack => "abort-attack",
            AbortReason::MalformedMessage => "malformed-message",
            AbortReason::PeerFailed => "peer-failed",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A protocol abort. `blamed` is set when the misbehaving party is identifiable.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct Abort {
    pub reason: AbortReason,
    pub blamed: Option<PartyId>,
    pub round: u64,
}

impl fmt::Display for Abort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "abort {} at round {}", self.reason, self.round)?;
        match self.blamed {
            Some(p) => write!(f, ", blame party {p}"),
            None => Ok(()),
        }
    }
}

impl Abort {
    pub fn from_transport(e: &TransportError, round: u64) -> Self {
        match *e {
            TransportError::Timeout { party, round } => {
                Abort { reason: AbortReason::AbortAttack, blamed: Some(party), round }
            }
            TransportError::MissingMessage { sender, round, .. } => {
                Abort { reason: AbortReason::MalformedMessage, blamed: Some(sender), round }
            }
            TransportError::BadReceiver { sender, .. } => {
                Abort { reason: AbortReason::MalformedMessage, blamed: Some(sender), round }
            }
            TransportError::PeerGone { party } => {
                Abort { reason: AbortReason::PeerFailed, blamed: Some(party), round }
            }
            TransportError::WrongSubmissionCount { .. } => {
                Abort { reason: AbortReason::PeerFailed, blamed: None, round }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Abort(#[from] Abort),
    #[error(transparent)]
    Exhausted(#[from] Exhausted),
    #[error("invalid use: {0}")]
    Usage(String),
}

impl EngineError {
    pub fn abort(&self) -> Option<&Abort> {
        match self {
            EngineError::Abort(a) => Some(a),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests;
