//! Commit-reveal randomness and computation-node selection.
//!
//! Every bidder commits to a 32-byte seed, then reveals it. The combined
//! randomness is the sum of the seeds read as big-endian integers mod p.
//! Each node derives the quorum locally from that value, so nothing
//! broadcast during selection names the selected set.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha3::{Digest, Sha3_256};
use thiserror::Error;

use crate::field::Fe;

pub type NodeId = usize;

pub const SEED_LEN: usize = 32;

pub fn seed_commitment(seed: &[u8; SEED_LEN]) -> [u8; 32] {
    Sha3_256::digest(seed).into()
}

/// A bidder's entry: deposit and commitment to its DRF seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ticket {
    pub node: NodeId,
    pub stake: u64,
    pub commitment: [u8; 32],
}

impl Ticket {
    pub fn new(node: NodeId, stake: u64, seed: &[u8; SEED_LEN]) -> Self {
        Self { node, stake, commitment: seed_commitment(seed) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reveal {
    pub node: NodeId,
    pub seed: [u8; SEED_LEN],
}

/// Seed whose big-endian value is `v`.
pub fn seed_from_u64(v: u64) -> [u8; SEED_LEN] {
    let mut s = [0u8; SEED_LEN];
    s[SEED_LEN - 8..].copy_from_slice(&v.to_be_bytes());
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DrfError {
    #[error("node {0} revealed a seed that does not match its commitment")]
    Forged(NodeId),
    #[error("node {0} never revealed")]
    Missing(NodeId),
    #[error("reveal from node {0}, which holds no ticket")]
    Unknown(NodeId),
    #[error("node {0} appears twice")]
    Duplicate(NodeId),
}

impl DrfError {
    pub fn node(&self) -> NodeId {
        match *self {
            DrfError::Forged(n) | DrfError::Missing(n) | DrfError::Unknown(n) | DrfError::Duplicate(n) => n,
        }
    }
}

/// Combines the reveals into `P`. Reveals may arrive in any order. The
/// first failure in node order is reported; see [`failed_nodes`] for all.
pub fn drf_round(tickets: &[Ticket], reveals: &[Reveal]) -> Result<Fe, DrfError> {
    match failed_nodes(tickets, reveals).into_iter().next() {
        Some(e) => Err(e),
        None => Ok(reveals.iter().map(|r| Fe::from_be_bytes_reduced(&r.seed)).sum()),
    }
}

/// Every failure, sorted by node, so all offenders can be excluded and slashed.
pub fn failed_nodes(tickets: &[Ticket], reveals: &[Reveal]) -> Vec<DrfError> {
    let mut errs = Vec::new();
    let mut seen = BTreeSet::new();
    for t in tickets {
        if !seen.insert(t.node) {
            errs.push(DrfError::Duplicate(t.node));
        }
    }
    let mut revealed = BTreeSet::new();
    for r in reveals {
        if !revealed.insert(r.node) {
            errs.push(DrfError::Duplicate(r.node));
            continue;
        }
        match tickets.iter().find(|t| t.node == r.node) {
            None => errs.push(DrfError::Unknown(r.node)),
            Some(t) if seed_commitment(&r.seed) != t.commitment => errs.push(DrfError::Forged(r.node)),
            Some(_) => {}
        }
    }
    for t in tickets {
        if !revealed.contains(&t.node) {
            errs.push(DrfError::Missing(t.node));
        }
    }
    errs.sort_by_key(|e| e.node());
    errs.dedup();
    errs
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuorumResult {
    pub randomness: Fe,
    /// Must-include members first, then the drawn nodes in draw order.
    pub selected: Vec<NodeId>,
    pub prover: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuorumError {
    #[error("quorum of {q} from {eligible} eligible nodes")]
    TooLarge { q: usize, eligible: usize },
    #[error("node {0} must be included but is not eligible")]
    NotEligible(NodeId),
    #[error("{0} nodes must be included, more than the quorum")]
    TooManyRequired(usize),
    #[error("weights must be finite and non-negative, one per eligible node")]
    BadWeights,
    #[error("lottery needs at least two candidates")]
    TooFewCandidates,
}

fn selection_rng(p: Fe) -> ChaCha20Rng {
    let mut h = Sha3_256::new();
    h.update(b"quorum selection");
    h.update(p.to_le_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

fn split_required(eligible: &[NodeId], q: usize, must: &[NodeId]) -> Result<(Vec<NodeId>, Vec<NodeId>), QuorumError> {
    if q > eligible.len() {
        return Err(QuorumError::TooLarge { q, eligible: eligible.len() });
    }
    let mut required: Vec<NodeId> = Vec::new();
    for &m in must {
        if !eligible.contains(&m) {
            return Err(QuorumError::NotEligible(m));
        }
        if !required.contains(&m) {
            required.push(m);
        }
    }
    if required.len() > q {
        return Err(QuorumError::TooManyRequired(required.len()));
    }
    let rest = eligible.iter().copied().filter(|e| !required.contains(e)).collect();
    Ok((required, rest))
}

fn finish(p: Fe, selected: Vec<NodeId>) -> QuorumResult {
    let prover = if selected.is_empty() { 0 } else { selected[(p.value() % selected.len() as u64) as usize] };
    QuorumResult { randomness: p, selected, prover }
}

/// Uniform selection: `must` plus `q - |must|` nodes drawn without
/// replacement by a Fisher-Yates shuffle seeded from `p`.
pub fn select_quorum(p: Fe, eligible: &[NodeId], q: usize, must: &[NodeId]) -> Result<QuorumResult, QuorumError> {
    let (mut selected, mut rest) = split_required(eligible, q, must)?;
    let draw = q - selected.len();
    let mut rng = selection_rng(p);
    let (picked, _) = rest.partial_shuffle(&mut rng, draw);
    selected.extend_from_slice(picked);
    Ok(finish(p, selected))
}

/// Like [`select_quorum`] with inclusion skewed by per-node weights
/// (Efraimidis-Spirakis sampling). Zero-weight nodes are drawn only when
/// the positive-weight nodes run out.
pub fn select_quorum_weighted(
    p: Fe,
    eligible: &[NodeId],
    weights: &[f64],
    q: usize,
    must: &[NodeId],
) -> Result<QuorumResult, QuorumError> {
    if weights.len() != eligible.len() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(QuorumError::BadWeights);
    }
    let (mut selected, _) = split_required(eligible, q, must)?;
    let draw = q - selected.len();
    let pool: Vec<(NodeId, f64)> =
        eligible.iter().copied().zip(weights.iter().copied()).filter(|(n, _)| !selected.contains(n)).collect();
    let (positive, zero): (Vec<_>, Vec<_>) = pool.into_iter().partition(|(_, w)| *w > 0.0);
    let mut rng = selection_rng(p);
    let take = draw.min(positive.len());
    if take > 0 {
        let picked = positive.choose_multiple_weighted(&mut rng, take, |(_, w)| *w).map_err(|_| QuorumError::BadWeights)?;
        selected.extend(picked.map(|(n, _)| *n));
    }
    let mut zero: Vec<NodeId> = zero.into_iter().map(|(n, _)| n).collect();
    let (picked, _) = zero.partial_shuffle(&mut rng, draw - take);
    selected.extend_from_slice(picked);
    Ok(finish(p, selected))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lottery {
    pub prover: NodeId,
    pub validators: Vec<NodeId>,
}

/// The prover is candidate `P mod |candidates|`; the rest validate.
pub fn lottery_step(candidates: &[NodeId], p: Fe) -> Result<Lottery, QuorumError> {
    if candidates.len() < 2 {
        return Err(QuorumError::TooFewCandidates);
    }
    let idx = (p.value() % candidates.len() as u64) as usize;
    let validators = candidates.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, c)| *c).collect();
    Ok(Lottery { prover: candidates[idx], validators })
}

/// Runs a whole honest round for `nodes` with seeds derived from `seed`.
pub fn simulate_drf(nodes: &[NodeId], seed: u64) -> (Vec<Ticket>, Vec<Reveal>) {
    let mut tickets = Vec::with_capacity(nodes.len());
    let mut reveals = Vec::with_capacity(nodes.len());
    for &node in nodes {
        let s: [u8; SEED_LEN] = crate::engine::derive_seed(seed, "drf seed", node as u64);
        tickets.push(Ticket::new(node, 0, &s));
        reveals.push(Reveal { node, seed: s });
    }
    (tickets, reveals)
}
