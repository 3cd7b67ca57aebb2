use std::collections::BTreeMap;

use super::proof::{ComputationProof, Roster};
use super::session::{run_parties, PartyReport, Session};
use super::{Abort, EngineError, PartyContext};
use crate::circuit::{Circuit, Gate};
use crate::field::Fp;
use crate::gadgets::{self, SharedFloat};
use crate::preprocessing::PreprocCounts;
use crate::sharing::AuthShare;
use crate::transport::{Transcript, TransportStats};

/// Evaluates `circuit` as this party and releases the outputs.
///
/// Layer by layer: the interactive gates of a layer run batched by kind,
/// then its linear gates run in topological order.
pub fn evaluate<const P: u64>(
    ctx: &mut PartyContext<P>,
    circuit: &Circuit<P>,
    mine: &[Fp<P>],
) -> Result<(Vec<Fp<P>>, ComputationProof<P>), EngineError> {
    let gates = circuit.gates();
    let layers = circuit.gate_layers();
    let mut wires: Vec<Option<AuthShare<P>>> = vec![None; circuit.wire_count()];

    let input_shares = ctx.input_batch(&circuit.input_parties(), mine)?;
    let mut it = input_shares.into_iter();
    for g in gates {
        if let Gate::Input { out, .. } = g {
            wires[*out] = it.next();
        }
    }

    let max_layer = layers.iter().copied().max().unwrap_or(0) as usize;
    let mut by_layer: Vec<Vec<usize>> = vec![Vec::new(); max_layer + 1];
    for (i, g) in gates.iter().enumerate() {
        if !matches!(g, Gate::Input { .. }) {
            by_layer[layers[i] as usize].push(i);
        }
    }

    let w = |wires: &[Option<AuthShare<P>>], id: usize| wires[id].expect("wire defined before use");
    let mut outputs: Vec<AuthShare<P>> = Vec::with_capacity(circuit.n_outputs());
    let l = circuit.bitwidth();
    for layer in &by_layer {
        let mut muls = Vec::new();
        let mut cmps = Vec::new();
        let mut truncs: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
        let mut flmuls: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &i in layer {
            match gates[i] {
                Gate::Mul { .. } => muls.push(i),
                Gate::Cmp { .. } => cmps.push(i),
                Gate::Trunc { k, m, .. } => truncs.entry((k, m)).or_default().push(i),
                Gate::FlMul { l, .. } => flmuls.entry(l).or_default().push(i),
                _ => {}
            }
        }

        let pair = |wires: &[Option<AuthShare<P>>], i: usize| match gates[i] {
            Gate::Mul { a, b, .. } | Gate::Cmp { a, b, .. } => (w(wires, a), w(wires, b)),
            _ => unreachable!(),
        };
        let single_out = |i: usize| gates[i].outputs()[0];

        let pairs: Vec<_> = muls.iter().map(|&i| pair(&wires, i)).collect();
        for (&i, z) in muls.iter().zip(ctx.mul_batch(&pairs)?) {
            wires[single_out(i)] = Some(z);
        }
        let pairs: Vec<_> = cmps.iter().map(|&i| pair(&wires, i)).collect();
        for (&i, z) in cmps.iter().zip(gadgets::op_compare(ctx, &pairs, l)?) {
            wires[single_out(i)] = Some(z);
        }
        for ((k, m), idx) in truncs {
            let xs: Vec<_> = idx.iter().map(|&i| w(&wires, gates[i].inputs()[0])).collect();
            for (&i, z) in idx.iter().zip(gadgets::op_trunc(ctx, &xs, k, m)?) {
                wires[single_out(i)] = Some(z);
            }
        }
        for (fl, idx) in flmuls {
            let pairs: Vec<_> = idx
                .iter()
                .map(|&i| match gates[i] {
                    Gate::FlMul { x, y, .. } => (
                        SharedFloat::from_array(x.map(|id| w(&wires, id))),
                        SharedFloat::from_array(y.map(|id| w(&wires, id))),
                    ),
                    _ => unreachable!(),
                })
                .collect();
            for (&i, z) in idx.iter().zip(gadgets::flmul(ctx, &pairs, fl)?) {
                for (o, s) in gates[i].outputs().into_iter().zip(z.to_array()) {
                    wires[o] = Some(s);
                }
            }
        }

        for &i in layer {
            let v = match gates[i] {
                Gate::Const { c, .. } => ctx.constant(c),
                Gate::Add { a, b, .. } => w(&wires, a) + w(&wires, b),
                Gate::AddConst { c, a, .. } => ctx.add_const(w(&wires, a), c),
                Gate::SMul { k, a, .. } => w(&wires, a) * k,
                Gate::Output { a } => {
                    outputs.push(w(&wires, a));
                    continue;
                }
                _ => continue,
            };
            wires[single_out(i)] = Some(v);
        }
        ctx.maybe_periodic_check()?;
    }
    // Outputs were gathered layer by layer; restore gate order.
    let order: Vec<usize> = by_layer.iter().flatten().copied().filter(|&i| matches!(gates[i], Gate::Output { .. })).collect();
    let mut ranked: Vec<(usize, AuthShare<P>)> = order.into_iter().zip(outputs).collect();
    ranked.sort_by_key(|(i, _)| *i);
    let outputs: Vec<AuthShare<P>> = ranked.into_iter().map(|(_, s)| s).collect();
    ctx.output(&outputs)
}

#[derive(Debug, Clone)]
pub struct SessionResult<const P: u64> {
    pub outputs: Vec<Fp<P>>,
    pub proof: ComputationProof<P>,
    pub roster: Roster,
    pub transcript: Transcript,
    pub stats: TransportStats,
    pub reports: Vec<PartyReport>,
}

impl<const P: u64> SessionResult<P> {
    /// Preprocessing consumed by party 0; identical across honest parties.
    pub fn consumed(&self) -> PreprocCounts {
        self.reports[0].consumed
    }
}

#[derive(Debug, Clone)]
pub struct SessionFailure {
    pub error: EngineError,
    pub transcript: Option<Transcript>,
    pub stats: Option<Box<TransportStats>>,
}

impl SessionFailure {
    pub fn abort(&self) -> Option<&Abort> {
        self.error.abort()
    }

    fn usage(msg: String) -> Self {
        Self { error: EngineError::Usage(msg), transcript: None, stats: None }
    }
}

/// Runs every party on `circuit`. `inputs[p]` are party `p`'s values in gate order.
///
/// On failure the reported error is the first one seen by an honest party.
pub fn run_session<const P: u64>(
    circuit: &Circuit<P>,
    inputs: &[Vec<Fp<P>>],
    session: Session<P>,
) -> Result<SessionResult<P>, SessionFailure> {
    let n = session.bundle.n();
    if inputs.len() != n {
        return Err(SessionFailure::usage(format!("{} input lists for {n} parties", inputs.len())));
    }
    if let Some(p) = circuit.max_party().filter(|&p| p >= n) {
        return Err(SessionFailure::usage(format!("circuit reads input from party {p} but only {n} parties")));
    }
    for (p, (&need, got)) in circuit.inputs_per_party(n).iter().zip(inputs).enumerate() {
        if need != got.len() {
            return Err(SessionFailure::usage(format!("party {p} needs {need} inputs, got {}", got.len())));
        }
    }
    let cost = circuit.cost().map_err(|e| SessionFailure::usage(e.to_string()))?;
    let have = session.bundle.counts();
    let short = [
        ("triples", cost.triples_required, have.triples),
        ("masks", cost.masks_required, have.masks),
        ("singles", cost.singles_required, have.singles),
        ("bits", cost.bits_required, have.bits),
    ]
    .into_iter()
    .find(|&(_, need, have)| need > have as u64);
    if let Some((what, need, have)) = short {
        return Err(SessionFailure::usage(format!("bundle has {have} {what}, circuit needs {need}")));
    }

    let corrupted = session.adversary.corrupted();
    let roster = session.roster.clone();
    let outcome = run_parties(session, |ctx| evaluate(ctx, circuit, &inputs[ctx.id()]))
        .map_err(|error| SessionFailure { error, transcript: None, stats: None })?;

    let honest_err = outcome
        .results
        .iter()
        .enumerate()
        .filter(|(p, _)| !corrupted.contains(p))
        .find_map(|(_, r)| r.as_ref().err())
        .or_else(|| outcome.results.iter().find_map(|r| r.as_ref().err()))
        .cloned();
    if let Some(error) = honest_err {
        return Err(SessionFailure { error, transcript: Some(outcome.transcript), stats: Some(Box::new(outcome.stats)) });
    }
    let mut results = outcome.results.into_iter().map(|r| r.expect("no errors"));
    let (outputs, proof) = results.next().expect("at least two parties");
    debug_assert!(results.all(|(o, p)| o == outputs && p == proof));
    Ok(SessionResult { outputs, proof, roster, transcript: outcome.transcript, stats: outcome.stats, reports: outcome.reports })
}
