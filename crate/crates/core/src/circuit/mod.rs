//! Arithmetic circuit IR, text format, plaintext evaluation and cost model.
//!
//! Text format, one instruction per line, `#` starts a comment:
//!
//! ```text
//! bitwidth <l>                  # comparison width, default 32
//! in <party> <w>
//! const <c> <w>
//! add <a> <b> <w>
//! addc <c> <a> <w>
//! smul <c> <a> <w>
//! mul <a> <b> <w>
//! cmp <a> <b> <w>               # w = 1 if a < b
//! trunc <k> <m> <a> <w>         # w = floor(a / 2^m), a < 2^k
//! flmul <l> v1 p1 z1 s1 v2 p2 z2 s2 vo po zo so
//! out <w>
//! ```

mod expr;
mod parse;
mod random;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::field::Fp;
use crate::gadgets::{self, GadgetCost, GadgetError};
use crate::preprocessing::PreprocCounts;
use crate::sharing::PartyId;

pub use expr::{compile_expr, Expr, ExprType, TypeError};
pub use parse::{parse_circuit, ParseError, ParseErrorKind};
pub use random::{random_circuit, RandomCircuitParams};

pub type WireId = usize;

pub const DEFAULT_BITWIDTH: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate<const P: u64> {
    Input { party: PartyId, out: WireId },
    Const { c: Fp<P>, out: WireId },
    Add { a: WireId, b: WireId, out: WireId },
    AddConst { c: Fp<P>, a: WireId, out: WireId },
    SMul { k: Fp<P>, a: WireId, out: WireId },
    Mul { a: WireId, b: WireId, out: WireId },
    Cmp { a: WireId, b: WireId, out: WireId },
    Trunc { k: u32, m: u32, a: WireId, out: WireId },
    FlMul { l: u32, x: [WireId; 4], y: [WireId; 4], out: [WireId; 4] },
    Output { a: WireId },
}

impl<const P: u64> Gate<P> {
    pub fn inputs(&self) -> Vec<WireId> {
        match *self {
            Gate::Input { .. } | Gate::Const { .. } => vec![],
            Gate::Add { a, b, .. } | Gate::Mul { a, b, .. } | Gate::Cmp { a, b, .. } => vec![a, b],
            Gate::AddConst { a, .. } | Gate::SMul { a, .. } | Gate::Trunc { a, .. } | Gate::Output { a } => vec![a],
            Gate::FlMul { x, y, .. } => x.iter().chain(&y).copied().collect(),
        }
    }

    pub fn outputs(&self) -> Vec<WireId> {
        match *self {
            Gate::Input { out, .. }
            | Gate::Const { out, .. }
            | Gate::Add { out, .. }
            | Gate::AddConst { out, .. }
            | Gate::SMul { out, .. }
            | Gate::Mul { out, .. }
            | Gate::Cmp { out, .. }
            | Gate::Trunc { out, .. } => vec![out],
            Gate::FlMul { out, .. } => out.to_vec(),
            Gate::Output { .. } => vec![],
        }
    }

    /// Needs communication to evaluate.
    pub fn is_interactive(&self) -> bool {
        matches!(self, Gate::Mul { .. } | Gate::Cmp { .. } | Gate::Trunc { .. } | Gate::FlMul { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("party {party} supplied {got} inputs, circuit expects {expected}")]
    InputCount { party: PartyId, expected: usize, got: usize },
    #[error("input gate for party {0} but no inputs were supplied for it")]
    MissingParty(PartyId),
}

/// A validated circuit: single-assignment wires, gates in topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit<const P: u64> {
    gates: Vec<Gate<P>>,
    wire_names: Vec<String>,
    bitwidth: u32,
}

/// Counts of everything a circuit consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostReport {
    pub mul_gates: u64,
    /// Multiplications including those inside gadgets.
    pub multiplications: u64,
    pub triples_required: u64,
    pub masks_required: u64,
    pub singles_required: u64,
    pub bits_required: u64,
    pub openings: u64,
    /// Interactive layers; a chain of k multiplications has depth k.
    pub depth: u64,
}

impl CostReport {
    /// Preprocessing that covers exactly one honest run.
    pub fn preproc_counts(&self) -> PreprocCounts {
        PreprocCounts {
            triples: self.triples_required as usize,
            masks: self.masks_required as usize,
            singles: self.singles_required as usize,
            bits: self.bits_required as usize,
        }
    }
}

impl<const P: u64> Circuit<P> {
    /// Builds from gates already in topological order over wires `0..names.len()`.
    pub(crate) fn from_parts(gates: Vec<Gate<P>>, wire_names: Vec<String>, bitwidth: u32) -> Self {
        Self { gates, wire_names, bitwidth }
    }

    pub fn gates(&self) -> &[Gate<P>] {
        &self.gates
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn wire_count(&self) -> usize {
        self.wire_names.len()
    }

    pub fn wire_name(&self, w: WireId) -> &str {
        &self.wire_names[w]
    }

    /// Input providers in gate order.
    pub fn input_parties(&self) -> Vec<PartyId> {
        self.gates
            .iter()
            .filter_map(|g| match g {
                Gate::Input { party, .. } => Some(*party),
                _ => None,
            })
            .collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_parties().len()
    }

    pub fn n_outputs(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Output { .. })).count()
    }

    /// Number of inputs each party in `0..n` must supply.
    pub fn inputs_per_party(&self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        for p in self.input_parties() {
            if p < n {
                counts[p] += 1;
            }
        }
        counts
    }

    /// Highest input party id, if there are inputs.
    pub fn max_party(&self) -> Option<PartyId> {
        self.input_parties().into_iter().max()
    }

    /// Layer of every gate. Interactive gates sit one above their deepest
    /// input; linear gates share the layer of their deepest input.
    pub fn gate_layers(&self) -> Vec<u64> {
        let mut wire_layer = vec![0u64; self.wire_count()];
        self.gates
            .iter()
            .map(|g| {
                let base = g.inputs().iter().map(|&w| wire_layer[w]).max().unwrap_or(0);
                let layer = if g.is_interactive() { base + 1 } else { base };
                for w in g.outputs() {
                    wire_layer[w] = layer;
                }
                layer
            })
            .collect()
    }

    pub fn depth(&self) -> u64 {
        self.gate_layers().into_iter().max().unwrap_or(0)
    }

    /// Evaluates in the clear. `inputs[p]` lists party `p`'s values in gate order.
    pub fn eval_plaintext(&self, inputs: &[Vec<Fp<P>>]) -> Result<Vec<Fp<P>>, EvalError> {
        let mut next = vec![0usize; inputs.len()];
        let mut w = vec![Fp::<P>::ZERO; self.wire_count()];
        let mut outs = Vec::new();
        for g in &self.gates {
            match *g {
                Gate::Input { party, out } => {
                    let vals = inputs.get(party).ok_or(EvalError::MissingParty(party))?;
                    let expected = self.input_parties().iter().filter(|&&p| p == party).count();
                    let v = vals.get(next[party]).ok_or(EvalError::InputCount {
                        party,
                        expected,
                        got: vals.len(),
                    })?;
                    next[party] += 1;
                    w[out] = *v;
                }
                Gate::Const { c, out } => w[out] = c,
                Gate::Add { a, b, out } => w[out] = w[a] + w[b],
                Gate::AddConst { c, a, out } => w[out] = w[a] + c,
                Gate::SMul { k, a, out } => w[out] = w[a] * k,
                Gate::Mul { a, b, out } => w[out] = w[a] * w[b],
                Gate::Cmp { a, b, out } => w[out] = Fp::from(w[a].value() < w[b].value()),
                Gate::Trunc { m, a, out, .. } => w[out] = Fp::new(w[a].value() >> m),
                Gate::FlMul { l, x, y, out } => {
                    let r = gadgets::flmul_plain(l, [w[x[0]], w[x[1]], w[x[2]], w[x[3]]], [w[y[0]], w[y[1]], w[y[2]], w[y[3]]]);
                    for (o, v) in out.iter().zip(r) {
                        w[*o] = v;
                    }
                }
                Gate::Output { a } => outs.push(w[a]),
            }
        }
        for (party, vals) in inputs.iter().enumerate() {
            if vals.len() != next[party] {
                return Err(EvalError::InputCount { party, expected: next[party], got: vals.len() });
            }
        }
        Ok(outs)
    }

    /// Cost of one gate under this circuit's bitwidth.
    pub fn gate_cost(&self, g: &Gate<P>) -> Result<GadgetCost, GadgetError> {
        match *g {
            Gate::Mul { .. } => Ok(gadgets::mul_cost()),
            Gate::Cmp { .. } => gadgets::compare_cost::<P>(self.bitwidth),
            Gate::Trunc { k, m, .. } => gadgets::trunc_cost::<P>(k, m),
            Gate::FlMul { l, .. } => gadgets::flmul_cost::<P>(l),
            _ => Ok(GadgetCost::default()),
        }
    }

    /// Exact preprocessing and opening counts for one honest run.
    pub fn cost(&self) -> Result<CostReport, GadgetError> {
        let mut r = CostReport::default();
        for g in &self.gates {
            match g {
                Gate::Input { .. } => r.masks_required += 1,
                Gate::Mul { .. } => r.mul_gates += 1,
                _ => {}
            }
            let c = self.gate_cost(g)?;
            r.multiplications += c.muls;
            r.bits_required += c.bits;
            r.openings += c.openings;
        }
        r.triples_required = 2 * r.multiplications;
        // One sacrifice challenge per multiplication plus the output challenge.
        r.singles_required = r.multiplications + 1;
        r.openings += self.n_outputs() as u64;
        r.depth = self.depth();
        Ok(r)
    }

    /// Emits the text format. `parse_circuit(c.to_text()) == c`.
    pub fn to_text(&self) -> String {
        let n = |w: WireId| self.wire_names[w].as_str();
        let mut out = format!("bitwidth {}\n", self.bitwidth);
        for g in &self.gates {
            let line = match *g {
                Gate::Input { party, out } => format!("in {party} {}", n(out)),
                Gate::Const { c, out } => format!("const {c} {}", n(out)),
                Gate::Add { a, b, out } => format!("add {} {} {}", n(a), n(b), n(out)),
                Gate::AddConst { c, a, out } => format!("addc {c} {} {}", n(a), n(out)),
                Gate::SMul { k, a, out } => format!("smul {k} {} {}", n(a), n(out)),
                Gate::Mul { a, b, out } => format!("mul {} {} {}", n(a), n(b), n(out)),
                Gate::Cmp { a, b, out } => format!("cmp {} {} {}", n(a), n(b), n(out)),
                Gate::Trunc { k, m, a, out } => format!("trunc {k} {m} {} {}", n(a), n(out)),
                Gate::FlMul { l, x, y, out } => {
                    let ws: Vec<&str> = x.iter().chain(&y).chain(&out).map(|&w| n(w)).collect();
                    format!("flmul {l} {}", ws.join(" "))
                }
                Gate::Output { a } => format!("out {}", n(a)),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Gate counts by opcode name.
    pub fn histogram(&self) -> BTreeMap<&'static str, usize> {
        let mut h = BTreeMap::new();
        for g in &self.gates {
            let name = match g {
                Gate::Input { .. } => "in",
                Gate::Const { .. } => "const",
                Gate::Add { .. } => "add",
                Gate::AddConst { .. } => "addc",
                Gate::SMul { .. } => "smul",
                Gate::Mul { .. } => "mul",
                Gate::Cmp { .. } => "cmp",
                Gate::Trunc { .. } => "trunc",
                Gate::FlMul { .. } => "flmul",
                Gate::Output { .. } => "out",
            };
            *h.entry(name).or_insert(0) += 1;
        }
        h
    }
}

/// Incremental construction with generated wire names.
pub struct CircuitBuilder<const P: u64> {
    gates: Vec<Gate<P>>,
    names: Vec<String>,
    bitwidth: u32,
}

impl<const P: u64> Default for CircuitBuilder<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const P: u64> CircuitBuilder<P> {
    pub fn new() -> Self {
        Self { gates: Vec::new(), names: Vec::new(), bitwidth: DEFAULT_BITWIDTH }
    }

    pub fn bitwidth(mut self, l: u32) -> Self {
        self.bitwidth = l;
        self
    }

    fn wire(&mut self) -> WireId {
        let id = self.names.len();
        self.names.push(format!("w{id}"));
        id
    }

    fn push1(&mut self, f: impl FnOnce(WireId) -> Gate<P>) -> WireId {
        let out = self.wire();
        self.gates.push(f(out));
        out
    }

    pub fn input(&mut self, party: PartyId) -> WireId {
        self.push1(|out| Gate::Input { party, out })
    }

    pub fn constant(&mut self, c: Fp<P>) -> WireId {
        self.push1(|out| Gate::Const { c, out })
    }

    pub fn add(&mut self, a: WireId, b: WireId) -> WireId {
        self.push1(|out| Gate::Add { a, b, out })
    }

    pub fn add_const(&mut self, c: Fp<P>, a: WireId) -> WireId {
        self.push1(|out| Gate::AddConst { c, a, out })
    }

    pub fn smul(&mut self, k: Fp<P>, a: WireId) -> WireId {
        self.push1(|out| Gate::SMul { k, a, out })
    }

    pub fn sub(&mut self, a: WireId, b: WireId) -> WireId {
        let nb = self.smul(-Fp::ONE, b);
        self.add(a, nb)
    }

    pub fn mul(&mut self, a: WireId, b: WireId) -> WireId {
        self.push1(|out| Gate::Mul { a, b, out })
    }

    pub fn cmp(&mut self, a: WireId, b: WireId) -> WireId {
        self.push1(|out| Gate::Cmp { a, b, out })
    }

    pub fn trunc(&mut self, k: u32, m: u32, a: WireId) -> WireId {
        self.push1(|out| Gate::Trunc { k, m, a, out })
    }

    pub fn flmul(&mut self, l: u32, x: [WireId; 4], y: [WireId; 4]) -> [WireId; 4] {
        let out = [self.wire(), self.wire(), self.wire(), self.wire()];
        self.gates.push(Gate::FlMul { l, x, y, out });
        out
    }

    pub fn output(&mut self, a: WireId) {
        self.gates.push(Gate::Output { a });
    }

    pub fn build(self) -> Circuit<P> {
        Circuit::from_parts(self.gates, self.names, self.bitwidth)
    }
}

#[cfg(test)]
mod tests;
