use std::collections::BTreeMap;

use thiserror::Error;

use super::{Circuit, CircuitBuilder, WireId};
use crate::field::Fp;
use crate::sharing::PartyId;

/// Expression tree. `Input` is identified by `(party, slot)`; repeated
/// occurrences refer to the same input. `bit` marks an input as 0/1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr<const P: u64> {
    Input { party: PartyId, slot: usize, bit: bool },
    Const(Fp<P>),
    Add(Box<Expr<P>>, Box<Expr<P>>),
    Sub(Box<Expr<P>>, Box<Expr<P>>),
    Mul(Box<Expr<P>>, Box<Expr<P>>),
    /// 1 if left < right as integers below `2^bitwidth`.
    Lt(Box<Expr<P>>, Box<Expr<P>>),
    And(Box<Expr<P>>, Box<Expr<P>>),
    Or(Box<Expr<P>>, Box<Expr<P>>),
    Xor(Box<Expr<P>>, Box<Expr<P>>),
    Not(Box<Expr<P>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Field,
    Bit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{op} needs bit-typed operands")]
pub struct TypeError {
    pub op: &'static str,
}

impl<const P: u64> Expr<P> {
    pub fn input(party: PartyId, slot: usize) -> Self {
        Expr::Input { party, slot, bit: false }
    }

    pub fn bit_input(party: PartyId, slot: usize) -> Self {
        Expr::Input { party, slot, bit: true }
    }

    pub fn constant(c: impl Into<Fp<P>>) -> Self {
        Expr::Const(c.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, o: Self) -> Self {
        Expr::Add(Box::new(self), Box::new(o))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, o: Self) -> Self {
        Expr::Sub(Box::new(self), Box::new(o))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, o: Self) -> Self {
        Expr::Mul(Box::new(self), Box::new(o))
    }

    pub fn lt(self, o: Self) -> Self {
        Expr::Lt(Box::new(self), Box::new(o))
    }

    pub fn and(self, o: Self) -> Self {
        Expr::And(Box::new(self), Box::new(o))
    }

    pub fn or(self, o: Self) -> Self {
        Expr::Or(Box::new(self), Box::new(o))
    }

    pub fn xor(self, o: Self) -> Self {
        Expr::Xor(Box::new(self), Box::new(o))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Expr::Not(Box::new(self))
    }

    /// Static type: constants 0 and 1, bit inputs, comparisons and boolean
    /// operators are bits; everything else is a field element.
    pub fn type_of(&self) -> Result<ExprType, TypeError> {
        let need_bits = |op: &'static str, xs: &[&Expr<P>]| -> Result<ExprType, TypeError> {
            for x in xs {
                if x.type_of()? != ExprType::Bit {
                    return Err(TypeError { op });
                }
            }
            Ok(ExprType::Bit)
        };
        match self {
            Expr::Input { bit, .. } => Ok(if *bit { ExprType::Bit } else { ExprType::Field }),
            Expr::Const(c) => Ok(if c.value() <= 1 { ExprType::Bit } else { ExprType::Field }),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Lt(a, b) => {
                a.type_of()?;
                b.type_of()?;
                Ok(if matches!(self, Expr::Lt(..)) { ExprType::Bit } else { ExprType::Field })
            }
            Expr::And(a, b) => need_bits("AND", &[a, b]),
            Expr::Or(a, b) => need_bits("OR", &[a, b]),
            Expr::Xor(a, b) => need_bits("XOR", &[a, b]),
            Expr::Not(a) => need_bits("NOT", &[a]),
        }
    }

    /// Direct recursive evaluation, independent of the circuit path.
    /// `inputs[party][slot]`.
    pub fn eval(&self, inputs: &[Vec<Fp<P>>]) -> Fp<P> {
        let e = |x: &Expr<P>| x.eval(inputs);
        match self {
            Expr::Input { party, slot, .. } => inputs[*party][*slot],
            Expr::Const(c) => *c,
            Expr::Add(a, b) => e(a) + e(b),
            Expr::Sub(a, b) => e(a) - e(b),
            Expr::Mul(a, b) | Expr::And(a, b) => e(a) * e(b),
            Expr::Lt(a, b) => Fp::from(e(a).value() < e(b).value()),
            Expr::Or(a, b) => Fp::from(!e(a).is_zero() || !e(b).is_zero()),
            Expr::Xor(a, b) => Fp::from(e(a).is_zero() != e(b).is_zero()),
            Expr::Not(a) => Fp::from(e(a).is_zero()),
        }
    }

    fn collect_inputs(&self, acc: &mut BTreeMap<(PartyId, usize), ()>) {
        match self {
            Expr::Input { party, slot, .. } => {
                acc.insert((*party, *slot), ());
            }
            Expr::Const(_) => {}
            Expr::Not(a) => a.collect_inputs(acc),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Lt(a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b)
            | Expr::Xor(a, b) => {
                a.collect_inputs(acc);
                b.collect_inputs(acc);
            }
        }
    }
}

enum Lowered<const P: u64> {
    Wire(WireId),
    Const(Fp<P>),
}

struct Lowering<'a, const P: u64> {
    b: CircuitBuilder<P>,
    inputs: &'a BTreeMap<(PartyId, usize), WireId>,
}

impl<const P: u64> Lowering<'_, P> {
    fn wire(&mut self, l: Lowered<P>) -> WireId {
        match l {
            Lowered::Wire(w) => w,
            Lowered::Const(c) => self.b.constant(c),
        }
    }

    fn add(&mut self, x: Lowered<P>, y: Lowered<P>) -> Lowered<P> {
        match (x, y) {
            (Lowered::Const(a), Lowered::Const(b)) => Lowered::Const(a + b),
            (Lowered::Const(c), Lowered::Wire(w)) | (Lowered::Wire(w), Lowered::Const(c)) => {
                Lowered::Wire(self.b.add_const(c, w))
            }
            (Lowered::Wire(a), Lowered::Wire(b)) => Lowered::Wire(self.b.add(a, b)),
        }
    }

    fn scale(&mut self, k: Fp<P>, x: Lowered<P>) -> Lowered<P> {
        match x {
            Lowered::Const(c) => Lowered::Const(c * k),
            Lowered::Wire(w) => Lowered::Wire(self.b.smul(k, w)),
        }
    }

    fn mul(&mut self, x: Lowered<P>, y: Lowered<P>) -> Lowered<P> {
        match (x, y) {
            (Lowered::Const(a), Lowered::Const(b)) => Lowered::Const(a * b),
            (Lowered::Const(c), w) | (w, Lowered::Const(c)) => self.scale(c, w),
            (Lowered::Wire(a), Lowered::Wire(b)) => Lowered::Wire(self.b.mul(a, b)),
        }
    }

    /// `a + b + k*ab` covers OR (k = -1) and XOR (k = -2).
    fn bool_combine(&mut self, x: Lowered<P>, y: Lowered<P>, k: i64) -> Lowered<P> {
        let (xc, yc) = (self.dup(&x), self.dup(&y));
        let ab = self.mul(x, y);
        let sum = self.add(xc, yc);
        let scaled = self.scale(Fp::from_i64(k), ab);
        self.add(sum, scaled)
    }

    fn dup(&self, l: &Lowered<P>) -> Lowered<P> {
        match l {
            Lowered::Wire(w) => Lowered::Wire(*w),
            Lowered::Const(c) => Lowered::Const(*c),
        }
    }

    fn lower(&mut self, e: &Expr<P>) -> Lowered<P> {
        match e {
            Expr::Input { party, slot, .. } => Lowered::Wire(self.inputs[&(*party, *slot)]),
            Expr::Const(c) => Lowered::Const(*c),
            Expr::Add(a, b) => {
                let (x, y) = (self.lower(a), self.lower(b));
                self.add(x, y)
            }
            Expr::Sub(a, b) => {
                let (x, y) = (self.lower(a), self.lower(b));
                let ny = self.scale(-Fp::ONE, y);
                self.add(x, ny)
            }
            Expr::Mul(a, b) | Expr::And(a, b) => {
                let (x, y) = (self.lower(a), self.lower(b));
                self.mul(x, y)
            }
            Expr::Lt(a, b) => {
                let (x, y) = (self.lower(a), self.lower(b));
                if let (Lowered::Const(p), Lowered::Const(q)) = (&x, &y) {
                    return Lowered::Const(Fp::from(p.value() < q.value()));
                }
                let (wx, wy) = (self.wire(x), self.wire(y));
                Lowered::Wire(self.b.cmp(wx, wy))
            }
            Expr::Or(a, b) => {
                let (x, y) = (self.lower(a), self.lower(b));
                self.bool_combine(x, y, -1)
            }
            Expr::Xor(a, b) => {
                let (x, y) = (self.lower(a), self.lower(b));
                self.bool_combine(x, y, -2)
            }
            Expr::Not(a) => {
                let x = self.lower(a);
                let neg = self.scale(-Fp::ONE, x);
                self.add(Lowered::Const(Fp::ONE), neg)
            }
        }
    }
}

/// Compiles expressions into one circuit with an output per expression.
/// Boolean operators lower to arithmetic: AND = ab, OR = a+b-ab,
/// XOR = a+b-2ab, NOT = 1-a. Constant subtrees are folded.
pub fn compile_expr<const P: u64>(outputs: &[Expr<P>], bitwidth: u32) -> Result<Circuit<P>, TypeError> {
    for e in outputs {
        e.type_of()?;
    }
    let mut slots = BTreeMap::new();
    outputs.iter().for_each(|e| e.collect_inputs(&mut slots));
    let mut b = CircuitBuilder::new().bitwidth(bitwidth);
    let inputs: BTreeMap<(PartyId, usize), WireId> =
        slots.keys().map(|&(party, slot)| ((party, slot), b.input(party))).collect();
    let mut lw = Lowering { b, inputs: &inputs };
    for e in outputs {
        let l = lw.lower(e);
        let w = lw.wire(l);
        lw.b.output(w);
    }
    Ok(lw.b.build())
}
