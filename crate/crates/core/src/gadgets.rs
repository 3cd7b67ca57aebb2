//! Composite protocols over authenticated shares: truncation, comparison,
//! bit logic and floating-point multiplication. All operate on batches so a
//! layer of gadgets shares its communication rounds.
//!
//! Truncation is exact. To compute `floor(x / 2^m)` for `x < 2^k` it masks
//! `x` with a random `(k + kappa)`-bit value built from shared bits, opens the
//! sum, and recovers `x mod 2^m` with a bitwise comparison against the low
//! mask bits.

use thiserror::Error;

use crate::engine::{EngineError, PartyContext};
use crate::field::Fp;
use crate::sharing::AuthShare;

/// Statistical masking parameter ceiling.
pub const KAPPA_MAX: u32 = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GadgetError {
    #[error("trunc needs 0 < m < k, got k={k} m={m}")]
    BadShift { k: u32, m: u32 },
    #[error("{k}-bit values leave no masking room in a {field_bits}-bit field")]
    FieldTooSmall { k: u32, field_bits: u32 },
}

impl From<GadgetError> for EngineError {
    fn from(e: GadgetError) -> Self {
        EngineError::Usage(e.to_string())
    }
}

/// Resources consumed by one gadget invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GadgetCost {
    pub muls: u64,
    pub bits: u64,
    /// Opened values, including the six opened by each multiplication.
    pub openings: u64,
}

impl GadgetCost {
    fn plus(self, o: Self) -> Self {
        Self { muls: self.muls + o.muls, bits: self.bits + o.bits, openings: self.openings + o.openings }
    }
}

/// Values opened by one multiplication: the sacrifice challenge, two
/// sacrifice differences, epsilon, delta and the zero check.
pub const OPENINGS_PER_MUL: u64 = 6;

pub fn mul_cost() -> GadgetCost {
    GadgetCost { muls: 1, bits: 0, openings: OPENINGS_PER_MUL }
}

/// Masking slack for `k`-bit inputs: `min(40, floor(log2 p) - 2 - k)`.
pub fn kappa<const P: u64>(k: u32) -> Result<u32, GadgetError> {
    let field_bits = Fp::<P>::floor_log2();
    let room = field_bits as i64 - 2 - k as i64;
    if room < 0 {
        return Err(GadgetError::FieldTooSmall { k, field_bits });
    }
    Ok((room as u32).min(KAPPA_MAX))
}

pub fn trunc_cost<const P: u64>(k: u32, m: u32) -> Result<GadgetCost, GadgetError> {
    if m == 0 || m >= k {
        return Err(GadgetError::BadShift { k, m });
    }
    let muls = (m - 1) as u64;
    Ok(GadgetCost { muls, bits: (k + kappa::<P>(k)?) as u64, openings: 1 + muls * OPENINGS_PER_MUL })
}

pub fn lt_pow2_cost<const P: u64>(k: u32) -> Result<GadgetCost, GadgetError> {
    trunc_cost::<P>(k, k.saturating_sub(1))
}

pub fn compare_cost<const P: u64>(l: u32) -> Result<GadgetCost, GadgetError> {
    trunc_cost::<P>(l + 1, l)
}

/// Three products, the two truncations and the normalization test, then two
/// more products: `2l + 2` multiplications in all.
pub fn flmul_cost<const P: u64>(l: u32) -> Result<GadgetCost, GadgetError> {
    let products = GadgetCost { muls: 5, bits: 0, openings: 5 * OPENINGS_PER_MUL };
    Ok(products
        .plus(trunc_cost::<P>(2 * l, l - 1)?)
        .plus(lt_pow2_cost::<P>(l + 1)?)
        .plus(trunc_cost::<P>(l + 1, 1)?))
}

/// `a + b - ab` for shared bits.
pub fn op_or<const P: u64>(
    ctx: &mut PartyContext<P>,
    pairs: &[(AuthShare<P>, AuthShare<P>)],
) -> Result<Vec<AuthShare<P>>, EngineError> {
    let prods = ctx.mul_batch(pairs)?;
    Ok(pairs.iter().zip(prods).map(|((a, b), ab)| *a + *b - ab).collect())
}

/// `a + b - 2ab` for shared bits.
pub fn op_xor<const P: u64>(
    ctx: &mut PartyContext<P>,
    pairs: &[(AuthShare<P>, AuthShare<P>)],
) -> Result<Vec<AuthShare<P>>, EngineError> {
    let prods = ctx.mul_batch(pairs)?;
    let two = Fp::new(2);
    Ok(pairs.iter().zip(prods).map(|((a, b), ab)| *a + *b - ab * two).collect())
}

/// `floor(x / 2^m)` for each `x < 2^k`.
pub fn op_trunc<const P: u64>(
    ctx: &mut PartyContext<P>,
    xs: &[AuthShare<P>],
    k: u32,
    m: u32,
) -> Result<Vec<AuthShare<P>>, EngineError> {
    trunc_cost::<P>(k, m)?;
    if xs.is_empty() {
        return Ok(vec![]);
    }
    let width = (k + kappa::<P>(k)?) as usize;
    let bits = ctx.take_bits(xs.len() * width)?;
    let zero = AuthShare::zero(ctx.id());

    let mut low = Vec::with_capacity(xs.len());
    let mut masked = Vec::with_capacity(xs.len());
    for (x, b) in xs.iter().zip(bits.chunks_exact(width)) {
        let r_low = b[..m as usize].iter().enumerate().fold(zero, |acc, (i, bi)| acc + *bi * Fp::pow2(i as u32));
        let r_high = b[m as usize..].iter().enumerate().fold(zero, |acc, (i, bi)| acc + *bi * Fp::pow2(i as u32));
        masked.push(*x + r_high * Fp::pow2(m) + r_low);
        low.push(r_low);
    }
    let c = ctx.open(&masked)?;
    let mask = (1u64 << m) - 1;
    let c_low: Vec<u64> = c.iter().map(|v| v.value() & mask).collect();

    // [c_low < r_low], least significant bit first.
    let bit = |ci: u64, i: u32| (ci >> i) & 1 == 1;
    let mut res: Vec<AuthShare<P>> = c_low
        .iter()
        .zip(bits.chunks_exact(width))
        .map(|(&ci, b)| if bit(ci, 0) { zero } else { b[0] })
        .collect();
    for i in 1..m {
        let pairs: Vec<_> = res.iter().zip(bits.chunks_exact(width)).map(|(r, b)| (b[i as usize], *r)).collect();
        let prods = ctx.mul_batch(&pairs)?;
        for (j, (&ci, prod)) in c_low.iter().zip(prods).enumerate() {
            let (bi, r) = pairs[j];
            res[j] = if bit(ci, i) { prod } else { bi + r - prod };
        }
    }

    let inv = Fp::<P>::pow2(m).inv().expect("odd modulus");
    Ok(xs
        .iter()
        .zip(&low)
        .zip(&c_low)
        .zip(&res)
        .map(|(((x, r_low), &ci), u)| {
            // x mod 2^m = c_low - r_low + 2^m u
            let x_mod = ctx.add_const(*u * Fp::pow2(m) - *r_low, Fp::new(ci));
            (*x - x_mod) * inv
        })
        .collect())
}

/// 1 iff `x < 2^(k-1)`, for `x < 2^k`.
pub fn op_lt_pow2<const P: u64>(
    ctx: &mut PartyContext<P>,
    xs: &[AuthShare<P>],
    k: u32,
) -> Result<Vec<AuthShare<P>>, EngineError> {
    let top = op_trunc(ctx, xs, k, k.saturating_sub(1))?;
    Ok(top.into_iter().map(|t| ctx.add_const(-t, Fp::ONE)).collect())
}

/// 1 iff `a < b`, for `a, b < 2^l`.
pub fn op_compare<const P: u64>(
    ctx: &mut PartyContext<P>,
    pairs: &[(AuthShare<P>, AuthShare<P>)],
    l: u32,
) -> Result<Vec<AuthShare<P>>, EngineError> {
    let shifted: Vec<_> = pairs.iter().map(|(a, b)| ctx.add_const(*a - *b, Fp::pow2(l))).collect();
    let ge = op_trunc(ctx, &shifted, l + 1, l)?;
    Ok(ge.into_iter().map(|g| ctx.add_const(-g, Fp::ONE)).collect())
}

/// Shared float `(1 - 2s)(1 - z) v 2^p` with `2^(l-1) <= v < 2^l` unless zero.
/// The exponent is a field element; negative exponents are `p - |e|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedFloat<const P: u64> {
    pub v: AuthShare<P>,
    pub p: AuthShare<P>,
    pub z: AuthShare<P>,
    pub s: AuthShare<P>,
}

impl<const P: u64> SharedFloat<P> {
    pub fn from_array(a: [AuthShare<P>; 4]) -> Self {
        Self { v: a[0], p: a[1], z: a[2], s: a[3] }
    }

    pub fn to_array(self) -> [AuthShare<P>; 4] {
        [self.v, self.p, self.z, self.s]
    }
}

/// Secure floating-point multiplication of each pair at mantissa width `l`.
pub fn flmul<const P: u64>(
    ctx: &mut PartyContext<P>,
    pairs: &[(SharedFloat<P>, SharedFloat<P>)],
    l: u32,
) -> Result<Vec<SharedFloat<P>>, EngineError> {
    flmul_cost::<P>(l)?;
    let k = pairs.len();
    if k == 0 {
        return Ok(vec![]);
    }
    let mut first = Vec::with_capacity(3 * k);
    first.extend(pairs.iter().map(|(x, y)| (x.v, y.v)));
    first.extend(pairs.iter().map(|(x, y)| (x.z, y.z)));
    first.extend(pairs.iter().map(|(x, y)| (x.s, y.s)));
    let prods = ctx.mul_batch(&first)?;
    let two = Fp::new(2);
    let z: Vec<_> = (0..k).map(|i| pairs[i].0.z + pairs[i].1.z - prods[k + i]).collect();
    let s: Vec<_> = (0..k).map(|i| pairs[i].0.s + pairs[i].1.s - prods[2 * k + i] * two).collect();

    let v = op_trunc(ctx, &prods[..k], 2 * l, l - 1)?;
    let b = op_lt_pow2(ctx, &v, l + 1)?;

    let mut second = Vec::with_capacity(2 * k);
    second.extend((0..k).map(|i| (b[i], v[i])));
    second.extend((0..k).map(|i| {
        let exp = ctx.add_const(pairs[i].0.p + pairs[i].1.p - b[i], Fp::new(l as u64));
        (exp, ctx.add_const(-z[i], Fp::ONE))
    }));
    let prods = ctx.mul_batch(&second)?;
    let doubled: Vec<_> = (0..k).map(|i| v[i] + prods[i]).collect();
    let v = op_trunc(ctx, &doubled, l + 1, 1)?;

    Ok((0..k).map(|i| SharedFloat { v: v[i], p: prods[k + i], z: z[i], s: s[i] }).collect())
}

/// The same steps on clear values; used as the circuit's plaintext semantics.
pub fn flmul_plain<const P: u64>(l: u32, x: [Fp<P>; 4], y: [Fp<P>; 4]) -> [Fp<P>; 4] {
    let prod = x[0].value() as u128 * y[0].value() as u128;
    let v = (prod >> (l - 1)) as u64;
    let b = u64::from(v < (1u64 << l));
    let v = (v + b * v) >> 1;
    let z = x[2] + y[2] - x[2] * y[2];
    let s = x[3] + y[3] - Fp::new(2) * x[3] * y[3];
    let p = (x[1] + y[1] + Fp::new(l as u64) - Fp::new(b)) * (Fp::ONE - z);
    [Fp::new(v), p, z, s]
}
