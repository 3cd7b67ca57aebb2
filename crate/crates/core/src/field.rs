//! Prime field arithmetic.
//!
//! Elements are always kept in canonical form `[0, P)`. The default modulus is
//! the Mersenne prime `2^61 - 1`, which gets a shift-and-add reduction; any
//! other prime below `2^62` (e.g. `101` for exhaustive tests) falls back to a
//! plain 128-bit remainder.

use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// `2^61 - 1`.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Small prime used for exhaustive enumeration tests.
pub const SMALL_PRIME: u64 = 101;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("non-invertible: zero has no multiplicative inverse")]
    NonInvertible,
    #[error("value {value} is not canonical for modulus {modulus}")]
    NotCanonical { value: u64, modulus: u64 },
    #[error("invalid field element literal {0:?}")]
    Parse(String),
}

/// Element of the prime field of order `P`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Fp<const P: u64 = MERSENNE_61>(u64);

/// Field element over the default 61-bit Mersenne modulus.
pub type Fe = Fp<MERSENNE_61>;

impl<const P: u64> Fp<P> {
    pub const MODULUS: u64 = P;
    pub const ZERO: Self = Fp(0);
    pub const ONE: Self = Fp(1);

    // Sums of two canonical values must fit in a u64.
    const VALID_MODULUS: () = assert!(P > 2 && P < (1 << 62), "modulus out of range");

    /// Reduces an arbitrary u64 into the field.
    pub const fn new(value: u64) -> Self {
        #[allow(clippy::let_unit_value)]
        let _ = Self::VALID_MODULUS;
        Fp(value % P)
    }

    /// Accepts only canonical representatives.
    pub fn from_canonical(value: u64) -> Result<Self, FieldError> {
        if value < P {
            Ok(Fp(value))
        } else {
            Err(FieldError::NotCanonical { value, modulus: P })
        }
    }

    pub fn from_u128(value: u128) -> Self {
        Fp(Self::reduce_wide(value))
    }

    /// Two's-complement style embedding: negative integers map to `P - |v|`.
    pub fn from_i64(value: i64) -> Self {
        if value >= 0 {
            Self::new(value as u64)
        } else {
            -Self::new(value.unsigned_abs())
        }
    }

    /// Inverse of [`Fp::from_i64`]: values above `P/2` decode as negative.
    pub fn to_signed(self) -> i64 {
        if self.0 > P / 2 {
            -((P - self.0) as i64)
        } else {
            self.0 as i64
        }
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Number of bits `b` such that `2^(b+1) <= P` never holds, i.e. `floor(log2 P)`.
    pub const fn floor_log2() -> u32 {
        63 - P.leading_zeros()
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp(rng.gen_range(0..P))
    }

    pub fn random_bit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp(rng.gen_range(0..2))
    }

    /// `2^k` as a field element.
    pub fn pow2(k: u32) -> Self {
        Self::from(2u64).pow(k as u64)
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base *= base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::NonInvertible);
        }
        Ok(self.pow(P - 2))
    }

    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: [u8; 8]) -> Result<Self, FieldError> {
        Self::from_canonical(u64::from_le_bytes(bytes))
    }

    /// Reduces a big-endian byte string interpreted as an unsigned integer.
    pub fn from_be_bytes_reduced(bytes: &[u8]) -> Self {
        let radix = Self::new(256);
        bytes
            .iter()
            .fold(Self::ZERO, |acc, &b| acc * radix + Self::new(b as u64))
    }

    #[inline]
    fn reduce_wide(x: u128) -> u64 {
        if P == MERSENNE_61 {
            // x = hi * 2^61 + lo with 2^61 = 1 (mod P); applied twice for 122-bit inputs.
            let lo = (x as u64) & MERSENNE_61;
            let hi = x >> 61;
            let folded = lo as u128 + hi;
            let lo2 = (folded as u64) & MERSENNE_61;
            let r = lo2 + (folded >> 61) as u64;
            if r >= MERSENNE_61 {
                r - MERSENNE_61
            } else {
                r
            }
        } else {
            (x % P as u128) as u64
        }
    }
}

impl<const P: u64> From<u64> for Fp<P> {
    fn from(value: u64) -> Self {
        Self::new(value)
    }
}

impl<const P: u64> From<bool> for Fp<P> {
    fn from(value: bool) -> Self {
        Fp(value as u64)
    }
}

impl<const P: u64> Add for Fp<P> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let s = self.0 + rhs.0;
        Fp(if s >= P { s - P } else { s })
    }
}

impl<const P: u64> Sub for Fp<P> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        if self.0 >= rhs.0 {
            Fp(self.0 - rhs.0)
        } else {
            Fp(P - rhs.0 + self.0)
        }
    }
}

impl<const P: u64> Neg for Fp<P> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        if self.0 == 0 {
            self
        } else {
            Fp(P - self.0)
        }
    }
}

impl<const P: u64> Mul for Fp<P> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Fp(Self::reduce_wide(self.0 as u128 * rhs.0 as u128))
    }
}

impl<const P: u64> AddAssign for Fp<P> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const P: u64> SubAssign for Fp<P> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const P: u64> MulAssign for Fp<P> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const P: u64> Sum for Fp<P> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

impl<'a, const P: u64> Sum<&'a Fp<P>> for Fp<P> {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

impl<const P: u64> Product for Fp<P> {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ONE, Mul::mul)
    }
}

impl<const P: u64> fmt::Debug for Fp<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp({})", self.0)
    }
}

impl<const P: u64> fmt::Display for Fp<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parses a decimal literal, accepting a leading `-` for negated constants.
impl<const P: u64> FromStr for Fp<P> {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (neg, digits) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let v: u128 = digits.parse().map_err(|_| FieldError::Parse(s.to_string()))?;
        let e = Self::from_u128(v);
        Ok(if neg { -e } else { e })
    }
}

/// Serializes a slice of field elements as concatenated 8-byte little-endian words.
pub fn encode_elements<const P: u64>(elems: &[Fp<P>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(elems.len() * 8);
    for e in elems {
        out.extend_from_slice(&e.to_le_bytes());
    }
    out
}

pub fn decode_elements<const P: u64>(bytes: &[u8]) -> Result<Vec<Fp<P>>, FieldError> {
    if !bytes.len().is_multiple_of(8) {
        return Err(FieldError::Parse(format!("payload length {} not a multiple of 8", bytes.len())));
    }
    bytes
        .chunks_exact(8)
        .map(|c| Fp::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect()
}
