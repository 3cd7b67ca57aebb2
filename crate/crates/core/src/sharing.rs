//! Authenticated additive secret sharing.
//!
//! A secret `x` is held as `n` tuples `(x_i, m_i)` with `sum x_i = x` and
//! `sum m_i = alpha * x`, where `alpha = sum alpha_i` is the global MAC key.
//! Linear operations are local; only party [`LEADER`] touches the value share
//! when a public constant is added.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use thiserror::Error;

use crate::field::{Fp, MERSENNE_61};

pub type PartyId = usize;

/// Party that absorbs public constants into its value share.
pub const LEADER: PartyId = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SharingError {
    #[error("at least two parties are required, got {0}")]
    TooFewParties(usize),
    #[error("insufficient shares: expected {expected}, got {got}")]
    InsufficientShares { expected: usize, got: usize },
}

/// Party `i`'s share of the global MAC key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacKeyShare<const P: u64 = MERSENNE_61> {
    pub party: PartyId,
    pub alpha: Fp<P>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Opened,
    BroadcastConstant,
}

/// A value every party agrees on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublicValue<const P: u64 = MERSENNE_61> {
    pub value: Fp<P>,
    pub origin: Origin,
}

impl<const P: u64> PublicValue<P> {
    pub fn opened(value: Fp<P>) -> Self {
        Self { value, origin: Origin::Opened }
    }

    pub fn constant(value: Fp<P>) -> Self {
        Self { value, origin: Origin::BroadcastConstant }
    }
}

impl<const P: u64> From<Fp<P>> for PublicValue<P> {
    fn from(value: Fp<P>) -> Self {
        Self::constant(value)
    }
}

/// One party's view of an authenticated secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthShare<const P: u64 = MERSENNE_61> {
    pub value_share: Fp<P>,
    pub mac_share: Fp<P>,
    pub owner: PartyId,
}

impl<const P: u64> AuthShare<P> {
    pub fn new(owner: PartyId, value_share: Fp<P>, mac_share: Fp<P>) -> Self {
        Self { value_share, mac_share, owner }
    }

    /// The all-zero share, a valid sharing of 0 under any key.
    pub fn zero(owner: PartyId) -> Self {
        Self::new(owner, Fp::ZERO, Fp::ZERO)
    }

    /// Sharing of a public constant: the leader holds `c`, everyone holds `c * alpha_i`.
    pub fn constant(c: impl Into<PublicValue<P>>, key: &MacKeyShare<P>) -> Self {
        Self::zero(key.party).add_public(c, key)
    }

    pub fn add_shares(self, other: Self) -> Self {
        debug_assert_eq!(self.owner, other.owner, "shares of different parties");
        Self::new(self.owner, self.value_share + other.value_share, self.mac_share + other.mac_share)
    }

    pub fn add_public(self, c: impl Into<PublicValue<P>>, key: &MacKeyShare<P>) -> Self {
        let c = c.into().value;
        debug_assert_eq!(self.owner, key.party);
        let value_share = if self.owner == LEADER { self.value_share + c } else { self.value_share };
        Self::new(self.owner, value_share, self.mac_share + c * key.alpha)
    }

    pub fn scalar_mul(self, k: impl Into<PublicValue<P>>) -> Self {
        let k = k.into().value;
        Self::new(self.owner, self.value_share * k, self.mac_share * k)
    }
}

impl<const P: u64> Add for AuthShare<P> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.add_shares(rhs)
    }
}

impl<const P: u64> Sub for AuthShare<P> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.add_shares(-rhs)
    }
}

impl<const P: u64> Neg for AuthShare<P> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(self.owner, -self.value_share, -self.mac_share)
    }
}

impl<const P: u64> Mul<Fp<P>> for AuthShare<P> {
    type Output = Self;
    fn mul(self, k: Fp<P>) -> Self {
        self.scalar_mul(k)
    }
}

/// Splits `secret` into `n` uniformly random parts summing to it.
pub fn share<const P: u64, R: Rng + ?Sized>(
    secret: Fp<P>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Fp<P>>, SharingError> {
    if n < 2 {
        return Err(SharingError::TooFewParties(n));
    }
    let randomness: Vec<Fp<P>> = (0..n - 1).map(|_| Fp::random(rng)).collect();
    Ok(share_with(secret, &randomness))
}

/// Deterministic core of [`share`]: the first `n-1` parts are the given
/// randomness, the last part closes the sum.
pub fn share_with<const P: u64>(secret: Fp<P>, randomness: &[Fp<P>]) -> Vec<Fp<P>> {
    let mut parts = randomness.to_vec();
    let partial: Fp<P> = randomness.iter().sum();
    parts.push(secret - partial);
    parts
}

/// n-of-n reconstruction. Every part must be present.
pub fn reconstruct<const P: u64>(parts: &[Option<Fp<P>>], n: usize) -> Result<Fp<P>, SharingError> {
    let present: Vec<Fp<P>> = parts.iter().flatten().copied().collect();
    if parts.len() != n || present.len() != n {
        return Err(SharingError::InsufficientShares { expected: n, got: present.len() });
    }
    Ok(present.iter().sum())
}

/// Convenience wrapper over [`reconstruct`] for a complete set of parts.
pub fn open_parts<const P: u64>(parts: &[Fp<P>]) -> Fp<P> {
    parts.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SMALL_PRIME;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    type F101 = Fp<SMALL_PRIME>;
    type Fe = Fp;

    /// Dealer-side authenticated sharing used only as a test oracle.
    fn auth_share_all<const P: u64>(x: Fp<P>, keys: &[MacKeyShare<P>], rng: &mut ChaCha20Rng) -> Vec<AuthShare<P>> {
        let alpha: Fp<P> = keys.iter().map(|k| k.alpha).sum();
        let vals = share(x, keys.len(), rng).unwrap();
        let macs = share(alpha * x, keys.len(), rng).unwrap();
        (0..keys.len()).map(|i| AuthShare::new(i, vals[i], macs[i])).collect()
    }

    fn keys<const P: u64>(n: usize, rng: &mut ChaCha20Rng) -> Vec<MacKeyShare<P>> {
        (0..n).map(|party| MacKeyShare { party, alpha: Fp::random(rng) }).collect()
    }

    fn global<const P: u64>(shares: &[AuthShare<P>], keys: &[MacKeyShare<P>]) -> (Fp<P>, bool) {
        let alpha: Fp<P> = keys.iter().map(|k| k.alpha).sum();
        let x: Fp<P> = shares.iter().map(|s| s.value_share).sum();
        let m: Fp<P> = shares.iter().map(|s| s.mac_share).sum();
        (x, m == alpha * x)
    }

    fn chi2_critical(df: f64) -> f64 {
        ChiSquared::new(df).unwrap().inverse_cdf(0.999)
    }

    #[test]
    fn share_and_reconstruct() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let parts = share(Fe::new(5), 3, &mut rng).unwrap();
        assert_eq!(parts.len(), 3);
        let opt: Vec<_> = parts.iter().copied().map(Some).collect();
        assert_eq!(reconstruct(&opt, 3).unwrap(), Fe::new(5));
        assert_eq!(reconstruct(&[Some(Fe::ZERO); 3], 3).unwrap(), Fe::ZERO);
        for withheld in 0..3 {
            let mut partial = opt.clone();
            partial[withheld] = None;
            assert_eq!(
                reconstruct(&partial, 3),
                Err(SharingError::InsufficientShares { expected: 3, got: 2 })
            );
        }
        assert!(reconstruct(&opt[..2], 3).is_err());
        assert_eq!(share(Fe::ONE, 1, &mut rng), Err(SharingError::TooFewParties(1)));
    }

    #[test]
    fn sharing_zero_between_two_is_antisymmetric() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let parts = share(Fe::ZERO, 2, &mut rng).unwrap();
        assert_eq!(parts[1], -parts[0]);
    }

    #[test]
    fn single_share_is_uniform_in_small_field() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let trials = 10_000;
        let mut counts = [[0u32; SMALL_PRIME as usize]; 3];
        for _ in 0..trials {
            let parts = share(F101::new(42), 3, &mut rng).unwrap();
            for (i, p) in parts.iter().enumerate() {
                counts[i][p.value() as usize] += 1;
            }
        }
        let expected = trials as f64 / SMALL_PRIME as f64;
        for bins in counts {
            let chi2: f64 = bins.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            assert!(chi2 < chi2_critical((SMALL_PRIME - 1) as f64), "chi2 = {chi2}");
        }
    }

    /// Any two of three shares form a bijective image of the randomness,
    /// whatever the secret, so their joint distribution is secret-independent.
    #[test]
    fn any_two_of_three_shares_are_secret_independent() {
        let p = SMALL_PRIME as usize;
        let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
        for secret in 0..SMALL_PRIME {
            for &(i, j) in &pairs {
                let mut seen = vec![false; p * p];
                for r0 in 0..SMALL_PRIME {
                    for r1 in 0..SMALL_PRIME {
                        let parts = share_with(F101::new(secret), &[F101::new(r0), F101::new(r1)]);
                        let cell = parts[i].value() as usize * p + parts[j].value() as usize;
                        assert!(!seen[cell], "pair ({i},{j}) repeats for secret {secret}");
                        seen[cell] = true;
                    }
                }
            }
        }
    }

    #[test]
    fn local_linear_operations() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let ks = keys::<MERSENNE_61>(3, &mut rng);
        let a = auth_share_all(Fe::new(3), &ks, &mut rng);
        let b = auth_share_all(Fe::new(4), &ks, &mut rng);
        let zero = auth_share_all(Fe::ZERO, &ks, &mut rng);

        let sum: Vec<_> = a.iter().zip(&b).map(|(x, y)| *x + *y).collect();
        assert_eq!(global(&sum, &ks), (Fe::new(7), true));
        let same: Vec<_> = a.iter().zip(&zero).map(|(x, y)| *x + *y).collect();
        assert_eq!(global(&same, &ks), (Fe::new(3), true));

        let plus2: Vec<_> = a.iter().zip(&ks).map(|(s, k)| s.add_public(Fe::new(2), k)).collect();
        assert_eq!(global(&plus2, &ks), (Fe::new(5), true));
        let plus0: Vec<_> = a.iter().zip(&ks).map(|(s, k)| s.add_public(Fe::ZERO, k)).collect();
        assert_eq!(plus0, a);

        let times4: Vec<_> = a.iter().map(|s| s.scalar_mul(Fe::new(4))).collect();
        assert_eq!(global(&times4, &ks), (Fe::new(12), true));
        let times1: Vec<_> = a.iter().map(|s| *s * Fe::ONE).collect();
        assert_eq!(times1, a);
        let times0: Vec<_> = a.iter().map(|s| *s * Fe::ZERO).collect();
        assert_eq!(global(&times0, &ks), (Fe::ZERO, true));

        let c: Vec<_> = ks.iter().map(|k| AuthShare::constant(Fe::new(9), k)).collect();
        assert_eq!(global(&c, &ks), (Fe::new(9), true));
    }

    #[test]
    fn mac_relation_survives_random_linear_sequences() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for n in [2, 3, 5] {
            let ks = keys::<MERSENNE_61>(n, &mut rng);
            let mut value = Fe::random(&mut rng);
            let mut cur = auth_share_all(value, &ks, &mut rng);
            for _ in 0..100 {
                match rng.gen_range(0..4) {
                    0 => {
                        let v = Fe::random(&mut rng);
                        let other = auth_share_all(v, &ks, &mut rng);
                        cur = cur.iter().zip(&other).map(|(x, y)| *x + *y).collect();
                        value += v;
                    }
                    1 => {
                        let c = Fe::random(&mut rng);
                        cur = cur.iter().zip(&ks).map(|(s, k)| s.add_public(c, k)).collect();
                        value += c;
                    }
                    2 => {
                        let k = Fe::random(&mut rng);
                        cur = cur.iter().map(|s| *s * k).collect();
                        value *= k;
                    }
                    _ => {
                        let v = Fe::random(&mut rng);
                        let other = auth_share_all(v, &ks, &mut rng);
                        cur = cur.iter().zip(&other).map(|(x, y)| *x - *y).collect();
                        value -= v;
                    }
                }
                assert_eq!(global(&cur, &ks), (value, true));
            }
        }
    }

    #[test]
    fn linearity_of_reconstruction() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..200 {
            let (a, b, k) = (Fe::random(&mut rng), Fe::random(&mut rng), Fe::random(&mut rng));
            let pa = share(a, 4, &mut rng).unwrap();
            let pb = share(b, 4, &mut rng).unwrap();
            let combined: Vec<Fe> = pa.iter().zip(&pb).map(|(x, y)| k * *x + *y).collect();
            assert_eq!(open_parts(&combined), k * a + b);
        }
    }
}
