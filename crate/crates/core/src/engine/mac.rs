use sha3::{Digest, Sha3_256};

use crate::field::Fp;

/// An opened value and this party's MAC share on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogEntry<const P: u64> {
    pub value: Fp<P>,
    pub mac_share: Fp<P>,
}

/// `r_j = SHA3-256(seed || j)`, first 16 bytes as a little-endian integer, reduced mod p.
pub fn seed_coefficients<const P: u64>(seed: Fp<P>, count: usize) -> Vec<Fp<P>> {
    let prefix = seed.to_le_bytes();
    (0..count as u64)
        .map(|j| {
            let mut h = Sha3_256::new();
            h.update(prefix);
            h.update(j.to_le_bytes());
            let d = h.finalize();
            let wide = u128::from_le_bytes(d[..16].try_into().expect("16 bytes"));
            Fp::from_u128(wide)
        })
        .collect()
}

/// `e, e^2, ..., e^count`.
pub fn power_coefficients<const P: u64>(e: Fp<P>, count: usize) -> Vec<Fp<P>> {
    let mut acc = Fp::ONE;
    (0..count)
        .map(|_| {
            acc *= e;
            acc
        })
        .collect()
}

/// Returns `(a, gamma_i, sigma_i)` with `a = sum r_j a_j`,
/// `gamma_i = sum r_j gamma(a_j)_i` and `sigma_i = gamma_i - alpha_i a`.
pub fn combine_log<const P: u64>(
    log: &[LogEntry<P>],
    coeffs: &[Fp<P>],
    alpha_i: Fp<P>,
) -> (Fp<P>, Fp<P>, Fp<P>) {
    assert_eq!(log.len(), coeffs.len(), "one coefficient per opened value");
    let (a, gamma) = log
        .iter()
        .zip(coeffs)
        .fold((Fp::ZERO, Fp::ZERO), |(a, g), (e, &r)| (a + r * e.value, g + r * e.mac_share));
    (a, gamma, gamma - alpha_i * a)
}

/// The value the sacrifice step opens, on clear values: with
/// `rho = t*a - f` and `sigma = b - g` it is `t*c - h - sigma*f - rho*g - sigma*rho`,
/// which equals `t*(c - ab) - (h - fg)`. Zero for two good triples.
pub fn sacrifice_residual<const P: u64>(t: Fp<P>, used: [Fp<P>; 3], spent: [Fp<P>; 3]) -> Fp<P> {
    let [a, b, c] = used;
    let [f, g, h] = spent;
    let rho = t * a - f;
    let sigma = b - g;
    t * c - h - sigma * f - rho * g - sigma * rho
}
