//! Dealer-emulated offline phase.
//!
//! A trusted dealer samples the MAC key and all correlated randomness and hands
//! each party only its own shares. The global key and the cleartext values stay
//! inside [`DealerView`], which nothing on the online path can reach.

use std::io::{self, Read, Write};

use rand::Rng;
use thiserror::Error;

use crate::field::Fp;
use crate::sharing::{share, AuthShare, MacKeyShare, PartyId, SharingError};

pub const BUNDLE_MAGIC: &[u8; 8] = b"ARPAPRE1";

#[derive(Debug, Error)]
pub enum PreprocError {
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error("bundle io: {0}")]
    Io(#[from] io::Error),
    #[error("bad bundle magic")]
    BadMagic,
    #[error("bundle modulus {found} does not match expected {expected}")]
    ModulusMismatch { expected: u64, found: u64 },
    #[error("malformed bundle: {0}")]
    Malformed(String),
    #[error("count must be at least 1")]
    EmptyRequest,
}

/// What the dealer alone knows. Tests use it as an oracle.
#[derive(Debug, Clone)]
pub struct DealerView<const P: u64> {
    pub alpha: Fp<P>,
}

impl<const P: u64> DealerView<P> {
    /// Opens an authenticated sharing and reports whether its MAC is consistent.
    pub fn open_checked(&self, shares: &[AuthShare<P>]) -> (Fp<P>, bool) {
        let x: Fp<P> = shares.iter().map(|s| s.value_share).sum();
        let m: Fp<P> = shares.iter().map(|s| s.mac_share).sum();
        (x, m == self.alpha * x)
    }
}

/// One Beaver triple, as the per-party share sets of `a`, `b`, `c = a*b`.
#[derive(Debug, Clone)]
pub struct Triple<const P: u64> {
    pub a: Vec<AuthShare<P>>,
    pub b: Vec<AuthShare<P>>,
    pub c: Vec<AuthShare<P>>,
}

/// A single party's slice of a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripleShare<const P: u64> {
    pub a: AuthShare<P>,
    pub b: AuthShare<P>,
    pub c: AuthShare<P>,
}

pub struct Dealer<'r, const P: u64, R: Rng> {
    n: usize,
    alpha: Fp<P>,
    rng: &'r mut R,
}

impl<'r, const P: u64, R: Rng> Dealer<'r, P, R> {
    /// Samples per-party key shares; the sum is kept in the dealer view.
    pub fn init(n: usize, rng: &'r mut R) -> Result<(Self, Vec<MacKeyShare<P>>), PreprocError> {
        if n < 2 {
            return Err(SharingError::TooFewParties(n).into());
        }
        let keys: Vec<MacKeyShare<P>> =
            (0..n).map(|party| MacKeyShare { party, alpha: Fp::random(rng) }).collect();
        let alpha = keys.iter().map(|k| k.alpha).sum();
        Ok((Self { n, alpha, rng }, keys))
    }

    pub fn view(&self) -> DealerView<P> {
        DealerView { alpha: self.alpha }
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    /// Authenticated sharing of a value the dealer chooses.
    pub fn auth_share(&mut self, x: Fp<P>) -> Vec<AuthShare<P>> {
        let vals = share(x, self.n, self.rng).expect("n >= 2 checked at init");
        let macs = share(self.alpha * x, self.n, self.rng).expect("n >= 2 checked at init");
        vals.into_iter()
            .zip(macs)
            .enumerate()
            .map(|(i, (v, m))| AuthShare::new(i, v, m))
            .collect()
    }

    pub fn gen_triples(&mut self, count: usize) -> Result<Vec<Triple<P>>, PreprocError> {
        if count == 0 {
            return Err(PreprocError::EmptyRequest);
        }
        Ok((0..count)
            .map(|_| {
                let a = Fp::random(self.rng);
                let b = Fp::random(self.rng);
                Triple { a: self.auth_share(a), b: self.auth_share(b), c: self.auth_share(a * b) }
            })
            .collect())
    }

    pub fn gen_masks(&mut self, count: usize) -> Result<Vec<Vec<AuthShare<P>>>, PreprocError> {
        if count == 0 {
            return Err(PreprocError::EmptyRequest);
        }
        Ok((0..count)
            .map(|_| {
                let r = Fp::random(self.rng);
                self.auth_share(r)
            })
            .collect())
    }

    pub fn gen_bits(&mut self, count: usize) -> Result<Vec<Vec<AuthShare<P>>>, PreprocError> {
        if count == 0 {
            return Err(PreprocError::EmptyRequest);
        }
        Ok((0..count)
            .map(|_| {
                let bit = Fp::random_bit(self.rng);
                self.auth_share(bit)
            })
            .collect())
    }
}

/// How much of each resource to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PreprocCounts {
    pub triples: usize,
    pub masks: usize,
    pub singles: usize,
    pub bits: usize,
}

/// Everything one party needs for the online phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyPreproc<const P: u64> {
    pub party: PartyId,
    pub mac_key: MacKeyShare<P>,
    pub triples: Vec<TripleShare<P>>,
    pub masks: Vec<AuthShare<P>>,
    pub singles: Vec<AuthShare<P>>,
    pub bits: Vec<AuthShare<P>>,
}

/// Per-party material for one session, bound to `(session_id, n, modulus)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocBundle<const P: u64> {
    pub session_id: u64,
    pub parties: Vec<PartyPreproc<P>>,
}

impl<const P: u64> PreprocBundle<P> {
    pub fn n(&self) -> usize {
        self.parties.len()
    }

    pub fn counts(&self) -> PreprocCounts {
        let p = &self.parties[0];
        PreprocCounts {
            triples: p.triples.len(),
            masks: p.masks.len(),
            singles: p.singles.len(),
            bits: p.bits.len(),
        }
    }

    /// Runs the dealer for a whole session. Zero counts are allowed here.
    pub fn generate<R: Rng>(
        n: usize,
        session_id: u64,
        counts: PreprocCounts,
        rng: &mut R,
    ) -> Result<(Self, DealerView<P>), PreprocError> {
        let (mut dealer, keys) = Dealer::<P, R>::init(n, rng)?;
        let triples = if counts.triples > 0 { dealer.gen_triples(counts.triples)? } else { vec![] };
        let masks = if counts.masks > 0 { dealer.gen_masks(counts.masks)? } else { vec![] };
        let singles = if counts.singles > 0 { dealer.gen_masks(counts.singles)? } else { vec![] };
        let bits = if counts.bits > 0 { dealer.gen_bits(counts.bits)? } else { vec![] };
        let view = dealer.view();
        let parties = (0..n)
            .map(|i| PartyPreproc {
                party: i,
                mac_key: keys[i],
                triples: triples
                    .iter()
                    .map(|t| TripleShare { a: t.a[i], b: t.b[i], c: t.c[i] })
                    .collect(),
                masks: masks.iter().map(|m| m[i]).collect(),
                singles: singles.iter().map(|m| m[i]).collect(),
                bits: bits.iter().map(|m| m[i]).collect(),
            })
            .collect();
        Ok((Self { session_id, parties }, view))
    }

    /// Binary format: magic, u32 n, u64 modulus, u64 session id, four u64
    /// counts, then key shares, triples, masks, singles and bits, each section
    /// in party-major order with 8-byte little-endian elements.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let c = self.counts();
        w.write_all(BUNDLE_MAGIC)?;
        w.write_all(&(self.n() as u32).to_le_bytes())?;
        w.write_all(&P.to_le_bytes())?;
        w.write_all(&self.session_id.to_le_bytes())?;
        for count in [c.triples, c.masks, c.singles, c.bits] {
            w.write_all(&(count as u64).to_le_bytes())?;
        }
        let put = |w: &mut W, s: &AuthShare<P>| -> io::Result<()> {
            w.write_all(&s.value_share.to_le_bytes())?;
            w.write_all(&s.mac_share.to_le_bytes())
        };
        for p in &self.parties {
            w.write_all(&p.mac_key.alpha.to_le_bytes())?;
        }
        for p in &self.parties {
            for t in &p.triples {
                put(&mut w, &t.a)?;
                put(&mut w, &t.b)?;
                put(&mut w, &t.c)?;
            }
        }
        let sections: [fn(&PartyPreproc<P>) -> &[AuthShare<P>]; 3] =
            [|p| &p.masks, |p| &p.singles, |p| &p.bits];
        for section in sections {
            for p in &self.parties {
                for s in section(p) {
                    put(&mut w, s)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<Rd: Read>(mut r: Rd) -> Result<Self, PreprocError> {
        let header = read_header(&mut r)?;
        if header.modulus != P {
            return Err(PreprocError::ModulusMismatch { expected: P, found: header.modulus });
        }
        let n = header.n;
        if n < 2 {
            return Err(PreprocError::Malformed(format!("party count {n}")));
        }
        let c = header.counts;
        let mut elem = || -> Result<Fp<P>, PreprocError> {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            Fp::from_le_bytes(buf).map_err(|e| PreprocError::Malformed(e.to_string()))
        };
        let mut parties: Vec<PartyPreproc<P>> = Vec::with_capacity(n);
        for party in 0..n {
            parties.push(PartyPreproc {
                party,
                mac_key: MacKeyShare { party, alpha: elem()? },
                triples: Vec::with_capacity(c.triples),
                masks: Vec::with_capacity(c.masks),
                singles: Vec::with_capacity(c.singles),
                bits: Vec::with_capacity(c.bits),
            });
        }
        let mut share = |party: PartyId| -> Result<AuthShare<P>, PreprocError> {
            let v = elem()?;
            let m = elem()?;
            Ok(AuthShare::new(party, v, m))
        };
        for p in parties.iter_mut() {
            for _ in 0..c.triples {
                let (a, b, cc) = (share(p.party)?, share(p.party)?, share(p.party)?);
                p.triples.push(TripleShare { a, b, c: cc });
            }
        }
        for p in parties.iter_mut() {
            for _ in 0..c.masks {
                p.masks.push(share(p.party)?);
            }
        }
        for p in parties.iter_mut() {
            for _ in 0..c.singles {
                p.singles.push(share(p.party)?);
            }
        }
        for p in parties.iter_mut() {
            for _ in 0..c.bits {
                p.bits.push(share(p.party)?);
            }
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(PreprocError::Malformed(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self { session_id: header.session_id, parties })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BundleHeader {
    pub n: usize,
    pub modulus: u64,
    pub session_id: u64,
    pub counts: PreprocCounts,
}

/// Reads only the fixed-size header, so callers can dispatch on the modulus.
pub fn read_header<Rd: Read>(r: &mut Rd) -> Result<BundleHeader, PreprocError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BUNDLE_MAGIC {
        return Err(PreprocError::BadMagic);
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let n = u32::from_le_bytes(u32b) as usize;
    let mut u64s = [0u64; 6];
    for v in u64s.iter_mut() {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        *v = u64::from_le_bytes(b);
    }
    let [modulus, session_id, triples, masks, singles, bits] = u64s;
    Ok(BundleHeader {
        n,
        modulus,
        session_id,
        counts: PreprocCounts {
            triples: triples as usize,
            masks: masks as usize,
            singles: singles as usize,
            bits: bits as usize,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Triples,
    Masks,
    Singles,
    Bits,
}

impl std::fmt::Display for Resource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Resource::Triples => "triples",
            Resource::Masks => "masks",
            Resource::Singles => "singles",
            Resource::Bits => "bits",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("preprocessed {resource} exhausted: wanted {wanted}, {remaining} remaining")]
pub struct Exhausted {
    pub resource: Resource,
    pub wanted: usize,
    pub remaining: usize,
}

/// Single-owner consuming view over a party's preprocessing.
/// Items are handed out in order and never twice.
#[derive(Debug)]
pub struct PreprocStore<const P: u64> {
    data: PartyPreproc<P>,
    used: PreprocCounts,
}

impl<const P: u64> PreprocStore<P> {
    pub fn new(data: PartyPreproc<P>) -> Self {
        Self { data, used: PreprocCounts::default() }
    }

    pub fn mac_key(&self) -> MacKeyShare<P> {
        self.data.mac_key
    }

    pub fn generated(&self) -> PreprocCounts {
        PreprocCounts {
            triples: self.data.triples.len(),
            masks: self.data.masks.len(),
            singles: self.data.singles.len(),
            bits: self.data.bits.len(),
        }
    }

    pub fn consumed(&self) -> PreprocCounts {
        self.used
    }

    pub fn remaining(&self) -> PreprocCounts {
        let g = self.generated();
        PreprocCounts {
            triples: g.triples - self.used.triples,
            masks: g.masks - self.used.masks,
            singles: g.singles - self.used.singles,
            bits: g.bits - self.used.bits,
        }
    }

    fn take<T: Copy>(items: &[T], used: &mut usize, count: usize, resource: Resource) -> Result<Vec<T>, Exhausted> {
        let remaining = items.len() - *used;
        if count > remaining {
            return Err(Exhausted { resource, wanted: count, remaining });
        }
        let out = items[*used..*used + count].to_vec();
        *used += count;
        Ok(out)
    }

    pub fn take_triples(&mut self, count: usize) -> Result<Vec<TripleShare<P>>, Exhausted> {
        Self::take(&self.data.triples, &mut self.used.triples, count, Resource::Triples)
    }

    pub fn take_masks(&mut self, count: usize) -> Result<Vec<AuthShare<P>>, Exhausted> {
        Self::take(&self.data.masks, &mut self.used.masks, count, Resource::Masks)
    }

    pub fn take_singles(&mut self, count: usize) -> Result<Vec<AuthShare<P>>, Exhausted> {
        Self::take(&self.data.singles, &mut self.used.singles, count, Resource::Singles)
    }

    pub fn take_bits(&mut self, count: usize) -> Result<Vec<AuthShare<P>>, Exhausted> {
        Self::take(&self.data.bits, &mut self.used.bits, count, Resource::Bits)
    }
}
