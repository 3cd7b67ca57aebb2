use rand::seq::SliceRandom;
use rand::Rng;

use super::{Circuit, CircuitBuilder, WireId};
use crate::field::Fp;

/// Shape of a random arithmetic circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomCircuitParams {
    pub parties: usize,
    pub inputs_per_party: usize,
    pub muls: usize,
    pub linear: usize,
    /// Multiplicative depth; clamped to `1..=muls` when there are multiplications.
    pub depth: usize,
    pub outputs: usize,
}

/// Layered random circuit with exactly `muls` multiplications and depth
/// `depth`. Every layer's first multiplication takes an operand from the
/// layer below, so the depth is exact.
pub fn random_circuit<const P: u64, R: Rng + ?Sized>(p: RandomCircuitParams, rng: &mut R) -> Circuit<P> {
    let mut b = CircuitBuilder::<P>::new();
    let mut by_depth: Vec<Vec<WireId>> = vec![Vec::new()];
    for party in 0..p.parties {
        for _ in 0..p.inputs_per_party {
            by_depth[0].push(b.input(party));
        }
    }
    if by_depth[0].is_empty() {
        by_depth[0].push(b.constant(Fp::random(rng)));
    }
    let depth = if p.muls == 0 { 0 } else { p.depth.clamp(1, p.muls) };
    let mut all: Vec<WireId> = by_depth[0].clone();
    let mut depth_of: Vec<usize> = vec![0; all.iter().max().map_or(0, |m| m + 1)];
    let set_depth = |depth_of: &mut Vec<usize>, w: WireId, d: usize| {
        if depth_of.len() <= w {
            depth_of.resize(w + 1, 0);
        }
        depth_of[w] = d;
    };

    let linear_step = |b: &mut CircuitBuilder<P>, all: &mut Vec<WireId>, depth_of: &mut Vec<usize>, rng: &mut R| {
        let a = *all.choose(rng).expect("nonempty");
        let (w, d) = match rng.gen_range(0..3) {
            0 => {
                let c = *all.choose(rng).expect("nonempty");
                (b.add(a, c), depth_of[a].max(depth_of[c]))
            }
            1 => (b.add_const(Fp::random(rng), a), depth_of[a]),
            _ => (b.smul(Fp::random(rng), a), depth_of[a]),
        };
        set_depth(depth_of, w, d);
        all.push(w);
        w
    };

    let mut linear_left = p.linear;
    for d in 1..=depth {
        let muls_here = p.muls / depth + usize::from(d <= p.muls % depth);
        let linear_here = if d == depth { linear_left } else { p.linear / depth.max(1) };
        linear_left -= linear_here.min(linear_left);
        let mut layer = Vec::with_capacity(muls_here);
        let lower: Vec<WireId> = all.iter().copied().filter(|&w| depth_of[w] < d).collect();
        for i in 0..muls_here {
            let a = if i == 0 {
                *by_depth[d - 1].choose(rng).expect("previous layer nonempty")
            } else {
                *lower.choose(rng).expect("nonempty")
            };
            let c = *lower.choose(rng).expect("nonempty");
            let w = b.mul(a, c);
            let wd = depth_of[a].max(depth_of[c]) + 1;
            set_depth(&mut depth_of, w, wd);
            layer.push((w, wd));
        }
        by_depth.push(Vec::new());
        for (w, wd) in layer {
            all.push(w);
            by_depth[wd].push(w);
        }
        for _ in 0..linear_here {
            let w = linear_step(&mut b, &mut all, &mut depth_of, rng);
            by_depth[depth_of[w]].push(w);
        }
    }
    for _ in 0..linear_left {
        let w = linear_step(&mut b, &mut all, &mut depth_of, rng);
        by_depth[depth_of[w]].push(w);
    }
    // The deepest wire is always an output so the full depth is exercised.
    let last = *by_depth.last().and_then(|l| l.last()).unwrap_or(&all[0]);
    b.output(last);
    for _ in 1..p.outputs.max(1) {
        b.output(*all.choose(rng).expect("nonempty"));
    }
    b.build()
}
