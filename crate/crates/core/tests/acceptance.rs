//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. `ACCEPTANCE_ONLY=1,7` limits the run.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use mpc_core::auction::{auction_inputs, decode_outcome, vickrey_circuit, vickrey_plain};
use mpc_core::chain::{coordinated_table, verify_proof};
use mpc_core::circuit::{random_circuit, Circuit, CircuitBuilder, RandomCircuitParams};
use mpc_core::engine::{run_session, sacrifice_residual, AbortReason, ComputationProof, Roster, Session, SessionFailure, SessionResult};
use mpc_core::field::{Fe, Fp, MERSENNE_61, SMALL_PRIME};
use mpc_core::gadgets::flmul_plain;
use mpc_core::quorum::{drf_round, select_quorum, simulate_drf, DrfError, Reveal};
use mpc_core::transport::{AdversarySpec, Behavior, MsgType};

type C = Circuit<MERSENNE_61>;
type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn random_inputs(c: &C, n: usize, r: &mut ChaCha20Rng) -> Vec<Vec<Fe>> {
    c.inputs_per_party(n).into_iter().map(|k| (0..k).map(|_| Fe::random(r)).collect()).collect()
}

fn session(c: &C, n: usize, seed: u64) -> Session<MERSENNE_61> {
    Session::dealt(n, c.cost().unwrap().preproc_counts(), seed).unwrap().0
}

fn run(c: &C, inputs: &[Vec<Fe>], n: usize, seed: u64, adv: AdversarySpec) -> Result<SessionResult<MERSENNE_61>, SessionFailure> {
    run_session(c, inputs, session(c, n, seed).with_adversary(adv))
}

fn small_circuit(n: usize, muls: usize, r: &mut ChaCha20Rng) -> C {
    let p = RandomCircuitParams { parties: n, inputs_per_party: 2, muls, linear: muls, depth: 3, outputs: 2 };
    random_circuit(p, r)
}

fn oracle_equivalence() -> Outcome {
    let ns = [2usize, 3, 5, 10];
    let start = Instant::now();
    let mut total_muls = 0;
    for seed in 0..100u64 {
        let n = ns[seed as usize % 4];
        let muls = (100 * (seed as usize + 1)).min(10_000);
        let mut r = rng(seed);
        let p = RandomCircuitParams { parties: n, inputs_per_party: 2, muls, linear: muls, depth: 10, outputs: 4 };
        let c: C = random_circuit(p, &mut r);
        let inputs = random_inputs(&c, n, &mut r);
        let expect = c.eval_plaintext(&inputs).unwrap();
        let got = run(&c, &inputs, n, seed, AdversarySpec::honest()).map_err(|e| format!("seed {seed}: {}", e.error))?;
        if got.outputs != expect {
            return Err(format!("seed {seed}: outputs differ from plaintext evaluation"));
        }
        total_muls += muls;
    }
    let t = start.elapsed();
    if t > Duration::from_secs(600) {
        return Err(format!("took {t:.1?}"));
    }
    println!("  100/100 circuits match, {total_muls} multiplications in {t:.1?}");
    Ok(())
}

/// Elements party `p` sends in `open` and `mul-open` messages during an honest run.
fn opened_per_party(r: &SessionResult<MERSENNE_61>, n: u64) -> u64 {
    (r.stats.sent(MsgType::Open) + r.stats.sent(MsgType::MulOpen)) / n
}

fn tamper_soundness() -> Outcome {
    let n = 3;
    let mut r = rng(2000);
    let mut kinds = [0usize; 4];
    for run_i in 0..1000u64 {
        let c = small_circuit(n, r.gen_range(1..8), &mut r);
        let inputs = random_inputs(&c, n, &mut r);
        let honest = run(&c, &inputs, n, run_i, AdversarySpec::honest()).unwrap();
        let party = r.gen_range(0..n);
        let offset = loop {
            let o: i64 = r.gen_range(-1000..1000);
            if o != 0 {
                break o;
            }
        };
        let kind = run_i as usize % 4;
        kinds[kind] += 1;
        let b = match kind {
            0 => Behavior::TamperOpen { offset, at: Some(r.gen_range(0..opened_per_party(&honest, n as u64))) },
            1 => Behavior::WrongEpsilon { offset, at: Some(r.gen_range(0..honest.stats.sent(MsgType::MulOpen) / n as u64)) },
            2 => Behavior::TamperOutput { offset, at: Some(r.gen_range(0..c.n_outputs() as u64)) },
            _ => Behavior::TamperMac { offset },
        };
        match run(&c, &inputs, n, run_i, AdversarySpec::single(party, b)) {
            Ok(_) => return Err(format!("run {run_i}: {b} went undetected")),
            Err(e) => match e.abort().map(|a| a.reason) {
                Some(AbortReason::MacCheckFailed | AbortReason::PreprocessingCorrupt) => {}
                other => return Err(format!("run {run_i}: {b} ended with {other:?}")),
            },
        }
    }
    println!("  1000/1000 detected (open {}, epsilon/delta {}, output {}, mac {})", kinds[0], kinds[1], kinds[2], kinds[3]);
    Ok(())
}

fn sacrifice_detection() -> Outcome {
    let n = 3;
    let mut r = rng(3000);
    for run_i in 0..1000u64 {
        let muls = r.gen_range(1..6);
        let c = small_circuit(n, muls, &mut r);
        let inputs = random_inputs(&c, n, &mut r);
        let offset = loop {
            let o: i64 = r.gen();
            if Fe::from_i64(o) != Fe::ZERO {
                break o;
            }
        };
        let b = Behavior::CorruptTriple { index: r.gen_range(0..2 * muls), offset };
        let spec = AdversarySpec::single(r.gen_range(0..n), b);
        match run(&c, &inputs, n, run_i, spec) {
            Err(e) if e.abort().map(|a| a.reason) == Some(AbortReason::PreprocessingCorrupt) => {}
            Err(e) => return Err(format!("run {run_i}: {b} ended with {}", e.error)),
            Ok(_) => return Err(format!("run {run_i}: {b} went undetected")),
        }
    }
    // In F_101 every nonzero corruption is missed by exactly one challenge.
    type F = Fp<SMALL_PRIME>;
    let mut r = rng(3001);
    for k in 1..SMALL_PRIME {
        let [a, b, f, g] = [0; 4].map(|_| F::random(&mut r));
        let spent = [f, g, f * g];
        let bad = [a, b, a * b + F::new(k)];
        let caught = (0..SMALL_PRIME).filter(|&t| !sacrifice_residual(F::new(t), bad, spent).is_zero()).count();
        if caught as u64 != SMALL_PRIME - 1 {
            return Err(format!("k={k}: {caught}/101 challenges detect"));
        }
    }
    println!("  1000/1000 corrupted triples detected; F_101 detection is 100/101 for every k");
    Ok(())
}

fn mac_identity() -> Outcome {
    let mut r = rng(4000);
    for s in 0..1000u64 {
        let n = [2, 3, 4, 5][s as usize % 4];
        let c = small_circuit(n, r.gen_range(0..6), &mut r);
        let inputs = random_inputs(&c, n, &mut r);
        let res = run(&c, &inputs, n, s, AdversarySpec::honest()).map_err(|e| format!("session {s}: {}", e.error))?;
        let sum = res.proof.sigmas.iter().fold(Fe::ZERO, |acc, &x| acc + x);
        if !sum.is_zero() {
            return Err(format!("session {s}: sum of sigmas is {sum}"));
        }
    }
    println!("  sum of broadcast sigmas is 0 in 1000/1000 honest sessions");
    Ok(())
}

fn coordinated_chance() -> Outcome {
    let expect = ["0.00%", "0.00%", "0.00%", "0.00%", "0.00%", "0.59%", "13.26%", "36.60%"];
    let rows = coordinated_table(100);
    for ((f, q, c), e) in rows.iter().zip(expect) {
        println!("  {f} {q} {c}");
        if c != e {
            return Err(format!("{f}: {c} != {e}"));
        }
    }
    Ok(())
}

fn vickrey() -> Outcome {
    const BIDDERS: usize = 100;
    const PARTIES: usize = 3;
    let circuit = vickrey_circuit::<MERSENNE_61>(BIDDERS, PARTIES, 32).unwrap();
    let counts = circuit.cost().unwrap().preproc_counts();
    let (mut offline, mut online) = (Duration::ZERO, Duration::ZERO);
    for run_i in 0..50u64 {
        let mut r = rng(6000 + run_i);
        let bids: Vec<u64> = (0..BIDDERS).map(|_| r.gen_range(0..1u64 << 32)).collect();
        let t0 = Instant::now();
        let (s, _) = Session::<MERSENNE_61>::dealt(PARTIES, counts, run_i).unwrap();
        offline += t0.elapsed();
        let t1 = Instant::now();
        let res = run_session(&circuit, &auction_inputs(&bids, PARTIES, 32).unwrap(), s).map_err(|e| e.error.to_string())?;
        online += t1.elapsed();
        let got = decode_outcome(&res.outputs);
        let want = vickrey_plain(&bids).unwrap();
        if got != want {
            return Err(format!("run {run_i}: {got:?} != {want:?}"));
        }
    }
    println!("  50/50 match with {PARTIES} parties; {} triples per auction", counts.triples);
    println!("  mean offline {:.1?}, mean online {:.1?}", offline / 50, online / 50);

    // One run with a party per bidder.
    let circuit = vickrey_circuit::<MERSENNE_61>(BIDDERS, BIDDERS, 32).unwrap();
    let mut r = rng(6100);
    let bids: Vec<u64> = (0..BIDDERS).map(|_| r.gen_range(0..1u64 << 32)).collect();
    let t0 = Instant::now();
    let (s, _) = Session::<MERSENNE_61>::dealt(BIDDERS, circuit.cost().unwrap().preproc_counts(), 6100).unwrap();
    let offline = t0.elapsed();
    let t1 = Instant::now();
    let res = run_session(&circuit, &auction_inputs(&bids, BIDDERS, 32).unwrap(), s).map_err(|e| e.error.to_string())?;
    let online = t1.elapsed();
    if decode_outcome(&res.outputs) != vickrey_plain(&bids).unwrap() {
        return Err("100-party run differs from the oracle".into());
    }
    println!("  {BIDDERS} parties, one bid each: match; offline {offline:.1?}, online {online:.1?}");
    Ok(())
}

fn proof_for(muls: usize) -> (ComputationProof<MERSENNE_61>, Roster) {
    let n = 3;
    let mut r = rng(7000 + muls as u64);
    let p = RandomCircuitParams { parties: n, inputs_per_party: 2, muls, linear: muls, depth: 10, outputs: 1 };
    let c: C = random_circuit(p, &mut r);
    let inputs = random_inputs(&c, n, &mut r);
    let res = run(&c, &inputs, n, muls as u64, AdversarySpec::honest()).unwrap();
    (res.proof, res.roster)
}

fn constant_verification() -> Outcome {
    let proofs: Vec<_> = [100, 1000, 10_000].map(proof_for).into();
    for (p, r) in &proofs {
        verify_proof(p, r).map_err(|e| e.to_string())?;
    }
    let mut samples = vec![Vec::new(); proofs.len()];
    for _ in 0..100 {
        for (i, (p, r)) in proofs.iter().enumerate() {
            let t = Instant::now();
            let ok = verify_proof(p, r);
            samples[i].push(t.elapsed());
            assert!(ok.is_ok());
        }
    }
    let medians: Vec<Duration> = samples
        .into_iter()
        .map(|mut s| {
            s.sort();
            s[s.len() / 2]
        })
        .collect();
    let (lo, hi) = (*medians.iter().min().unwrap(), *medians.iter().max().unwrap());
    let spread = (hi.as_secs_f64() - lo.as_secs_f64()) / lo.as_secs_f64();
    println!("  medians {:?} at 10^2, 10^3, 10^4 multiplications; spread {:.1}%", medians, spread * 100.0);
    if spread >= 0.10 {
        return Err(format!("spread {:.1}% is not under 10%", spread * 100.0));
    }
    Ok(())
}

fn drf_integrity() -> Outcome {
    let nodes: Vec<usize> = (0..10).collect();
    let mut r = rng(8000);
    for round in 0..1000u64 {
        let (tickets, mut reveals) = simulate_drf(&nodes, round);
        let cheat = r.gen_range(0..nodes.len());
        let mut forged = reveals[cheat].seed;
        forged[r.gen_range(0..forged.len())] ^= 1 << r.gen_range(0..8);
        reveals[cheat] = Reveal { node: cheat, seed: forged };
        match drf_round(&tickets, &reveals) {
            Err(DrfError::Forged(n)) if n == cheat => {}
            other => return Err(format!("round {round}: expected forgery by {cheat}, got {other:?}")),
        }
    }
    const DRAWS: u64 = 100_000;
    let mut selected = [0u64; 10];
    let mut provers = [0u64; 10];
    for d in 0..DRAWS {
        let (tickets, reveals) = simulate_drf(&nodes, 1_000_000 + d);
        let p = drf_round(&tickets, &reveals).unwrap();
        let q = select_quorum(p, &nodes, 3, &[]).unwrap();
        if q.selected.iter().collect::<BTreeSet<_>>().len() != 3 {
            return Err(format!("draw {d}: repeated member"));
        }
        for &s in &q.selected {
            selected[s] += 1;
        }
        provers[q.prover] += 1;
    }
    let dev = |counts: &[u64; 10], expect: f64| counts.iter().map(|&c| (c as f64 / DRAWS as f64 - expect).abs()).fold(0.0, f64::max);
    let (ds, dp) = (dev(&selected, 0.3), dev(&provers, 0.1));
    println!("  1000/1000 forgeries attributed; max deviation {:.3}% selection, {:.3}% prover", ds * 100.0, dp * 100.0);
    if ds >= 0.01 || dp >= 0.01 {
        return Err("selection frequency outside 1%".into());
    }
    Ok(())
}

fn flmul_exhaustive() -> Outcome {
    const L: u32 = 8;
    const CHUNK: usize = 2048;
    let n = 3;
    let start = Instant::now();
    let signed = Fe::from_i64;
    let mut cases: Vec<([Fe; 4], [Fe; 4])> = Vec::new();
    let mantissas: Vec<u64> = (1 << (L - 1)..1 << L).collect();
    for (i, &a) in mantissas.iter().enumerate() {
        for (j, &b) in mantissas.iter().enumerate() {
            // Exponents and signs vary with the pair so every sign combination appears.
            let (ea, eb) = (signed((i % 11) as i64 - 5 - L as i64), signed((j % 7) as i64 - 3 - L as i64));
            let (sa, sb) = (Fe::new((i % 2) as u64), Fe::new((j % 2) as u64));
            cases.push(([Fe::new(a), ea, Fe::ZERO, sa], [Fe::new(b), eb, Fe::ZERO, sb]));
        }
    }
    let zero = |s: u64| [Fe::ZERO, Fe::ZERO, Fe::ONE, Fe::new(s)];
    for (i, &a) in mantissas.iter().enumerate() {
        let x = [Fe::new(a), signed(-(L as i64)), Fe::ZERO, Fe::new((i % 2) as u64)];
        cases.push((zero((i / 2 % 2) as u64), x));
        cases.push((x, zero((i / 2 % 2) as u64)));
    }
    for s in 0..4 {
        cases.push((zero(s & 1), zero(s >> 1)));
    }
    for (ci, chunk) in cases.chunks(CHUNK).enumerate() {
        let mut b = CircuitBuilder::<MERSENNE_61>::new();
        let mut inputs = vec![Vec::new(), Vec::new(), Vec::new()];
        for (x, y) in chunk {
            let xw = [0; 4].map(|_| b.input(0));
            let yw = [0; 4].map(|_| b.input(1));
            inputs[0].extend_from_slice(x);
            inputs[1].extend_from_slice(y);
            for w in b.flmul(L, xw, yw) {
                b.output(w);
            }
        }
        let c = b.build();
        let res = run(&c, &inputs, n, ci as u64, AdversarySpec::honest()).map_err(|e| e.error.to_string())?;
        for (k, (x, y)) in chunk.iter().enumerate() {
            let want = flmul_plain::<MERSENNE_61>(L, *x, *y);
            if res.outputs[4 * k..4 * k + 4] != want {
                return Err(format!("{x:?} * {y:?}: got {:?}, want {want:?}", &res.outputs[4 * k..4 * k + 4]));
            }
        }
    }
    let t = start.elapsed();
    println!("  {} products match the plaintext oracle in {t:.1?}", cases.len());
    if t > Duration::from_secs(300) {
        return Err(format!("took {t:.1?}"));
    }
    Ok(())
}

fn determinism() -> Outcome {
    let n = 3;
    let mut r = rng(10_000);
    let c = small_circuit(n, 20, &mut r);
    let inputs = random_inputs(&c, n, &mut r);
    let configs: [(&str, u64); 3] = [("", 1), ("1:tamper-open:+1@3", 2), ("2:abort-at:5", 3)];
    for (adv, seed) in configs {
        let spec: AdversarySpec = adv.parse().unwrap();
        let heads: BTreeSet<String> = (0..5)
            .map(|_| match run(&c, &inputs, n, seed, spec.clone()) {
                Ok(res) => res.transcript.head_hex(),
                Err(e) => e.transcript.map(|t| t.head_hex()).unwrap_or_default(),
            })
            .collect();
        if heads.len() != 1 {
            return Err(format!("adversary {adv:?}: {} distinct transcript hashes", heads.len()));
        }
    }
    println!("  identical transcript hash across 5 runs for honest, tampering and aborting configurations");
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("tamper soundness", tamper_soundness),
        ("sacrifice detection", sacrifice_detection),
        ("mac identity", mac_identity),
        ("coordinated chance table", coordinated_chance),
        ("vickrey auction", vickrey),
        ("constant-time verification", constant_verification),
        ("drf integrity", drf_integrity),
        ("flmul exhaustive", flmul_exhaustive),
        ("determinism", determinism),
    ];
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        match r {
            Ok(()) => println!("PASS {id:>2} {name} ({:.1?})", t.elapsed()),
            Err(e) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
