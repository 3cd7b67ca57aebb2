use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::*;
use crate::circuit::{parse_circuit, Circuit, CircuitBuilder};
use crate::field::{decode_elements, Fe, Fp, MERSENNE_61, SMALL_PRIME};
use crate::preprocessing::PreprocCounts;
use crate::transport::{mul_open_deliveries, AdversarySpec, Behavior, MsgType};

type C = Circuit<MERSENNE_61>;

fn fe(v: u64) -> Fe {
    Fe::new(v)
}

fn circuit(text: &str) -> C {
    parse_circuit(text).unwrap()
}

fn session(c: &C, n: usize, seed: u64) -> Session<MERSENNE_61> {
    Session::dealt(n, c.cost().unwrap().preproc_counts(), seed).unwrap().0
}

const ONE_MUL: &str = "in 0 x\nin 1 y\nmul x y z\nout z\n";

#[test]
fn beaver_identity_on_the_worked_example() {
    // x=3, y=4 with triple (1, 2, 2): eps = 2, delta = 2.
    let (x, y, a, b, c) = (fe(3), fe(4), fe(1), fe(2), fe(2));
    let (eps, delta) = (x - a, y - b);
    assert_eq!((eps, delta), (fe(2), fe(2)));
    assert_eq!(c + eps * b + delta * a + eps * delta, fe(12));
}

#[test]
fn input_shares_reconstruct_with_valid_macs() {
    for x in [7u64, 0] {
        let (s, view) = Session::<MERSENNE_61>::dealt(3, PreprocCounts { masks: 1, ..Default::default() }, x).unwrap();
        let out = run_parties(s, |ctx| {
            let mine = if ctx.id() == 2 { vec![fe(x)] } else { vec![] };
            ctx.input_batch(&[2], &mine).map(|v| v[0])
        })
        .unwrap();
        let shares: Vec<_> = out.results.into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(view.open_checked(&shares), (fe(x), true));
        // One round of point-to-point mask shares, one broadcast of epsilon.
        assert_eq!(out.stats.rounds, 2);
    }
}

/// The epsilon broadcast for a fixed input, over many sessions in F_101.
fn observed_epsilons(x: u64, runs: u64) -> Vec<u64> {
    let counts = PreprocCounts { masks: 1, ..Default::default() };
    let mut hist = vec![0u64; SMALL_PRIME as usize];
    for seed in 0..runs {
        let (s, _) = Session::<SMALL_PRIME>::dealt(2, counts, seed * 7919 + x).unwrap();
        let out = run_parties(s, |ctx| {
            let mine = if ctx.id() == 1 { vec![Fp::new(x)] } else { vec![] };
            ctx.input_batch(&[1], &mine).map(|_| ())
        })
        .unwrap();
        let eps = out
            .transcript
            .entries()
            .iter()
            .find(|e| e.envelope.msg_type == MsgType::InputEps)
            .map(|e| decode_elements::<SMALL_PRIME>(&e.envelope.payload).unwrap()[0])
            .unwrap();
        hist[eps.value() as usize] += 1;
    }
    hist
}

fn chi_square_p_value(hist: &[u64]) -> f64 {
    let total: u64 = hist.iter().sum();
    let expected = total as f64 / hist.len() as f64;
    let stat: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((hist.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn epsilon_is_uniform_whatever_the_input() {
    for x in [0u64, 5, 100] {
        let hist = observed_epsilons(x, 30 * SMALL_PRIME);
        let p = chi_square_p_value(&hist);
        assert!(p > 1e-4, "x={x}: chi-square p-value {p}");
    }
}

#[test]
fn one_mul_circuit_outputs_product_with_valid_proof() {
    let c = circuit(ONE_MUL);
    let r = run_session(&c, &[vec![fe(3)], vec![fe(4)]], session(&c, 2, 1)).unwrap();
    assert_eq!(r.outputs, vec![fe(12)]);
    assert!(r.proof.sigma_sum().is_zero());
    for p in 0..2 {
        assert!(r.proof.signature_valid(p, r.roster.key(p).unwrap()));
    }
    assert_eq!(r.proof.results, r.outputs);
}

#[test]
fn zero_times_anything_is_zero() {
    let c = circuit(ONE_MUL);
    let r = run_session(&c, &[vec![fe(0)], vec![fe(987654321)]], session(&c, 2, 2)).unwrap();
    assert_eq!(r.outputs, vec![fe(0)]);
}

#[test]
fn constant_circuit_outputs_constant() {
    let c = circuit("const 5 k\nout k\n");
    let r = run_session(&c, &[vec![], vec![], vec![]], session(&c, 3, 3)).unwrap();
    assert_eq!(r.outputs, vec![fe(5)]);
    assert!(r.proof.sigma_sum().is_zero());
}

#[test]
fn consumption_matches_cost_report() {
    let c = circuit("bitwidth 8\nin 0 a\nin 1 b\nmul a b p\ncmp a b l\ntrunc 16 3 p t\nadd t l s\nout s\nout p\n");
    let cost = c.cost().unwrap();
    let inputs = [vec![fe(20)], vec![fe(30)]];
    let r = run_session(&c, &inputs, session(&c, 2, 4)).unwrap();
    assert_eq!(r.outputs, c.eval_plaintext(&inputs).unwrap());
    assert_eq!(r.consumed(), cost.preproc_counts());
    for rep in &r.reports {
        assert_eq!(rep.consumed, cost.preproc_counts());
        assert_eq!(rep.multiplications, cost.multiplications);
        assert_eq!(rep.opened, cost.openings);
    }
}

#[test]
fn short_bundle_is_a_usage_error() {
    let c = circuit(ONE_MUL);
    let mut counts = c.cost().unwrap().preproc_counts();
    counts.triples -= 1;
    let (s, _) = Session::dealt(2, counts, 5).unwrap();
    let e = run_session(&c, &[vec![fe(1)], vec![fe(2)]], s).unwrap_err();
    assert!(matches!(e.error, EngineError::Usage(_)), "{:?}", e.error);
}

#[test]
fn wrong_input_count_is_a_usage_error() {
    let c = circuit(ONE_MUL);
    let e = run_session(&c, &[vec![fe(1)], vec![]], session(&c, 2, 5)).unwrap_err();
    assert!(matches!(e.error, EngineError::Usage(_)));
}

fn run_with(c: &C, n: usize, seed: u64, adv: &str) -> Result<SessionResult<MERSENNE_61>, SessionFailure> {
    let inputs: Vec<Vec<Fe>> = c.inputs_per_party(n).iter().enumerate().map(|(p, &k)| vec![fe(p as u64 + 3); k]).collect();
    run_session(c, &inputs, session(c, n, seed).with_adversary(adv.parse().unwrap()))
}

fn abort_reason(r: Result<SessionResult<MERSENNE_61>, SessionFailure>) -> AbortReason {
    r.expect_err("tampering must be detected").abort().expect("an abort").reason
}

#[test]
fn corrupted_triples_fail_the_sacrifice() {
    let c = circuit(ONE_MUL);
    for spec in ["0:corrupt-triple:0:+1", "1:corrupt-triple:1:-5", "2:corrupt-triple:0:+12345"] {
        assert_eq!(abort_reason(run_with(&c, 3, 6, spec)), AbortReason::PreprocessingCorrupt, "{spec}");
    }
}

#[test]
fn sacrifice_detects_all_but_one_challenge_in_small_field() {
    // For every corruption k != 0 exactly one of the p challenges misses it.
    type F = Fp<SMALL_PRIME>;
    let (a, b, f, g) = (F::new(17), F::new(33), F::new(58), F::new(91));
    let good_spent = [f, g, f * g];
    for k in 1..SMALL_PRIME {
        let bad = [a, b, a * b + F::new(k)];
        let missed = (0..SMALL_PRIME).filter(|&t| sacrifice_residual(F::new(t), bad, good_spent).is_zero()).count();
        assert_eq!(missed, 1, "k={k}");
        assert!(sacrifice_residual(F::ZERO, bad, good_spent).is_zero());
    }
    for t in 0..SMALL_PRIME {
        assert!(sacrifice_residual(F::new(t), [a, b, a * b], good_spent).is_zero());
    }
}

#[test]
fn tampered_openings_are_caught() {
    let c = circuit("in 0 x\nin 1 y\nmul x y z\nmul z x w\nout w\n");
    let honest = run_with(&c, 3, 7, "").unwrap();
    let sent = honest.stats.sent(MsgType::Open) / 3 + honest.stats.sent(MsgType::MulOpen) / 3;
    for idx in 0..sent {
        let reason = abort_reason(run_with(&c, 3, 7, &format!("1:tamper-open:+1@{idx}")));
        assert!(matches!(reason, AbortReason::MacCheckFailed | AbortReason::PreprocessingCorrupt), "@{idx}: {reason}");
    }
    for idx in 0..honest.stats.sent(MsgType::MulOpen) / 3 {
        let reason = abort_reason(run_with(&c, 3, 7, &format!("2:wrong-epsilon:-3@{idx}")));
        assert_eq!(reason, AbortReason::MacCheckFailed);
    }
}

#[test]
fn tampered_output_share_withholds_the_result() {
    let c = circuit(ONE_MUL);
    for check in [OutputCheck::SigmaSum, OutputCheck::OpenAlpha] {
        let config = EngineConfig { output_check: check, ..Default::default() };
        let s = session(&c, 3, 8).with_adversary("0:tamper-output:+1".parse().unwrap()).with_config(config);
        let e = run_session(&c, &[vec![fe(3)], vec![fe(4)], vec![]], s).unwrap_err();
        assert_eq!(e.abort().unwrap().reason, AbortReason::MacCheckFailed, "{check:?}");
    }
}

#[test]
fn tampered_mac_value_fails_the_check() {
    let c = circuit(ONE_MUL);
    assert_eq!(abort_reason(run_with(&c, 2, 9, "1:tamper-mac:+1")), AbortReason::MacCheckFailed);
}

#[test]
fn abort_attack_blames_the_silent_party() {
    let c = circuit("in 0 x\nin 1 y\nmul x y a\nmul a y b\nmul b y d\nmul d y e\nout e\n");
    let e = run_with(&c, 4, 10, "3:abort-at:10").unwrap_err();
    let abort = e.abort().unwrap();
    assert_eq!(abort.reason, AbortReason::AbortAttack);
    assert_eq!(abort.blamed, Some(3));
    assert_eq!(abort.round, 10);
    let t = e.transcript.unwrap();
    assert!(t.entries().iter().all(|en| en.envelope.round < 10));
}

#[test]
fn abort_timeout_is_reported_after_the_grace_rounds() {
    let c = circuit("in 0 x\nin 1 y\nmul x y a\nmul a y b\nmul b y d\nout d\n");
    let config = EngineConfig { timeout_rounds: 3, ..Default::default() };
    let s = session(&c, 3, 11).with_adversary("1:abort-at:4".parse().unwrap()).with_config(config);
    let e = run_session(&c, &[vec![fe(2)], vec![fe(5)], vec![]], s).unwrap_err();
    assert_eq!(e.abort().unwrap().round, 6);
    assert_eq!(e.abort().unwrap().blamed, Some(1));
}

#[test]
fn same_seed_same_transcript() {
    let c = circuit("bitwidth 16\nin 0 x\nin 1 y\nin 2 z\nmul x y a\ncmp a z b\nadd a b o\nout o\n");
    let inputs = [vec![fe(11)], vec![fe(12)], vec![fe(200)]];
    let heads: Vec<_> = (0..3).map(|_| run_session(&c, &inputs, session(&c, 3, 12)).unwrap().transcript.head()).collect();
    assert!(heads.windows(2).all(|w| w[0] == w[1]));
    let other = run_session(&c, &inputs, session(&c, 3, 13)).unwrap().transcript.head();
    assert_ne!(heads[0], other);
}

#[test]
fn aborted_runs_are_deterministic_too() {
    let c = circuit(ONE_MUL);
    let head = |_: u32| run_with(&c, 3, 14, "2:tamper-open:+9@4").unwrap_err().transcript.unwrap().head();
    assert_eq!(head(0), head(1));
}

#[test]
fn open_alpha_variant_agrees_with_default() {
    let c = circuit("in 0 x\nin 1 y\nmul x y z\nadd z x w\nout z\nout w\n");
    let inputs = [vec![fe(6)], vec![fe(7)]];
    let config = EngineConfig { output_check: OutputCheck::OpenAlpha, ..Default::default() };
    let a = run_session(&c, &inputs, session(&c, 2, 15).with_config(config)).unwrap();
    let b = run_session(&c, &inputs, session(&c, 2, 15)).unwrap();
    assert_eq!(a.outputs, vec![fe(42), fe(48)]);
    assert_eq!(a.outputs, b.outputs);
    assert!(a.proof.sigma_sum().is_zero());
}

#[test]
fn periodic_checks_add_rounds_but_not_results() {
    let c = circuit("in 0 x\nin 1 y\nmul x y a\nmul a y b\nmul b y d\nout d\n");
    let inputs = [vec![fe(2)], vec![fe(3)]];
    let plain = run_session(&c, &inputs, session(&c, 2, 16)).unwrap();
    let config = EngineConfig { mac_check_interval: Some(1), ..Default::default() };
    let checked = run_session(&c, &inputs, session(&c, 2, 16).with_config(config)).unwrap();
    assert_eq!(checked.outputs, vec![fe(54)]);
    assert_eq!(plain.outputs, checked.outputs);
    // One seed commit/reveal and one sigma commit/reveal per layer.
    assert_eq!(checked.stats.rounds, plain.stats.rounds + 3 * 4);
    // A tamper is then caught before the output phase.
    let s = session(&c, 2, 16).with_config(config).with_adversary("1:tamper-open:+1@0".parse().unwrap());
    let e = run_session(&c, &inputs, s).unwrap_err();
    assert_eq!(e.abort().unwrap().reason, AbortReason::MacCheckFailed);
    assert!(e.abort().unwrap().round < plain.stats.rounds);
}

#[test]
fn linear_operations_send_nothing() {
    let counts = PreprocCounts { masks: 2, ..Default::default() };
    let (s, view) = Session::<MERSENNE_61>::dealt(3, counts, 17).unwrap();
    let out = run_parties(s, |ctx| {
        let mine = if ctx.id() == 0 { vec![fe(10), fe(20)] } else { vec![] };
        let v = ctx.input_batch(&[0, 0], &mine)?;
        let before = ctx.round();
        let w = ctx.add_const(v[0] * fe(3) + v[1] - v[0], fe(1000));
        let w = w - ctx.constant(fe(1));
        assert_eq!(ctx.round(), before);
        Ok::<_, EngineError>(w)
    })
    .unwrap();
    assert_eq!(out.stats.rounds, 2);
    let shares: Vec<_> = out.results.into_iter().map(|r| r.unwrap()).collect();
    assert_eq!(view.open_checked(&shares), (fe(3 * 10 + 20 - 10 + 1000 - 1), true));
}

#[test]
fn mul_open_deliveries_follow_the_formula() {
    for n in [2usize, 3, 5] {
        let mut b = CircuitBuilder::<MERSENNE_61>::new();
        let x = b.input(0);
        let y = b.input(1);
        let mut acc = b.mul(x, y);
        for _ in 0..6 {
            acc = b.mul(acc, x);
        }
        let z = b.mul(y, y);
        b.output(acc);
        b.output(z);
        let c = b.build();
        let mut inputs = vec![vec![]; n];
        inputs[0].push(fe(2));
        inputs[1].push(fe(3));
        let r = run_session(&c, &inputs, session(&c, n, 18)).unwrap();
        assert_eq!(r.stats.delivered(MsgType::MulOpen), mul_open_deliveries(8, n as u64));
        assert_eq!(r.outputs, c.eval_plaintext(&inputs).unwrap());
    }
}

#[test]
fn honest_sigmas_sum_to_zero_but_individually_are_not() {
    let c = circuit(ONE_MUL);
    let r = run_session(&c, &[vec![fe(8)], vec![fe(9)], vec![], vec![]], session(&c, 4, 19)).unwrap();
    assert!(r.proof.sigma_sum().is_zero());
    assert!(r.proof.sigmas.iter().all(|s| !s.is_zero()));
}

#[test]
fn proof_text_roundtrips() {
    let c = circuit(ONE_MUL);
    let r = run_session(&c, &[vec![fe(8)], vec![fe(9)]], session(&c, 2, 20)).unwrap();
    let back = ComputationProof::<MERSENNE_61>::from_text(&r.proof.to_text()).unwrap();
    assert_eq!(back, r.proof);
}

#[test]
fn honest_party_abort_is_preferred() {
    let c = circuit(ONE_MUL);
    let spec = AdversarySpec::single(0, Behavior::TamperOpen { offset: 1, at: None });
    let s = session(&c, 2, 21).with_adversary(spec);
    let e = run_session(&c, &[vec![fe(1)], vec![fe(1)]], s).unwrap_err();
    assert!(e.abort().is_some());
}
