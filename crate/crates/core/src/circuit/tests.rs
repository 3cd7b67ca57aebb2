use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::field::MERSENNE_61;

type F = Fp<MERSENNE_61>;
type C = Circuit<MERSENNE_61>;

fn f(v: u64) -> F {
    F::new(v)
}

fn parse(text: &str) -> Result<C, ParseError> {
    parse_circuit::<MERSENNE_61>(text)
}

#[test]
fn one_mul_circuit_parses_and_evaluates() {
    let c = parse("in 0 w1\nin 1 w2\nmul w1 w2 w3\nout w3\n").unwrap();
    assert_eq!(c.n_inputs(), 2);
    assert_eq!(c.n_outputs(), 1);
    assert_eq!(c.eval_plaintext(&[vec![f(3)], vec![f(4)]]).unwrap(), vec![f(12)]);
    assert_eq!(c.cost().unwrap().mul_gates, 1);
}

#[test]
fn identity_circuit_echoes_input() {
    let c = parse("in 0 x\nout x").unwrap();
    assert_eq!(c.eval_plaintext(&[vec![f(99)]]).unwrap(), vec![f(99)]);
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let c = parse("# header\n\nin 0 a   # provider\n  \nout a\n").unwrap();
    assert_eq!(c.gates().len(), 2);
}

#[test]
fn missing_input_is_an_error() {
    let c = parse("in 0 a\nin 0 b\nadd a b c\nout c").unwrap();
    assert!(matches!(c.eval_plaintext(&[vec![f(1)]]), Err(EvalError::InputCount { party: 0, .. })));
    assert!(matches!(c.eval_plaintext(&[]), Err(EvalError::MissingParty(0))));
}

#[test]
fn redefined_wire_reports_offending_line() {
    let e = parse("in 0 a\nin 1 b\nadd a b a\nout a").unwrap_err();
    assert_eq!(e.line, 3);
    assert_eq!(e.kind, ParseErrorKind::WireRedefined("a".into()));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases: [(&str, usize); 7] = [
        ("in 0 a\nfoo a b\nout a", 2),
        ("in 0 a\nout b", 2),
        ("in 0 a\n\nadd a a\nout a", 3),
        ("in x a\nout a", 1),
        ("in 0 a\ntrunc 8 8 a b\nout b", 2),
        ("in 0 a\n# c\nbitwidth 0\nout a", 3),
        ("in 0 a\naddc zz a b\nout b", 2),
    ];
    for (text, line) in cases {
        let e = parse(text).unwrap_err();
        assert_eq!(e.line, line, "{text:?}: {e}");
    }
}

#[test]
fn unknown_opcode_kind() {
    let e = parse("div a b c").unwrap_err();
    assert_eq!(e.kind, ParseErrorKind::UnknownOpcode("div".into()));
}

#[test]
fn cycle_is_rejected() {
    let e = parse("in 0 x\nadd x b a\nadd a x b\nout a").unwrap_err();
    assert_eq!(e.kind, ParseErrorKind::Cycle);
    assert_eq!(e.line, 2);
}

#[test]
fn forward_references_are_sorted() {
    let c = parse("out c\nmul a b c\nin 1 b\nin 0 a").unwrap();
    assert_eq!(c.eval_plaintext(&[vec![f(5)], vec![f(6)]]).unwrap(), vec![f(30)]);
    assert!(matches!(c.gates()[0], Gate::Input { party: 1, .. }));
}

#[test]
fn thousand_adds_need_no_triples() {
    let mut text = String::from("in 0 w0\n");
    for i in 1..=1000 {
        text.push_str(&format!("add w{} w{} w{i}\n", i - 1, i - 1));
    }
    text.push_str("out w1000\n");
    let c = parse(&text).unwrap();
    let r = c.cost().unwrap();
    assert_eq!(r.triples_required, 0);
    assert_eq!(r.mul_gates, 0);
    assert_eq!(r.depth, 0);
}

#[test]
fn three_muls_need_six_triples() {
    let c = parse("in 0 a\nin 1 b\nmul a b c\nmul c b d\nmul a a e\nout d\nout e").unwrap();
    let r = c.cost().unwrap();
    assert_eq!(r.mul_gates, 3);
    assert_eq!(r.triples_required, 6);
    assert_eq!(r.singles_required, 4);
    assert_eq!(r.masks_required, 2);
    assert_eq!(r.openings, 3 * 6 + 2);
    assert_eq!(r.depth, 2);
}

#[test]
fn gadget_costs_enter_the_report() {
    let c = parse("bitwidth 8\nin 0 a\nin 1 b\ncmp a b c\ntrunc 16 7 a d\nout c\nout d").unwrap();
    let r = c.cost().unwrap();
    // cmp at l = 8 is trunc(9, 8): 7 muls; trunc(16, 7): 6 muls.
    let kc = gadgets::kappa::<MERSENNE_61>(9).unwrap();
    let kt = gadgets::kappa::<MERSENNE_61>(16).unwrap();
    assert_eq!(r.mul_gates, 0);
    assert_eq!(r.multiplications, 13);
    assert_eq!(r.triples_required, 26);
    assert_eq!(r.bits_required, (9 + kc + 16 + kt) as u64);
    assert_eq!(r.openings, 13 * 6 + 2 + 2);
    assert!(r.triples_required >= 2 * r.mul_gates);
}

#[test]
fn chain_of_k_muls_has_depth_k() {
    for k in [1usize, 2, 7, 40] {
        let mut b = CircuitBuilder::<MERSENNE_61>::new();
        let x = b.input(0);
        let mut w = x;
        for _ in 0..k {
            let s = b.add(w, x);
            w = b.mul(s, x);
        }
        b.output(w);
        assert_eq!(b.build().depth(), k as u64);
    }
}

#[test]
fn or_and_xor_lowering_truth_tables() {
    for a in 0..2u64 {
        for b in 0..2u64 {
            let x = Expr::<MERSENNE_61>::bit_input(0, 0);
            let y = Expr::bit_input(1, 0);
            let c = compile_expr(&[x.clone().or(y.clone()), x.clone().xor(y.clone()), x.clone().and(y), x.not()], 32)
                .unwrap();
            let out = c.eval_plaintext(&[vec![f(a)], vec![f(b)]]).unwrap();
            assert_eq!(out, vec![f(a | b), f(a ^ b), f(a & b), f(1 - a)], "a={a} b={b}");
        }
    }
}

#[test]
fn constant_boolean_ops_fold() {
    let one = || Expr::<MERSENNE_61>::constant(1u64);
    let c = compile_expr(&[one().or(one()), one().xor(one())], 32).unwrap();
    assert_eq!(c.eval_plaintext(&[]).unwrap(), vec![f(1), f(0)]);
    assert_eq!(c.cost().unwrap().mul_gates, 0);
}

#[test]
fn boolean_op_on_field_value_is_a_type_error() {
    let x = Expr::<MERSENNE_61>::input(0, 0);
    let e = compile_expr(&[x.clone().or(Expr::bit_input(1, 0))], 32).unwrap_err();
    assert_eq!(e.op, "OR");
    assert!(compile_expr(&[x.clone().not()], 32).is_err());
    assert!(compile_expr(&[x.clone().add(Expr::constant(5u64)).and(Expr::constant(1u64))], 32).is_err());
    assert!(compile_expr(&[x.clone().lt(Expr::constant(9u64)).not()], 32).is_ok());
}

#[test]
fn difference_of_squares_matches_oracle() {
    let x = Expr::<MERSENNE_61>::input(0, 0);
    let y = Expr::input(1, 0);
    let c = compile_expr(&[x.clone().add(y.clone()).mul(x.sub(y))], 32).unwrap();
    assert_eq!(c.cost().unwrap().mul_gates, 1);
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (a, b) = (F::random(&mut rng), F::random(&mut rng));
        let out = c.eval_plaintext(&[vec![a], vec![b]]).unwrap();
        assert_eq!(out, vec![a * a - b * b]);
    }
}

fn random_expr(rng: &mut ChaCha20Rng, budget: &mut usize, parties: usize) -> Expr<MERSENNE_61> {
    if *budget == 0 || rng.gen_bool(0.15) {
        return if rng.gen_bool(0.8) {
            Expr::input(rng.gen_range(0..parties), rng.gen_range(0..3))
        } else {
            Expr::constant(F::random(rng))
        };
    }
    *budget -= 1;
    let a = random_expr(rng, budget, parties);
    let b = random_expr(rng, budget, parties);
    match rng.gen_range(0..3) {
        0 => a.add(b),
        1 => a.sub(b),
        _ => a.mul(b),
    }
}

#[test]
fn random_fifty_gate_circuits_match_recursive_evaluation() {
    let mut rng = ChaCha20Rng::seed_from_u64(50);
    for _ in 0..20 {
        let mut budget = 50;
        let exprs: Vec<_> = (0..2).map(|_| random_expr(&mut rng, &mut budget, 3)).collect();
        let c = compile_expr(&exprs, 32).unwrap();
        let inputs: Vec<Vec<F>> = (0..3).map(|_| (0..3).map(|_| F::random(&mut rng)).collect()).collect();
        // The circuit only reads the slots that appear; feed it those in order.
        let mut used = std::collections::BTreeMap::new();
        fn walk(e: &Expr<MERSENNE_61>, acc: &mut std::collections::BTreeMap<(usize, usize), ()>) {
            match e {
                Expr::Input { party, slot, .. } => {
                    acc.insert((*party, *slot), ());
                }
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                    walk(a, acc);
                    walk(b, acc);
                }
                _ => {}
            }
        }
        exprs.iter().for_each(|e| walk(e, &mut used));
        let mut circuit_inputs = vec![Vec::new(); 3];
        for &(p, s) in used.keys() {
            circuit_inputs[p].push(inputs[p][s]);
        }
        let expected: Vec<F> = exprs.iter().map(|e| e.eval(&inputs)).collect();
        assert_eq!(c.eval_plaintext(&circuit_inputs).unwrap(), expected);
    }
}

#[test]
fn random_circuit_has_requested_shape() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let p = RandomCircuitParams { parties: 3, inputs_per_party: 2, muls: 100, linear: 60, depth: 10, outputs: 4 };
    let c: C = random_circuit(p, &mut rng);
    let r = c.cost().unwrap();
    assert_eq!(r.mul_gates, 100);
    assert_eq!(r.depth, 10);
    assert_eq!(c.n_outputs(), 4);
    assert_eq!(c.inputs_per_party(3), vec![2, 2, 2]);
}

#[test]
fn flmul_gate_roundtrips_and_costs() {
    let text = "flmul 8 a b c d e f g h o1 o2 o3 o4\nin 0 a\nin 0 b\nin 0 c\nin 0 d\nin 1 e\nin 1 f\nin 1 g\nin 1 h\nout o1\nout o2\n";
    let c = parse(text).unwrap();
    assert_eq!(c.cost().unwrap().multiplications, 2 * 8 + 2);
    assert_eq!(parse(&c.to_text()).unwrap(), c);
}

fn arb_circuit() -> impl Strategy<Value = C> {
    (any::<u64>(), 0usize..30, 0usize..30, 1usize..6).prop_map(|(seed, muls, linear, depth)| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut c: C = random_circuit(
            RandomCircuitParams { parties: 3, inputs_per_party: 2, muls, linear, depth, outputs: 3 },
            &mut rng,
        );
        if seed % 3 == 0 {
            // Sprinkle in macro gates so the round trip covers every opcode.
            let mut b = CircuitBuilder::<MERSENNE_61>::new().bitwidth(1 + (seed % 40) as u32);
            let x = b.input(0);
            let y = b.input(1);
            let z = b.cmp(x, y);
            let t = b.trunc(20, 3, z);
            let k = b.constant(F::new(seed));
            let s = b.add(t, k);
            b.output(s);
            c = b.build();
        }
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emit_then_parse_is_identity(c in arb_circuit()) {
        let text = c.to_text();
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn triples_cover_at_least_two_per_mul_gate(c in arb_circuit()) {
        let r = c.cost().unwrap();
        prop_assert!(r.triples_required >= 2 * r.mul_gates);
        prop_assert_eq!(r.singles_required, r.multiplications + 1);
    }
}
