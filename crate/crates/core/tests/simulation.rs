// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{bench_path, random_circuit, random_patterns, random_plan};
use lockforge::attack::{encode_cnf, Cadical, SatBackend, SolveResult};
use lockforge::compile::compile_plan;
use lockforge::netlist::{parse_bench, read_bench_file, KeyVector};
use lockforge::plan::{LockInstance, LockPlan};
use lockforge::sim::{
    check_correct_key, evaluate, evaluate_scalar, measure_corruption, KeyAssignment, LaneWord,
    PatternBlock,
};
use lockforge::PatternBlock64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn parallel_matches_scalar<W: LaneWord>(seed: u64, count: usize) -> Result<(), TestCaseError> {
    let n = random_circuit(seed, 12, 30);
    let plan = random_plan(&n, seed, 8);
    let locked = match &plan {
        Some(p) => compile_plan(&n, p).unwrap(),
        None => n.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pats = random_patterns(&mut rng, locked.primary_inputs().len(), count);
    let key = plan.map(|p| KeyVector::new(random_patterns(&mut rng, p.key_width, 1).remove(0)));
    let block = PatternBlock::<W>::from_patterns(locked.primary_inputs().len(), &pats);
    let ka = match &key {
        Some(k) => KeyAssignment::Fixed(k),
        None => KeyAssignment::None,
    };
    let out = evaluate(&locked, &block, ka).unwrap();
    for (p, x) in pats.iter().enumerate() {
        let want = evaluate_scalar(&locked, x, key.as_ref()).unwrap();
        let got: Vec<bool> = (0..out.rows()).map(|r| out.get(r, p)).collect();
        prop_assert_eq!(got, want, "pattern {}", p);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn u64_lanes(seed in any::<u64>(), count in 1usize..200) {
        parallel_matches_scalar::<u64>(seed, count)?;
    }

    #[test]
    fn u8_lanes(seed in any::<u64>(), count in 1usize..40) {
        parallel_matches_scalar::<u8>(seed, count)?;
    }

    #[test]
    fn u128_lanes(seed in any::<u64>(), count in 1usize..300) {
        parallel_matches_scalar::<u128>(seed, count)?;
    }

    #[test]
    fn per_pattern_keys(seed in any::<u64>()) {
        let n = random_circuit(seed, 8, 20);
        let Some(plan) = random_plan(&n, seed, 6) else { return Ok(()) };
        let locked = compile_plan(&n, &plan).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = random_patterns(&mut rng, n.primary_inputs().len(), 70);
        let ks = random_patterns(&mut rng, plan.key_width, 70);
        let xb = PatternBlock64::from_patterns(xs[0].len(), &xs);
        let kb = PatternBlock64::from_patterns(plan.key_width, &ks);
        let out = evaluate(&locked, &xb, KeyAssignment::PerPattern(&kb)).unwrap();
        for p in 0..70 {
            let want = evaluate_scalar(&locked, &xs[p], Some(&KeyVector::new(ks[p].clone()))).unwrap();
            prop_assert_eq!(out.pattern(p), want);
        }
    }

    #[test]
    fn correct_key_always_matches(seed in any::<u64>()) {
        let n = random_circuit(seed, 12, 30);
        let Some(plan) = random_plan(&n, seed, 8) else { return Ok(()) };
        let locked = compile_plan(&n, &plan).unwrap();
        let k = check_correct_key(&n, &locked, 4096, seed).unwrap();
        prop_assert!(k.matches && k.exhaustive);
    }
}

#[test]
fn c17_truth_table_against_solver() {
    let n = read_bench_file(bench_path("c17")).unwrap();
    let block = PatternBlock64::exhaustive(5);
    let out = evaluate(&n, &block, KeyAssignment::None).unwrap();
    let f = encode_cnf(&n, 1, false);
    let mut s = Cadical::default();
    f.load_into(&mut s);
    let lits = &f.signal_lits[0];
    for p in 0..32 {
        let x = block.pattern(p);
        let assume: Vec<i32> = n
            .primary_inputs()
            .iter()
            .zip(&x)
            .map(|(pi, &v)| {
                if v {
                    lits[pi.index()]
                } else {
                    -lits[pi.index()]
                }
            })
            .collect();
        assert_eq!(s.solve(&assume), SolveResult::Sat);
        let solver: Vec<bool> = n
            .primary_outputs()
            .iter()
            .map(|o| s.value(lits[o.index()]))
            .collect();
        assert_eq!(out.pattern(p), solver, "pattern {x:?}");
    }
}

#[test]
fn output_xor_lock_corrupts_every_bit() {
    // a key gate straight on the only output flips it under the wrong key
    let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)").unwrap();
    let mut plan = LockPlan::new("t", 1, 0);
    plan.instances = vec![LockInstance::xor_xnor("y", 0, true)];
    let locked = compile_plan(&n, &plan).unwrap();
    let c = measure_corruption(&n, &locked, 256, 16, 5).unwrap();
    assert!(c.exhaustive_inputs);
    assert_eq!(c.samples_inputs, 4);
    assert_eq!(c.bit_error_rate, 1.0);
    assert_eq!(c.pattern_error_rate, 1.0);
}

#[test]
fn corruption_is_seed_deterministic() {
    let n = read_bench_file(bench_path("c880")).unwrap();
    let plan = random_plan(&n, 9, 8).unwrap();
    let locked = compile_plan(&n, &plan).unwrap();
    let a = measure_corruption(&n, &locked, 256, 16, 11).unwrap();
    let b = measure_corruption(&n, &locked, 256, 16, 11).unwrap();
    assert_eq!(a, b);
    assert!(!a.exhaustive_inputs);
    assert!(a.bit_error_rate > 0.0 && a.bit_error_rate <= a.pattern_error_rate);
}
