// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{bench_path, random_circuit, random_plan, ranked};
use lockforge::compile::{compile_plan, overhead, OverheadMetrics};
use lockforge::netlist::read_bench_file;
use lockforge::plan::{parse_plan, validate_plan, LockPlan, PlanLimits, Style};
use lockforge::planner::{
    candidate_score, heuristic_plan, rank_candidates, refine_plan, CandidateRecord, FeedbackReason,
    PlannerFeedback, Provenance, StylePolicy, VerificationReport,
};
use lockforge::sim::{check_correct_key, measure_corruption, CorruptionEstimate};
use proptest::prelude::*;

fn report(parse_ok: bool, ck: bool, ber: f64, ovh: f64) -> VerificationReport {
    VerificationReport {
        parse_ok,
        correct_key_ok: ck,
        key_check: None,
        cec_equivalent: Some(ck),
        corruption: Some(CorruptionEstimate {
            bit_error_rate: ber,
            pattern_error_rate: ber,
            samples_inputs: 1,
            samples_keys: 1,
            exhaustive_inputs: true,
            seed: 0,
        }),
        overhead: Some(OverheadMetrics {
            gate_overhead_ratio: ovh,
            key_gate_count: 0,
            key_input_count: 0,
        }),
        violations: Vec::new(),
        error: None,
    }
}

fn candidate(seed: u64, v: VerificationReport) -> CandidateRecord {
    CandidateRecord {
        plan: LockPlan::new("c", 1, seed),
        provenance: Provenance::Heuristic,
        refinements: 0,
        locked: None,
        verification: v,
        attack: None,
        score: 0.0,
    }
}

fn feedback(reason: FeedbackReason, ber: f64) -> PlannerFeedback {
    PlannerFeedback {
        reason,
        corruption: report(true, true, ber, 0.0).corruption,
        attack: None,
        violations: Vec::new(),
    }
}

#[test]
fn parse_failure_ranks_last() {
    let a = candidate(1, report(true, true, 0.20, 0.10));
    let b = candidate(2, report(false, false, 0.0, 0.0));
    let r = rank_candidates(vec![b, a]);
    assert_eq!(r[0].plan.seed, 1);
    assert!((r[0].score - (1.0 + 0.8 - 0.05)).abs() < 1e-12);
    assert_eq!(r[1].score, -10.0);
}

#[test]
fn higher_corruption_ranks_first() {
    let r = rank_candidates(vec![
        candidate(1, report(true, true, 0.05, 0.1)),
        candidate(2, report(true, true, 0.20, 0.1)),
    ]);
    assert_eq!(r[0].plan.seed, 2);
}

#[test]
fn corruption_saturates() {
    assert_eq!(
        candidate_score(&report(true, true, 0.5, 0.2)),
        candidate_score(&report(true, true, 0.9, 0.2))
    );
}

#[test]
fn equal_scores_prefer_lower_overhead() {
    // 0.0625 extra corruption offsets 0.5 extra overhead
    let a = report(true, true, 0.25, 0.0);
    let b = report(true, true, 0.3125, 0.5);
    assert_eq!(candidate_score(&a), candidate_score(&b));
    let r = rank_candidates(vec![candidate(1, b), candidate(2, a)]);
    assert_eq!(r[0].plan.seed, 2);
}

#[test]
fn per_style_gate_cost() {
    let n = read_bench_file(bench_path("c880")).unwrap();
    let r = ranked(&n);
    for (style, per_bit) in [
        (Style::XorXnor, 1),
        (Style::MuxLock, 4),
        (Style::PairwiseSubgraph, 8),
    ] {
        let p = heuristic_plan(&n, &r, 8, StylePolicy::Fixed(style), 4).unwrap();
        let l = compile_plan(&n, &p).unwrap();
        assert_eq!(overhead(&n, &l).key_gate_count, 8 * per_bit, "{style}");
        assert_eq!(l.key_inputs().len(), 8);
    }
}

#[test]
fn every_iscas_circuit_takes_every_style_at_32_bits() {
    for name in common::ISCAS85 {
        let n = read_bench_file(bench_path(name)).unwrap();
        let r = ranked(&n);
        for policy in StylePolicy::ALL {
            let p = heuristic_plan(&n, &r, 32, policy, 1)
                .unwrap_or_else(|e| panic!("{name} {policy}: {e}"));
            let l = compile_plan(&n, &p).unwrap();
            assert!(check_correct_key(&n, &l, 1024, 1).unwrap().matches);
        }
    }
}

#[test]
fn weak_corruption_refinement_direction_on_c17() {
    let n = read_bench_file(bench_path("c17")).unwrap();
    let r = ranked(&n);
    let prev = heuristic_plan(&n, &r, 4, StylePolicy::Fixed(Style::PerturbRestore), 2).unwrap();
    let before = measure_corruption(&n, &compile_plan(&n, &prev).unwrap(), 32, 15, 0).unwrap();
    let next = refine_plan(
        &prev,
        &feedback(FeedbackReason::WrongKeyWeak, 0.0),
        &n,
        &r,
        2,
    )
    .unwrap();
    assert_ne!(prev.instances, next.instances);
    let after = measure_corruption(&n, &compile_plan(&n, &next).unwrap(), 32, 15, 0).unwrap();
    assert!(before.exhaustive_inputs && after.exhaustive_inputs);
    // fewer detector literals fire more often
    assert!(
        after.bit_error_rate >= before.bit_error_rate,
        "{} -> {}",
        before.bit_error_rate,
        after.bit_error_rate
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn heuristic_plans_validate_and_round_trip(seed in any::<u64>()) {
        let n = random_circuit(seed, 12, 30);
        let Some(plan) = random_plan(&n, seed, 8) else { return Ok(()) };
        prop_assert!(validate_plan(&plan, &n, &PlanLimits::default()).is_ok());
        prop_assert_eq!(parse_plan(&plan.to_json()).unwrap(), plan.clone());
        let l = compile_plan(&n, &plan).unwrap();
        prop_assert!(check_correct_key(&n, &l, 4096, 0).unwrap().matches);
    }

    #[test]
    fn refinements_stay_valid(seed in any::<u64>(), reason in 0usize..3) {
        let n = random_circuit(seed, 12, 30);
        let Some(plan) = random_plan(&n, seed, 8) else { return Ok(()) };
        let reason = [FeedbackReason::ParseFail, FeedbackReason::WrongKeyWeak, FeedbackReason::SatRecovered][reason];
        let r = ranked(&n);
        if let Ok(next) = refine_plan(&plan, &feedback(reason, 0.0), &n, &r, seed ^ 1) {
            prop_assert!(validate_plan(&next, &n, &PlanLimits::default()).is_ok());
            prop_assert_eq!(next.key_width, plan.key_width);
            let l = compile_plan(&n, &next).unwrap();
            prop_assert!(check_correct_key(&n, &l, 4096, 0).unwrap().matches);
            if reason == FeedbackReason::WrongKeyWeak {
                prop_assert_ne!(next.instances, plan.instances);
            }
        }
    }

    #[test]
    fn score_monotone(ber in 0.0f64..0.5, d in 0.0f64..0.5, ovh in 0.0f64..1.0, e in 0.0f64..1.0) {
        let base = candidate_score(&report(true, true, ber, ovh));
        prop_assert!(candidate_score(&report(true, true, (ber + d).min(0.5), ovh)) >= base);
        prop_assert!(candidate_score(&report(true, true, ber, ovh + e)) <= base);
    }
}
