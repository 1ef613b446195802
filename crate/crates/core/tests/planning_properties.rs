mod common;

use aps_core::lp::{solve_lp, LpStatus};
use aps_core::planning::{
    build_lp, explain_delay, extract_plan, relax_infeasible, solve_instance, ConstraintCheck, DelayReason, Plan,
    Provenance, Restriction, ScenarioSpec,
};
use common::fixtures::*;
use proptest::prelude::*;

fn solve(inst: &aps_core::PlanningInstance, specs: &[ScenarioSpec]) -> Plan {
    let (model, solution) = solve_instance(inst, specs).unwrap();
    assert_eq!(solution.status, LpStatus::Optimal);
    extract_plan(&model, &solution, Provenance::from_specs(specs), "p").unwrap()
}

#[test]
fn receipts_never_hurt_and_restrictions_never_help() {
    for seed in 0..25 {
        let inst = fixture_variant(seed);
        let base = solve(&inst, &[]);
        let receipt = random_receipt(seed, &inst);
        let more = solve(&inst, std::slice::from_ref(&receipt));
        assert!(more.objective <= base.objective + 1e-6, "seed {seed}");
        for spec in shrinking_restrictions(&inst) {
            let restricted = solve(&inst, std::slice::from_ref(&spec));
            assert!(restricted.objective >= base.objective - 1e-6, "seed {seed} {spec:?}");
        }
    }
}

#[test]
fn plans_conserve_order_quantities() {
    for seed in 0..25 {
        let inst = fixture_variant(seed);
        let plan = solve(&inst, &[]);
        let report = ConstraintCheck::of(&inst, &plan);
        assert!(report.max_demand_error <= 1e-6, "seed {seed}: {report:?}");
        assert!(report.max_linking_excess <= 1e-6, "seed {seed}: {report:?}");
    }
}

#[test]
fn relaxing_a_feasible_model_changes_nothing() {
    for seed in 0..5 {
        let inst = fixture_variant(seed);
        let model = build_lp(&inst, &[]).unwrap();
        let base = solve_lp(&model.problem).unwrap();
        let report = relax_infeasible(&model.problem).unwrap();
        assert_eq!(report.total_violation, 0.0, "seed {seed}");
        assert!((report.relaxed_objective - base.objective).abs() <= 1e-5, "seed {seed}");
    }
}

#[test]
fn impossible_hard_deadline_is_relaxed_on_the_order() {
    let inst = tire_plant();
    let specs = [ScenarioSpec::WhyNot(Restriction::HardDeadline { order: "O1".into() })];
    let model = build_lp(&inst, &specs).unwrap();
    assert_eq!(solve_lp(&model.problem).unwrap().status, LpStatus::Infeasible);
    let report = relax_infeasible(&model.problem).unwrap();
    assert!(report.total_violation > 0.0);
    assert!(report
        .violated
        .iter()
        .any(|v| matches!(v.tag.kind, aps_core::lp::ConstraintKind::Demand | aps_core::lp::ConstraintKind::Linking)
            && (v.tag.indices.contains(&"O1".to_string()) || v.tag.indices.contains(&"tire".to_string()))));
    // 40 kg of natural rubber covers 20 of the 30 tires due on the 16th.
    assert!((report.total_violation - 10.0).abs() < 1e-6, "{report:?}");
}

#[test]
fn delay_reasons() {
    let inst = material_bound();
    let plan = solve(&inst, &[]);
    let why = explain_delay(&inst, &plan, "W1").unwrap();
    assert_eq!(why.reason, DelayReason::MaterialShortage { materials: vec!["resin".into()] });

    let inst = capacity_bound();
    let plan = solve(&inst, &[]);
    let why = explain_delay(&inst, &plan, "W1").unwrap();
    assert_eq!(why.reason, DelayReason::CapacityShortage { plants: vec!["mill".into()] });

    let inst = tire_plant();
    let plan = solve(&inst, &[]);
    assert_eq!(explain_delay(&inst, &plan, "O2").unwrap().reason, DelayReason::NotTardy);
    assert!(explain_delay(&inst, &plan, "O9").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plan_invariants_hold_for_variants(seed in 0u64..10_000) {
        let inst = fixture_variant(seed);
        let plan = solve(&inst, &[]);
        let check = ConstraintCheck::of(&inst, &plan);
        prop_assert!(check.max_demand_error <= 1e-6);
        prop_assert!(check.max_linking_excess <= 1e-6);
        prop_assert!(check.min_quantity >= 0.0);
        prop_assert!((plan.objective_breakdown.total() - plan.objective).abs() <= 1e-6);
        let again = solve(&inst, &[]);
        prop_assert_eq!(plan.objective.to_bits(), again.objective.to_bits());
    }
}
