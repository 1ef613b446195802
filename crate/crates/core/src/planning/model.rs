use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use crate::data::PlanningInstance;
use crate::lp::{solve_lp, ConstraintKind, ConstraintTag, LpProblem, LpSolution, LpStatus, Sense};

use super::scenario::apply_scenarios;
use super::{
    AllocationCell, ObjectiveBreakdown, Plan, PlanningError, ProductionCell, Provenance, Restriction, ScenarioSpec,
};

/// Decision variable behind one LP column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Column {
    Production { plant: String, product: String, date: NaiveDate },
    Allocation { order: String, date: NaiveDate },
    Shortage { order: String },
}

impl Column {
    fn name(&self) -> String {
        match self {
            Column::Production { plant, product, date } => format!("x[{plant},{product},{date}]"),
            Column::Allocation { order, date } => format!("a[{order},{date}]"),
            Column::Shortage { order } => format!("s[{order}]"),
        }
    }
}

/// Constraint classes that can be removed for diagnostic re-solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    pub drop_material: bool,
    pub drop_capacity: bool,
}

/// An LP built from an instance, with the column map needed to read a
/// solution back as a plan.
#[derive(Debug, Clone)]
pub struct PlanModel {
    /// The instance after all what-if changes.
    pub instance: PlanningInstance,
    pub restrictions: Vec<Restriction>,
    pub problem: LpProblem,
    pub columns: Vec<Column>,
    pub shortage_penalty: f64,
}

impl PlanModel {
    pub fn column_index(&self, column: &Column) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }
}

/// Per-unit shortage penalty: 10^4 times the largest order weight.
pub fn shortage_penalty(instance: &PlanningInstance) -> f64 {
    let max_w = instance.orders.iter().map(|o| o.weight).fold(0.0, f64::max);
    1e4 * max_w
}

fn days_late(date: NaiveDate, due: NaiveDate) -> f64 {
    (date - due).num_days().max(0) as f64
}

pub fn build_lp(instance: &PlanningInstance, mods: &[ScenarioSpec]) -> Result<PlanModel, PlanningError> {
    build_lp_with(instance, mods, Ablation::default())
}

pub fn build_lp_with(
    instance: &PlanningInstance,
    mods: &[ScenarioSpec],
    ablation: Ablation,
) -> Result<PlanModel, PlanningError> {
    if instance.horizon.is_empty() {
        return Err(PlanningError::EmptyHorizon);
    }
    let (inst, restrictions) = apply_scenarios(instance, mods)?;

    let mut allowed_plants: BTreeSet<&str> = inst.plants.iter().map(|p| p.id.as_str()).collect();
    let mut hard_deadline: BTreeSet<&str> = BTreeSet::new();
    for r in &restrictions {
        match r {
            Restriction::RestrictToPlants { plants } => {
                let keep: BTreeSet<&str> = plants.iter().map(String::as_str).collect();
                allowed_plants.retain(|p| keep.contains(p));
            }
            Restriction::ForbidPlant { plant } => {
                allowed_plants.remove(plant.as_str());
            }
            Restriction::HardDeadline { order } => {
                hard_deadline.insert(order.as_str());
            }
            Restriction::MaxProduction { .. } => {}
        }
    }

    let penalty = shortage_penalty(&inst);
    let mut columns = Vec::new();
    let mut cost = Vec::new();
    for plant in inst.plants.iter().filter(|p| allowed_plants.contains(p.id.as_str())) {
        for product in &inst.products {
            if !plant.proc_time.contains_key(&product.id) {
                continue;
            }
            let unit_cost = plant.unit_cost.get(&product.id).copied().unwrap_or(0.0);
            for &date in &inst.horizon {
                columns.push(Column::Production {
                    plant: plant.id.clone(),
                    product: product.id.clone(),
                    date,
                });
                cost.push(unit_cost);
            }
        }
    }
    for order in &inst.orders {
        let hard = hard_deadline.contains(order.id.as_str());
        for &date in &inst.horizon {
            if hard && date > order.due_date {
                continue;
            }
            columns.push(Column::Allocation {
                order: order.id.clone(),
                date,
            });
            cost.push(order.weight * days_late(date, order.due_date));
        }
    }
    for order in &inst.orders {
        if hard_deadline.contains(order.id.as_str()) {
            continue;
        }
        columns.push(Column::Shortage { order: order.id.clone() });
        cost.push(penalty);
    }

    let index: BTreeMap<&Column, usize> = columns.iter().enumerate().map(|(j, c)| (c, j)).collect();
    let n = columns.len();
    let names = columns.iter().map(Column::name).collect();
    let mut problem = LpProblem::new(names, cost);
    let date_str = |d: &NaiveDate| d.to_string();

    let push_row = |problem: &mut LpProblem, coeffs: Vec<f64>, sense: Sense, rhs: f64, tag: ConstraintTag| {
        if coeffs.iter().any(|&a| a != 0.0) {
            problem.add_row(coeffs, sense, rhs, tag);
        }
    };

    if !ablation.drop_capacity {
        for plant in inst.plants.iter().filter(|p| allowed_plants.contains(p.id.as_str())) {
            for &date in &inst.horizon {
                let mut row = vec![0.0; n];
                for (product, hours) in &plant.proc_time {
                    let col = Column::Production {
                        plant: plant.id.clone(),
                        product: product.clone(),
                        date,
                    };
                    if let Some(&j) = index.get(&col) {
                        row[j] = *hours;
                    }
                }
                let cap = plant.capacity.get(&date).copied().unwrap_or(0.0);
                push_row(
                    &mut problem,
                    row,
                    Sense::Le,
                    cap,
                    ConstraintTag::new(ConstraintKind::Capacity, &[&plant.id, &date_str(&date)]),
                );
            }
        }
    }

    if !ablation.drop_material {
        for material in &inst.materials {
            let mut available = material.initial_inventory;
            let mut row = vec![0.0; n];
            for &date in &inst.horizon {
                available += material.receipts.get(&date).copied().unwrap_or(0.0);
                for (j, col) in columns.iter().enumerate() {
                    if let Column::Production { product, date: d, .. } = col {
                        if *d == date {
                            let kg = inst
                                .product(product)
                                .and_then(|p| p.bom.get(&material.id))
                                .copied()
                                .unwrap_or(0.0);
                            row[j] = kg;
                        }
                    }
                }
                push_row(
                    &mut problem,
                    row.clone(),
                    Sense::Le,
                    available,
                    ConstraintTag::new(ConstraintKind::Material, &[&material.id, &date_str(&date)]),
                );
            }
        }
    }

    for product in &inst.products {
        let mut row = vec![0.0; n];
        let mut has_allocation = false;
        for &date in &inst.horizon {
            for (j, col) in columns.iter().enumerate() {
                match col {
                    Column::Production { product: p, date: d, .. } if p == &product.id && *d == date => {
                        row[j] = -1.0;
                    }
                    Column::Allocation { order, date: d } if *d == date => {
                        if inst.order(order).is_some_and(|o| o.product_id == product.id) {
                            row[j] = 1.0;
                            has_allocation = true;
                        }
                    }
                    _ => {}
                }
            }
            if has_allocation {
                problem.add_row(
                    row.clone(),
                    Sense::Le,
                    0.0,
                    ConstraintTag::new(ConstraintKind::Linking, &[&product.id, &date_str(&date)]),
                );
            }
        }
    }

    for order in &inst.orders {
        let mut row = vec![0.0; n];
        for (j, col) in columns.iter().enumerate() {
            match col {
                Column::Allocation { order: o, .. } | Column::Shortage { order: o } if o == &order.id => row[j] = 1.0,
                _ => {}
            }
        }
        problem.add_row(
            row,
            Sense::Eq,
            order.quantity,
            ConstraintTag::new(ConstraintKind::Demand, &[&order.id]),
        );
    }

    for r in &restrictions {
        if let Restriction::MaxProduction { product, units } = r {
            let mut row = vec![0.0; n];
            for (j, col) in columns.iter().enumerate() {
                if matches!(col, Column::Production { product: p, .. } if p == product) {
                    row[j] = 1.0;
                }
            }
            problem.add_row(
                row,
                Sense::Le,
                *units,
                ConstraintTag::new(ConstraintKind::Restriction, &["max_production", product]),
            );
        }
    }

    Ok(PlanModel {
        instance: inst,
        restrictions,
        problem,
        columns,
        shortage_penalty: penalty,
    })
}

/// Builds and solves the model for `instance` under `specs`.
pub fn solve_instance(
    instance: &PlanningInstance,
    specs: &[ScenarioSpec],
) -> Result<(PlanModel, LpSolution), PlanningError> {
    let model = build_lp(instance, specs)?;
    let solution = solve_lp(&model.problem)?;
    Ok((model, solution))
}

fn clean(v: f64) -> f64 {
    if v < 1e-9 {
        0.0
    } else {
        v
    }
}

/// Reads an optimal solution back into named plan cells.
pub fn extract_plan(
    model: &PlanModel,
    solution: &LpSolution,
    provenance: Provenance,
    plan_id: &str,
) -> Result<Plan, PlanningError> {
    if solution.status != LpStatus::Optimal {
        return Err(PlanningError::NotOptimal(solution.status));
    }
    let inst = &model.instance;
    let mut production = Vec::new();
    let mut allocation = Vec::new();
    let mut shortage: BTreeMap<String, f64> = inst.orders.iter().map(|o| (o.id.clone(), 0.0)).collect();
    let mut tardiness: BTreeMap<String, f64> = inst.orders.iter().map(|o| (o.id.clone(), 0.0)).collect();
    let mut breakdown = ObjectiveBreakdown {
        tardiness_cost: 0.0,
        shortage_cost: 0.0,
        production_cost: 0.0,
    };

    for (j, col) in model.columns.iter().enumerate() {
        let raw = solution.x[j];
        let contribution = model.problem.objective[j] * raw;
        match col {
            Column::Production { plant, product, date } => {
                breakdown.production_cost += contribution;
                production.push(ProductionCell {
                    plant: plant.clone(),
                    product: product.clone(),
                    date: *date,
                    units: clean(raw),
                });
            }
            Column::Allocation { order, date } => {
                breakdown.tardiness_cost += contribution;
                *tardiness.get_mut(order).unwrap() += contribution;
                allocation.push(AllocationCell {
                    order: order.clone(),
                    date: *date,
                    units: clean(raw),
                });
            }
            Column::Shortage { order } => {
                breakdown.shortage_cost += contribution;
                shortage.insert(order.clone(), clean(raw));
            }
        }
    }

    Ok(Plan {
        id: plan_id.to_string(),
        instance_id: inst.id.clone(),
        product_ids: inst.products.iter().map(|p| p.id.clone()).collect(),
        production,
        allocation,
        tardiness,
        shortage,
        objective: solution.objective,
        objective_breakdown: breakdown,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{bundled_fixture_dir, parse_instance};

    fn fixture() -> PlanningInstance {
        parse_instance(&bundled_fixture_dir()).unwrap()
    }

    fn count<F: Fn(&Column) -> bool>(m: &PlanModel, f: F) -> usize {
        m.columns.iter().filter(|c| f(c)).count()
    }

    #[test]
    fn production_block_size() {
        let inst = fixture();
        let m = build_lp(&inst, &[]).unwrap();
        // 2 plants x 2 products x 7 days, all plants make both products
        assert_eq!(count(&m, |c| matches!(c, Column::Production { .. })), 2 * 2 * 7);
        assert_eq!(count(&m, |c| matches!(c, Column::Allocation { .. })), 3 * 7);
        assert_eq!(count(&m, |c| matches!(c, Column::Shortage { .. })), 3);
        m.problem.check_dimensions().unwrap();
    }

    #[test]
    fn forbid_plant_removes_its_columns() {
        let m = build_lp(
            &fixture(),
            &[ScenarioSpec::WhyNot(Restriction::ForbidPlant {
                plant: "vancouver".into(),
            })],
        )
        .unwrap();
        assert_eq!(
            count(&m, |c| matches!(c, Column::Production { plant, .. } if plant == "vancouver")),
            0
        );
        assert_eq!(count(&m, |c| matches!(c, Column::Production { .. })), 14);
    }

    #[test]
    fn hard_deadline_removes_shortage_and_late_allocation() {
        let m = build_lp(
            &fixture(),
            &[ScenarioSpec::WhyNot(Restriction::HardDeadline { order: "O1".into() })],
        )
        .unwrap();
        assert!(m.column_index(&Column::Shortage { order: "O1".into() }).is_none());
        // O1 is due on the 16th: only the 14th..16th remain
        assert_eq!(count(&m, |c| matches!(c, Column::Allocation { order, .. } if order == "O1")), 3);
    }

    #[test]
    fn unknown_restriction_entity() {
        let err = build_lp(
            &fixture(),
            &[ScenarioSpec::WhyNot(Restriction::ForbidPlant { plant: "paris".into() })],
        )
        .unwrap_err();
        assert!(matches!(err, PlanningError::UnknownEntity { .. }));
    }

    #[test]
    fn empty_horizon() {
        let mut inst = fixture();
        inst.horizon.clear();
        assert_eq!(build_lp(&inst, &[]).unwrap_err(), PlanningError::EmptyHorizon);
    }

    #[test]
    fn zero_orders_give_empty_optimum() {
        let mut inst = fixture();
        inst.orders.clear();
        let (m, s) = solve_instance(&inst, &[]).unwrap();
        let plan = extract_plan(&m, &s, Provenance::Baseline, "p").unwrap();
        assert_eq!(plan.objective, 0.0);
        assert!(plan.production.iter().all(|c| c.units == 0.0));
        assert_eq!(plan.provenance, Provenance::Baseline);
    }

    #[test]
    fn baseline_tardiness_matches_allocation_dates() {
        let inst = fixture();
        let (m, s) = solve_instance(&inst, &[]).unwrap();
        let plan = extract_plan(&m, &s, Provenance::Baseline, "baseline").unwrap();
        for order in &inst.orders {
            let recomputed: f64 = plan
                .allocations_for(&order.id)
                .map(|a| order.weight * (a.date - order.due_date).num_days().max(0) as f64 * a.units)
                .sum();
            assert!((recomputed - plan.tardiness[&order.id]).abs() < 1e-6);
        }
        let b = plan.objective_breakdown;
        assert!((b.total() - s.objective).abs() < 1e-6);
        // Natural rubber limits O1 to 20 tires before the 18th receipt.
        assert!(plan.tardiness["O1"] > 0.0);
    }

    #[test]
    fn extract_requires_optimal() {
        let inst = fixture();
        let m = build_lp(&inst, &[]).unwrap();
        let s = LpSolution {
            status: LpStatus::Infeasible,
            x: vec![],
            objective: f64::NAN,
            iterations: 0,
        };
        assert_eq!(
            extract_plan(&m, &s, Provenance::Baseline, "p").unwrap_err(),
            PlanningError::NotOptimal(LpStatus::Infeasible)
        );
    }

    #[test]
    fn max_production_row_is_tagged() {
        let m = build_lp(
            &fixture(),
            &[ScenarioSpec::WhyNot(Restriction::MaxProduction {
                product: "tire".into(),
                units: 10.0,
            })],
        )
        .unwrap();
        assert!(m.problem.tags.iter().any(|t| t.kind == ConstraintKind::Restriction));
    }
}
