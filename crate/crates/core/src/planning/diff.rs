use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Plan, PlanningError, QUANTITY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangedCell {
    pub plant: String,
    pub product: String,
    pub date: NaiveDate,
    pub old: f64,
    pub new: f64,
}

/// Differences `b − a` between two plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiff {
    pub objective_delta: f64,
    pub per_product_total_delta: BTreeMap<String, f64>,
    pub per_order_tardiness_delta: BTreeMap<String, f64>,
    pub changed_cells: Vec<ChangedCell>,
}

impl PlanDiff {
    pub fn total_tardiness_delta(&self) -> f64 {
        self.per_order_tardiness_delta.values().sum()
    }

    pub fn total_production_delta(&self) -> f64 {
        self.per_product_total_delta.values().sum()
    }
}

pub fn diff_plans(a: &Plan, b: &Plan) -> Result<PlanDiff, PlanningError> {
    let products_a: BTreeSet<&String> = a.product_ids.iter().collect();
    let products_b: BTreeSet<&String> = b.product_ids.iter().collect();
    if products_a != products_b {
        return Err(PlanningError::IncompatiblePlans("product sets differ".into()));
    }
    let orders_a: BTreeSet<&String> = a.tardiness.keys().collect();
    let orders_b: BTreeSet<&String> = b.tardiness.keys().collect();
    if orders_a != orders_b {
        return Err(PlanningError::IncompatiblePlans("order sets differ".into()));
    }

    let per_product_total_delta = a
        .product_ids
        .iter()
        .map(|p| (p.clone(), b.total_production(p) - a.total_production(p)))
        .collect();
    let per_order_tardiness_delta = a
        .tardiness
        .iter()
        .map(|(o, ta)| (o.clone(), b.tardiness[o] - ta))
        .collect();

    type Key = (String, String, NaiveDate);
    let mut cells: BTreeMap<Key, (f64, f64)> = BTreeMap::new();
    for c in &a.production {
        cells.entry((c.plant.clone(), c.product.clone(), c.date)).or_default().0 += c.units;
    }
    for c in &b.production {
        cells.entry((c.plant.clone(), c.product.clone(), c.date)).or_default().1 += c.units;
    }
    let changed_cells = cells
        .into_iter()
        .filter(|(_, (old, new))| (new - old).abs() > QUANTITY_TOL)
        .map(|((plant, product, date), (old, new))| ChangedCell {
            plant,
            product,
            date,
            old,
            new,
        })
        .collect();

    Ok(PlanDiff {
        objective_delta: b.objective - a.objective,
        per_product_total_delta,
        per_order_tardiness_delta,
        changed_cells,
    })
}
