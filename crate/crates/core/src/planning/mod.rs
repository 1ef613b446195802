//! Production-planning model on top of the LP kernel, and the analyses the
//! tools expose: what-if data changes, why-not restrictions, elastic
//! relaxation of infeasible scenarios, delay explanation and plan diffs.

mod diff;
mod explain;
mod model;
mod relax;
mod scenario;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LpError, LpStatus};

pub use diff::{diff_plans, ChangedCell, PlanDiff};
pub use explain::{explain_delay, DelayEvidence, DelayExplanation, DelayReason};
pub use model::{
    build_lp, build_lp_with, extract_plan, shortage_penalty, solve_instance, Ablation, Column, PlanModel,
};
pub use relax::{relax_infeasible, RelaxationReport, Violation};
pub use scenario::{apply_scenarios, apply_what_if};

/// Tolerance under which quantities count as zero in plan reporting.
pub const QUANTITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum DataChange {
    AddReceipt { material: String, date: NaiveDate, kg: f64 },
    SetCapacity { plant: String, date: NaiveDate, hours: f64 },
    ChangeOrderQty { order: String, units: f64 },
    ChangeDueDate { order: String, date: NaiveDate },
    /// Re-weights an order's tardiness, i.e. changes its priority.
    ChangeOrderWeight { order: String, weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "restriction", rename_all = "snake_case")]
pub enum Restriction {
    RestrictToPlants { plants: Vec<String> },
    ForbidPlant { plant: String },
    HardDeadline { order: String },
    MaxProduction { product: String, units: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSpec {
    WhatIf(DataChange),
    WhyNot(Restriction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Baseline,
    Scenario(Vec<ScenarioSpec>),
}

impl Provenance {
    pub fn from_specs(specs: &[ScenarioSpec]) -> Self {
        if specs.is_empty() {
            Provenance::Baseline
        } else {
            Provenance::Scenario(specs.to_vec())
        }
    }

    pub fn specs(&self) -> &[ScenarioSpec] {
        match self {
            Provenance::Baseline => &[],
            Provenance::Scenario(specs) => specs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionCell {
    pub plant: String,
    pub product: String,
    pub date: NaiveDate,
    pub units: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationCell {
    pub order: String,
    pub date: NaiveDate,
    pub units: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub tardiness_cost: f64,
    pub shortage_cost: f64,
    pub production_cost: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.tardiness_cost + self.shortage_cost + self.production_cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub id: String,
    pub instance_id: String,
    pub product_ids: Vec<String>,
    /// One cell per production column of the model, in column order.
    pub production: Vec<ProductionCell>,
    pub allocation: Vec<AllocationCell>,
    /// Weighted unit-days late per order.
    pub tardiness: BTreeMap<String, f64>,
    pub shortage: BTreeMap<String, f64>,
    pub objective: f64,
    pub objective_breakdown: ObjectiveBreakdown,
    pub provenance: Provenance,
}

impl Plan {
    pub fn production_on(&self, date: NaiveDate) -> impl Iterator<Item = &ProductionCell> {
        self.production.iter().filter(move |c| c.date == date)
    }

    pub fn total_production(&self, product: &str) -> f64 {
        self.production
            .iter()
            .filter(|c| c.product == product)
            .map(|c| c.units)
            .sum()
    }

    pub fn allocations_for<'a>(&'a self, order: &'a str) -> impl Iterator<Item = &'a AllocationCell> + 'a {
        self.allocation.iter().filter(move |c| c.order == order)
    }

    pub fn total_tardiness(&self) -> f64 {
        self.tardiness.values().sum()
    }

    /// CSV export: `plant_id,product_id,date,units`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("plant_id,product_id,date,units\n");
        for c in &self.production {
            out.push_str(&format!("{},{},{},{}\n", c.plant, c.product, c.date, c.units));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("unknown {kind} {id:?}")]
    UnknownEntity { kind: &'static str, id: String },
    #[error("date {0} is outside the planning horizon")]
    DateOutsideHorizon(NaiveDate),
    #[error("{field} must be non-negative, got {value}")]
    NegativeQuantity { field: &'static str, value: f64 },
    #[error("instance has an empty horizon")]
    EmptyHorizon,
    #[error("solution is not optimal ({0:?})")]
    NotOptimal(LpStatus),
    #[error("unknown order {0:?}")]
    UnknownOrder(String),
    #[error("plans are not comparable: {0}")]
    IncompatiblePlans(String),
    #[error(transparent)]
    Solver(#[from] LpError),
}

pub(crate) fn unknown(kind: &'static str, id: &str) -> PlanningError {
    PlanningError::UnknownEntity {
        kind,
        id: id.to_string(),
    }
}

/// Conservation residuals of a plan, recomputed from its cells alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    /// max over orders of |Σ allocation + shortage − quantity|
    pub max_demand_error: f64,
    /// max over products and dates of cumulative allocation − cumulative production
    pub max_linking_excess: f64,
    /// smallest quantity anywhere in the plan
    pub min_quantity: f64,
}

impl ConstraintCheck {
    pub fn of(instance: &crate::data::PlanningInstance, plan: &Plan) -> Self {
        let mut max_demand_error = 0.0f64;
        for order in &instance.orders {
            let delivered: f64 = plan.allocations_for(&order.id).map(|a| a.units).sum();
            let short = plan.shortage.get(&order.id).copied().unwrap_or(0.0);
            max_demand_error = max_demand_error.max((delivered + short - order.quantity).abs());
        }
        let mut max_linking_excess = f64::NEG_INFINITY;
        for product in &instance.products {
            let (mut made, mut shipped) = (0.0, 0.0);
            for &date in &instance.horizon {
                made += plan
                    .production
                    .iter()
                    .filter(|c| c.product == product.id && c.date == date)
                    .map(|c| c.units)
                    .sum::<f64>();
                shipped += plan
                    .allocation
                    .iter()
                    .filter(|a| a.date == date && instance.order(&a.order).is_some_and(|o| o.product_id == product.id))
                    .map(|a| a.units)
                    .sum::<f64>();
                max_linking_excess = max_linking_excess.max(shipped - made);
            }
        }
        let min_quantity = plan
            .production
            .iter()
            .map(|c| c.units)
            .chain(plan.allocation.iter().map(|a| a.units))
            .chain(plan.shortage.values().copied())
            .fold(f64::INFINITY, f64::min);
        ConstraintCheck {
            max_demand_error,
            max_linking_excess: max_linking_excess.max(0.0),
            min_quantity: if min_quantity.is_finite() { min_quantity } else { 0.0 },
        }
    }
}
