use serde::{Deserialize, Serialize};

use crate::data::{Order, PlanningInstance};
use crate::lp::solve_lp;

use super::model::{build_lp_with, extract_plan, Ablation};
use super::{Plan, PlanningError, Provenance, ScenarioSpec, QUANTITY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DelayReason {
    NotTardy,
    MaterialShortage { materials: Vec<String> },
    CapacityShortage { plants: Vec<String> },
    MaterialAndCapacityShortage { materials: Vec<String>, plants: Vec<String> },
    CompetingOrders,
}

impl DelayReason {
    pub fn describe(&self, instance: &PlanningInstance) -> String {
        let material_names = |ids: &[String]| {
            ids.iter()
                .map(|id| instance.material(id).map_or(id.as_str(), |m| m.name.as_str()))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let plant_names = |ids: &[String]| {
            ids.iter()
                .map(|id| instance.plant(id).map_or(id.as_str(), |p| p.name.as_str()))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            DelayReason::NotTardy => "the order is on time".to_string(),
            DelayReason::MaterialShortage { materials } => {
                format!("material shortage ({})", material_names(materials))
            }
            DelayReason::CapacityShortage { plants } => {
                format!("capacity shortage ({})", plant_names(plants))
            }
            DelayReason::MaterialAndCapacityShortage { materials, plants } => format!(
                "material shortage ({}) and capacity shortage ({})",
                material_names(materials),
                plant_names(plants)
            ),
            DelayReason::CompetingOrders => "competing orders for the same resources".to_string(),
        }
    }
}

/// Objective and tardy units of the order in the two diagnostic re-solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEvidence {
    pub without_material_objective: f64,
    pub without_capacity_objective: f64,
    pub without_material_tardy_units: f64,
    pub without_capacity_tardy_units: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayExplanation {
    pub order_id: String,
    /// Units not delivered by the due date (late allocations plus shortage).
    pub tardy_units: f64,
    pub reason: DelayReason,
    pub evidence: Option<DelayEvidence>,
}

fn tardy_units(plan: &Plan, order: &Order) -> f64 {
    let late: f64 = plan
        .allocations_for(&order.id)
        .filter(|a| a.date > order.due_date)
        .map(|a| a.units)
        .sum();
    late + plan.shortage.get(&order.id).copied().unwrap_or(0.0)
}

/// Explains why `order_id` is late in `plan` by re-solving with material
/// rows removed and, separately, with capacity rows removed.
///
/// `instance` is the instance the plan was solved on (with any what-if
/// changes already applied); restrictions are taken from the plan's
/// provenance.
pub fn explain_delay(
    instance: &PlanningInstance,
    plan: &Plan,
    order_id: &str,
) -> Result<DelayExplanation, PlanningError> {
    let order = instance
        .order(order_id)
        .ok_or_else(|| PlanningError::UnknownOrder(order_id.to_string()))?;
    let tardy = tardy_units(plan, order);
    if tardy <= QUANTITY_TOL {
        return Ok(DelayExplanation {
            order_id: order_id.to_string(),
            tardy_units: tardy,
            reason: DelayReason::NotTardy,
            evidence: None,
        });
    }

    let restrictions: Vec<ScenarioSpec> = plan
        .provenance
        .specs()
        .iter()
        .filter(|s| matches!(s, ScenarioSpec::WhyNot(_)))
        .cloned()
        .collect();

    let resolve = |ablation: Ablation| -> Result<(f64, f64), PlanningError> {
        let model = build_lp_with(instance, &restrictions, ablation)?;
        let solution = solve_lp(&model.problem)?;
        let diag = extract_plan(&model, &solution, Provenance::Baseline, "diagnostic")?;
        Ok((solution.objective, tardy_units(&diag, order)))
    };
    let (obj_a, tardy_a) = resolve(Ablation {
        drop_material: true,
        drop_capacity: false,
    })?;
    let (obj_b, tardy_b) = resolve(Ablation {
        drop_material: false,
        drop_capacity: true,
    })?;
    let persists_a = tardy_a > QUANTITY_TOL;
    let persists_b = tardy_b > QUANTITY_TOL;

    let reason = match (persists_a, persists_b) {
        (false, true) => DelayReason::MaterialShortage {
            materials: tight_materials(instance, plan, order),
        },
        (true, false) => DelayReason::CapacityShortage {
            plants: tight_plants(instance, plan, order),
        },
        (true, true) => DelayReason::MaterialAndCapacityShortage {
            materials: tight_materials(instance, plan, order),
            plants: tight_plants(instance, plan, order),
        },
        (false, false) => DelayReason::CompetingOrders,
    };
    Ok(DelayExplanation {
        order_id: order_id.to_string(),
        tardy_units: tardy,
        reason,
        evidence: Some(DelayEvidence {
            without_material_objective: obj_a,
            without_capacity_objective: obj_b,
            without_material_tardy_units: tardy_a,
            without_capacity_tardy_units: tardy_b,
        }),
    })
}

/// BOM materials of the order's product whose cumulative availability is
/// exhausted by the due date.
fn tight_materials(instance: &PlanningInstance, plan: &Plan, order: &Order) -> Vec<String> {
    let Some(product) = instance.product(&order.product_id) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (material_id, kg_per_unit) in &product.bom {
        if *kg_per_unit <= 0.0 {
            continue;
        }
        let Some(material) = instance.material(material_id) else {
            continue;
        };
        let available = material.initial_inventory
            + material
                .receipts
                .range(..=order.due_date)
                .map(|(_, kg)| kg)
                .sum::<f64>();
        let used: f64 = plan
            .production
            .iter()
            .filter(|c| c.date <= order.due_date)
            .map(|c| {
                c.units
                    * instance
                        .product(&c.product)
                        .and_then(|p| p.bom.get(material_id))
                        .copied()
                        .unwrap_or(0.0)
            })
            .sum();
        if available - used <= QUANTITY_TOL * available.max(1.0) {
            out.push(material_id.clone());
        }
    }
    out
}

/// Plants able to make the order's product whose capacity is fully used on
/// some day up to the due date.
fn tight_plants(instance: &PlanningInstance, plan: &Plan, order: &Order) -> Vec<String> {
    let mut out = Vec::new();
    for plant in &instance.plants {
        if !plant.proc_time.contains_key(&order.product_id) {
            continue;
        }
        let saturated = instance
            .horizon
            .iter()
            .filter(|d| **d <= order.due_date)
            .any(|d| {
                let cap = plant.capacity.get(d).copied().unwrap_or(0.0);
                let used: f64 = plan
                    .production
                    .iter()
                    .filter(|c| c.plant == plant.id && c.date == *d)
                    .map(|c| c.units * plant.proc_time.get(&c.product).copied().unwrap_or(0.0))
                    .sum();
                used >= cap - QUANTITY_TOL * cap.max(1.0)
            });
        if saturated {
            out.push(plant.id.clone());
        }
    }
    out
}
