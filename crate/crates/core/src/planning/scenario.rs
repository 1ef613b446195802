use crate::data::PlanningInstance;

use super::{unknown, DataChange, PlanningError, Restriction, ScenarioSpec};

fn check_date(instance: &PlanningInstance, date: chrono::NaiveDate) -> Result<(), PlanningError> {
    if instance.contains_date(date) {
        Ok(())
    } else {
        Err(PlanningError::DateOutsideHorizon(date))
    }
}

fn check_non_negative(field: &'static str, value: f64) -> Result<(), PlanningError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(PlanningError::NegativeQuantity { field, value })
    }
}

/// Returns a copy of `instance` with `change` applied. The id is kept; callers
/// that store several variants side by side rename them.
pub fn apply_what_if(instance: &PlanningInstance, change: &DataChange) -> Result<PlanningInstance, PlanningError> {
    let mut out = instance.clone();
    match change {
        DataChange::AddReceipt { material, date, kg } => {
            check_date(instance, *date)?;
            check_non_negative("kg", *kg)?;
            let m = out
                .materials
                .iter_mut()
                .find(|m| &m.id == material)
                .ok_or_else(|| unknown("material", material))?;
            if *kg > 0.0 {
                *m.receipts.entry(*date).or_insert(0.0) += kg;
            }
        }
        DataChange::SetCapacity { plant, date, hours } => {
            check_date(instance, *date)?;
            check_non_negative("hours", *hours)?;
            let p = out
                .plants
                .iter_mut()
                .find(|p| &p.id == plant)
                .ok_or_else(|| unknown("plant", plant))?;
            p.capacity.insert(*date, *hours);
        }
        DataChange::ChangeOrderQty { order, units } => {
            if !(*units > 0.0) || !units.is_finite() {
                return Err(PlanningError::NegativeQuantity {
                    field: "units",
                    value: *units,
                });
            }
            let o = out
                .orders
                .iter_mut()
                .find(|o| &o.id == order)
                .ok_or_else(|| unknown("order", order))?;
            o.quantity = *units;
        }
        DataChange::ChangeDueDate { order, date } => {
            if instance.order(order).is_none() {
                return Err(unknown("order", order));
            }
            check_date(instance, *date)?;
            out.orders.iter_mut().find(|o| &o.id == order).unwrap().due_date = *date;
        }
        DataChange::ChangeOrderWeight { order, weight } => {
            if !(*weight > 0.0) || !weight.is_finite() {
                return Err(PlanningError::NegativeQuantity {
                    field: "weight",
                    value: *weight,
                });
            }
            let o = out
                .orders
                .iter_mut()
                .find(|o| &o.id == order)
                .ok_or_else(|| unknown("order", order))?;
            o.weight = *weight;
        }
    }
    Ok(out)
}

/// Applies every what-if change in order and checks that every restriction
/// references existing entities. Returns the mutated instance and the
/// restrictions to impose on the model.
pub fn apply_scenarios(
    instance: &PlanningInstance,
    specs: &[ScenarioSpec],
) -> Result<(PlanningInstance, Vec<Restriction>), PlanningError> {
    let mut current = instance.clone();
    let mut restrictions = Vec::new();
    for spec in specs {
        match spec {
            ScenarioSpec::WhatIf(change) => current = apply_what_if(&current, change)?,
            ScenarioSpec::WhyNot(r) => restrictions.push(r.clone()),
        }
    }
    for r in &restrictions {
        match r {
            Restriction::RestrictToPlants { plants } => {
                for p in plants {
                    if current.plant(p).is_none() {
                        return Err(unknown("plant", p));
                    }
                }
            }
            Restriction::ForbidPlant { plant } => {
                if current.plant(plant).is_none() {
                    return Err(unknown("plant", plant));
                }
            }
            Restriction::HardDeadline { order } => {
                if current.order(order).is_none() {
                    return Err(unknown("order", order));
                }
            }
            Restriction::MaxProduction { product, units } => {
                if current.product(product).is_none() {
                    return Err(unknown("product", product));
                }
                check_non_negative("units", *units)?;
            }
        }
    }
    Ok((current, restrictions))
}
