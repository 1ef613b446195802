#![allow(dead_code)]

use std::collections::BTreeMap;

use aps_core::data::{bundled_fixture_dir, parse_instance, Material, Order, Plant, PlanningInstance, Product};
use aps_core::planning::{DataChange, Restriction, ScenarioSpec};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 4, d).unwrap()
}

pub fn tire_plant() -> PlanningInstance {
    parse_instance(&bundled_fixture_dir()).unwrap()
}

/// Perturbs capacities, inventories, receipts and orders of the tire plant.
pub fn fixture_variant(seed: u64) -> PlanningInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = tire_plant();
    inst.id = format!("variant{seed}");
    for plant in &mut inst.plants {
        for hours in plant.capacity.values_mut() {
            *hours = (rng.random_range(0..=12) as f64).max(0.0);
        }
    }
    for m in &mut inst.materials {
        m.initial_inventory = rng.random_range(0..=120) as f64;
        for kg in m.receipts.values_mut() {
            *kg = rng.random_range(0..=150) as f64;
        }
    }
    let horizon = inst.horizon.clone();
    for o in &mut inst.orders {
        o.quantity = rng.random_range(5..=60) as f64;
        o.due_date = horizon[rng.random_range(0..horizon.len())];
        o.weight = rng.random_range(1..=5) as f64;
    }
    inst
}

pub fn random_receipt(seed: u64, inst: &PlanningInstance) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let m = &inst.materials[rng.random_range(0..inst.materials.len())];
    ScenarioSpec::WhatIf(DataChange::AddReceipt {
        material: m.id.clone(),
        date: inst.horizon[rng.random_range(0..inst.horizon.len())],
        kg: rng.random_range(1..=200) as f64,
    })
}

/// Restrictions that can only shrink the feasible region.
pub fn shrinking_restrictions(inst: &PlanningInstance) -> Vec<ScenarioSpec> {
    let mut out = Vec::new();
    for p in &inst.plants {
        out.push(ScenarioSpec::WhyNot(Restriction::ForbidPlant { plant: p.id.clone() }));
        out.push(ScenarioSpec::WhyNot(Restriction::RestrictToPlants {
            plants: vec![p.id.clone()],
        }));
    }
    for p in &inst.products {
        out.push(ScenarioSpec::WhyNot(Restriction::MaxProduction {
            product: p.id.clone(),
            units: 25.0,
        }));
    }
    out
}

fn single_line(capacity: f64, initial_kg: f64, receipts: &[(NaiveDate, f64)]) -> PlanningInstance {
    let horizon: Vec<NaiveDate> = (14..=20).map(day).collect();
    PlanningInstance {
        id: "single_line".into(),
        horizon: horizon.clone(),
        plants: vec![Plant {
            id: "mill".into(),
            name: "Mill".into(),
            capacity: horizon.iter().map(|d| (*d, capacity)).collect(),
            proc_time: BTreeMap::from([("widget".to_string(), 1.0)]),
            unit_cost: BTreeMap::from([("widget".to_string(), 1.0)]),
        }],
        products: vec![Product {
            id: "widget".into(),
            name: "Widget".into(),
            bom: BTreeMap::from([("resin".to_string(), 2.0)]),
        }],
        materials: vec![Material {
            id: "resin".into(),
            name: "Resin".into(),
            initial_inventory: initial_kg,
            receipts: receipts.iter().copied().collect(),
        }],
        orders: vec![Order {
            id: "W1".into(),
            product_id: "widget".into(),
            quantity: 10.0,
            due_date: day(15),
            weight: 1.0,
        }],
    }
}

/// Resin for order W1 (due the 15th) only arrives on the 18th; capacity is ample.
pub fn material_bound() -> PlanningInstance {
    single_line(100.0, 0.0, &[(day(18), 20.0)])
}

/// Two hours a day for ten one-hour units due on the 15th; resin is ample.
pub fn capacity_bound() -> PlanningInstance {
    single_line(2.0, 1000.0, &[])
}
