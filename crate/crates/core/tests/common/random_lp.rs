#![allow(dead_code)]

use aps_core::lp::{ConstraintKind, ConstraintTag, LpProblem, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small LP with integer coefficients: 1..=6 variables and 1..=6 rows.
pub fn random_lp(seed: u64) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6usize);
    let m = rng.random_range(1..=6usize);
    let names = (0..n).map(|j| format!("x{j}")).collect();
    let c = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
    let mut p = LpProblem::new(names, c);
    for r in 0..m {
        let row = (0..n).map(|_| rng.random_range(-4..=6) as f64).collect();
        let sense = match rng.random_range(0..10) {
            0..=5 => Sense::Le,
            6..=8 => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs = rng.random_range(-3..=12) as f64;
        p.add_row(row, sense, rhs, ConstraintTag::new(ConstraintKind::Other, &[&r.to_string()]));
    }
    p
}
