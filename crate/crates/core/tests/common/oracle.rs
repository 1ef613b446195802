//! Brute-force LP oracle: enumerate every basic solution of the constraint
//! system (rows plus non-negativity), keep the feasible ones, take the best.
//! Unboundedness is detected by adding a large box `Σx ≤ M` and checking
//! whether the best vertex sits on it.

#![allow(dead_code)]

use aps_core::lp::{LpProblem, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleStatus {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

const BOX: f64 = 1e7;
const TOL: f64 = 1e-9;

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn brute_force(p: &LpProblem) -> OracleStatus {
    let n = p.num_vars();
    // All constraints as (coeffs, sense, rhs): rows, x_j >= 0, then the box.
    let mut cons: Vec<(Vec<f64>, Sense, f64)> = (0..p.num_rows())
        .map(|r| (p.matrix[r].clone(), p.senses[r], p.rhs[r]))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e, Sense::Ge, 0.0));
    }
    cons.push((vec![1.0; n], Sense::Le, BOX));

    let feasible = |x: &[f64]| {
        cons.iter().all(|(a, s, b)| {
            let lhs: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum();
            let scale: f64 = a.iter().zip(x).map(|(u, v)| (u * v).abs()).sum();
            // box vertices carry round-off proportional to their magnitude
            let mag: f64 = x.iter().map(|v| v.abs()).sum();
            let tol = TOL * (1.0 + b.abs() + scale) + 1e-14 * mag;
            match s {
                Sense::Le => lhs <= b + tol,
                Sense::Ge => lhs >= b - tol,
                Sense::Eq => (lhs - b).abs() <= tol,
            }
        })
    };
    let equalities: Vec<usize> = (0..cons.len()).filter(|&i| cons[i].1 == Sense::Eq).collect();

    let mut best: Option<(f64, bool)> = None;
    if n == 0 {
        return if feasible(&[]) { OracleStatus::Optimal(0.0) } else { OracleStatus::Infeasible };
    }
    for subset in combinations(cons.len(), n) {
        if !equalities.iter().all(|e| subset.contains(e)) {
            continue;
        }
        let a = subset.iter().map(|&i| cons[i].0.clone()).collect();
        let b = subset.iter().map(|&i| cons[i].2).collect();
        let Some(x) = solve_square(a, b) else { continue };
        if !feasible(&x) {
            continue;
        }
        let obj = p.objective_value(&x);
        let on_box = (x.iter().sum::<f64>() - BOX).abs() < 1e-3;
        match best {
            Some((b, _)) if b <= obj - 1e-9 => {}
            Some((b, on)) if (b - obj).abs() <= 1e-9 => best = Some((b.min(obj), on && on_box)),
            _ => best = Some((obj, on_box)),
        }
    }
    match best {
        None => OracleStatus::Infeasible,
        Some((_, true)) => OracleStatus::Unbounded,
        Some((obj, false)) => OracleStatus::Optimal(obj),
    }
}
