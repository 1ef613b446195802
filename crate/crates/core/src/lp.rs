//! Dense two-phase primal simplex.
//!
//! Problems are stated as `min c·x` subject to rows `a_r·x {≤,=,≥} b_r` and
//! `x ≥ lower`. Pivoting follows Bland's rule (lowest-index entering column,
//! lowest-index leaving variable on ratio ties), so a solve always terminates
//! and repeated solves of the same problem are bit-identical.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FEASIBILITY_TOL: f64 = 1e-7;
pub const OPTIMALITY_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 50_000;

const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Capacity,
    Material,
    Linking,
    Demand,
    /// Rows added by a scenario restriction (e.g. a production cap).
    Restriction,
    Other,
}

impl ConstraintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::Capacity => "capacity",
            ConstraintKind::Material => "material",
            ConstraintKind::Linking => "linking",
            ConstraintKind::Demand => "demand",
            ConstraintKind::Restriction => "restriction",
            ConstraintKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintTag {
    pub kind: ConstraintKind,
    /// Entity ids and dates identifying the row, e.g. `["vancouver", "2024-04-14"]`.
    pub indices: Vec<String>,
}

impl ConstraintTag {
    pub fn new(kind: ConstraintKind, indices: &[&str]) -> Self {
        ConstraintTag {
            kind,
            indices: indices.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl std::fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}[{}]", self.kind.as_str(), self.indices.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    pub tags: Vec<ConstraintTag>,
}

impl LpProblem {
    pub fn new(var_names: Vec<String>, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            var_names,
            objective,
            matrix: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            lower_bounds: vec![0.0; n],
            tags: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64, tag: ConstraintTag) {
        self.matrix.push(coeffs);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.tags.push(tag);
    }

    pub fn check_dimensions(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        let m = self.matrix.len();
        let mismatch = |what: &str| Err(LpError::DimensionMismatch(what.to_string()));
        if self.var_names.len() != n {
            return mismatch("var_names vs objective");
        }
        if self.lower_bounds.len() != n {
            return mismatch("lower_bounds vs objective");
        }
        if self.rhs.len() != m || self.senses.len() != m || self.tags.len() != m {
            return mismatch("rhs/senses/tags vs matrix rows");
        }
        if let Some(r) = self.matrix.iter().position(|row| row.len() != n) {
            return mismatch(&format!("row {r} length"));
        }
        let finite = self.objective.iter().chain(self.rhs.iter()).chain(self.lower_bounds.iter())
            .chain(self.matrix.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(LpError::NonFinite);
        }
        Ok(())
    }

    /// Row activity `a_r·x`.
    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.matrix[row].iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, v) in x.iter().enumerate() {
            worst = worst.max(self.lower_bounds[j] - v);
        }
        for r in 0..self.num_rows() {
            let lhs = self.row_activity(r, x);
            let v = match self.senses[r] {
                Sense::Le => lhs - self.rhs[r],
                Sense::Ge => self.rhs[r] - lhs,
                Sense::Eq => (lhs - self.rhs[r]).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("problem contains a non-finite coefficient")]
    NonFinite,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            feasibility_tol: FEASIBILITY_TOL,
            optimality_tol: OPTIMALITY_TOL,
        }
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_lp_with(problem, &SolverOptions::default())
}

pub fn solve_lp_with(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    problem.check_dimensions()?;
    let n = problem.num_vars();
    let mut tableau = Tableau::build(problem);
    let mut iterations = 0;

    // Phase one: minimise the sum of artificials.
    let mut phase_one_cost = vec![0.0; tableau.cols];
    for j in tableau.artificial_start..tableau.cols {
        phase_one_cost[j] = 1.0;
    }
    tableau.price(&phase_one_cost);
    match tableau.iterate(tableau.cols, opts, &mut iterations) {
        Outcome::Optimal => {}
        Outcome::IterationLimit => return Ok(stopped(LpStatus::IterationLimit, n, iterations)),
        // The phase-one objective is bounded below by zero.
        Outcome::Unbounded => unreachable!("phase one cannot be unbounded"),
    }
    if tableau.value > opts.feasibility_tol {
        return Ok(stopped(LpStatus::Infeasible, n, iterations));
    }
    tableau.drive_out_artificials();

    // Phase two on the structural and slack columns only.
    let mut cost = vec![0.0; tableau.cols];
    cost[..n].copy_from_slice(&problem.objective);
    tableau.price(&cost);
    let limit = tableau.artificial_start;
    match tableau.iterate(limit, opts, &mut iterations) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return Ok(stopped(LpStatus::Unbounded, n, iterations)),
        Outcome::IterationLimit => return Ok(stopped(LpStatus::IterationLimit, n, iterations)),
    }

    let mut x = problem.lower_bounds.clone();
    for (r, &b) in tableau.basis.iter().enumerate() {
        if b < n {
            x[b] += tableau.rhs(r).max(0.0);
        }
    }
    let objective = problem.objective_value(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations,
    })
}

fn stopped(status: LpStatus, n: usize, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        x: vec![0.0; n],
        objective: f64::NAN,
        iterations,
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    rows: usize,
    /// Column count excluding the right-hand side.
    cols: usize,
    artificial_start: usize,
    /// Row-major, `cols + 1` entries per row; the last entry is the rhs.
    data: Vec<f64>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    value: f64,
}

impl Tableau {
    fn build(problem: &LpProblem) -> Self {
        let n = problem.num_vars();
        let m = problem.num_rows();

        // Shift x = x' + lower and orient every row to a non-negative rhs.
        let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(m);
        for r in 0..m {
            let mut coeffs = problem.matrix[r].clone();
            let mut rhs = problem.rhs[r] - problem.row_activity(r, &problem.lower_bounds);
            let mut sense = problem.senses[r];
            if rhs < 0.0 {
                coeffs.iter_mut().for_each(|a| *a = -*a);
                rhs = -rhs;
                sense = match sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
            }
            rows.push((coeffs, sense, rhs));
        }

        let slacks = rows.iter().filter(|(_, s, _)| *s != Sense::Eq).count();
        let artificials = rows.iter().filter(|(_, s, _)| *s != Sense::Le).count();
        let artificial_start = n + slacks;
        let cols = artificial_start + artificials;
        let stride = cols + 1;
        let mut data = vec![0.0; m * stride];
        let mut basis = vec![0; m];
        let (mut next_slack, mut next_art) = (n, artificial_start);
        for (r, (coeffs, sense, rhs)) in rows.into_iter().enumerate() {
            let row = &mut data[r * stride..(r + 1) * stride];
            row[..n].copy_from_slice(&coeffs);
            row[cols] = rhs;
            match sense {
                Sense::Le => {
                    row[next_slack] = 1.0;
                    basis[r] = next_slack;
                    next_slack += 1;
                }
                Sense::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis[r] = next_art;
                    next_art += 1;
                }
                Sense::Eq => {
                    row[next_art] = 1.0;
                    basis[r] = next_art;
                    next_art += 1;
                }
            }
        }
        Tableau {
            rows: m,
            cols,
            artificial_start,
            data,
            basis,
            reduced: vec![0.0; cols],
            value: 0.0,
        }
    }

    fn stride(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, j: usize) -> f64 {
        self.data[r * self.stride() + j]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    /// Recomputes reduced costs and objective value for `cost` under the current basis.
    fn price(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        self.value = 0.0;
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                self.reduced[j] -= cb * self.at(r, j);
            }
            self.value += cb * self.rhs(r);
        }
    }

    fn iterate(&mut self, col_limit: usize, opts: &SolverOptions, iterations: &mut usize) -> Outcome {
        loop {
            let Some(enter) = (0..col_limit).find(|&j| self.reduced[j] < -opts.optimality_tol) else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        if ratio < best_ratio - RATIO_TIE_TOL
                            || (ratio <= best_ratio + RATIO_TIE_TOL && self.basis[r] < self.basis[best])
                        {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((leave, _)) = leave else {
                return Outcome::Unbounded;
            };
            if *iterations >= opts.max_iterations {
                return Outcome::IterationLimit;
            }
            self.pivot(leave, enter);
            *iterations += 1;
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let stride = self.stride();
        let piv = self.at(r, e);
        {
            let row = &mut self.data[r * stride..(r + 1) * stride];
            row.iter_mut().for_each(|v| *v /= piv);
            row[e] = 1.0;
        }
        let pivot_row: Vec<f64> = self.data[r * stride..(r + 1) * stride].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let factor = self.data[i * stride + e];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.data[i * stride..(i + 1) * stride];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            row[e] = 0.0;
        }
        let factor = self.reduced[e];
        if factor != 0.0 {
            for (v, p) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            self.reduced[e] = 0.0;
            self.value += factor * pivot_row[self.cols];
        }
        self.basis[r] = e;
    }

    /// Pivots zero-level artificials out of the basis; rows where that is
    /// impossible are linearly redundant and are dropped.
    fn drive_out_artificials(&mut self) {
        let mut r = 0;
        while r < self.rows {
            if self.basis[r] < self.artificial_start {
                r += 1;
                continue;
            }
            let replacement = (0..self.artificial_start).find(|&j| self.at(r, j).abs() > PIVOT_TOL);
            match replacement {
                Some(j) => {
                    self.pivot(r, j);
                    r += 1;
                }
                None => {
                    let stride = self.stride();
                    self.data.drain(r * stride..(r + 1) * stride);
                    self.basis.remove(r);
                    self.rows -= 1;
                }
            }
        }
    }
}
