use serde::{Deserialize, Serialize};

use crate::lp::{solve_lp, ConstraintTag, LpProblem, LpStatus, Sense};

use super::{PlanningError, QUANTITY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tag: ConstraintTag,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub total_violation: f64,
    pub violated: Vec<Violation>,
    /// Original objective evaluated at the relaxed point.
    pub relaxed_objective: f64,
    /// The relaxed primal point over the original columns.
    pub x: Vec<f64>,
}

/// Elastic relaxation: every row gets a non-negative slack that may absorb
/// violation (one for inequalities, a +/- pair for equalities). The total
/// slack is minimised first and the original objective second, via a single
/// weighted objective `W·Σe + c·x` with `W = 1e6·(1 + max|c|)`.
pub fn relax_infeasible(problem: &LpProblem) -> Result<RelaxationReport, PlanningError> {
    problem.check_dimensions()?;
    let n = problem.num_vars();
    let max_c = problem.objective.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let weight = 1e6 * (1.0 + max_c);

    // owner[k] = row whose violation elastic column k measures.
    let mut owner = Vec::new();
    let mut signs = Vec::new();
    for (r, sense) in problem.senses.iter().enumerate() {
        match sense {
            Sense::Le => {
                owner.push(r);
                signs.push(-1.0);
            }
            Sense::Ge => {
                owner.push(r);
                signs.push(1.0);
            }
            Sense::Eq => {
                owner.push(r);
                signs.push(1.0);
                owner.push(r);
                signs.push(-1.0);
            }
        }
    }

    let mut elastic = problem.clone();
    for (k, &r) in owner.iter().enumerate() {
        elastic.var_names.push(format!("e[{}#{k}]", problem.tags[r]));
        elastic.objective.push(weight);
        elastic.lower_bounds.push(0.0);
        for (row_idx, row) in elastic.matrix.iter_mut().enumerate() {
            row.push(if row_idx == r { signs[k] } else { 0.0 });
        }
    }

    let solution = solve_lp(&elastic)?;
    if solution.status != LpStatus::Optimal {
        return Err(PlanningError::NotOptimal(solution.status));
    }

    let mut per_row = vec![0.0; problem.num_rows()];
    for (k, &r) in owner.iter().enumerate() {
        per_row[r] += solution.x[n + k];
    }
    let violated: Vec<Violation> = per_row
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > QUANTITY_TOL)
        .map(|(r, &amount)| Violation {
            tag: problem.tags[r].clone(),
            amount,
        })
        .collect();
    let total_violation = violated.iter().map(|v| v.amount).sum();
    let x = solution.x[..n].to_vec();
    Ok(RelaxationReport {
        total_violation,
        violated,
        relaxed_objective: problem.objective_value(&x),
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{ConstraintKind, LpProblem};

    #[test]
    fn contradictory_bounds_need_one_unit() {
        let mut p = LpProblem::new(vec!["x".into()], vec![1.0]);
        p.add_row(vec![1.0], Sense::Ge, 2.0, ConstraintTag::new(ConstraintKind::Other, &["ge"]));
        p.add_row(vec![1.0], Sense::Le, 1.0, ConstraintTag::new(ConstraintKind::Other, &["le"]));
        let report = relax_infeasible(&p).unwrap();
        assert!((report.total_violation - 1.0).abs() < 1e-9);
        assert_eq!(report.violated.len(), 1);
    }

    #[test]
    fn feasible_problem_has_no_violation() {
        let mut p = LpProblem::new(vec!["x".into(), "y".into()], vec![-1.0, -2.0]);
        p.add_row(vec![1.0, 1.0], Sense::Le, 4.0, ConstraintTag::new(ConstraintKind::Other, &[]));
        p.add_row(vec![1.0, -1.0], Sense::Eq, 1.0, ConstraintTag::new(ConstraintKind::Other, &[]));
        let base = solve_lp(&p).unwrap();
        let report = relax_infeasible(&p).unwrap();
        assert_eq!(report.total_violation, 0.0);
        assert!((report.relaxed_objective - base.objective).abs() < 1e-9);
    }
}
