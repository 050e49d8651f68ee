//! Sparse revised simplex back end, delegated to `minilp`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use super::{LpError, LpSolution, LpStatus};
use crate::lp_build::LpProblem;

pub(super) fn solve(lp: &LpProblem) -> Result<LpSolution, LpError> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..lp.num_vars())
        .map(|j| problem.add_var(lp.objective[j], (lp.lower[j], lp.upper[j])))
        .collect();
    for (rows, op) in [(&lp.eq_rows, ComparisonOp::Eq), (&lp.le_rows, ComparisonOp::Le)] {
        for row in rows {
            let terms: Vec<_> = row.terms.iter().map(|&(j, a)| (vars[j], a)).collect();
            problem.add_constraint(terms.as_slice(), op, row.rhs);
        }
    }
    match problem.solve() {
        // minilp reports some unbounded rays as an infinite "optimum"
        Ok(sol) if !sol.objective().is_finite() => Ok(LpSolution::without_point(LpStatus::Unbounded, 0)),
        Ok(sol) => {
            let x: Vec<f64> = vars.iter().map(|&v| sol[v]).collect();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: sol.objective(),
                max_residual: lp.max_residual(&x),
                x,
                iterations: 0,
                infeasible_row: None,
            })
        }
        Err(minilp::Error::Infeasible) => Ok(LpSolution::without_point(LpStatus::Infeasible, 0)),
        Err(minilp::Error::Unbounded) => Ok(LpSolution::without_point(LpStatus::Unbounded, 0)),
    }
}
