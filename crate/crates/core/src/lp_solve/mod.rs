//! Linear-program solvers.
//!
//! [`solve`] dispatches on [`Backend`]: the bundled dense two-phase bounded
//! simplex, a sparse revised simplex for problems too large for a dense
//! tableau, or an external solver invoked as a subprocess.

mod dense;
mod external;
mod sparse;

use thiserror::Error;

use crate::lp_build::LpProblem;

pub use external::{parse_solution_file, ExternalSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values, one per problem variable. Empty unless a point was found.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Simplex pivots (including bound flips). Back ends that do not report
    /// a count leave it at 0.
    pub iterations: usize,
    /// Largest row or bound violation of `x`.
    pub max_residual: f64,
    /// For infeasible problems, the row whose phase-one artificial stayed
    /// largest, when the back end can tell.
    pub infeasible_row: Option<String>,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            iterations,
            max_residual: f64::NAN,
            infeasible_row: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("external solver i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Backend {
    /// Dense simplex for small problems, sparse otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
    External(ExternalSolver),
}

/// Tableau size (rows × columns) above which [`Backend::Auto`] switches to the
/// sparse back end.
pub const DENSE_CELL_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Primal feasibility tolerance.
    pub feas_tol: f64,
    /// Reduced-cost optimality tolerance.
    pub opt_tol: f64,
    /// Pivot limit for the dense simplex; `None` picks one from the problem size.
    pub max_iters: Option<usize>,
    /// Consecutive degenerate pivots after which Bland's rule takes over.
    pub stall_limit: usize,
    pub backend: Backend,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-8,
            opt_tol: 1e-9,
            max_iters: None,
            stall_limit: 50,
            backend: Backend::Auto,
        }
    }
}

impl SolveOptions {
    pub fn with_backend(backend: Backend) -> Self {
        SolveOptions { backend, ..Default::default() }
    }
}

fn check_well_formed(lp: &LpProblem) -> Result<(), LpError> {
    let n = lp.num_vars();
    if lp.objective.len() != n || lp.lower.len() != n || lp.upper.len() != n {
        return Err(LpError::Malformed("variable vectors have different lengths".into()));
    }
    for (j, (&l, &u)) in lp.lower.iter().zip(&lp.upper).enumerate() {
        if !l.is_finite() {
            return Err(LpError::Malformed(format!("variable {} has no finite lower bound", lp.vars[j])));
        }
        if u.is_nan() || u < l {
            return Err(LpError::Malformed(format!("variable {} has upper bound below lower", lp.vars[j])));
        }
    }
    if let Some(c) = lp.objective.iter().find(|c| !c.is_finite()) {
        return Err(LpError::Malformed(format!("non-finite objective coefficient {c}")));
    }
    for row in lp.eq_rows.iter().chain(&lp.le_rows) {
        if !row.rhs.is_finite() || row.terms.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
            return Err(LpError::Malformed(format!("row {} has a bad coefficient or index", row.label)));
        }
    }
    Ok(())
}

/// Solves `lp`. Infeasibility, unboundedness and the iteration limit are
/// reported through [`LpSolution::status`]; errors are reserved for malformed
/// input and back-end failures.
pub fn solve(lp: &LpProblem, opts: &SolveOptions) -> Result<LpSolution, LpError> {
    check_well_formed(lp)?;
    let mut sol = match &opts.backend {
        Backend::Dense => dense::solve(lp, opts),
        Backend::Sparse => sparse::solve(lp),
        Backend::External(ext) => ext.solve(lp),
        Backend::Auto => {
            let rows = lp.num_rows();
            let cols = lp.num_vars() + lp.le_rows.len() + rows;
            if rows.saturating_mul(cols) <= DENSE_CELL_LIMIT {
                dense::solve(lp, opts)
            } else {
                sparse::solve(lp)
            }
        }
    }?;
    if !sol.x.is_empty() {
        sol.objective = lp.objective_value(&sol.x);
        sol.max_residual = lp.max_residual(&sol.x);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_build::{LpKind, VarKey};

    fn one_var(lower: f64) -> LpProblem {
        let mut lp = LpProblem::new(LpKind::Generic);
        lp.add_var(VarKey::X(0), 1.0, lower, f64::INFINITY);
        lp
    }

    #[test]
    fn min_x_with_x_at_least_one() {
        let mut lp = one_var(0.0);
        lp.add_ge("x_ge_1", vec![(0, 1.0)], 1.0);
        for backend in [Backend::Dense, Backend::Sparse, Backend::Auto] {
            let sol = solve(&lp, &SolveOptions::with_backend(backend)).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.x[0] - 1.0).abs() < 1e-12);
            assert!((sol.objective - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut lp = one_var(0.0);
        lp.add_eq("z_is_0", vec![(0, 1.0)], 0.0);
        lp.add_eq("z_is_1", vec![(0, 1.0)], 1.0);
        for backend in [Backend::Dense, Backend::Sparse] {
            let sol = solve(&lp, &SolveOptions::with_backend(backend)).unwrap();
            assert_eq!(sol.status, LpStatus::Infeasible);
        }
        let sol = solve(&lp, &SolveOptions::with_backend(Backend::Dense)).unwrap();
        assert!(sol.infeasible_row.is_some());
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LpProblem::new(LpKind::Generic);
        lp.add_var(VarKey::X(0), -1.0, 0.0, f64::INFINITY);
        lp.add_var(VarKey::X(1), 0.0, 0.0, f64::INFINITY);
        lp.add_le("r", vec![(0, 1.0), (1, -1.0)], 1.0);
        for backend in [Backend::Dense, Backend::Sparse] {
            let sol = solve(&lp, &SolveOptions::with_backend(backend.clone())).unwrap();
            assert_eq!(sol.status, LpStatus::Unbounded, "{backend:?}");
        }
    }

    #[test]
    fn malformed_input_is_an_error() {
        let mut lp = one_var(f64::NEG_INFINITY);
        assert!(matches!(solve(&lp, &SolveOptions::default()), Err(LpError::Malformed(_))));
        lp.lower[0] = 2.0;
        lp.upper[0] = 1.0;
        assert!(solve(&lp, &SolveOptions::default()).is_err());
    }
}
