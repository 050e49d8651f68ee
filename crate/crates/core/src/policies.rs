//! The compared recommendation policies, built and evaluated in one call.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::amc::{self, AmcError, EvalReport};
use crate::lp_build::{self, BuildError, RecoveredPolicy};
use crate::lp_solve::{self, LpError, LpSolution, LpStatus, SolveOptions};
use crate::model::{self, ModelError, Policy, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    /// Similarity-only top-N recommender.
    Baseline,
    /// P1: myopic, minimises the cost of the next request only.
    Greedy,
    /// P2: long-session optimum assuming uniform clicks.
    LongSession,
    /// P3: long-session optimum aware of the slot click probabilities.
    PositionAware,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] =
        [PolicyKind::Baseline, PolicyKind::Greedy, PolicyKind::LongSession, PolicyKind::PositionAware];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Baseline => "baseline",
            PolicyKind::Greedy => "P1",
            PolicyKind::LongSession => "P2",
            PolicyKind::PositionAware => "P3",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "base" => Ok(PolicyKind::Baseline),
            "p1" | "greedy" => Ok(PolicyKind::Greedy),
            "p2" | "uni" | "uniform" => Ok(PolicyKind::LongSession),
            "p3" | "pref" | "positional" => Ok(PolicyKind::PositionAware),
            other => Err(format!("unknown policy `{other}` (expected baseline, P1, P2 or P3)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Amc(#[from] AmcError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("LP is infeasible{}", .row.as_ref().map(|r| format!(" (tightest row: {r})")).unwrap_or_default())]
    Infeasible { row: Option<String> },
    #[error("LP solver stopped with status {0:?}")]
    SolverStatus(LpStatus),
}

/// A computed policy with its analytic evaluation and solver statistics.
#[derive(Debug, Clone)]
pub struct Solved {
    pub kind: PolicyKind,
    pub policy: Policy,
    pub report: EvalReport,
    /// Achieved quality per item.
    pub quality: DVector<f64>,
    /// Recovery details for the LP-based policies.
    pub recovered: Option<RecoveredPolicy>,
    /// Total simplex pivots (0 for back ends that do not report them).
    pub iterations: usize,
}

fn checked(sol: LpSolution) -> Result<LpSolution, PolicyError> {
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(PolicyError::Infeasible { row: sol.infeasible_row }),
        other => Err(PolicyError::SolverStatus(other)),
    }
}

/// Builds, solves and evaluates one policy.
pub fn compute(kind: PolicyKind, s: &Scenario, opts: &SolveOptions) -> Result<Solved, PolicyError> {
    let (policy, recovered, iterations) = match kind {
        PolicyKind::Baseline => {
            let clicks = (!s.uniform_clicks()).then(|| s.clicks());
            (model::baseline_policy(s.similarity(), s.n(), clicks)?, None, 0)
        }
        PolicyKind::Greedy => {
            let rows = lp_build::build_greedy(s)?;
            let sols = rows
                .par_iter()
                .map(|lp| checked(lp_solve::solve(lp, opts)?))
                .collect::<Result<Vec<_>, _>>()?;
            let iterations = sols.iter().map(|x| x.iterations).sum();
            let rec = lp_build::assemble_greedy(&rows, &sols, s)?;
            (rec.policy.clone(), Some(rec), iterations)
        }
        PolicyKind::LongSession | PolicyKind::PositionAware => {
            let lp = if kind == PolicyKind::LongSession {
                lp_build::build_op_uni(s)?
            } else {
                lp_build::build_op_pref(s)?
            };
            let sol = checked(lp_solve::solve(&lp, opts)?)?;
            let iterations = sol.iterations;
            let rec = lp_build::recover_policy(&lp, &sol, s)?;
            (rec.policy.clone(), Some(rec), iterations)
        }
    };
    let report = amc::ltec(&policy, s)?;
    let quality = model::quality_of(&policy, s)?;
    Ok(Solved { kind, policy, report, quality, recovered, iterations })
}
