//! Subprocess hook for external LP solvers.
//!
//! The problem is written in CPLEX LP format to a temporary directory and a
//! user-supplied shell command is run with `{lp}` and `{sol}` replaced by the
//! problem and solution paths. The solution file is plain text:
//!
//! ```text
//! # comments and blank lines are ignored
//! status optimal            (optional: optimal | infeasible | unbounded)
//! z_0 1.25
//! f_0_1 = 0.5
//! ```
//!
//! Variables missing from the file are taken at their lower bound, since most
//! solvers omit zero-valued columns.

use std::path::PathBuf;
use std::process::Command;

use super::{LpError, LpSolution, LpStatus};
use crate::lp_build::LpProblem;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    /// Shell command template containing `{lp}` and `{sol}`.
    pub command: String,
    /// Scratch directory; the system temp dir when `None`.
    pub work_dir: Option<PathBuf>,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalSolver { command: command.into(), work_dir: None }
    }

    pub(super) fn solve(&self, lp: &LpProblem) -> Result<LpSolution, LpError> {
        let dir = self.work_dir.clone().unwrap_or_else(std::env::temp_dir);
        let stem = format!("netrec-{}-{}", std::process::id(), unique_suffix());
        let lp_path = dir.join(format!("{stem}.lp"));
        let sol_path = dir.join(format!("{stem}.sol"));
        std::fs::write(&lp_path, lp.to_lp_format())?;
        let cmd = self
            .command
            .replace("{lp}", &lp_path.to_string_lossy())
            .replace("{sol}", &sol_path.to_string_lossy());
        let output = Command::new("sh").arg("-c").arg(&cmd).output();
        let _ = std::fs::remove_file(&lp_path);
        let output = output?;
        if !output.status.success() {
            let _ = std::fs::remove_file(&sol_path);
            return Err(LpError::Solver(format!(
                "`{cmd}` exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = std::fs::read_to_string(&sol_path);
        let _ = std::fs::remove_file(&sol_path);
        parse_solution_file(lp, &text?)
    }
}

fn unique_suffix() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

/// Parses a `name value` / `name = value` solution file against `lp`'s
/// variable names.
pub fn parse_solution_file(lp: &LpProblem, text: &str) -> Result<LpSolution, LpError> {
    let index = lp.var_index();
    let mut x = lp.lower.clone();
    let mut status = LpStatus::Optimal;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cleaned = line.replace(['=', ':'], " ");
        let mut parts = cleaned.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(LpError::Solver(format!("solution line {}: expected `name value`", lineno + 1)));
        };
        if name.eq_ignore_ascii_case("status") {
            status = match value.to_ascii_lowercase().as_str() {
                "optimal" => LpStatus::Optimal,
                "infeasible" => LpStatus::Infeasible,
                "unbounded" => LpStatus::Unbounded,
                other => return Err(LpError::Solver(format!("unknown status `{other}`"))),
            };
            continue;
        }
        let &j = index
            .get(name)
            .ok_or_else(|| LpError::Solver(format!("solution line {}: unknown variable `{name}`", lineno + 1)))?;
        x[j] = value
            .parse()
            .map_err(|_| LpError::Solver(format!("solution line {}: bad number `{value}`", lineno + 1)))?;
    }
    if status != LpStatus::Optimal {
        return Ok(LpSolution::without_point(status, 0));
    }
    Ok(LpSolution {
        status,
        objective: lp.objective_value(&x),
        max_residual: lp.max_residual(&x),
        x,
        iterations: 0,
        infeasible_row: None,
    })
}
