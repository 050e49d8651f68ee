//! Linear-program formulations and policy recovery.
//!
//! The long-session cost `p0ᵀ(I − Q)⁻¹c` is not convex in the policy, but with
//! `zᵀ = p0ᵀ(I − Q)⁻¹` and the flow variables `f_ij = z_i·r_ij` every
//! constraint becomes linear and the objective is `cᵀz`. Because `p0 > 0`
//! forces `z > 0`, the policy is recovered uniquely as `r_ij = f_ij / z_i`.
//!
//! Variable layout is fixed: `[z | f row-major]` for uniform clicks and
//! `[z | f¹ | … | fᴺ]` for positional clicks, with diagonal flows removed
//! from the variable set.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::amc;
use crate::lp_solve::{LpSolution, LpStatus};
use crate::model::{q_max, q_max_positional, validate_policy, ModelError, Policy, Scenario};

/// Default lower limit on `z_i` below which recovery is refused.
pub const Z_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Amc(#[from] amc::AmcError),
    #[error("alpha must lie in (0, 1) for the LP formulations, got {0}")]
    Alpha(f64),
    #[error("solution is not optimal ({0:?})")]
    NotOptimal(LpStatus),
    #[error("solution has {got} variables, problem has {want}")]
    SolutionSize { got: usize, want: usize },
    #[error("z[{index}] = {value:e} is not strictly positive; popularity must be positive or the solver failed")]
    VanishingVisitRate { index: usize, value: f64 },
    #[error("problem kind {0:?} does not describe a recommendation policy")]
    WrongKind(LpKind),
}

/// Identity of one LP variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKey {
    /// Scaled visit rate of item `i`.
    Z(usize),
    /// Flow `f_ij = z_i·r_ij`.
    F { i: usize, j: usize },
    /// Flow `fⁿ_ij = z_i·rⁿ_ij` for slot `n`.
    SlotF { n: usize, i: usize, j: usize },
    /// Recommendation probability `r_ij` (myopic problems).
    R { i: usize, j: usize },
    /// Anonymous variable.
    X(usize),
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::Z(i) => write!(f, "z_{i}"),
            VarKey::F { i, j } => write!(f, "f_{i}_{j}"),
            VarKey::SlotF { n, i, j } => write!(f, "fs{n}_{i}_{j}"),
            VarKey::R { i, j } => write!(f, "r_{i}_{j}"),
            VarKey::X(i) => write!(f, "x_{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpKind {
    /// Long session, uniform clicks.
    Uniform,
    /// Long session, position-dependent clicks.
    Positional,
    /// Myopic problem restricted to one row of the policy.
    GreedyRow(usize),
    /// Myopic problem over the whole policy, objective `p0ᵀ·R·c`.
    GreedyJoint,
    Generic,
}

/// One linear row `Σ coeff·x (= or ≤) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRow {
    pub label: String,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// A linear program `min cᵀx` subject to equality rows, `≤` rows and
/// per-variable bounds. Lower bounds must be finite; upper bounds may be
/// infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub kind: LpKind,
    pub objective: Vec<f64>,
    pub eq_rows: Vec<LinRow>,
    pub le_rows: Vec<LinRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub vars: Vec<VarKey>,
}

impl LpProblem {
    pub fn new(kind: LpKind) -> Self {
        LpProblem {
            kind,
            objective: Vec::new(),
            eq_rows: Vec::new(),
            le_rows: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            vars: Vec::new(),
        }
    }

    pub fn add_var(&mut self, key: VarKey, cost: f64, lower: f64, upper: f64) -> usize {
        self.vars.push(key);
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.vars.len() - 1
    }

    /// Adds `Σ terms = rhs`. Repeated variables are merged and zero
    /// coefficients dropped.
    pub fn add_eq(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        let row = LinRow { label: label.into(), terms: merge_terms(terms), rhs };
        self.eq_rows.push(row);
    }

    /// Adds `Σ terms ≤ rhs`.
    pub fn add_le(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        let row = LinRow { label: label.into(), terms: merge_terms(terms), rhs };
        self.le_rows.push(row);
    }

    /// Adds `Σ terms ≥ rhs`, stored negated in `≤` form.
    pub fn add_ge(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        let negated = terms.into_iter().map(|(j, a)| (j, -a)).collect();
        self.add_le(label, negated, -rhs);
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.eq_rows.len() + self.le_rows.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let eq = self.eq_rows.iter().map(|r| (r.eval(x) - r.rhs).abs());
        let le = self.le_rows.iter().map(|r| (r.eval(x) - r.rhs).max(0.0));
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0));
        eq.chain(le).chain(bounds).fold(0.0, f64::max)
    }

    /// Label of the row or bound violated the most at `x`.
    pub fn tightest_row(&self, x: &[f64]) -> Option<String> {
        let eq = self.eq_rows.iter().map(|r| ((r.eval(x) - r.rhs).abs(), r.label.clone()));
        let le = self.le_rows.iter().map(|r| (r.eval(x) - r.rhs, r.label.clone()));
        eq.chain(le)
            .filter(|(v, _)| *v > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, l)| l)
    }

    pub fn var_index(&self) -> HashMap<String, usize> {
        self.vars.iter().enumerate().map(|(i, k)| (k.to_string(), i)).collect()
    }

    /// Plain-text dump in CPLEX LP format, readable by most external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "\\ {:?} problem: {} variables, {} rows", self.kind, self.num_vars(), self.num_rows());
        out.push_str("Minimize\n obj:");
        let all: Vec<(usize, f64)> = self.objective.iter().copied().enumerate().collect();
        write_terms(&mut out, &self.vars, &all);
        out.push_str("\nSubject To\n");
        for (rows, op) in [(&self.eq_rows, "="), (&self.le_rows, "<=")] {
            for row in rows {
                let _ = write!(out, " {}:", row.label);
                if row.terms.is_empty() {
                    // LP format needs at least one variable per row
                    let _ = write!(out, " 0 {}", self.vars[0]);
                }
                write_terms(&mut out, &self.vars, &row.terms);
                let _ = writeln!(out, " {op} {}", row.rhs);
            }
        }
        out.push_str("Bounds\n");
        for (k, (&l, &u)) in self.vars.iter().zip(self.lower.iter().zip(&self.upper)) {
            if u.is_infinite() {
                let _ = writeln!(out, " {k} >= {l}");
            } else {
                let _ = writeln!(out, " {l} <= {k} <= {u}");
            }
        }
        out.push_str("End\n");
        out
    }
}

fn merge_terms(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (j, a) in terms {
        match seen.get(&j) {
            Some(&pos) => out[pos].1 += a,
            None => {
                seen.insert(j, out.len());
                out.push((j, a));
            }
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

fn write_terms(out: &mut String, vars: &[VarKey], terms: &[(usize, f64)]) {
    for (n, &(j, a)) in terms.iter().enumerate() {
        if n > 0 && n % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", a.abs(), vars[j]);
    }
}

fn require_lp_alpha(s: &Scenario) -> Result<(), BuildError> {
    if !(s.alpha() > 0.0 && s.alpha() < 1.0) {
        return Err(BuildError::Alpha(s.alpha()));
    }
    Ok(())
}

/// Index of `f_ij` (`j ≠ i`) within a `K·(K−1)` block.
fn flow_offset(k: usize, i: usize, j: usize) -> usize {
    i * (k - 1) + if j < i { j } else { j - 1 }
}

/// Long-session problem with uniform clicks.
///
/// Rows, in order: `K` quality rows, `K` budget rows, `K·(K−1)` caps
/// `f_ij ≤ z_i`, `K` stationarity rows. That is `K² + 2K` rows in total:
/// `2K` equalities and `K² ` inequalities, with `f ≥ 0` and `z ≥ 0` as bounds.
pub fn build_op_uni(s: &Scenario) -> Result<LpProblem, BuildError> {
    require_lp_alpha(s)?;
    let k = s.k();
    let n = s.n() as f64;
    let u = s.similarity();
    let qmax = q_max(u, s.n())?;
    let mut lp = LpProblem::new(LpKind::Uniform);
    for i in 0..k {
        lp.add_var(VarKey::Z(i), s.costs()[i], 0.0, f64::INFINITY);
    }
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            lp.add_var(VarKey::F { i, j }, 0.0, 0.0, f64::INFINITY);
        }
    }
    let f = |i: usize, j: usize| k + flow_offset(k, i, j);
    let others = |i: usize| (0..k).filter(move |&j| j != i);

    for i in 0..k {
        let mut terms: Vec<(usize, f64)> = others(i).map(|j| (f(i, j), u[(i, j)])).collect();
        terms.push((i, -s.q() * qmax[i]));
        lp.add_ge(format!("quality_{i}"), terms, 0.0);
    }
    for i in 0..k {
        let mut terms: Vec<(usize, f64)> = others(i).map(|j| (f(i, j), 1.0)).collect();
        terms.push((i, -n));
        lp.add_eq(format!("budget_{i}"), terms, 0.0);
    }
    for i in 0..k {
        for j in others(i) {
            lp.add_le(format!("cap_{i}_{j}"), vec![(f(i, j), 1.0), (i, -1.0)], 0.0);
        }
    }
    for j in 0..k {
        let mut terms = vec![(j, 1.0)];
        terms.extend(others(j).map(|i| (f(i, j), -s.alpha() / n)));
        lp.add_eq(format!("stationary_{j}"), terms, s.popularity()[j]);
    }
    Ok(lp)
}

/// Long-session problem with position-dependent clicks.
///
/// Rows, in order: `K` quality rows, `K·N` per-slot budget rows,
/// `K·(K−1)` overlap rows `Σₙ fⁿ_ij ≤ z_i`, `K` stationarity rows. With
/// `N = 1` this is row-for-row the uniform problem.
pub fn build_op_pref(s: &Scenario) -> Result<LpProblem, BuildError> {
    require_lp_alpha(s)?;
    let k = s.k();
    let slots = s.n();
    let v = s.clicks();
    let u = s.similarity();
    let qmax = q_max_positional(u, v)?;
    let mut lp = LpProblem::new(LpKind::Positional);
    for i in 0..k {
        lp.add_var(VarKey::Z(i), s.costs()[i], 0.0, f64::INFINITY);
    }
    for n in 0..slots {
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                lp.add_var(VarKey::SlotF { n, i, j }, 0.0, 0.0, f64::INFINITY);
            }
        }
    }
    let block = k * (k - 1);
    let f = |n: usize, i: usize, j: usize| k + n * block + flow_offset(k, i, j);
    let others = |i: usize| (0..k).filter(move |&j| j != i);

    for i in 0..k {
        let mut terms: Vec<(usize, f64)> = (0..slots)
            .flat_map(|n| others(i).map(move |j| (n, j)))
            .map(|(n, j)| (f(n, i, j), v[n] * u[(i, j)]))
            .collect();
        terms.push((i, -s.q() * qmax[i]));
        lp.add_ge(format!("quality_{i}"), terms, 0.0);
    }
    for i in 0..k {
        for n in 0..slots {
            let mut terms: Vec<(usize, f64)> = others(i).map(|j| (f(n, i, j), 1.0)).collect();
            terms.push((i, -1.0));
            let label = if slots == 1 { format!("budget_{i}") } else { format!("budget_{i}_s{n}") };
            lp.add_eq(label, terms, 0.0);
        }
    }
    for i in 0..k {
        for j in others(i) {
            let mut terms: Vec<(usize, f64)> = (0..slots).map(|n| (f(n, i, j), 1.0)).collect();
            terms.push((i, -1.0));
            let label = if slots == 1 { format!("cap_{i}_{j}") } else { format!("overlap_{i}_{j}") };
            lp.add_le(label, terms, 0.0);
        }
    }
    for j in 0..k {
        let mut terms = vec![(j, 1.0)];
        terms.extend(
            (0..slots).flat_map(|n| others(j).map(move |i| (n, i))).map(|(n, i)| (f(n, i, j), -s.alpha() * v[n])),
        );
        lp.add_eq(format!("stationary_{j}"), terms, s.popularity()[j]);
    }
    Ok(lp)
}

fn greedy_row(s: &Scenario, qmax: &DVector<f64>, lp: &mut LpProblem, i: usize, weight: f64) {
    let k = s.k();
    let u = s.similarity();
    let first = lp.num_vars();
    for j in (0..k).filter(|&j| j != i) {
        lp.add_var(VarKey::R { i, j }, weight * s.costs()[j], 0.0, 1.0);
    }
    let cols: Vec<(usize, usize)> = (0..k).filter(|&j| j != i).enumerate().map(|(t, j)| (first + t, j)).collect();
    lp.add_ge(
        format!("quality_{i}"),
        cols.iter().map(|&(x, j)| (x, u[(i, j)])).collect(),
        s.q() * qmax[i],
    );
    lp.add_eq(format!("budget_{i}"), cols.iter().map(|&(x, _)| (x, 1.0)).collect(), s.n() as f64);
}

/// The myopic problem split into one independent LP per row of the policy:
/// `min Σⱼ r_ij·c_j` s.t. quality, budget `N` and `0 ≤ r_ij ≤ 1`.
pub fn build_greedy(s: &Scenario) -> Result<Vec<LpProblem>, BuildError> {
    let qmax = q_max(s.similarity(), s.n())?;
    Ok((0..s.k())
        .map(|i| {
            let mut lp = LpProblem::new(LpKind::GreedyRow(i));
            greedy_row(s, &qmax, &mut lp, i, 1.0);
            lp
        })
        .collect())
}

/// The myopic problem as one LP with objective `p0ᵀ·R·c`.
pub fn build_greedy_joint(s: &Scenario) -> Result<LpProblem, BuildError> {
    let qmax = q_max(s.similarity(), s.n())?;
    let mut lp = LpProblem::new(LpKind::GreedyJoint);
    for i in 0..s.k() {
        greedy_row(s, &qmax, &mut lp, i, s.popularity()[i]);
    }
    Ok(lp)
}

/// A policy recovered from an optimal LP solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredPolicy {
    pub policy: Policy,
    /// Scaled visit rates: from the LP for the long-session problems, from
    /// the analytic evaluation for the myopic one.
    pub z: DVector<f64>,
    /// LP objective value (`cᵀz` for the long-session problems).
    pub objective_value: f64,
    /// Long-term expected cost implied by the LP, `(1 − α)·cᵀz`.
    pub ltec: f64,
    /// Largest constraint violation of the LP solution.
    pub residual: f64,
}

fn require_optimal(lp: &LpProblem, sol: &LpSolution) -> Result<(), BuildError> {
    if sol.status != LpStatus::Optimal {
        return Err(BuildError::NotOptimal(sol.status));
    }
    if sol.x.len() != lp.num_vars() {
        return Err(BuildError::SolutionSize { got: sol.x.len(), want: lp.num_vars() });
    }
    Ok(())
}

/// Recovers `r_ij = f_ij / z_i` (or `rⁿ_ij = fⁿ_ij / z_i`) from a solved
/// long-session LP. Entries are clamped into `[0, 1]` to remove solver noise.
pub fn recover_policy(lp: &LpProblem, sol: &LpSolution, s: &Scenario) -> Result<RecoveredPolicy, BuildError> {
    recover_policy_with(lp, sol, s, Z_EPS)
}

pub fn recover_policy_with(
    lp: &LpProblem,
    sol: &LpSolution,
    s: &Scenario,
    z_eps: f64,
) -> Result<RecoveredPolicy, BuildError> {
    require_optimal(lp, sol)?;
    let slots = match lp.kind {
        LpKind::Uniform => None,
        LpKind::Positional => Some(s.n()),
        other => return Err(BuildError::WrongKind(other)),
    };
    let k = s.k();
    let z = DVector::from_iterator(k, sol.x[..k].iter().copied());
    if let Some(index) = z.iter().position(|&v| !(v > z_eps)) {
        return Err(BuildError::VanishingVisitRate { index, value: z[index] });
    }
    let blocks = slots.unwrap_or(1);
    let mut mats = vec![DMatrix::zeros(k, k); blocks];
    for (idx, key) in lp.vars.iter().enumerate().skip(k) {
        let (n, i, j) = match *key {
            VarKey::F { i, j } => (0, i, j),
            VarKey::SlotF { n, i, j } => (n, i, j),
            _ => continue,
        };
        mats[n][(i, j)] = (sol.x[idx] / z[i]).clamp(0.0, 1.0);
    }
    let policy = match slots {
        None => Policy::Uniform(mats.pop().expect("one block")),
        Some(_) => Policy::Positional(mats),
    };
    let objective_value = s.costs().dot(&z);
    Ok(RecoveredPolicy {
        policy,
        z,
        objective_value,
        ltec: (1.0 - s.alpha()) * objective_value,
        residual: lp.max_residual(&sol.x),
    })
}

/// Assembles the myopic policy from per-row solutions (in row order).
pub fn assemble_greedy(
    rows: &[LpProblem],
    sols: &[LpSolution],
    s: &Scenario,
) -> Result<RecoveredPolicy, BuildError> {
    let k = s.k();
    let mut r = DMatrix::zeros(k, k);
    let mut objective_value = 0.0;
    let mut residual: f64 = 0.0;
    for (lp, sol) in rows.iter().zip(sols) {
        require_optimal(lp, sol)?;
        for (idx, key) in lp.vars.iter().enumerate() {
            if let VarKey::R { i, j } = *key {
                r[(i, j)] = sol.x[idx].clamp(0.0, 1.0);
            }
        }
        objective_value += sol.objective;
        residual = residual.max(lp.max_residual(&sol.x));
    }
    let policy = Policy::Uniform(r);
    let report = amc::ltec(&policy, s)?;
    Ok(RecoveredPolicy {
        policy,
        z: report.z,
        objective_value,
        ltec: report.ltec,
        residual,
    })
}

/// Checks a recovered policy against the policy invariants.
pub fn is_feasible(rec: &RecoveredPolicy, s: &Scenario, tol: f64) -> Result<bool, BuildError> {
    Ok(validate_policy(&rec.policy, s, tol)?.is_empty())
}
