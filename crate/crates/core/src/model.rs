//! Scenarios, recommendation policies, the similarity-only baseline recommender
//! and quality accounting.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Default feasibility tolerance used when validating policies.
pub const FEAS_TOL: f64 = 1e-7;

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("catalog needs at least two items, got {0}")]
    CatalogTooSmall(usize),
    #[error("number of recommendation slots must satisfy 1 <= N <= K-1 (N = {n}, K = {k})")]
    Slots { n: usize, k: usize },
    #[error("alpha must lie in [0, 1), got {0}")]
    Alpha(f64),
    #[error("quality fraction must lie in [0, 1], got {0}")]
    Quality(f64),
    #[error("similarity u[{i}][{j}] = {value} is outside [0, 1]")]
    Similarity { i: usize, j: usize, value: f64 },
    #[error("cost c[{index}] = {value} must be finite and nonnegative")]
    Cost { index: usize, value: f64 },
    #[error("popularity must be strictly positive and sum to 1: {0}")]
    Popularity(String),
    #[error("click vector must be a probability vector: {0}")]
    Clicks(String),
}

/// An immutable problem instance.
///
/// The diagonal of the similarity matrix is forced to zero on construction;
/// a policy may never recommend the item currently being consumed, so the
/// diagonal carries no information.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    u: DMatrix<f64>,
    costs: DVector<f64>,
    p0: DVector<f64>,
    alpha: f64,
    n: usize,
    v: Vec<f64>,
    q: f64,
}

impl Scenario {
    /// Builds a scenario with uniform clicks over the `n` slots.
    pub fn new(
        mut u: DMatrix<f64>,
        costs: DVector<f64>,
        p0: DVector<f64>,
        alpha: f64,
        n: usize,
        q: f64,
    ) -> Result<Self, ModelError> {
        let k = u.nrows();
        if u.ncols() != k {
            return Err(ModelError::Dimension(format!(
                "similarity matrix is {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        if k < 2 {
            return Err(ModelError::CatalogTooSmall(k));
        }
        for i in 0..k {
            u[(i, i)] = 0.0;
        }
        for i in 0..k {
            for j in 0..k {
                let value = u[(i, j)];
                if !(0.0..=1.0).contains(&value) {
                    return Err(ModelError::Similarity { i, j, value });
                }
            }
        }
        let s = Scenario {
            u,
            costs,
            p0,
            alpha,
            n,
            v: vec![1.0 / n.max(1) as f64; n],
            q,
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<(), ModelError> {
        let k = self.k();
        if self.costs.len() != k {
            return Err(ModelError::Dimension(format!(
                "cost vector has length {}, catalog has {k} items",
                self.costs.len()
            )));
        }
        if self.p0.len() != k {
            return Err(ModelError::Dimension(format!(
                "popularity vector has length {}, catalog has {k} items",
                self.p0.len()
            )));
        }
        if self.n == 0 || self.n >= k {
            return Err(ModelError::Slots { n: self.n, k });
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ModelError::Alpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(ModelError::Quality(self.q));
        }
        for (index, &value) in self.costs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::Cost { index, value });
            }
        }
        if let Some(j) = self.p0.iter().position(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(ModelError::Popularity(format!(
                "p0[{j}] = {} is not strictly positive",
                self.p0[j]
            )));
        }
        let total: f64 = self.p0.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(ModelError::Popularity(format!("entries sum to {total}")));
        }
        check_click_vector(&self.v, self.n)?;
        Ok(())
    }

    /// Replaces the position click probabilities. The vector length must equal `N`.
    pub fn with_clicks(mut self, v: Vec<f64>) -> Result<Self, ModelError> {
        self.v = v;
        self.check()?;
        Ok(self)
    }

    pub fn with_quality(mut self, q: f64) -> Result<Self, ModelError> {
        self.q = q;
        self.check()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, ModelError> {
        self.alpha = alpha;
        self.check()?;
        Ok(self)
    }

    /// Changes the number of slots. Uniform clicks are resized; a positional
    /// click vector must be replaced with [`Scenario::with_clicks`] afterwards.
    pub fn with_slots(mut self, n: usize) -> Result<Self, ModelError> {
        if !self.uniform_clicks() {
            return Err(ModelError::Clicks(
                "cannot resize a non-uniform click vector; supply a new one".into(),
            ));
        }
        self.n = n;
        self.v = vec![1.0 / n.max(1) as f64; n];
        self.check()?;
        Ok(self)
    }

    pub fn with_costs(mut self, costs: DVector<f64>) -> Result<Self, ModelError> {
        self.costs = costs;
        self.check()?;
        Ok(self)
    }

    pub fn with_popularity(mut self, p0: DVector<f64>) -> Result<Self, ModelError> {
        self.p0 = p0;
        self.check()?;
        Ok(self)
    }

    /// Catalog size.
    pub fn k(&self) -> usize {
        self.u.nrows()
    }

    /// Number of recommendation slots.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn similarity(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn costs(&self) -> &DVector<f64> {
        &self.costs
    }

    pub fn popularity(&self) -> &DVector<f64> {
        &self.p0
    }

    /// Position click probabilities (length `N`).
    pub fn clicks(&self) -> &[f64] {
        &self.v
    }

    /// True when every slot is clicked with probability `1/N`.
    pub fn uniform_clicks(&self) -> bool {
        let target = 1.0 / self.n as f64;
        self.v.iter().all(|&x| (x - target).abs() <= 1e-12)
    }

    /// True when every cost is exactly 0 (hit) or 1 (miss).
    pub fn binary_costs(&self) -> bool {
        self.costs.iter().all(|&c| c == 0.0 || c == 1.0)
    }
}

fn check_click_vector(v: &[f64], n: usize) -> Result<(), ModelError> {
    if v.len() != n {
        return Err(ModelError::Clicks(format!(
            "length {} does not match N = {n}",
            v.len()
        )));
    }
    if let Some(x) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(ModelError::Clicks(format!("negative or non-finite entry {x}")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(ModelError::Clicks(format!("entries sum to {total}")));
    }
    Ok(())
}

/// A recommendation policy.
///
/// `Uniform(R)`: `r_ij` is the probability that `j` is among the `N` items
/// shown after `i`; rows sum to `N`.
///
/// `Positional(R¹..Rᴺ)`: `rⁿ_ij` is the probability that `j` is shown in slot
/// `n` after `i`; each row of each matrix sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Uniform(DMatrix<f64>),
    Positional(Vec<DMatrix<f64>>),
}

impl Policy {
    pub fn k(&self) -> usize {
        match self {
            Policy::Uniform(r) => r.nrows(),
            Policy::Positional(rs) => rs.first().map_or(0, |r| r.nrows()),
        }
    }

    pub fn is_positional(&self) -> bool {
        matches!(self, Policy::Positional(_))
    }

    /// Aggregated inclusion probabilities: `R` itself, or `Σₙ Rⁿ`.
    pub fn inclusion(&self) -> DMatrix<f64> {
        match self {
            Policy::Uniform(r) => r.clone(),
            Policy::Positional(rs) => {
                let k = self.k();
                rs.iter().fold(DMatrix::zeros(k, k), |acc, r| acc + r)
            }
        }
    }

    /// Largest distance of any entry from {0, 1}.
    pub fn integrality_gap(&self) -> f64 {
        let gap = |r: &DMatrix<f64>| {
            r.iter()
                .map(|&x| x.abs().min((x - 1.0).abs()))
                .fold(0.0, f64::max)
        };
        match self {
            Policy::Uniform(r) => gap(r),
            Policy::Positional(rs) => rs.iter().map(gap).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    /// `r_ii` (or `rⁿ_ii`) is not zero.
    DiagonalNonzero { slot: Option<usize>, row: usize },
    /// An entry lies outside `[0, 1]`.
    OutOfBounds { slot: Option<usize>, row: usize, col: usize },
    /// A row does not sum to its budget (`N` for uniform, 1 per slot).
    RowBudget { slot: Option<usize>, row: usize },
    /// `Σₙ rⁿ_ij > 1`: the item would have to appear twice in one slate.
    SlotOverlap { row: usize, col: usize },
}

/// One failed policy invariant and by how much it is violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slot = |s: Option<usize>| s.map(|n| format!(" (slot {n})")).unwrap_or_default();
        match self.kind {
            ViolationKind::DiagonalNonzero { slot: s, row } => {
                write!(f, "diagonal nonzero at {row}{}", slot(s))?
            }
            ViolationKind::OutOfBounds { slot: s, row, col } => {
                write!(f, "entry ({row}, {col}){} outside [0, 1]", slot(s))?
            }
            ViolationKind::RowBudget { slot: s, row } => {
                write!(f, "row {row}{} violates its budget", slot(s))?
            }
            ViolationKind::SlotOverlap { row, col } => {
                write!(f, "item {col} exceeds one slot in total at row {row}")?
            }
        }
        write!(f, " by {:.3e}", self.magnitude)
    }
}

/// Checks every policy invariant against the scenario within `tol`.
///
/// An empty list means the policy is valid. Dimension mismatches are errors,
/// not violations.
pub fn validate_policy(p: &Policy, s: &Scenario, tol: f64) -> Result<Vec<Violation>, ModelError> {
    let k = s.k();
    let mut out = Vec::new();
    match p {
        Policy::Uniform(r) => {
            check_shape(r, k)?;
            check_matrix(r, None, s.n() as f64, tol, &mut out);
        }
        Policy::Positional(rs) => {
            if rs.len() != s.n() {
                return Err(ModelError::Dimension(format!(
                    "{} position matrices for N = {}",
                    rs.len(),
                    s.n()
                )));
            }
            for (n, r) in rs.iter().enumerate() {
                check_shape(r, k)?;
                check_matrix(r, Some(n), 1.0, tol, &mut out);
            }
            let total = p.inclusion();
            for i in 0..k {
                for j in 0..k {
                    let excess = total[(i, j)] - 1.0;
                    if excess > tol {
                        out.push(Violation {
                            kind: ViolationKind::SlotOverlap { row: i, col: j },
                            magnitude: excess,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_shape(r: &DMatrix<f64>, k: usize) -> Result<(), ModelError> {
    if r.nrows() != k || r.ncols() != k {
        return Err(ModelError::Dimension(format!(
            "policy matrix is {}x{}, catalog has {k} items",
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(())
}

fn check_matrix(r: &DMatrix<f64>, slot: Option<usize>, budget: f64, tol: f64, out: &mut Vec<Violation>) {
    let k = r.nrows();
    for i in 0..k {
        let d = r[(i, i)].abs();
        if d > tol {
            out.push(Violation {
                kind: ViolationKind::DiagonalNonzero { slot, row: i },
                magnitude: d,
            });
        }
        for j in 0..k {
            let x = r[(i, j)];
            let excess = (-x).max(x - 1.0);
            if excess > tol || !x.is_finite() {
                out.push(Violation {
                    kind: ViolationKind::OutOfBounds { slot, row: i, col: j },
                    magnitude: if x.is_finite() { excess } else { f64::INFINITY },
                });
            }
        }
        let dev = (r.row(i).sum() - budget).abs();
        if dev > tol {
            out.push(Violation {
                kind: ViolationKind::RowBudget { slot, row: i },
                magnitude: dev,
            });
        }
    }
}

/// Indices of the `n` largest entries of row `i` of `u`, excluding `i` itself,
/// in decreasing order of similarity. Ties go to the lowest index.
pub fn top_n(u: &DMatrix<f64>, i: usize, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.ncols()).filter(|&j| j != i).collect();
    // stable sort keeps ascending index order among equal scores
    idx.sort_by(|&a, &b| u[(i, b)].total_cmp(&u[(i, a)]));
    idx.truncate(n);
    idx
}

fn check_slots(u: &DMatrix<f64>, n: usize) -> Result<(), ModelError> {
    let k = u.nrows();
    if u.ncols() != k {
        return Err(ModelError::Dimension(format!("similarity matrix is {}x{}", k, u.ncols())));
    }
    if n == 0 || n >= k {
        return Err(ModelError::Slots { n, k });
    }
    Ok(())
}

/// Maximum achievable quality per item with uniform clicks: the sum of the
/// `n` largest off-diagonal similarities in each row.
///
/// Terms are added in column order, the same order [`quality_of`] uses, so
/// the baseline's quality equals this bit for bit.
pub fn q_max(u: &DMatrix<f64>, n: usize) -> Result<DVector<f64>, ModelError> {
    check_slots(u, n)?;
    Ok(DVector::from_iterator(
        u.nrows(),
        (0..u.nrows()).map(|i| {
            let mut top = top_n(u, i, n);
            top.sort_unstable();
            top.iter().fold(0.0, |acc, &j| acc + u[(i, j)])
        }),
    ))
}

/// Slots ordered by decreasing click probability (ties: lower slot first).
pub fn slots_by_click_rank(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    order
}

/// Maximum achievable quality per item under position-dependent clicks: the
/// most similar item goes to the most clicked slot, and so on.
pub fn q_max_positional(u: &DMatrix<f64>, v: &[f64]) -> Result<DVector<f64>, ModelError> {
    let n = v.len();
    check_slots(u, n)?;
    let order = slots_by_click_rank(v);
    Ok(DVector::from_iterator(
        u.nrows(),
        (0..u.nrows()).map(|i| {
            // item placed in each slot, summed in slot order like `quality_of`
            let mut in_slot = vec![0; n];
            for (rank, j) in top_n(u, i, n).into_iter().enumerate() {
                in_slot[order[rank]] = j;
            }
            in_slot.iter().zip(v).fold(0.0, |acc, (&j, &w)| acc + w * u[(i, j)])
        }),
    ))
}

/// The similarity-only recommender.
///
/// With `clicks = None` every row recommends its `n` most similar items.
/// With `Some(v)` the `k`-th most similar item is placed in the slot with the
/// `k`-th largest click probability.
pub fn baseline_policy(u: &DMatrix<f64>, n: usize, clicks: Option<&[f64]>) -> Result<Policy, ModelError> {
    check_slots(u, n)?;
    let k = u.nrows();
    match clicks {
        None => {
            let mut r = DMatrix::zeros(k, k);
            for i in 0..k {
                for j in top_n(u, i, n) {
                    r[(i, j)] = 1.0;
                }
            }
            Ok(Policy::Uniform(r))
        }
        Some(v) => {
            if v.len() != n {
                return Err(ModelError::Clicks(format!(
                    "length {} does not match N = {n}",
                    v.len()
                )));
            }
            let order = slots_by_click_rank(v);
            let mut rs = vec![DMatrix::zeros(k, k); n];
            for i in 0..k {
                for (rank, j) in top_n(u, i, n).into_iter().enumerate() {
                    rs[order[rank]][(i, j)] = 1.0;
                }
            }
            Ok(Policy::Positional(rs))
        }
    }
}

fn row_quality(r: &DMatrix<f64>, u: &DMatrix<f64>, i: usize) -> f64 {
    (0..r.ncols()).fold(0.0, |acc, j| acc + r[(i, j)] * u[(i, j)])
}

/// Achieved recommendation quality per item.
pub fn quality_of(p: &Policy, s: &Scenario) -> Result<DVector<f64>, ModelError> {
    let k = s.k();
    let u = s.similarity();
    match p {
        Policy::Uniform(r) => {
            check_shape(r, k)?;
            Ok(DVector::from_iterator(k, (0..k).map(|i| row_quality(r, u, i))))
        }
        Policy::Positional(rs) => {
            if rs.len() != s.n() {
                return Err(ModelError::Dimension(format!(
                    "{} position matrices for N = {}",
                    rs.len(),
                    s.n()
                )));
            }
            let mut out = DVector::zeros(k);
            for (r, &w) in rs.iter().zip(s.clicks()) {
                check_shape(r, k)?;
                for i in 0..k {
                    out[i] += w * row_quality(r, u, i);
                }
            }
            Ok(out)
        }
    }
}

/// Normalised entropy of a click vector, using base-`N` logarithms so that
/// uniform clicking scores exactly 1. `0·log 0` is taken as 0; `N = 1` gives 0.
pub fn entropy(v: &[f64]) -> Result<f64, ModelError> {
    if v.is_empty() {
        return Err(ModelError::Clicks("empty click vector".into()));
    }
    check_click_vector(v, v.len())?;
    let n = v.len();
    if n == 1 {
        return Ok(0.0);
    }
    let base = (n as f64).ln();
    Ok(-v.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>() / base)
}
