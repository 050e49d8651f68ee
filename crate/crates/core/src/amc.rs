//! Analytic evaluation of a policy.
//!
//! A run of consecutive recommendation clicks is an absorbing Markov chain
//! whose transient block is `Q = (α/N)·R` for uniform clicks and
//! `Q = α·Σₙ vₙ·Rⁿ` for position-dependent clicks. Every transient state is
//! absorbed with probability `1 − α`, so `Q` has spectral radius at most `α`
//! and `G = (I − Q)⁻¹` always exists for a valid policy.
//!
//! A uniform policy evaluated in a scenario with position-dependent clicks is
//! treated as showing its slate in random order, so its transient block stays
//! `(α/N)·R` whatever `v` is.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{Policy, Scenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmcError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("alpha must lie in [0, 1), got {0}")]
    Alpha(f64),
    #[error("I - Q is singular; the policy is not a valid recommendation matrix")]
    Singular,
}

/// Analytic long-session metrics of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Long-term expected cost per request.
    pub ltec: f64,
    /// Cache hit rate, `1 − ltec`; only defined when every cost is 0 or 1.
    pub chr: Option<f64>,
    /// Expected visits to each item per renewal cycle, `zᵀ = p0ᵀ·G`.
    pub z: DVector<f64>,
    /// Row sums of `G` (expected cycle length from each starting item).
    pub g_row_sums: DVector<f64>,
    /// Expected cost accumulated in one renewal cycle, `p0ᵀ·G·c`.
    pub cycle_cost: f64,
    /// Expected renewal cycle length, `1/(1 − α)`.
    pub cycle_length: f64,
}

/// The transient block `Q` of the absorbing chain.
pub fn transient_matrix(p: &Policy, s: &Scenario) -> Result<DMatrix<f64>, AmcError> {
    let k = s.k();
    let check = |r: &DMatrix<f64>| {
        if r.nrows() != k || r.ncols() != k {
            Err(AmcError::Dimension(format!(
                "policy matrix is {}x{}, catalog has {k} items",
                r.nrows(),
                r.ncols()
            )))
        } else {
            Ok(())
        }
    };
    match p {
        Policy::Uniform(r) => {
            check(r)?;
            Ok(r * (s.alpha() / s.n() as f64))
        }
        Policy::Positional(rs) => {
            if rs.len() != s.n() {
                return Err(AmcError::Dimension(format!(
                    "{} position matrices for N = {}",
                    rs.len(),
                    s.n()
                )));
            }
            let mut q = DMatrix::zeros(k, k);
            for (r, &w) in rs.iter().zip(s.clicks()) {
                check(r)?;
                q += r * (s.alpha() * w);
            }
            Ok(q)
        }
    }
}

fn factor_and_invert(q: DMatrix<f64>) -> Result<DMatrix<f64>, AmcError> {
    let k = q.nrows();
    let identity = DMatrix::<f64>::identity(k, k);
    let system = &identity - q;
    let lu = system.clone().lu();
    let g = lu.solve(&identity).ok_or(AmcError::Singular)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(AmcError::Singular);
    }
    debug_assert!(
        (&system * &g - &identity).abs().column_sum().max() <= 1e-9 * k as f64,
        "fundamental matrix residual too large"
    );
    Ok(g)
}

/// `G = (I − Q)⁻¹`, computed by an LU solve against the identity.
pub fn fundamental_matrix(p: &Policy, s: &Scenario) -> Result<DMatrix<f64>, AmcError> {
    factor_and_invert(transient_matrix(p, s)?)
}

/// Expected cost of one renewal cycle, `p0ᵀ·G·c`.
pub fn expected_cycle_cost(p: &Policy, s: &Scenario) -> Result<f64, AmcError> {
    let g = fundamental_matrix(p, s)?;
    Ok(s.popularity().dot(&(g * s.costs())))
}

/// Expected renewal cycle length `1/(1 − α)`.
pub fn expected_cycle_length(alpha: f64) -> Result<f64, AmcError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(AmcError::Alpha(alpha));
    }
    Ok(1.0 / (1.0 - alpha))
}

/// Long-term expected cost per request, `(1 − α)·p0ᵀ·G·c`, with diagnostics.
pub fn ltec(p: &Policy, s: &Scenario) -> Result<EvalReport, AmcError> {
    let g = fundamental_matrix(p, s)?;
    let z = g.tr_mul(s.popularity());
    let cycle_cost = z.dot(s.costs());
    let cycle_length = expected_cycle_length(s.alpha())?;
    let ltec = cycle_cost / cycle_length;
    let chr = s.binary_costs().then_some(1.0 - ltec);
    Ok(EvalReport {
        ltec,
        chr,
        g_row_sums: g.column_sum(),
        z,
        cycle_cost,
        cycle_length,
    })
}
