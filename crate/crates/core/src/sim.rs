//! Monte Carlo oracle for the session model, exhaustive search over
//! deterministic policies, and slate rendering.
//!
//! The simulator draws the next item exactly as the analytic chain does:
//! with probability `α` it follows a recommendation (uniform policies pick
//! `j` with probability `r_ij/N`; positional policies pick slot `n ~ v` then
//! `j ~ rⁿ_i·`), otherwise it renews from `p0`. Slots are not de-duplicated
//! here; [`render_slate`] produces duplicate-free slates for display only.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::amc::{self, AmcError};
use crate::model::{q_max, validate_policy, ModelError, Policy, Scenario, FEAS_TOL};

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 100;

/// Default cap on the number of policies [`brute_force_optimum`] may evaluate.
pub const BRUTE_FORCE_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Amc(#[from] AmcError),
    #[error("policy is invalid: {0}")]
    InvalidPolicy(String),
    #[error("at least one step is required")]
    NoSteps,
    #[error("enumeration needs {count:.3e} policies, cap is {cap}")]
    CapExceeded { count: f64, cap: u64 },
    #[error("no deterministic recommendation set meets the quality floor at row {0}")]
    Infeasible(usize),
    #[error("slate row is invalid: {0}")]
    BadRow(String),
}

/// Seedable generator used throughout. Independent streams of one seed are
/// obtained with `set_stream`.
pub type SimRng = ChaCha8Rng;

pub fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws successive requests of one user session.
#[derive(Debug, Clone)]
pub struct SessionSampler {
    alpha: f64,
    popularity: WeightedIndex<f64>,
    kind: RowSampler,
}

#[derive(Debug, Clone)]
enum RowSampler {
    Uniform(Vec<WeightedIndex<f64>>),
    Positional { slots: WeightedIndex<f64>, rows: Vec<Vec<WeightedIndex<f64>>> },
}

fn weighted(weights: impl IntoIterator<Item = f64>) -> Result<WeightedIndex<f64>, SimError> {
    WeightedIndex::new(weights.into_iter().map(|w| w.max(0.0))).map_err(|e| SimError::InvalidPolicy(e.to_string()))
}

fn row_weights(r: &DMatrix<f64>, i: usize) -> impl Iterator<Item = f64> + '_ {
    r.row(i).iter().copied().collect::<Vec<_>>().into_iter()
}

impl SessionSampler {
    /// Validates the policy (within [`FEAS_TOL`]) and prepares the samplers.
    pub fn new(p: &Policy, s: &Scenario) -> Result<Self, SimError> {
        let violations = validate_policy(p, s, FEAS_TOL)?;
        if let Some(v) = violations.first() {
            return Err(SimError::InvalidPolicy(format!("{v} ({} violations)", violations.len())));
        }
        let k = s.k();
        let kind = match p {
            Policy::Uniform(r) => RowSampler::Uniform((0..k).map(|i| weighted(row_weights(r, i))).collect::<Result<_, _>>()?),
            Policy::Positional(rs) => RowSampler::Positional {
                slots: weighted(s.clicks().iter().copied())?,
                rows: rs
                    .iter()
                    .map(|r| (0..k).map(|i| weighted(row_weights(r, i))).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<_, _>>()?,
            },
        };
        Ok(SessionSampler { alpha: s.alpha(), popularity: weighted(s.popularity().iter().copied())?, kind })
    }

    /// First request of a session (or of a renewal cycle).
    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.popularity.sample(rng)
    }

    /// Next request after `current`; the flag is true when a recommendation
    /// was followed and false on a renewal.
    pub fn step<R: Rng + ?Sized>(&self, current: usize, rng: &mut R) -> (usize, bool) {
        if rng.gen::<f64>() < self.alpha {
            let next = match &self.kind {
                RowSampler::Uniform(rows) => rows[current].sample(rng),
                RowSampler::Positional { slots, rows } => {
                    let n = slots.sample(rng);
                    rows[n][current].sample(rng)
                }
            };
            (next, true)
        } else {
            (self.start(rng), false)
        }
    }
}

/// Empirical statistics of one simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub steps: u64,
    pub seed: u64,
    pub stream: u64,
    /// Mean access cost per request.
    pub empirical_cost_rate: f64,
    /// Batch-means standard error of the cost rate.
    pub stderr: f64,
    /// `1 − cost rate` when costs are binary.
    pub empirical_chr: Option<f64>,
    /// Mean length of completed renewal cycles.
    pub mean_cycle_length: f64,
    /// Standard error of the mean cycle length (cycles are i.i.d.).
    pub cycle_length_stderr: f64,
    pub cycles: u64,
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Simulates `steps` requests of one long session.
pub fn simulate(p: &Policy, s: &Scenario, steps: u64, seed: u64) -> Result<SimReport, SimError> {
    simulate_stream(p, s, steps, seed, 0)
}

/// As [`simulate`], on an explicit stream of the seeded generator.
pub fn simulate_stream(p: &Policy, s: &Scenario, steps: u64, seed: u64, stream: u64) -> Result<SimReport, SimError> {
    if steps == 0 {
        return Err(SimError::NoSteps);
    }
    let sampler = SessionSampler::new(p, s)?;
    let costs = s.costs();
    let mut rng = rng_for(seed, stream);

    let batches = BATCHES.min(steps as usize) as u64;
    let mut batch_stats = Welford::default();
    let mut batch_sum = 0.0;
    let mut batch_len = 0u64;
    let mut batch_index = 0u64;
    let mut batch_end = steps / batches;

    let mut cycles = Welford::default();
    let mut cycle_len = 1u64;
    let mut total = 0.0;

    let mut current = sampler.start(&mut rng);
    for t in 0..steps {
        if t > 0 {
            let (next, followed) = sampler.step(current, &mut rng);
            if followed {
                cycle_len += 1;
            } else {
                cycles.push(cycle_len as f64);
                cycle_len = 1;
            }
            current = next;
        }
        let c = costs[current];
        total += c;
        batch_sum += c;
        batch_len += 1;
        if t + 1 == batch_end {
            batch_stats.push(batch_sum / batch_len as f64);
            batch_sum = 0.0;
            batch_len = 0;
            batch_index += 1;
            batch_end = (batch_index + 1) * steps / batches;
        }
    }

    let rate = total / steps as f64;
    Ok(SimReport {
        steps,
        seed,
        stream,
        empirical_cost_rate: rate,
        stderr: if batches > 1 { batch_stats.stderr() } else { f64::NAN },
        empirical_chr: s.binary_costs().then_some(1.0 - rate),
        mean_cycle_length: cycles.mean,
        cycle_length_stderr: cycles.stderr(),
        cycles: cycles.n,
    })
}

/// Runs `replications` independent sessions on separate streams of `seed`,
/// in parallel, and pools them.
pub fn simulate_replicated(
    p: &Policy,
    s: &Scenario,
    steps_per_replication: u64,
    replications: u64,
    seed: u64,
) -> Result<SimReport, SimError> {
    let reports = (0..replications.max(1))
        .into_par_iter()
        .map(|r| simulate_stream(p, s, steps_per_replication, seed, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merge_reports(&reports))
}

/// Pools reports by step-weighted means and propagated standard errors.
///
/// # Panics
/// If `reports` is empty.
pub fn merge_reports(reports: &[SimReport]) -> SimReport {
    assert!(!reports.is_empty(), "nothing to merge");
    let steps: u64 = reports.iter().map(|r| r.steps).sum();
    let cycles: u64 = reports.iter().map(|r| r.cycles).sum();
    let w = |r: &SimReport| r.steps as f64 / steps as f64;
    let wc = |r: &SimReport| if cycles == 0 { 0.0 } else { r.cycles as f64 / cycles as f64 };
    let rate: f64 = reports.iter().map(|r| w(r) * r.empirical_cost_rate).sum();
    SimReport {
        steps,
        seed: reports[0].seed,
        stream: reports[0].stream,
        empirical_cost_rate: rate,
        stderr: reports.iter().map(|r| (w(r) * r.stderr).powi(2)).sum::<f64>().sqrt(),
        empirical_chr: reports[0].empirical_chr.map(|_| 1.0 - rate),
        mean_cycle_length: reports.iter().map(|r| wc(r) * r.mean_cycle_length).sum(),
        cycle_length_stderr: reports.iter().map(|r| (wc(r) * r.cycle_length_stderr).powi(2)).sum::<f64>().sqrt(),
        cycles,
    }
}

/// Result of exhaustive search over deterministic uniform policies.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub ltec: f64,
    pub policy: Policy,
    /// Number of policies evaluated.
    pub evaluated: u64,
}

/// All `n`-subsets of `items`, in lexicographic order.
fn subsets(items: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn rec(items: &[usize], n: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for t in start..items.len() {
            if items.len() - t < n - current.len() {
                break;
            }
            current.push(items[t]);
            rec(items, n, t + 1, current, out);
            current.pop();
        }
    }
    rec(items, n, 0, &mut current, &mut out);
    out
}

/// Best deterministic uniform policy by exhaustive enumeration, with the
/// default cap.
pub fn brute_force_optimum(s: &Scenario) -> Result<BruteForce, SimError> {
    brute_force_optimum_capped(s, BRUTE_FORCE_CAP)
}

/// Enumerates every policy whose rows are `N`-subsets meeting the quality
/// floor `q·q_max`, evaluates each analytically and returns the cheapest
/// (first found on ties).
pub fn brute_force_optimum_capped(s: &Scenario, cap: u64) -> Result<BruteForce, SimError> {
    let k = s.k();
    let u = s.similarity();
    let qmax = q_max(u, s.n())?;
    let mut choices = Vec::with_capacity(k);
    let mut count = 1.0f64;
    for i in 0..k {
        let others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
        let floor = s.q() * qmax[i] - 1e-12 * qmax[i].max(1.0);
        let feasible: Vec<Vec<usize>> = subsets(&others, s.n())
            .into_iter()
            .filter(|set| set.iter().map(|&j| u[(i, j)]).sum::<f64>() >= floor)
            .collect();
        if feasible.is_empty() {
            return Err(SimError::Infeasible(i));
        }
        count *= feasible.len() as f64;
        choices.push(feasible);
    }
    if count > cap as f64 {
        return Err(SimError::CapExceeded { count, cap });
    }

    let mut digits = vec![0usize; k];
    let mut r = DMatrix::zeros(k, k);
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    let mut evaluated = 0;
    loop {
        r.fill(0.0);
        for (i, &d) in digits.iter().enumerate() {
            for &j in &choices[i][d] {
                r[(i, j)] = 1.0;
            }
        }
        let policy = Policy::Uniform(r.clone());
        let value = amc::ltec(&policy, s)?.ltec;
        evaluated += 1;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, r.clone()));
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == k {
                let (ltec, r) = best.expect("at least one policy");
                return Ok(BruteForce { ltec, policy: Policy::Uniform(r), evaluated });
            }
            digits[pos] += 1;
            if digits[pos] < choices[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// One row of a policy, for slate rendering.
#[derive(Debug, Clone, Copy)]
pub enum SlateRow<'a> {
    /// Inclusion probabilities summing to `N`.
    Uniform(&'a [f64]),
    /// Per-slot distributions, each summing to 1.
    Positional(&'a [Vec<f64>]),
}

/// Draws a slate of `n` distinct items to show after `current`.
///
/// Uniform rows use systematic (Madow) sampling, so item `j` appears with
/// probability exactly `r_j`. Positional rows are filled slot by slot from
/// the slot distribution restricted to unused items; this is for display
/// only and does not preserve the per-slot marginals.
pub fn render_slate<R: Rng + ?Sized>(row: SlateRow<'_>, n: usize, current: usize, rng: &mut R) -> Result<Vec<usize>, SimError> {
    match row {
        SlateRow::Uniform(r) => {
            let total: f64 = r.iter().sum();
            if (total - n as f64).abs() > 1e-6 || r.iter().any(|&x| !(-1e-9..=1.0 + 1e-9).contains(&x)) {
                return Err(SimError::BadRow(format!("entries must lie in [0, 1] and sum to {n}, sum is {total}")));
            }
            let scale = n as f64 / total;
            let start: f64 = rng.gen();
            let mut out = Vec::with_capacity(n);
            let mut cum = 0.0;
            let mut next_point = start;
            for (j, &x) in r.iter().enumerate() {
                cum = if j + 1 == r.len() { n as f64 } else { cum + x.max(0.0) * scale };
                if next_point < cum && out.len() < n {
                    out.push(j);
                    next_point += 1.0;
                }
            }
            Ok(out)
        }
        SlateRow::Positional(rows) => {
            if rows.len() != n {
                return Err(SimError::BadRow(format!("{} slot rows for N = {n}", rows.len())));
            }
            let k = rows.first().map_or(0, Vec::len);
            if k <= n || rows.iter().any(|r| r.len() != k) {
                return Err(SimError::BadRow("slot rows must share a length larger than N".into()));
            }
            for j in 0..k {
                let sum: f64 = rows.iter().map(|r| r[j]).sum();
                if sum > 1.0 + 1e-6 {
                    return Err(SimError::BadRow(format!("item {j} totals {sum} over the slots")));
                }
            }
            let mut used = vec![false; k];
            used[current.min(k - 1)] = current < k;
            let mut out = Vec::with_capacity(n);
            for slot in rows {
                let weights: Vec<f64> = (0..k).map(|j| if used[j] { 0.0 } else { slot[j].max(0.0) }).collect();
                let j = match WeightedIndex::new(&weights) {
                    Ok(dist) => dist.sample(rng),
                    Err(_) => {
                        // slot mass exhausted by earlier picks: most likely remaining item overall
                        (0..k)
                            .filter(|&j| !used[j])
                            .max_by(|&a, &b| {
                                let wa: f64 = rows.iter().map(|r| r[a]).sum();
                                let wb: f64 = rows.iter().map(|r| r[b]).sum();
                                wa.total_cmp(&wb).then(b.cmp(&a))
                            })
                            .expect("k > n leaves an unused item")
                    }
                };
                used[j] = true;
                out.push(j);
            }
            Ok(out)
        }
    }
}

/// Draws a slate for item `i` from a full policy.
pub fn render_policy_slate<R: Rng + ?Sized>(p: &Policy, i: usize, rng: &mut R) -> Result<Vec<usize>, SimError> {
    match p {
        Policy::Uniform(r) => {
            let row: Vec<f64> = r.row(i).iter().copied().collect();
            let n = row.iter().sum::<f64>().round() as usize;
            render_slate(SlateRow::Uniform(&row), n, i, rng)
        }
        Policy::Positional(rs) => {
            let rows: Vec<Vec<f64>> = rs.iter().map(|r| r.row(i).iter().copied().collect()).collect();
            render_slate(SlateRow::Positional(&rows), rs.len(), i, rng)
        }
    }
}
