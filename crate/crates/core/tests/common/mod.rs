//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use netrec_core::lp_build::{LpKind, LpProblem, VarKey};
use netrec_core::model::{Policy, Scenario};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random similarity in [0, 1] with roughly a third of the pairs unrelated,
/// positive popularity, and binary costs with at least one hit and one miss.
pub fn random_scenario(rng: &mut ChaCha8Rng, k: usize, n: usize, alpha: f64, q: f64) -> Scenario {
    let u = DMatrix::from_fn(k, k, |i, j| {
        if i == j || rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.05..1.0)
        }
    });
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = w.iter().sum();
    let p0 = DVector::from_iterator(k, w.iter().map(|x| x / total));
    let hits = rng.gen_range(1..=(k / 3).max(1));
    let cached = sample(rng, k, hits).into_vec();
    let mut costs = DVector::from_element(k, 1.0);
    for i in cached {
        costs[i] = 0.0;
    }
    Scenario::new(u, costs, p0, alpha, n, q).expect("valid random scenario")
}

/// Normalized click probabilities, decreasing over the slots.
pub fn random_clicks(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Convex combination of `parts` random deterministic policies, matching the
/// scenario's click model.
pub fn mixture_policy(rng: &mut ChaCha8Rng, s: &Scenario, parts: usize) -> Policy {
    let (k, n) = (s.k(), s.n());
    let raw: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut mats = vec![DMatrix::zeros(k, k); if s.uniform_clicks() { 1 } else { n }];
    for w in raw.iter().map(|x| x / total) {
        for i in 0..k {
            let picks: Vec<usize> =
                sample(rng, k - 1, n).into_iter().map(|j| if j >= i { j + 1 } else { j }).collect();
            for (slot, &j) in picks.iter().enumerate() {
                let m = if mats.len() == 1 { 0 } else { slot };
                mats[m][(i, j)] += w;
            }
        }
    }
    if s.uniform_clicks() {
        Policy::Uniform(mats.pop().unwrap())
    } else {
        Policy::Positional(mats)
    }
}

/// Random bounded LP with at most `max_vars` variables. Equalities pass
/// through a random interior point, so most instances are feasible.
pub fn random_lp(rng: &mut ChaCha8Rng, max_vars: usize) -> LpProblem {
    let nv = rng.gen_range(1..=max_vars);
    let integral = rng.gen_bool(0.5);
    let coef = |rng: &mut ChaCha8Rng| {
        if integral {
            rng.gen_range(-3i32..=3) as f64
        } else {
            rng.gen_range(-2.0..2.0)
        }
    };
    let mut lp = LpProblem::new(LpKind::Generic);
    let mut point = Vec::with_capacity(nv);
    for j in 0..nv {
        let lo = if rng.gen_bool(0.7) { 0.0 } else { rng.gen_range(-2.0..0.0) };
        let hi = lo + rng.gen_range(0.5..3.0);
        let c = coef(rng);
        lp.add_var(VarKey::X(j), c, lo, hi);
        point.push(rng.gen_range(lo..hi));
    }
    for e in 0..rng.gen_range(0..=2.min(nv)) {
        let terms: Vec<(usize, f64)> = (0..nv).map(|j| (j, coef(rng))).collect();
        let rhs = terms.iter().map(|&(j, a)| a * point[j]).sum();
        lp.add_eq(format!("e{e}"), terms, rhs);
    }
    for l in 0..rng.gen_range(1..=4) {
        let terms: Vec<(usize, f64)> = (0..nv).map(|j| (j, coef(rng))).collect();
        let at_point: f64 = terms.iter().map(|&(j, a)| a * point[j]).sum();
        // occasionally cut the reference point off
        let rhs = at_point + rng.gen_range(-0.5..1.0);
        lp.add_le(format!("l{l}"), terms, rhs);
    }
    lp
}

fn combinations(n: usize, r: usize, mut visit: impl FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        visit(&idx);
        let mut t = r;
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            if idx[t] != t + n - r {
                break;
            }
            if t == 0 {
                return;
            }
        }
        idx[t] += 1;
        for s in t + 1..r {
            idx[s] = idx[s - 1] + 1;
        }
    }
}

/// Exact optimum of a box-bounded LP by enumerating every basic solution.
/// Returns `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &LpProblem, tol: f64) -> Option<(f64, Vec<f64>)> {
    let nv = lp.num_vars();
    assert!(lp.upper.iter().all(|u| u.is_finite()), "oracle needs finite bounds");
    // every candidate hyperplane as (coefficients, rhs)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let dense = |terms: &[(usize, f64)]| {
        let mut a = vec![0.0; nv];
        for &(j, v) in terms {
            a[j] += v;
        }
        a
    };
    for row in &lp.le_rows {
        planes.push((dense(&row.terms), row.rhs));
    }
    for j in 0..nv {
        let mut e = vec![0.0; nv];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    // a maximal independent set of equalities; the feasibility check below
    // still sees every row
    let mut eqs: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.eq_rows {
        let mut trial = eqs.clone();
        trial.push((dense(&row.terms), row.rhs));
        let m = DMatrix::from_fn(trial.len(), nv, |i, j| trial[i].0[j]);
        if m.rank(1e-9) == trial.len() {
            eqs = trial;
        }
    }
    let feasible = |x: &[f64]| {
        let ok_rows = lp.eq_rows.iter().all(|r| (r.eval(x) - r.rhs).abs() <= tol)
            && lp.le_rows.iter().all(|r| r.eval(x) <= r.rhs + tol);
        ok_rows && (0..nv).all(|j| x[j] >= lp.lower[j] - tol && x[j] <= lp.upper[j] + tol)
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(planes.len(), nv - eqs.len(), |pick| {
        let rows: Vec<&(Vec<f64>, f64)> = eqs.iter().chain(pick.iter().map(|&p| &planes[p])).collect();
        let a = DMatrix::from_fn(nv, nv, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(nv, rows.iter().map(|r| r.1));
        let lu = a.clone().full_piv_lu();
        if !lu.is_invertible() || lu.determinant().abs() < 1e-10 {
            return;
        }
        let Some(x) = lu.solve(&b) else { return };
        let x: Vec<f64> = x.iter().copied().collect();
        if !feasible(&x) {
            return;
        }
        let obj = lp.objective_value(&x);
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, x));
        }
    });
    best
}

/// Maximum absolute entry difference of two same-shaped policies.
pub fn policy_distance(a: &Policy, b: &Policy) -> f64 {
    match (a, b) {
        (Policy::Uniform(x), Policy::Uniform(y)) => (x - y).amax(),
        (Policy::Positional(xs), Policy::Positional(ys)) => {
            xs.iter().zip(ys).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
        }
        (Policy::Uniform(x), Policy::Positional(ys)) | (Policy::Positional(ys), Policy::Uniform(x)) => {
            ys.iter().map(|y| (x - y).amax()).fold(0.0, f64::max)
        }
    }
}
