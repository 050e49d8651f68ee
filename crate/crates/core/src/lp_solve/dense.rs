//! Dense two-phase primal simplex with native variable bounds.
//!
//! Variables are shifted to `0 ≤ y ≤ u − l`, every `≤` row gets a slack, and
//! rows that cannot start with their slack in the basis get an artificial.
//! Non-basic variables sit at either bound; bound flips replace pivots when
//! the entering variable reaches its own upper bound first. Dantzig pricing
//! is used until too many consecutive degenerate pivots occur, after which
//! Bland's rule guarantees termination.

use nalgebra::{DMatrix, DVector};

use super::{LpError, LpSolution, LpStatus, SolveOptions};
use crate::lp_build::LpProblem;

const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Place {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    cols: usize,
    /// `B⁻¹A`, row-major.
    t: Vec<f64>,
    /// Values of the basic variables.
    beta: Vec<f64>,
    /// Reduced costs.
    d: Vec<f64>,
    basis: Vec<usize>,
    place: Vec<Place>,
    upper: Vec<f64>,
    can_enter: Vec<bool>,
    iterations: usize,
    max_iters: usize,
    bland: bool,
    degenerate_run: usize,
    stall_limit: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.cols + j]
    }

    fn value_of_nonbasic(&self, j: usize) -> f64 {
        match self.place[j] {
            Place::Upper => self.upper[j],
            _ => 0.0,
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.cols..(r + 1) * self.cols];
                for (dj, &a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
    }

    fn choose_entering(&self, opt_tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if !self.can_enter[j] {
                continue;
            }
            let dj = self.d[j];
            let score = match self.place[j] {
                Place::Lower if dj < -opt_tol && self.upper[j] > 0.0 => -dj,
                Place::Upper if dj > opt_tol => dj,
                _ => continue,
            };
            if self.bland {
                return Some(j);
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let piv = self.at(r, j);
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for a in prow.iter_mut() {
            *a /= piv;
        }
        prow[j] = 1.0;
        for row in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let factor = row[j];
            if factor != 0.0 {
                for (a, &p) in row.iter_mut().zip(prow.iter()) {
                    *a -= factor * p;
                }
                row[j] = 0.0;
            }
        }
        let factor = self.d[j];
        if factor != 0.0 {
            for (dj, &p) in self.d.iter_mut().zip(prow.iter()) {
                *dj -= factor * p;
            }
            self.d[j] = 0.0;
        }
    }

    fn run(&mut self, opt_tol: f64) -> Outcome {
        loop {
            let Some(j) = self.choose_entering(opt_tol) else {
                return Outcome::Optimal;
            };
            if self.iterations >= self.max_iters {
                return Outcome::IterationLimit;
            }
            self.iterations += 1;
            let dir = if self.place[j] == Place::Lower { 1.0 } else { -1.0 };

            // ratio test: (step, row, leaves_at_upper)
            let mut leave: Option<(f64, usize, bool, f64)> = None;
            for r in 0..self.m {
                let a = dir * self.at(r, j);
                let b = self.basis[r];
                let (step, to_upper) = if a > PIVOT_TOL {
                    (self.beta[r] / a, false)
                } else if a < -PIVOT_TOL && self.upper[b].is_finite() {
                    ((self.beta[r] - self.upper[b]) / a, true)
                } else {
                    continue;
                };
                let step = step.max(0.0);
                let better = match leave {
                    None => true,
                    Some((s, lr, _, la)) => {
                        if step < s - 1e-12 {
                            true
                        } else if step <= s + 1e-12 {
                            if self.bland {
                                b < self.basis[lr]
                            } else {
                                a.abs() > la
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((step, r, to_upper, a.abs()));
                }
            }

            let flip = self.upper[j];
            let step = match leave {
                Some((s, ..)) if s < flip => s,
                _ if flip.is_finite() => flip,
                _ => return Outcome::Unbounded,
            };
            if step <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run >= self.stall_limit {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            for r in 0..self.m {
                let a = self.at(r, j);
                if a != 0.0 {
                    self.beta[r] -= dir * step * a;
                }
            }
            match leave {
                Some((s, r, to_upper, _)) if s < flip => {
                    let entering_value = self.value_of_nonbasic(j) + dir * step;
                    let out = self.basis[r];
                    self.place[out] = if to_upper { Place::Upper } else { Place::Lower };
                    self.pivot(r, j);
                    self.basis[r] = j;
                    self.place[j] = Place::Basic;
                    self.beta[r] = entering_value;
                }
                _ => {
                    self.place[j] = if self.place[j] == Place::Lower { Place::Upper } else { Place::Lower };
                }
            }
        }
    }
}

pub(super) fn solve(lp: &LpProblem, opts: &SolveOptions) -> Result<LpSolution, LpError> {
    let n = lp.num_vars();
    let m_eq = lp.eq_rows.len();
    let m = m_eq + lp.le_rows.len();
    let shift = &lp.lower;

    // Row data after shifting, with the sign chosen so that rhs >= 0.
    let mut rows: Vec<(Vec<(usize, f64)>, f64, Option<f64>)> = Vec::with_capacity(m);
    for (idx, row) in lp.eq_rows.iter().chain(&lp.le_rows).enumerate() {
        let rhs = row.rhs - row.terms.iter().map(|&(j, a)| a * shift[j]).sum::<f64>();
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        let slack = (idx >= m_eq).then_some(sign);
        rows.push((row.terms.iter().map(|&(j, a)| (j, sign * a)).collect(), sign * rhs, slack));
    }
    let n_slack = lp.le_rows.len();
    let needs_artificial: Vec<bool> = rows.iter().map(|(_, _, s)| *s != Some(1.0)).collect();
    let n_art = needs_artificial.iter().filter(|&&x| x).count();
    let cols = n + n_slack + n_art;

    let mut t = vec![0.0; m * cols];
    let mut basis = vec![0; m];
    let mut art_of_row = vec![None; m];
    let mut next_art = n + n_slack;
    for (r, (terms, _, slack)) in rows.iter().enumerate() {
        for &(j, a) in terms {
            t[r * cols + j] += a;
        }
        if let Some(sign) = slack {
            let sc = n + (r - m_eq);
            t[r * cols + sc] = *sign;
            basis[r] = sc;
        }
        if needs_artificial[r] {
            t[r * cols + next_art] = 1.0;
            basis[r] = next_art;
            art_of_row[r] = Some(next_art);
            next_art += 1;
        }
    }

    let tab_origin = t.clone();
    let mut upper = vec![f64::INFINITY; cols];
    for j in 0..n {
        upper[j] = lp.upper[j] - lp.lower[j];
    }
    let mut place = vec![Place::Lower; cols];
    for &b in &basis {
        place[b] = Place::Basic;
    }
    let max_iters = opts.max_iters.unwrap_or(1000 + 50 * (m + cols));
    let mut tab = Tableau {
        m,
        cols,
        t,
        beta: rows.iter().map(|(_, b, _)| *b).collect(),
        d: vec![0.0; cols],
        basis,
        place,
        upper,
        can_enter: vec![true; cols],
        iterations: 0,
        max_iters,
        bland: false,
        degenerate_run: 0,
        stall_limit: opts.stall_limit,
    };

    // phase one
    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        for c in cost.iter_mut().skip(n + n_slack) {
            *c = 1.0;
        }
        tab.price(&cost);
        match tab.run(opts.opt_tol) {
            Outcome::IterationLimit => return Ok(LpSolution::without_point(LpStatus::IterationLimit, tab.iterations)),
            Outcome::Unbounded => return Err(LpError::Solver("phase one reported an unbounded ray".into())),
            Outcome::Optimal => {}
        }
        let scale = 1.0 + rows.iter().map(|(_, b, _)| b.abs()).fold(0.0, f64::max);
        let worst = (0..m)
            .filter(|&r| tab.basis[r] >= n + n_slack)
            .map(|r| (tab.beta[r], r))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((value, r)) = worst {
            if value > opts.feas_tol * scale {
                let mut sol = LpSolution::without_point(LpStatus::Infeasible, tab.iterations);
                let row_of_art = art_of_row.iter().position(|&a| a == Some(tab.basis[r])).unwrap_or(r);
                sol.infeasible_row = Some(row_label(lp, row_of_art));
                return Ok(sol);
            }
        }
        for j in n + n_slack..cols {
            tab.upper[j] = 0.0;
            tab.can_enter[j] = false;
            if tab.place[j] == Place::Upper {
                tab.place[j] = Place::Lower;
            }
        }
        tab.bland = false;
        tab.degenerate_run = 0;
    }

    // phase two
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    tab.price(&cost);
    let outcome = tab.run(opts.opt_tol);
    match outcome {
        Outcome::IterationLimit => return Ok(LpSolution::without_point(LpStatus::IterationLimit, tab.iterations)),
        Outcome::Unbounded => return Ok(LpSolution::without_point(LpStatus::Unbounded, tab.iterations)),
        Outcome::Optimal => {}
    }

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
    for r in 0..m {
        for j in 0..cols {
            let a = tab_origin[r * cols + j];
            if a != 0.0 {
                columns[j].push((r, a));
            }
        }
    }
    let rhs0: Vec<f64> = rows.iter().map(|(_, b, _)| *b).collect();
    refresh_basic_values(&mut tab, &columns, &rhs0);
    let mut x: Vec<f64> = (0..n)
        .map(|j| match tab.place[j] {
            Place::Basic => 0.0,
            _ => tab.value_of_nonbasic(j),
        })
        .collect();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.beta[r];
        }
    }
    for j in 0..n {
        x[j] = (x[j] + lp.lower[j]).clamp(lp.lower[j], lp.upper[j]);
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&x),
        max_residual: lp.max_residual(&x),
        x,
        iterations: tab.iterations,
        infeasible_row: None,
    })
}

/// Recomputes the basic values from the original columns with one LU solve,
/// removing drift accumulated by the incremental updates.
fn refresh_basic_values(tab: &mut Tableau, columns: &[Vec<(usize, f64)>], rhs0: &[f64]) {
    let m = tab.m;
    if m == 0 {
        return;
    }
    let mut rhs = DVector::from_column_slice(rhs0);
    for (j, col) in columns.iter().enumerate() {
        if tab.place[j] == Place::Upper {
            for &(r, a) in col {
                rhs[r] -= a * tab.upper[j];
            }
        }
    }
    let mut bmat = DMatrix::zeros(m, m);
    for (c, &b) in tab.basis.iter().enumerate() {
        for &(r, a) in &columns[b] {
            bmat[(r, c)] = a;
        }
    }
    if let Some(sol) = bmat.lu().solve(&rhs) {
        if sol.iter().all(|v| v.is_finite()) {
            tab.beta.copy_from_slice(sol.as_slice());
        }
    }
}

fn row_label(lp: &LpProblem, r: usize) -> String {
    let m_eq = lp.eq_rows.len();
    if r < m_eq {
        lp.eq_rows[r].label.clone()
    } else {
        lp.le_rows[r - m_eq].label.clone()
    }
}
