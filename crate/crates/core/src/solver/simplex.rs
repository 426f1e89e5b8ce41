//! Dense-tableau bounded-variable primal simplex.
//!
//! Every row `a·x` gets a logical variable `r = a·x` whose bounds encode the
//! row relation, so the working system is `[A | -I] y = 0` with bounds on all
//! of `y`. Phase 1 minimizes the sum of bound infeasibilities of the basic
//! variables (composite objective), which means the solver can restart from
//! any basis after bounds change. Branch-and-bound relies on that to reuse the
//! previous node's basis.

use crate::error::SolveError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SimplexTolerances {
    pub primal: f64,
    pub dual: f64,
    pub pivot: f64,
}

impl Default for SimplexTolerances {
    fn default() -> Self {
        SimplexTolerances {
            primal: 1e-9,
            dual: 1e-9,
            pivot: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The objective provably reaches the requested cutoff.
    Cutoff,
}

/// Row-oriented LP in bounded form: `row_lo <= A x <= row_hi`, `col_lo <= x <= col_hi`,
/// minimize `cost · x`.
#[derive(Debug, Clone, Default)]
pub(crate) struct LpData {
    pub num_cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    pub col_lo: Vec<f64>,
    pub col_hi: Vec<f64>,
    pub cost: Vec<f64>,
}

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const STALL_THRESHOLD: usize = 40;
/// Pivots between refactorizations of the tableau.
const REINVERT_EVERY: usize = 100;
/// Bound violation above which a dual infeasibility proof is trusted without
/// refactorizing; far beyond the tableau's accumulated round-off.
const CERTAIN_VIOLATION: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct Simplex {
    m: usize,
    n: usize,
    width: usize,
    rows: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    tab: Vec<f64>,
    basis: Vec<usize>,
    /// Row index for basic variables, `usize::MAX` otherwise.
    row_of: Vec<usize>,
    at_upper: Vec<bool>,
    val: Vec<f64>,
    since_reinvert: usize,
    tol: SimplexTolerances,
    pub iterations: u64,
}

const NONBASIC: usize = usize::MAX;

impl Simplex {
    pub fn new(lp: &LpData, tol: SimplexTolerances) -> Self {
        let m = lp.rows.len();
        let n = lp.num_cols;
        let width = n + m;
        let mut lo = lp.col_lo.clone();
        lo.extend_from_slice(&lp.row_lo);
        let mut hi = lp.col_hi.clone();
        hi.extend_from_slice(&lp.row_hi);
        let mut cost = lp.cost.clone();
        cost.resize(width, 0.0);
        let mut s = Simplex {
            m,
            n,
            width,
            rows: lp.rows.clone(),
            lo,
            hi,
            cost,
            tab: vec![0.0; m * width],
            basis: Vec::new(),
            row_of: vec![NONBASIC; width],
            at_upper: vec![false; width],
            val: vec![0.0; width],
            since_reinvert: 0,
            tol,
            iterations: 0,
        };
        s.slack_basis();
        s
    }

    /// Sets bounds of structural column `j`.
    pub fn set_col_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.set_bounds(j, lo, hi);
    }

    /// Sets bounds of the logical variable of row `i`.
    pub fn set_row_bounds(&mut self, i: usize, lo: f64, hi: f64) {
        self.set_bounds(self.n + i, lo, hi);
    }

    fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.row_of[j] == NONBASIC {
            self.val[j] = self.nonbasic_value(j);
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        if self.at_upper[j] && hi.is_finite() {
            hi
        } else if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        }
    }

    /// Values of the structural columns.
    pub fn solution(&self) -> Vec<f64> {
        self.val[..self.n].to_vec()
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.val[j]).sum()
    }

    fn slack_basis(&mut self) {
        let (m, w, n) = (self.m, self.width, self.n);
        self.tab.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                self.tab[i * w + j] -= a;
            }
            self.tab[i * w + n + i] = 1.0;
        }
        self.basis = (n..n + m).collect();
        self.row_of.iter_mut().for_each(|r| *r = NONBASIC);
        for (i, &b) in self.basis.iter().enumerate() {
            self.row_of[b] = i;
        }
        for j in 0..n {
            self.val[j] = self.nonbasic_value(j);
        }
        self.since_reinvert = 0;
        self.recompute_basics();
    }

    /// Rebuilds the tableau for the current basis from the original rows.
    /// Falls back to the slack basis if the basis is numerically singular.
    fn reinvert(&mut self) {
        let (m, w, n) = (self.m, self.width, self.n);
        let mut t = vec![0.0; m * w];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                t[i * w + j] -= a;
            }
            t[i * w + n + i] = 1.0;
        }
        let mut assigned = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        let old_basis = self.basis.clone();
        for &col in &old_basis {
            let mut best = None;
            let mut best_abs = 1e-11;
            for r in 0..m {
                if !assigned[r] {
                    let a = t[r * w + col].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(r);
                    }
                }
            }
            let Some(r) = best else {
                self.slack_basis();
                return;
            };
            assigned[r] = true;
            new_basis[r] = col;
            pivot_rows(&mut t, w, m, r, col);
        }
        self.tab = t;
        self.basis = new_basis;
        for (i, &b) in self.basis.iter().enumerate() {
            self.row_of[b] = i;
        }
        self.since_reinvert = 0;
        self.recompute_basics();
    }

    fn recompute_basics(&mut self) {
        let w = self.width;
        for i in 0..self.m {
            let row = &self.tab[i * w..(i + 1) * w];
            let mut v = 0.0;
            for (j, &t) in row.iter().enumerate() {
                if t != 0.0 && self.row_of[j] == NONBASIC {
                    v -= t * self.val[j];
                }
            }
            self.val[self.basis[i]] = v;
        }
    }

    #[cfg(test)]
    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.val[j];
        if v < self.lo[j] - self.tol.primal {
            self.lo[j] - v
        } else if v > self.hi[j] + self.tol.primal {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    /// Runs the simplex method from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus, SolveError> {
        self.solve_with_cutoff(None)
    }

    /// Like [`Simplex::solve`], but may stop early with [`LpStatus::Cutoff`]
    /// once the optimum is proven to be at least `cutoff`.
    pub fn solve_with_cutoff(&mut self, cutoff: Option<f64>) -> Result<LpStatus, SolveError> {
        let limit = 50_000 + 100 * (self.m + self.width) as u64;
        let start = self.iterations;
        self.recompute_basics();
        if let Some(status @ (LpStatus::Infeasible | LpStatus::Cutoff)) =
            self.dual_iterate(start + limit, cutoff)?
        {
            return Ok(status);
        }
        let mut verified = false;
        loop {
            let status = self.iterate(start + limit)?;
            if verified || self.since_reinvert == 0 {
                return self.confirm(status);
            }
            // Accumulated round-off is bounded by the periodic refactorization;
            // an optimal point that checks out against the original rows is
            // accepted as is.
            if status == LpStatus::Optimal && self.confirm(status).is_ok() {
                return Ok(status);
            }
            self.reinvert();
            verified = true;
        }
    }

    /// Final sanity check against the original rows.
    fn confirm(&self, status: LpStatus) -> Result<LpStatus, SolveError> {
        if status != LpStatus::Optimal {
            return Ok(status);
        }
        let w = self.width;
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * self.val[j]).sum();
            let scale = 1.0
                + row
                    .iter()
                    .map(|&(j, a)| (a * self.val[j]).abs())
                    .fold(0.0, f64::max);
            let (lo, hi) = (self.lo[self.n + i], self.hi[self.n + i]);
            if act < lo - 1e-7 * scale || act > hi + 1e-7 * scale {
                return Err(SolveError::Numerical(format!(
                    "row {i} activity {act} outside [{lo}, {hi}] after refactorization"
                )));
            }
        }
        for j in 0..w {
            if self.val[j].is_nan() {
                return Err(SolveError::Numerical("NaN in solution".into()));
            }
        }
        Ok(status)
    }

    fn iterate(&mut self, limit: u64) -> Result<LpStatus, SolveError> {
        let (m, w) = (self.m, self.width);
        let mut stall = 0usize;
        let mut d = vec![0.0; w];
        let mut cb = vec![0.0; m];
        loop {
            if self.iterations >= limit {
                return Err(SolveError::Numerical(
                    "simplex iteration limit reached".into(),
                ));
            }
            // Phase selection.
            let mut infeasible = false;
            for i in 0..m {
                let b = self.basis[i];
                let v = self.val[b];
                cb[i] = if v < self.lo[b] - self.tol.primal {
                    infeasible = true;
                    -1.0
                } else if v > self.hi[b] + self.tol.primal {
                    infeasible = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !infeasible {
                for i in 0..m {
                    cb[i] = self.cost[self.basis[i]];
                }
            }
            // Reduced costs of nonbasic columns.
            for j in 0..w {
                d[j] = if infeasible { 0.0 } else { self.cost[j] };
            }
            for i in 0..m {
                let c = cb[i];
                if c != 0.0 {
                    let row = &self.tab[i * w..(i + 1) * w];
                    for j in 0..w {
                        d[j] -= c * row[j];
                    }
                }
            }

            let bland = stall >= STALL_THRESHOLD;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..w {
                if self.row_of[j] != NONBASIC || self.lo[j] == self.hi[j] {
                    continue;
                }
                let v = self.val[j];
                let can_up = v < self.hi[j];
                let can_down = v > self.lo[j];
                let dir = if d[j] < -self.tol.dual && can_up {
                    1.0
                } else if d[j] > self.tol.dual && can_down {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d[j].abs() > best {
                    best = d[j].abs();
                    entering = Some((j, dir));
                }
            }
            let Some((j, dir)) = entering else {
                return Ok(if infeasible {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                });
            };

            // Harris two-pass ratio test.
            let ptol = self.tol.primal;
            let mut theta_max = f64::INFINITY;
            let own_range = self.hi[j] - self.lo[j];
            for i in 0..m {
                let alpha = -dir * self.tab[i * w + j];
                if alpha.abs() <= self.tol.pivot {
                    continue;
                }
                if let Some(bound) = self.limit_bound(self.basis[i], alpha) {
                    let v = self.val[self.basis[i]];
                    let relaxed = ((bound - v).abs() + ptol) / alpha.abs();
                    theta_max = theta_max.min(relaxed);
                }
            }
            let mut leave: Option<(usize, f64, f64)> = None; // (row, step, bound)
            let mut best_alpha = 0.0;
            for i in 0..m {
                let alpha = -dir * self.tab[i * w + j];
                if alpha.abs() <= self.tol.pivot {
                    continue;
                }
                let b = self.basis[i];
                if let Some(bound) = self.limit_bound(b, alpha) {
                    let v = self.val[b];
                    let step = ((bound - v) / alpha).max(0.0);
                    if step <= theta_max {
                        let better = if bland {
                            match leave {
                                None => true,
                                Some((r, s, _)) => step < s || (step == s && b < self.basis[r]),
                            }
                        } else {
                            alpha.abs() > best_alpha
                        };
                        if better {
                            best_alpha = alpha.abs();
                            leave = Some((i, step, bound));
                        }
                    }
                }
            }

            self.iterations += 1;
            let flip = own_range.is_finite() && leave.is_none_or(|(_, s, _)| own_range <= s);
            if flip {
                let step = own_range;
                for i in 0..m {
                    let alpha = -dir * self.tab[i * w + j];
                    self.val[self.basis[i]] += alpha * step;
                }
                self.at_upper[j] = dir > 0.0;
                self.val[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                stall = 0;
                continue;
            }
            let Some((r, step, bound)) = leave else {
                if infeasible {
                    return Err(SolveError::Numerical(
                        "phase 1 direction without a limiting row".into(),
                    ));
                }
                return Ok(LpStatus::Unbounded);
            };
            if step <= 1e-12 {
                stall += 1;
            } else {
                stall = 0;
            }
            let leaving = self.basis[r];
            for i in 0..m {
                let alpha = -dir * self.tab[i * w + j];
                if alpha != 0.0 {
                    self.val[self.basis[i]] += alpha * step;
                }
            }
            self.val[j] += dir * step;
            self.val[leaving] = bound;
            self.at_upper[leaving] = bound == self.hi[leaving] && bound != self.lo[leaving];
            pivot_rows(&mut self.tab, w, m, r, j);
            self.row_of[leaving] = NONBASIC;
            self.row_of[j] = r;
            self.basis[r] = j;
            self.since_reinvert += 1;
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
            }
        }
    }

    /// Bounded dual simplex from the current basis. Nonbasic boxed columns are
    /// first moved to the bound their reduced cost prefers, which makes any
    /// basis dual feasible unless an unbounded column has the wrong sign; in
    /// that case (or on stalling) `None` hands over to the primal method.
    /// Returns `Some(Optimal)` when primal feasibility is reached,
    /// `Some(Infeasible)` when a clearly violated row admits no entering
    /// column, and `Some(Cutoff)` once the (monotone) dual objective reaches
    /// `cutoff`.
    fn dual_iterate(
        &mut self,
        limit: u64,
        cutoff: Option<f64>,
    ) -> Result<Option<LpStatus>, SolveError> {
        let (m, w) = (self.m, self.width);
        let dtol = self.tol.dual;
        let ptol = self.tol.primal;
        let mut d = vec![0.0; w];
        self.reduced_costs(&mut d);
        for j in 0..w {
            if self.row_of[j] != NONBASIC || self.lo[j] == self.hi[j] {
                continue;
            }
            let (lo_fin, hi_fin) = (self.lo[j].is_finite(), self.hi[j].is_finite());
            if d[j] > dtol {
                if !lo_fin {
                    return Ok(None);
                }
                self.at_upper[j] = false;
            } else if d[j] < -dtol {
                if !hi_fin {
                    return Ok(None);
                }
                self.at_upper[j] = true;
            } else if !lo_fin && !hi_fin {
                continue;
            }
            self.val[j] = self.nonbasic_value(j);
        }
        self.recompute_basics();
        let budget = 20 * (m + w) as u64;
        let start = self.iterations;
        loop {
            if self.iterations >= limit || self.iterations - start > budget {
                return Ok(None);
            }
            if let Some(c) = cutoff {
                if self.objective() >= c {
                    return Ok(Some(LpStatus::Cutoff));
                }
            }
            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = ptol;
            for i in 0..m {
                let b = self.basis[i];
                let v = self.val[b];
                let viol = (self.lo[b] - v).max(v - self.hi[b]);
                if viol > worst {
                    worst = viol;
                    leave = Some((
                        i,
                        if v < self.lo[b] {
                            self.lo[b]
                        } else {
                            self.hi[b]
                        },
                    ));
                }
            }
            let Some((r, target)) = leave else {
                return Ok(Some(LpStatus::Optimal));
            };
            let b = self.basis[r];
            // b = −Σ t_rj y_j; it must move towards `target`.
            let need_up = target > self.val[b];
            let row = &self.tab[r * w..(r + 1) * w];
            // Two-pass ratio test on the reduced costs.
            let mut bound_ratio = f64::INFINITY;
            for j in 0..w {
                if self.row_of[j] != NONBASIC || self.lo[j] == self.hi[j] {
                    continue;
                }
                let rate = if need_up { -row[j] } else { row[j] };
                if rate.abs() <= self.tol.pivot {
                    continue;
                }
                let free = !self.lo[j].is_finite() && !self.hi[j].is_finite();
                let up_ok = rate > 0.0 && (free || !self.at_upper[j]);
                let down_ok = rate < 0.0 && (free || self.at_upper[j]);
                if up_ok || down_ok {
                    bound_ratio = bound_ratio.min((d[j].abs() + dtol) / rate.abs());
                }
            }
            let mut entering: Option<usize> = None;
            let mut best = 0.0;
            for j in 0..w {
                if self.row_of[j] != NONBASIC || self.lo[j] == self.hi[j] {
                    continue;
                }
                let rate = if need_up { -row[j] } else { row[j] };
                if rate.abs() <= self.tol.pivot {
                    continue;
                }
                let free = !self.lo[j].is_finite() && !self.hi[j].is_finite();
                let up_ok = rate > 0.0 && (free || !self.at_upper[j]);
                let down_ok = rate < 0.0 && (free || self.at_upper[j]);
                if (up_ok || down_ok) && d[j].abs() / rate.abs() <= bound_ratio && rate.abs() > best
                {
                    best = rate.abs();
                    entering = Some(j);
                }
            }
            let Some(j) = entering else {
                if worst > CERTAIN_VIOLATION {
                    return Ok(Some(LpStatus::Infeasible));
                }
                return Ok(None);
            };
            self.iterations += 1;
            let t = self.tab[r * w + j];
            // Move y_j so that b lands exactly on its target.
            let delta = (target - self.val[b]) / -t;
            for i in 0..m {
                let a = self.tab[i * w + j];
                if a != 0.0 {
                    self.val[self.basis[i]] -= a * delta;
                }
            }
            self.val[j] += delta;
            self.val[b] = target;
            self.at_upper[b] = target == self.hi[b] && target != self.lo[b];
            pivot_rows(&mut self.tab, w, m, r, j);
            self.row_of[b] = NONBASIC;
            self.row_of[j] = r;
            self.basis[r] = j;
            self.since_reinvert += 1;
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
                self.reduced_costs(&mut d);
            } else {
                let dj = d[j];
                let row = &self.tab[r * w..(r + 1) * w];
                for (dk, &t) in d.iter_mut().zip(row) {
                    *dk -= dj * t;
                }
                d[j] = 0.0;
            }
        }
    }

    fn reduced_costs(&self, d: &mut [f64]) {
        let w = self.width;
        d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let c = self.cost[self.basis[i]];
            if c != 0.0 {
                let row = &self.tab[i * w..(i + 1) * w];
                for (dj, &t) in d.iter_mut().zip(row) {
                    *dj -= c * t;
                }
            }
        }
    }

    /// Bound that limits basic variable `b` when it moves with rate `alpha`.
    fn limit_bound(&self, b: usize, alpha: f64) -> Option<f64> {
        let v = self.val[b];
        let (lo, hi) = (self.lo[b], self.hi[b]);
        let ptol = self.tol.primal;
        if alpha > 0.0 {
            if v < lo - ptol {
                Some(lo)
            } else if v > hi + ptol {
                None
            } else if hi.is_finite() {
                Some(hi)
            } else {
                None
            }
        } else if v > hi + ptol {
            Some(hi)
        } else if v < lo - ptol {
            None
        } else if lo.is_finite() {
            Some(lo)
        } else {
            None
        }
    }

    #[cfg(test)]
    pub(crate) fn max_infeasibility(&self) -> f64 {
        (0..self.width)
            .map(|j| self.infeasibility(j))
            .fold(0.0, f64::max)
    }
}

fn pivot_rows(t: &mut [f64], w: usize, m: usize, r: usize, col: usize) {
    let p = t[r * w + col];
    {
        let row = &mut t[r * w..(r + 1) * w];
        for x in row.iter_mut() {
            *x /= p;
        }
        row[col] = 1.0;
    }
    let (before, rest) = t.split_at_mut(r * w);
    let (pivot_row, after) = rest.split_at_mut(w);
    for other in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
        let f = other[col];
        if f != 0.0 {
            for (x, &pr) in other.iter_mut().zip(pivot_row.iter()) {
                *x -= f * pr;
            }
            other[col] = 0.0;
        }
    }
    debug_assert_eq!(t.len(), m * w);
}
