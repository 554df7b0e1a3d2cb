//! Bounded-variable revised primal simplex.
//!
//! Rows are turned into equalities `A x - s = 0` with one logical `s_i` per
//! row carrying the row range as its bounds. Every variable is either basic
//! or sits at one of its bounds (or at zero when free). Phase 1 minimizes the
//! total bound violation of the basic variables, which acts as a set of
//! implicit artificial variables and also accepts infeasible warm starts.
//!
//! Pricing uses devex reference weights. In phase 2 the reduced costs are
//! updated from the pivot row instead of being recomputed.

use std::time::Instant;

use super::lu::LuFactor;
use super::{LinearProgram, LpConfig, LpError, LpSolution, LpStatus};

const NIL: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// A simplex basis over `num_vars + num_rows` variables (structurals first,
/// then one logical per row).
#[derive(Debug, Clone, PartialEq)]
pub struct LpBasis {
    pub basic: Vec<usize>,
    pub status: Vec<BasisStatus>,
}

pub(crate) struct Simplex<'a> {
    cfg: &'a LpConfig,
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    status: Vec<BasisStatus>,
    basis: Vec<usize>,
    position: Vec<usize>,
    lu: LuFactor,
    iterations: usize,
    scratch: Vec<f64>,
    /// Reduced costs of the nonbasic variables (zero for basics).
    d: Vec<f64>,
    /// Devex reference weights.
    weight: Vec<f64>,
}

const DEVEX_RESET: f64 = 1e6;

enum Ratio {
    Flip(f64),
    Leave {
        row: usize,
        theta: f64,
        to_upper: bool,
    },
    Unbounded,
}

impl<'a> Simplex<'a> {
    pub fn new(lp: &LinearProgram, cfg: &'a LpConfig, warm: Option<&LpBasis>) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let ntot = n + m;

        let mut counts = vec![0usize; n + 1];
        for row in lp.rows() {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    counts[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut fill = counts;
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    col_row[fill[j]] = i;
                    col_val[fill[j]] = a;
                    fill[j] += 1;
                }
            }
        }
        // Merge duplicate (row, col) terms so the basis matrix stays simple.
        let (col_start, col_row, col_val) = merge_duplicates(n, &col_start, &col_row, &col_val);

        let mut cost = lp.objective().to_vec();
        cost.resize(ntot, 0.0);
        let mut lo = lp.lower().to_vec();
        let mut up = lp.upper().to_vec();
        for row in lp.rows() {
            lo.push(row.lower);
            up.push(row.upper);
        }

        let mut s = Simplex {
            cfg,
            m,
            n,
            col_start,
            col_row,
            col_val,
            cost,
            lo,
            up,
            x: vec![0.0; ntot],
            status: vec![BasisStatus::AtLower; ntot],
            basis: Vec::new(),
            position: vec![NIL; ntot],
            lu: LuFactor::default(),
            iterations: 0,
            scratch: Vec::new(),
            d: vec![0.0; ntot],
            weight: vec![1.0; ntot],
        };
        let warm_ok = warm.is_some_and(|b| s.accept_warm(b));
        if !warm_ok {
            s.logical_basis();
        }
        s
    }

    fn accept_warm(&mut self, b: &LpBasis) -> bool {
        let ntot = self.n + self.m;
        if b.basic.len() != self.m || b.status.len() != ntot {
            return false;
        }
        let mut seen = vec![false; ntot];
        for &j in &b.basic {
            if j >= ntot || seen[j] || b.status[j] != BasisStatus::Basic {
                return false;
            }
            seen[j] = true;
        }
        self.basis = b.basic.clone();
        for (j, &basic) in seen.iter().enumerate().take(ntot) {
            self.status[j] = if basic {
                BasisStatus::Basic
            } else {
                b.status[j]
            };
        }
        true
    }

    fn logical_basis(&mut self) {
        let n = self.n;
        self.basis = (n..n + self.m).collect();
        for j in 0..n + self.m {
            self.status[j] = if j >= n {
                BasisStatus::Basic
            } else {
                BasisStatus::AtLower
            };
        }
    }

    /// Places each nonbasic variable on a finite bound consistent with its
    /// status (preferring the bound nearest zero for fresh starts).
    fn place_nonbasic(&mut self) {
        for j in 0..self.n + self.m {
            if self.status[j] == BasisStatus::Basic {
                continue;
            }
            let (l, u) = (self.lo[j], self.up[j]);
            let st = match (l.is_finite(), u.is_finite(), self.status[j]) {
                (false, false, _) => BasisStatus::Free,
                (true, false, _) => BasisStatus::AtLower,
                (false, true, _) => BasisStatus::AtUpper,
                (true, true, BasisStatus::AtUpper) => BasisStatus::AtUpper,
                (true, true, _) => BasisStatus::AtLower,
            };
            self.status[j] = st;
            self.x[j] = match st {
                BasisStatus::AtLower => l,
                BasisStatus::AtUpper => u,
                _ => 0.0,
            };
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|t| (self.col_row[t], self.col_val[t]))
                .collect()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|t| y[self.col_row[t]] * self.col_val[t])
                .sum()
        } else {
            -y[j - self.n]
        }
    }

    /// Factors the current basis, swapping in logicals for any singular part.
    fn refactor(&mut self) {
        for _ in 0..=self.m {
            let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j)).collect();
            match LuFactor::factor(self.m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    break;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.basis[pos];
                        let logical = self.n + row;
                        self.status[out] = BasisStatus::AtLower;
                        self.basis[pos] = logical;
                        self.status[logical] = BasisStatus::Basic;
                    }
                    self.place_nonbasic();
                }
            }
        }
        for p in self.position.iter_mut() {
            *p = NIL;
        }
        for (i, &j) in self.basis.iter().enumerate() {
            self.position[j] = i;
        }
    }

    /// Recomputes basic values from the nonbasic ones: `B x_B = -N x_N`.
    fn recompute_basic(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == BasisStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for t in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[t]] -= self.col_val[t] * v;
                }
            } else {
                rhs[j - self.n] += v;
            }
        }
        self.lu.ftran(&mut rhs, &mut self.scratch);
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[i];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let tol = self.cfg.feasibility_tol;
        if self.x[j] < self.lo[j] - tol {
            self.lo[j] - self.x[j]
        } else if self.x[j] > self.up[j] + tol {
            self.x[j] - self.up[j]
        } else {
            0.0
        }
    }

    fn phase_costs(&self, phase_one: bool) -> Vec<f64> {
        let tol = self.cfg.feasibility_tol;
        self.basis
            .iter()
            .map(|&j| {
                if phase_one {
                    if self.x[j] < self.lo[j] - tol {
                        1.0
                    } else if self.x[j] > self.up[j] + tol {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                }
            })
            .collect()
    }

    /// Recomputes all reduced costs for the given phase.
    fn compute_reduced_costs(&mut self, phase_one: bool, y: &mut [f64]) {
        y.copy_from_slice(&self.phase_costs(phase_one));
        self.lu.btran(y, &mut self.scratch);
        for j in 0..self.n + self.m {
            self.d[j] = if self.status[j] == BasisStatus::Basic {
                0.0
            } else {
                let c = if phase_one { 0.0 } else { self.cost[j] };
                c - self.dot_column(j, y)
            };
        }
    }

    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.cfg.optimality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == BasisStatus::Basic || self.lo[j] == self.up[j] {
                continue;
            }
            let d = self.d[j];
            let eligible = match st {
                BasisStatus::AtLower => d > tol,
                BasisStatus::AtUpper => d < -tol,
                BasisStatus::Free => d.abs() > tol,
                BasisStatus::Basic => false,
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            let score = d * d / self.weight[j];
            if best.is_none_or(|(_, _, bs)| score > bs) {
                best = Some((j, d, score));
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    /// Updates reduced costs and devex weights for a pivot of `q` into basis
    /// row `row`; `rho` holds row `row` of the basis inverse.
    fn update_pricing(
        &mut self,
        q: usize,
        row: usize,
        alpha_rq: f64,
        rho: &[f64],
        phase_one: bool,
    ) {
        let out = self.basis[row];
        let theta_d = self.d[q] / alpha_rq;
        let wq = self.weight[q];
        let mut reset = false;
        for j in 0..self.n + self.m {
            if j == q || self.status[j] == BasisStatus::Basic {
                continue;
            }
            let a = self.dot_column(j, rho);
            if a == 0.0 {
                continue;
            }
            if !phase_one {
                self.d[j] -= theta_d * a;
            }
            let r = a / alpha_rq;
            let w = r * r * wq;
            if w > self.weight[j] {
                self.weight[j] = w;
                reset |= w > DEVEX_RESET;
            }
        }
        if !phase_one {
            self.d[out] = -theta_d;
        }
        self.d[q] = 0.0;
        self.weight[out] = (wq / (alpha_rq * alpha_rq)).max(1.0);
        if reset {
            self.weight.iter_mut().for_each(|w| *w = 1.0);
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase_one: bool, bland: bool) -> Ratio {
        let ftol = self.cfg.feasibility_tol;
        let htol = self.cfg.harris_tol;
        let range = self.up[q] - self.lo[q];

        // (row, exact ratio, relaxed ratio, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= self.cfg.pivot_tol {
                continue;
            }
            let j = self.basis[i];
            let delta = dir * a;
            let (xb, l, u) = (self.x[j], self.lo[j], self.up[j]);
            if delta > 0.0 {
                // x_B decreases.
                if phase_one && xb < l - ftol {
                    continue;
                }
                if phase_one && xb > u + ftol {
                    let r = (xb - u) / delta;
                    cands.push((i, r, r, true));
                } else if l.is_finite() {
                    cands.push((i, (xb - l) / delta, (xb - l + htol) / delta, false));
                }
            } else {
                let delta = -delta;
                if phase_one && xb > u + ftol {
                    continue;
                }
                if phase_one && xb < l - ftol {
                    let r = (l - xb) / delta;
                    cands.push((i, r, r, false));
                } else if u.is_finite() {
                    cands.push((i, (u - xb) / delta, (u - xb + htol) / delta, true));
                }
            }
        }

        if cands.is_empty() {
            return if range.is_finite() {
                Ratio::Flip(range)
            } else {
                Ratio::Unbounded
            };
        }

        let pick = if bland {
            let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= min + 1e-12)
                .min_by_key(|c| self.basis[c.0])
                .copied()
                .unwrap()
        } else {
            let theta_max = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= theta_max)
                .max_by(|a, b| alpha[a.0].abs().total_cmp(&alpha[b.0].abs()))
                .copied()
                .unwrap_or_else(|| *cands.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap())
        };
        let theta = pick.1.max(0.0);
        if range.is_finite() && range <= theta {
            return Ratio::Flip(range);
        }
        Ratio::Leave {
            row: pick.0,
            theta,
            to_upper: pick.3,
        }
    }

    fn check_limits(&self) -> Result<(), LpError> {
        if let Some(deadline) = self.cfg.deadline {
            if Instant::now() >= deadline {
                return Err(LpError::DeadlineExceeded {
                    iterations: self.iterations,
                });
            }
        }
        if self.iterations >= self.cfg.max_iterations {
            return Err(LpError::NumericalBreakdown {
                iterations: self.iterations,
                reason: "iteration cap reached".into(),
            });
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<LpSolution, LpError> {
        self.place_nonbasic();
        self.refactor();
        self.recompute_basic();

        let mut degenerate = 0usize;
        let mut fresh = true;
        let mut y = vec![0.0; self.m];
        let mut rho = vec![0.0; self.m];
        let mut alpha = vec![0.0; self.m];
        // Phase for which `d` is current; `None` forces a recompute.
        let mut priced: Option<bool> = None;

        loop {
            self.check_limits()?;
            if self.lu.num_etas() >= self.cfg.refactor_interval {
                self.refactor();
                self.recompute_basic();
                fresh = true;
                priced = None;
            }

            let phase_one = self.basis.iter().any(|&j| self.infeasibility(j) > 0.0);
            let bland = degenerate >= self.cfg.degenerate_streak;
            // Phase-1 costs move with the basic values, so they are always
            // recomputed there.
            if phase_one || priced != Some(false) {
                self.compute_reduced_costs(phase_one, &mut y);
                priced = Some(phase_one);
            }

            let Some((q, d)) = self.price(bland) else {
                if !fresh {
                    // Confirm with a clean factorization before concluding.
                    self.refactor();
                    self.recompute_basic();
                    fresh = true;
                    priced = None;
                    continue;
                }
                let status = if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
                return Ok(self.finish(status));
            };

            alpha.iter_mut().for_each(|a| *a = 0.0);
            for (r, v) in self.column(q) {
                alpha[r] = v;
            }
            self.lu.ftran(&mut alpha, &mut self.scratch);
            let dir = if d > 0.0 { 1.0 } else { -1.0 };

            self.iterations += 1;
            fresh = false;
            match self.ratio_test(q, dir, &alpha, phase_one, bland) {
                Ratio::Unbounded => {
                    if phase_one {
                        return Err(LpError::NumericalBreakdown {
                            iterations: self.iterations,
                            reason: "unbounded phase-1 ray".into(),
                        });
                    }
                    return Ok(self.finish(LpStatus::Unbounded));
                }
                Ratio::Flip(theta) => {
                    self.shift(q, dir, theta, &alpha);
                    self.status[q] = if dir > 0.0 {
                        BasisStatus::AtUpper
                    } else {
                        BasisStatus::AtLower
                    };
                    self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                    degenerate = 0;
                }
                Ratio::Leave {
                    row,
                    theta,
                    to_upper,
                } => {
                    self.shift(q, dir, theta, &alpha);
                    rho.iter_mut().for_each(|v| *v = 0.0);
                    rho[row] = 1.0;
                    self.lu.btran(&mut rho, &mut self.scratch);
                    self.update_pricing(q, row, alpha[row], &rho, phase_one);
                    let out = self.basis[row];
                    let (st, val) = if to_upper {
                        (BasisStatus::AtUpper, self.up[out])
                    } else {
                        (BasisStatus::AtLower, self.lo[out])
                    };
                    self.status[out] = st;
                    self.x[out] = val;
                    self.position[out] = NIL;
                    self.basis[row] = q;
                    self.status[q] = BasisStatus::Basic;
                    self.position[q] = row;
                    self.lu.push_eta(row, &alpha);
                    if theta <= 1e-12 {
                        degenerate += 1;
                    } else {
                        degenerate = 0;
                    }
                }
            }
        }
    }

    fn shift(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let j = self.basis[i];
                self.x[j] -= theta * dir * a;
            }
        }
    }

    fn finish(mut self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let reduced_costs = if status == LpStatus::Optimal {
            let mut y = self.phase_costs(false);
            self.lu.btran(&mut y, &mut self.scratch);
            (0..n)
                .map(|j| self.cost[j] - self.dot_column(j, &y))
                .collect()
        } else {
            Vec::new()
        };
        let mut x: Vec<f64> = self.x[..n].to_vec();
        if status == LpStatus::Optimal {
            for (j, v) in x.iter_mut().enumerate() {
                *v = v.clamp(self.lo[j], self.up[j]);
            }
        }
        let objective_value = if status == LpStatus::Optimal {
            x.iter().zip(&self.cost[..n]).map(|(v, c)| v * c).sum()
        } else if status == LpStatus::Unbounded {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        LpSolution {
            status,
            x,
            objective_value,
            reduced_costs,
            iterations: self.iterations,
            basis: Some(LpBasis {
                basic: self.basis,
                status: self.status,
            }),
        }
    }
}

fn merge_duplicates(
    n: usize,
    start: &[usize],
    rows: &[usize],
    vals: &[f64],
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut out_start = Vec::with_capacity(n + 1);
    let mut out_rows = Vec::with_capacity(rows.len());
    let mut out_vals = Vec::with_capacity(vals.len());
    out_start.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        entries.clear();
        entries.extend((start[j]..start[j + 1]).map(|t| (rows[t], vals[t])));
        entries.sort_by_key(|e| e.0);
        let mut k = 0;
        while k < entries.len() {
            let r = entries[k].0;
            let mut v = 0.0;
            while k < entries.len() && entries[k].0 == r {
                v += entries[k].1;
                k += 1;
            }
            if v != 0.0 {
                out_rows.push(r);
                out_vals.push(v);
            }
        }
        out_start.push(out_rows.len());
    }
    (out_start, out_rows, out_vals)
}
