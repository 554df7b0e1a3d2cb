//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use shipems::lp::{solve_lp, LinearProgram, LpConfig, LpStatus};
use shipems::milp::MilpProblem;

/// Best objective over all vertices of a fully box-bounded LP, found by
/// solving every square subsystem of active constraints. `None` if no vertex
/// is feasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in lp.rows() {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.terms {
            a[j] += v;
        }
        if row.lower == row.upper {
            planes.push((a, row.lower));
            continue;
        }
        if row.lower.is_finite() {
            planes.push((a.clone(), row.lower));
        }
        if row.upper.is_finite() {
            planes.push((a, row.upper));
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower()[j]));
        planes.push((e, lp.upper()[j]));
    }
    // Equalities are enforced by the feasibility check, so every vertex is
    // some square subsystem of planes.
    let mut best: Option<f64> = None;
    let mut chosen = Vec::new();
    combinations(planes.len(), n, 0, &mut chosen, &mut |idx| {
        let mut a: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut b: Vec<f64> = Vec::with_capacity(n);
        for &k in idx {
            a.push(planes[k].0.clone());
            b.push(planes[k].1);
        }
        if let Some(x) = gauss_solve(a, b) {
            if lp.max_violation(&x) <= 1e-9 {
                let v = lp.evaluate(&x);
                best = Some(best.map_or(v, |bv: f64| bv.max(v)));
            }
        }
    });
    best
}

fn combinations(
    total: usize,
    k: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..total {
        if total - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        combinations(total, k, i + 1, chosen, f);
        chosen.pop();
    }
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let pivot = a[col].clone();
                    for (x, p) in a[r][col..n].iter_mut().zip(&pivot[col..n]) {
                        *x -= f * p;
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// A random LP with a known feasible interior-ish point.
pub fn random_feasible_lp(rng: &mut impl Rng, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_rows);
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = -(rng.gen_range(0..=3) as f64);
        let hi = rng.gen_range(1..=5) as f64;
        let c = rng.gen_range(-5..=5) as f64;
        lp.add_variable(c, lo, hi);
        x0.push(rng.gen_range(lo..=hi));
    }
    for _ in 0..m {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                terms.push((j, rng.gen_range(-5..=5) as f64));
            }
        }
        let act: f64 = terms.iter().map(|&(j, a)| a * x0[j]).sum();
        match rng.gen_range(0..6) {
            0 => {
                lp.add_eq(terms, act);
            }
            1 => {
                lp.add_ge(terms, act - rng.gen_range(0.0..3.0));
            }
            _ => {
                lp.add_le(terms, act + rng.gen_range(0.0..3.0));
            }
        }
    }
    lp
}

/// Random mixed-integer problem: integer variables with small ranges plus a
/// few continuous ones.
pub fn random_milp(rng: &mut impl Rng) -> MilpProblem {
    let n_int = rng.gen_range(1..=8);
    let n_cont = rng.gen_range(0..=6);
    let n = n_int + n_cont;
    let m = rng.gen_range(1..=6);
    let mut lp = LinearProgram::new();
    let mut integrality = Vec::with_capacity(n);
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n_int {
        let lo = -(rng.gen_range(0..=1) as f64);
        let hi = lo + rng.gen_range(0..=3) as f64;
        lp.add_variable(
            rng.gen_range(-6..=6) as f64 + rng.gen_range(0.0..1.0),
            lo,
            hi,
        );
        integrality.push(true);
        x0.push(rng.gen_range(lo as i64..=hi as i64) as f64);
    }
    for _ in 0..n_cont {
        let lo = -(rng.gen_range(0..=2) as f64);
        let hi = rng.gen_range(1..=4) as f64;
        lp.add_variable(rng.gen_range(-4.0..4.0), lo, hi);
        integrality.push(false);
        x0.push(rng.gen_range(lo..=hi));
    }
    for _ in 0..m {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                let a = rng.gen_range(-4.0..4.0f64).round() + rng.gen_range(0.0..0.5);
                terms.push((j, a));
            }
        }
        let act: f64 = terms.iter().map(|&(j, a)| a * x0[j]).sum();
        if rng.gen_bool(0.15) {
            lp.add_eq(terms, act);
        } else {
            lp.add_le(terms, act + rng.gen_range(0.0..2.0));
        }
    }
    MilpProblem::new(lp, integrality).expect("valid random milp")
}

/// Exhaustive oracle: fixes every integer assignment and solves the residual
/// continuous LP. Returns the best objective, or `None` if infeasible.
pub fn brute_force_milp(p: &MilpProblem) -> Option<f64> {
    let ints: Vec<usize> = (0..p.lp.num_vars()).filter(|&j| p.integrality[j]).collect();
    let mut best: Option<f64> = None;
    let mut lp = p.lp.clone();
    let cfg = LpConfig::default();
    let ranges: Vec<(i64, i64)> = ints
        .iter()
        .map(|&j| (p.lp.lower()[j] as i64, p.lp.upper()[j] as i64))
        .collect();
    let mut assignment: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        for (k, &j) in ints.iter().enumerate() {
            lp.set_bounds(j, assignment[k] as f64, assignment[k] as f64);
        }
        let sol = solve_lp(&lp, &cfg).expect("residual lp");
        if sol.status == LpStatus::Optimal {
            best = Some(best.map_or(sol.objective_value, |b: f64| b.max(sol.objective_value)));
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == ints.len() {
                return best;
            }
            if assignment[k] < ranges[k].1 {
                assignment[k] += 1;
                break;
            }
            assignment[k] = ranges[k].0;
            k += 1;
        }
    }
}
