//! Linear programming in bounded computational form.
//!
//! Problems are stated in maximize orientation:
//!
//! ```text
//! maximize    c'x
//! subject to  row_lower <= A x <= row_upper
//!             lower <= x <= upper
//! ```
//!
//! Plain `A x <= b` rows use `row_lower = -inf`, equality rows use
//! `row_lower = row_upper`. Variable bounds are handled implicitly by the
//! bounded-variable primal simplex in [`simplex`], so box constraints never
//! become rows.

mod lu;
mod simplex;

use std::time::Instant;

use thiserror::Error;

pub use simplex::{BasisStatus, LpBasis};

/// Errors raised by [`solve_lp`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid problem data: {0}")]
    InvalidData(String),
    #[error("numerical breakdown after {iterations} iterations: {reason}")]
    NumericalBreakdown { iterations: usize, reason: String },
    #[error("deadline exceeded after {iterations} iterations")]
    DeadlineExceeded { iterations: usize },
}

/// One sparse constraint row with a (possibly one-sided) activity range.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

/// A linear program over box-bounded variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_variable(&mut self, objective: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(objective);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    /// `terms · x <= rhs`
    pub fn add_le(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.add_range(terms, f64::NEG_INFINITY, rhs)
    }

    /// `terms · x >= rhs`
    pub fn add_ge(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.add_range(terms, rhs, f64::INFINITY)
    }

    /// `terms · x == rhs`
    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.add_range(terms, rhs, rhs)
    }

    /// `lower <= terms · x <= upper`
    pub fn add_range(&mut self, terms: Vec<(usize, f64)>, lower: f64, upper: f64) -> usize {
        self.rows.push(Row {
            terms,
            lower,
            upper,
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_mut(&mut self) -> &mut [f64] {
        &mut self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Objective value `c'x`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let activity: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            worst = worst.max(row.lower - activity).max(activity - row.upper);
        }
        worst
    }

    /// Checks dimensional consistency, finiteness and bound ordering.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{} objective entries but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::InvalidData(format!(
                    "objective[{j}] is not finite"
                )));
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::InvalidData(format!(
                    "variable {j} has bounds [{l}, {u}]"
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.lower.is_nan()
                || row.upper.is_nan()
                || row.lower > row.upper
                || row.lower == f64::INFINITY
                || row.upper == f64::NEG_INFINITY
            {
                return Err(LpError::InvalidData(format!(
                    "row {i} has range [{}, {}]",
                    row.lower, row.upper
                )));
            }
            for &(j, a) in &row.terms {
                if j >= n {
                    return Err(LpError::DimensionMismatch(format!(
                        "row {i} references variable {j} but only {n} exist"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::InvalidData(format!(
                        "row {i} coefficient for variable {j} is not finite"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// `c_j - y'a_j` for each structural column; empty unless optimal.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    /// Final basis, usable as a warm start for a problem with the same rows.
    pub basis: Option<LpBasis>,
}

/// Tolerances and limits for the simplex method.
#[derive(Debug, Clone)]
pub struct LpConfig {
    /// Primal feasibility tolerance.
    pub feasibility_tol: f64,
    /// Dual (reduced cost) optimality tolerance.
    pub optimality_tol: f64,
    /// Bound relaxation used by the two-pass ratio test.
    pub harris_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_streak: usize,
    pub max_iterations: usize,
    /// Number of eta updates between refactorizations.
    pub refactor_interval: usize,
    pub deadline: Option<Instant>,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            harris_tol: 1e-9,
            pivot_tol: 1e-9,
            degenerate_streak: 50,
            max_iterations: 200_000,
            refactor_interval: 64,
            deadline: None,
        }
    }
}

/// Solves `lp` from the all-logical starting basis.
pub fn solve_lp(lp: &LinearProgram, cfg: &LpConfig) -> Result<LpSolution, LpError> {
    solve_lp_warm(lp, cfg, None)
}

/// Solves `lp`, starting from `basis` when one is given.
///
/// The basis must come from a problem with the same variable and row counts;
/// bounds and objective may differ. Singular or mismatched hints fall back to
/// the logical basis.
pub fn solve_lp_warm(
    lp: &LinearProgram,
    cfg: &LpConfig,
    basis: Option<&LpBasis>,
) -> Result<LpSolution, LpError> {
    lp.validate()?;
    simplex::Simplex::new(lp, cfg, basis).run()
}
