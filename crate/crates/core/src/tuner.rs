//! Gradient-descent selection of the objective weights.
//!
//! The merit is `-f1/N1 + f2/N2 + f3/N3 - f4/N4` (lower is better). Each
//! iteration estimates the gradient with forward differences of size `h` in
//! every coordinate, steps `ω ← max(0, ω - γ g)`, and halves `γ` whenever
//! the step raises the merit (the step is then rejected).

use std::path::Path;

use thiserror::Error;

use crate::horizon::{run_fho, run_rho, HorizonError, MissionResult, RhoConfig};
use crate::milp::SolverConfig;
use crate::model::{ObjectiveTerms, ObjectiveWeights, ScenarioSpec};

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("normalization constant {index} is not positive ({value})")]
    ZeroNorm { index: usize, value: f64 },
    #[error("invalid tuner configuration: {0}")]
    Config(String),
    #[error("merit evaluation failed at iteration {iteration}: {reason}")]
    NonFiniteMerit {
        iteration: usize,
        reason: String,
        trace: Vec<TraceEntry>,
    },
    #[error("writing trace to {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Scale of each objective term; dividing by it maps the term into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritNorms {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub n4: f64,
}

impl MeritNorms {
    /// Largest attainable value of each term over the scenario's mission.
    ///
    /// A term that is structurally zero (no storage pairs, no storage) gets
    /// norm 1 so the merit stays defined.
    pub fn for_scenario(sc: &ScenarioSpec) -> Self {
        let t = sc.steps as f64;
        let n1 = t * sc.normalized_weights().iter().sum::<f64>();
        let n2 = t * sc
            .storage
            .iter()
            .map(|s| s.p_max.abs().max(s.p_min.abs()))
            .sum::<f64>();
        let n3 = t * sc
            .storage_pairs()
            .iter()
            .map(|&(l, m)| sc.storage[l].soc_max.max(sc.storage[m].soc_max))
            .sum::<f64>();
        let n4 = sc
            .storage
            .iter()
            .map(|s| s.terminal_priority * s.soc_max)
            .sum::<f64>();
        let or_one = |v: f64| if v == 0.0 { 1.0 } else { v };
        MeritNorms {
            n1: or_one(n1),
            n2: or_one(n2),
            n3: or_one(n3),
            n4: or_one(n4),
        }
    }

    fn check(&self) -> Result<(), TunerError> {
        for (index, value) in [self.n1, self.n2, self.n3, self.n4].into_iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(TunerError::ZeroNorm {
                    index: index + 1,
                    value,
                });
            }
        }
        Ok(())
    }
}

pub fn normalized_merit(terms: &ObjectiveTerms, norms: &MeritNorms) -> Result<f64, TunerError> {
    norms.check()?;
    Ok(-terms.f1 / norms.n1 + terms.f2 / norms.n2 + terms.f3 / norms.n3 - terms.f4 / norms.n4)
}

#[derive(Debug, Clone)]
pub struct TunerConfig {
    /// Starting point; defaults to the standard weights.
    pub initial: [f64; 3],
    pub gamma: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Forward-difference probe size.
    pub probe: f64,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            initial: ObjectiveWeights::default().as_array(),
            gamma: 0.05,
            epsilon: 1e-4,
            max_iterations: 100,
            probe: 1e-3,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<(), TunerError> {
        let bad = |m: &str| Err(TunerError::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.probe > 0.0 && self.probe.is_finite()) {
            return bad("probe size must be positive");
        }
        if self.initial.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("initial weights must be finite and non-negative");
        }
        Ok(())
    }
}

/// One accepted or rejected descent iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub omega: [f64; 3],
    pub merit: f64,
    pub gamma: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    /// Best weights seen over the trace.
    pub omega: [f64; 3],
    pub merit: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    /// Stopped on `|Δf̄| < ε` rather than the iteration cap.
    pub converged: bool,
}

/// Runs the descent. `evaluator` must be deterministic; the three
/// coordinate probes of an iteration are evaluated on separate threads.
pub fn tune_weights<F>(cfg: &TunerConfig, evaluator: F) -> Result<TuneResult, TunerError>
where
    F: Fn([f64; 3]) -> Result<f64, String> + Sync,
{
    cfg.validate()?;
    let mut trace: Vec<TraceEntry> = Vec::new();
    let eval = |omega: [f64; 3], iteration: usize, trace: &[TraceEntry]| match evaluator(omega) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(TunerError::NonFiniteMerit {
            iteration,
            reason: format!("merit {v} at {omega:?}"),
            trace: trace.to_vec(),
        }),
        Err(reason) => Err(TunerError::NonFiniteMerit {
            iteration,
            reason,
            trace: trace.to_vec(),
        }),
    };

    let mut omega = cfg.initial.map(|w| w.max(0.0));
    let mut merit = eval(omega, 0, &trace)?;
    let mut gamma = cfg.gamma;
    trace.push(TraceEntry {
        iteration: 0,
        omega,
        merit,
        gamma,
        accepted: true,
    });
    let (mut best_omega, mut best_merit) = (omega, merit);
    let mut converged = false;
    let mut iterations = 0;

    for i in 1..=cfg.max_iterations {
        iterations = i;
        let probes: Vec<Result<f64, String>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..3)
                .map(|k| {
                    let mut w = omega;
                    w[k] += cfg.probe;
                    let ev = &evaluator;
                    s.spawn(move || ev(w))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err("evaluator panicked".into()))
                })
                .collect()
        });
        let mut grad = [0.0; 3];
        for (k, p) in probes.into_iter().enumerate() {
            let v = match p {
                Ok(v) if v.is_finite() => v,
                Ok(v) => {
                    return Err(TunerError::NonFiniteMerit {
                        iteration: i,
                        reason: format!("probe merit {v} in coordinate {}", k + 1),
                        trace,
                    })
                }
                Err(reason) => {
                    return Err(TunerError::NonFiniteMerit {
                        iteration: i,
                        reason,
                        trace,
                    })
                }
            };
            grad[k] = (v - merit) / cfg.probe;
        }

        let mut next = omega;
        for k in 0..3 {
            next[k] = (omega[k] - gamma * grad[k]).max(0.0);
        }
        let next_merit = if next == omega {
            merit
        } else {
            eval(next, i, &trace)?
        };
        let accepted = next_merit <= merit;
        trace.push(TraceEntry {
            iteration: i,
            omega: next,
            merit: next_merit,
            gamma,
            accepted,
        });
        if next_merit < best_merit {
            best_merit = next_merit;
            best_omega = next;
        }
        let change = (next_merit - merit).abs();
        if accepted {
            omega = next;
            merit = next_merit;
            if change < cfg.epsilon {
                converged = true;
                break;
            }
        } else {
            gamma *= 0.5;
        }
    }

    Ok(TuneResult {
        omega: best_omega,
        merit: best_merit,
        trace,
        iterations,
        converged,
    })
}

/// Which controller a [`MissionEvaluator`] runs.
#[derive(Debug, Clone)]
pub enum EvalMode {
    Fho(SolverConfig),
    Rho(RhoConfig),
}

/// Maps weights to the normalized merit of a full mission solve.
#[derive(Debug, Clone)]
pub struct MissionEvaluator<'a> {
    pub scenario: &'a ScenarioSpec,
    pub mode: EvalMode,
    pub norms: MeritNorms,
}

impl<'a> MissionEvaluator<'a> {
    pub fn new(scenario: &'a ScenarioSpec, mode: EvalMode) -> Self {
        MissionEvaluator {
            scenario,
            mode,
            norms: MeritNorms::for_scenario(scenario),
        }
    }

    pub fn mission(&self, omega: [f64; 3]) -> Result<MissionResult, HorizonError> {
        let w = ObjectiveWeights::from_array(omega)?;
        match &self.mode {
            EvalMode::Fho(cfg) => run_fho(self.scenario, &w, cfg),
            EvalMode::Rho(cfg) => run_rho(self.scenario, &w, cfg),
        }
    }

    pub fn merit(&self, omega: [f64; 3]) -> Result<f64, String> {
        let r = self.mission(omega).map_err(|e| e.to_string())?;
        if !r.usable {
            return Err(format!("mission at {omega:?} is not usable"));
        }
        normalized_merit(&r.terms, &self.norms).map_err(|e| e.to_string())
    }
}

/// Writes `iteration,omega1,omega2,omega3,merit,gamma,accepted`.
pub fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<(), TunerError> {
    let io = |source| TunerError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record([
        "iteration",
        "omega1",
        "omega2",
        "omega3",
        "merit",
        "gamma",
        "accepted",
    ])
    .map_err(|e| io(e.into()))?;
    for e in trace {
        w.write_record([
            e.iteration.to_string(),
            e.omega[0].to_string(),
            e.omega[1].to_string(),
            e.omega[2].to_string(),
            e.merit.to_string(),
            e.gamma.to_string(),
            e.accepted.to_string(),
        ])
        .map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)?;
    Ok(())
}
