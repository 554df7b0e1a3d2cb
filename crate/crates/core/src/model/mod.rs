//! Ship power system domain model.
//!
//! Units throughout: seconds, MW, MJ, and state of charge as a fraction of
//! energy capacity. Storage power is positive when discharging (supply side
//! of the power balance) and negative when charging.

mod build;
mod check;
mod decode;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use build::ramp_applies;
pub use build::{build_window_milp, WindowLayout, WindowModel};
pub use check::{check_trajectory, Violation, ViolationKind};
pub use decode::decode_plan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("step size {0} is not in (0, 1]")]
    InvalidStepSize(f64),
    #[error("horizon must be at least 1 (got {0})")]
    EmptyHorizon(usize),
    #[error("step {step} is past the mission end ({steps} steps)")]
    PastMissionEnd { step: usize, steps: usize },
    #[error("state has {got} {what} entries, scenario has {expected}")]
    StateShape {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("generator {id} cannot reach its power range from {prev} MW within one step")]
    InconsistentRamp { id: String, prev: f64 },
    #[error("decoded plan disagrees with solver: {0}")]
    DecodeMismatch(String),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadKind {
    Continuous,
    /// Servable only in multiples of `1/n`.
    Stepped(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub id: String,
    pub name: String,
    /// MW
    pub rated_power: f64,
    pub weight: f64,
    pub kind: LoadKind,
}

impl LoadSpec {
    /// Step size `1/n` for stepped loads.
    pub fn step_size(&self) -> Option<f64> {
        match self.kind {
            LoadKind::Continuous => None,
            LoadKind::Stepped(n) => Some(1.0 / n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub id: String,
    pub p_min: f64,
    pub p_max: f64,
    /// MW/s, negative
    pub ramp_min: f64,
    /// MW/s, positive
    pub ramp_max: f64,
    pub initial_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageClass {
    Battery,
    Supercapacitor,
}

impl StorageClass {
    /// Terminal-SoC priority used when a scenario does not give one.
    pub fn default_priority(self) -> f64 {
        match self {
            StorageClass::Battery => 0.5,
            StorageClass::Supercapacitor => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec {
    pub id: String,
    pub class: StorageClass,
    /// Charge limit, negative MW.
    pub p_min: f64,
    /// Discharge limit, positive MW.
    pub p_max: f64,
    pub ramp_min: f64,
    pub ramp_max: f64,
    /// MJ
    pub energy_capacity: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub initial_soc: f64,
    pub initial_power: f64,
    pub terminal_priority: f64,
}

/// Scalarization weights on storage throughput, SoC imbalance and terminal
/// SoC, relative to load operability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
}

impl ObjectiveWeights {
    pub const ZERO: ObjectiveWeights = ObjectiveWeights {
        omega1: 0.0,
        omega2: 0.0,
        omega3: 0.0,
    };

    pub fn new(omega1: f64, omega2: f64, omega3: f64) -> Result<Self, ModelError> {
        let w = ObjectiveWeights {
            omega1,
            omega2,
            omega3,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn from_array(w: [f64; 3]) -> Result<Self, ModelError> {
        Self::new(w[0], w[1], w[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.omega1, self.omega2, self.omega3]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (k, v) in self.as_array().iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(schema(
                    format!("weights.omega{}", k + 1),
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            omega1: 0.0056,
            omega2: 0.0321,
            omega3: 0.0541,
        }
    }
}

/// A complete mission: fleet, demand profile, trip events and timing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    /// Control step, seconds.
    pub dt: f64,
    pub steps: usize,
    /// Default receding-horizon window length in steps.
    pub horizon: usize,
    pub loads: Vec<LoadSpec>,
    pub generators: Vec<GeneratorSpec>,
    pub storage: Vec<StorageSpec>,
    /// `demand[t][i]`, MW.
    pub demand: Vec<Vec<f64>>,
    /// Mission-specific override of each load's weight.
    pub weight_profile: Option<Vec<f64>>,
    /// `availability[g][t]`; false while generator `g` is tripped.
    pub availability: Vec<Vec<bool>>,
    pub weights: ObjectiveWeights,
}

pub const DEFAULT_DT: f64 = 0.5;
pub const DEFAULT_HORIZON: usize = 60;
pub const DEFAULT_MISSION_TIME: f64 = 600.0;
pub const DEFAULT_SOC_MIN: f64 = 0.1;
pub const DEFAULT_SOC_MAX: f64 = 0.8;

impl ScenarioSpec {
    pub fn num_loads(&self) -> usize {
        self.loads.len()
    }

    /// Unordered storage pairs `(l, m)` with `l < m`.
    pub fn storage_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.storage.len();
        (0..n)
            .flat_map(|l| (l + 1..n).map(move |m| (l, m)))
            .collect()
    }

    /// Weight of load `i` for this mission.
    pub fn load_weight(&self, i: usize) -> f64 {
        self.weight_profile
            .as_ref()
            .map_or(self.loads[i].weight, |w| w[i])
    }

    /// `w_i · P_rated,i` for load `i`.
    pub fn normalized_weight(&self, i: usize) -> f64 {
        normalized_weight(&self.loads[i], self.load_weight(i))
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        (0..self.loads.len())
            .map(|i| self.normalized_weight(i))
            .collect()
    }

    pub fn is_available(&self, g: usize, t: usize) -> bool {
        self.availability[g].get(t).copied().unwrap_or(true)
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState {
            soc: self.storage.iter().map(|s| s.initial_soc).collect(),
            prev_storage_power: self.storage.iter().map(|s| s.initial_power).collect(),
            prev_generator_power: self.generators.iter().map(|g| g.initial_power).collect(),
            step_index: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(schema("timing.dt", "must be positive"));
        }
        if self.steps == 0 {
            return Err(schema("timing.steps", "mission needs at least one step"));
        }
        if self.horizon == 0 {
            return Err(schema("timing.horizon", "must be at least 1"));
        }
        self.weights.validate()?;
        let mut ids = std::collections::HashSet::new();
        for (i, l) in self.loads.iter().enumerate() {
            let p = |f: &str| format!("load[{i}].{f}");
            if !ids.insert(l.id.clone()) {
                return Err(schema(p("id"), format!("duplicate id {:?}", l.id)));
            }
            if !(l.rated_power.is_finite() && l.rated_power > 0.0) {
                return Err(schema(p("rated_power"), "must be positive"));
            }
            if !(l.weight.is_finite() && l.weight >= 0.0) {
                return Err(schema(p("weight"), "must be non-negative"));
            }
            if l.kind == LoadKind::Stepped(0) {
                return Err(schema(p("steps"), "step count must be at least 1"));
            }
        }
        for (g, gen) in self.generators.iter().enumerate() {
            let p = |f: &str| format!("generator[{g}].{f}");
            if !ids.insert(gen.id.clone()) {
                return Err(schema(p("id"), format!("duplicate id {:?}", gen.id)));
            }
            let vals = [
                gen.p_min,
                gen.p_max,
                gen.ramp_min,
                gen.ramp_max,
                gen.initial_power,
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(schema(p("*"), "all values must be finite"));
            }
            if gen.p_min > gen.p_max {
                return Err(schema(p("p_min"), "exceeds p_max"));
            }
            if !(gen.ramp_min < 0.0 && gen.ramp_max > 0.0) {
                return Err(schema(p("ramp_min"), "ramp limits must straddle zero"));
            }
            if gen.initial_power < gen.p_min || gen.initial_power > gen.p_max {
                return Err(schema(p("initial_power"), "outside [p_min, p_max]"));
            }
        }
        for (e, s) in self.storage.iter().enumerate() {
            let p = |f: &str| format!("storage[{e}].{f}");
            if !ids.insert(s.id.clone()) {
                return Err(schema(p("id"), format!("duplicate id {:?}", s.id)));
            }
            let vals = [
                s.p_min,
                s.p_max,
                s.ramp_min,
                s.ramp_max,
                s.energy_capacity,
                s.soc_min,
                s.soc_max,
                s.initial_soc,
                s.initial_power,
                s.terminal_priority,
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(schema(p("*"), "all values must be finite"));
            }
            if !(s.p_min < 0.0 && s.p_max > 0.0) {
                return Err(schema(p("p_min"), "need p_min < 0 < p_max"));
            }
            if !(s.ramp_min < 0.0 && s.ramp_max > 0.0) {
                return Err(schema(p("ramp_min"), "ramp limits must straddle zero"));
            }
            if s.energy_capacity <= 0.0 {
                return Err(schema(p("energy_capacity"), "must be positive"));
            }
            for (name, v) in [
                ("soc_min", s.soc_min),
                ("soc_max", s.soc_max),
                ("initial_soc", s.initial_soc),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(schema(
                        p(name),
                        format!("{v} is not a fraction in [0, 1] (percent values are rejected)"),
                    ));
                }
            }
            if s.soc_min >= s.soc_max {
                return Err(schema(p("soc_min"), "must be below soc_max"));
            }
            if s.initial_soc < s.soc_min || s.initial_soc > s.soc_max {
                return Err(schema(p("initial_soc"), "outside [soc_min, soc_max]"));
            }
            if s.initial_power < s.p_min || s.initial_power > s.p_max {
                return Err(schema(p("initial_power"), "outside [p_min, p_max]"));
            }
            if s.terminal_priority < 0.0 {
                return Err(schema(p("terminal_priority"), "must be non-negative"));
            }
        }
        if self.demand.len() != self.steps {
            return Err(schema(
                "demand",
                format!("{} rows for {} steps", self.demand.len(), self.steps),
            ));
        }
        for (t, row) in self.demand.iter().enumerate() {
            if row.len() != self.loads.len() {
                return Err(schema(
                    format!("demand[{t}]"),
                    format!("{} columns for {} loads", row.len(), self.loads.len()),
                ));
            }
            if let Some(i) = row.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(schema(
                    format!("demand[{t}][{i}]"),
                    "must be finite and >= 0",
                ));
            }
        }
        if let Some(w) = &self.weight_profile {
            if w.len() != self.loads.len() {
                return Err(schema(
                    "weight_profile",
                    format!("{} entries for {} loads", w.len(), self.loads.len()),
                ));
            }
            if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(schema(
                    format!("weight_profile[{i}]"),
                    "must be non-negative",
                ));
            }
        }
        if self.availability.len() != self.generators.len() {
            return Err(schema(
                "availability",
                format!(
                    "{} rows for {} generators",
                    self.availability.len(),
                    self.generators.len()
                ),
            ));
        }
        for (g, row) in self.availability.iter().enumerate() {
            if row.len() != self.steps {
                return Err(schema(
                    format!("availability[{g}]"),
                    format!("{} entries for {} steps", row.len(), self.steps),
                ));
            }
        }
        Ok(())
    }
}

/// Controller state carried between receding-horizon steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub soc: Vec<f64>,
    pub prev_storage_power: Vec<f64>,
    pub prev_generator_power: Vec<f64>,
    /// Absolute index of the next step to be decided.
    pub step_index: usize,
}

impl SystemState {
    pub(crate) fn check_shape(&self, scenario: &ScenarioSpec) -> Result<(), ModelError> {
        let checks = [
            ("soc", self.soc.len(), scenario.storage.len()),
            (
                "storage power",
                self.prev_storage_power.len(),
                scenario.storage.len(),
            ),
            (
                "generator power",
                self.prev_generator_power.len(),
                scenario.generators.len(),
            ),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(ModelError::StateShape {
                    what,
                    got,
                    expected,
                });
            }
        }
        Ok(())
    }
}

/// Decisions for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDispatch {
    /// Served fraction of each load's commanded demand.
    pub served: Vec<f64>,
    pub storage_power: Vec<f64>,
    pub generator_power: Vec<f64>,
    /// SoC at the end of the step.
    pub soc: Vec<f64>,
}

/// Raw objective terms: weighted service, storage throughput, pairwise SoC
/// imbalance and priority-weighted final SoC.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl ObjectiveTerms {
    pub fn combine(&self, w: &ObjectiveWeights) -> f64 {
        self.f1 - w.omega1 * self.f2 - w.omega2 * self.f3 + w.omega3 * self.f4
    }

    /// Terms of a trajectory of consecutive steps.
    pub fn of_trajectory(scenario: &ScenarioSpec, steps: &[StepDispatch]) -> Self {
        let w_hat = scenario.normalized_weights();
        let pairs = scenario.storage_pairs();
        let mut t = ObjectiveTerms::default();
        for s in steps {
            t.f1 += w_hat.iter().zip(&s.served).map(|(w, o)| w * o).sum::<f64>();
            t.f2 += s.storage_power.iter().map(|p| p.abs()).sum::<f64>();
            t.f3 += pairs
                .iter()
                .map(|&(l, m)| (s.soc[l] - s.soc[m]).abs())
                .sum::<f64>();
        }
        if let Some(last) = steps.last() {
            t.f4 = scenario
                .storage
                .iter()
                .zip(&last.soc)
                .map(|(s, soc)| s.terminal_priority * soc)
                .sum();
        }
        t
    }
}

/// Planned decisions over one optimization window.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchPlan {
    /// Absolute index of the first planned step.
    pub start: usize,
    pub steps: Vec<StepDispatch>,
    pub terms: ObjectiveTerms,
}

/// `ŵ_i = w_i · P_rated,i`
pub fn normalized_weight(load: &LoadSpec, scenario_weight: f64) -> f64 {
    scenario_weight * load.rated_power
}

/// Rescales a stepped load so its status becomes an integer in `[0, n]`.
///
/// Returns `(ŵ·Δo, demand·Δo, n)`.
pub fn scale_stepped_load(
    w_hat: f64,
    demand: f64,
    step: f64,
) -> Result<(f64, f64, u32), ModelError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(ModelError::InvalidStepSize(step));
    }
    let n = (1.0 / step).round();
    Ok((w_hat * step, demand * step, n as u32))
}

/// Served fraction for an integer status of a stepped load.
pub fn decode_stepped(level: f64, step: f64) -> f64 {
    level * step
}

/// SoC after drawing `power` MW for `dt` seconds from `capacity` MJ.
pub fn soc_step(soc: f64, power: f64, dt: f64, capacity: f64) -> f64 {
    soc - dt * power / capacity
}
