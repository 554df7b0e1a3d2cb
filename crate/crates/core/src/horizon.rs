//! Fixed-horizon and receding-horizon mission runs.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::lp::LpBasis;
use crate::milp::{solve_milp, solve_milp_warm, MilpError, MilpStatus, SolverConfig};
use crate::model::{
    build_window_milp, decode_plan, ramp_applies, soc_step, DispatchPlan, ModelError,
    ObjectiveTerms, ObjectiveWeights, ScenarioSpec, StepDispatch, SystemState, WindowLayout,
};

#[derive(Debug, Error)]
pub enum HorizonError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] MilpError),
    #[error("horizon {np} is outside 1..={steps}")]
    BadHorizon { np: usize, steps: usize },
    #[error("the whole-mission problem is infeasible")]
    Infeasible,
    #[error("solver stopped before finding any feasible plan")]
    TimedOut,
    #[error("denominator is zero")]
    ZeroDenominator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fho,
    Rho { np: usize },
}

/// How the decisions of a step were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Optimal,
    /// Solver hit its limit; best incumbent applied.
    Incumbent,
    /// Fallback: previous window's plan shifted by one step.
    ShiftedPlan,
    /// Fallback: previous powers held, loads shed by ascending weight.
    GreedyHold,
}

impl StepOutcome {
    pub fn is_fallback(self) -> bool {
        matches!(self, StepOutcome::ShiftedPlan | StepOutcome::GreedyHold)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StepOutcome::Optimal => "optimal",
            StepOutcome::Incumbent => "incumbent",
            StepOutcome::ShiftedPlan => "shifted",
            StepOutcome::GreedyHold => "greedy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MissionResult {
    pub mode: Mode,
    pub weights: ObjectiveWeights,
    /// Applied decisions, one per mission step.
    pub steps: Vec<StepDispatch>,
    pub outcomes: Vec<StepOutcome>,
    /// Build + solve + decode time per RHO step; a single entry for FHO.
    pub step_times: Vec<Duration>,
    pub total_time: Duration,
    /// Mission terms of the applied trajectory.
    pub terms: ObjectiveTerms,
    /// Composite objective of the applied trajectory.
    pub objective: f64,
    /// Solver objective of the first window (the only one for FHO).
    pub first_window_objective: Option<f64>,
    /// False when any step was not solved to optimality.
    pub usable: bool,
}

impl MissionResult {
    /// Steps that used a fallback.
    pub fn fallbacks(&self) -> Vec<usize> {
        self.outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_fallback())
            .map(|(t, _)| t)
            .collect()
    }

    pub fn max_step_time(&self) -> Duration {
        self.step_times.iter().copied().max().unwrap_or_default()
    }

    pub fn mean_step_time(&self) -> Duration {
        if self.step_times.is_empty() {
            return Duration::ZERO;
        }
        self.step_times.iter().sum::<Duration>() / self.step_times.len() as u32
    }
}

/// Options for [`run_rho`].
#[derive(Debug, Clone)]
pub struct RhoConfig {
    pub horizon: usize,
    /// Wall-clock budget for each step's build + solve.
    pub deadline_per_step: Option<Duration>,
    pub solver: SolverConfig,
}

impl RhoConfig {
    pub fn new(horizon: usize) -> Self {
        RhoConfig {
            horizon,
            deadline_per_step: None,
            solver: SolverConfig::default(),
        }
    }
}

/// Solves the whole mission as one window and applies it open loop.
pub fn run_fho(
    scenario: &ScenarioSpec,
    weights: &ObjectiveWeights,
    solver: &SolverConfig,
) -> Result<MissionResult, HorizonError> {
    scenario.validate()?;
    let started = Instant::now();
    let state = scenario.initial_state();
    let model = build_window_milp(scenario, &state, weights, scenario.steps)?;
    let sol = solve_milp(&model.problem, solver)?;
    if sol.status == MilpStatus::Infeasible {
        return Err(HorizonError::Infeasible);
    }
    if !sol.has_incumbent() {
        return Err(HorizonError::TimedOut);
    }
    let plan = decode_plan(&sol, &model.layout, scenario, &state, weights)?;
    let elapsed = started.elapsed();
    let outcome = if sol.status == MilpStatus::Optimal {
        StepOutcome::Optimal
    } else {
        StepOutcome::Incumbent
    };
    let terms = plan.terms;
    Ok(MissionResult {
        mode: Mode::Fho,
        weights: *weights,
        steps: plan.steps,
        outcomes: vec![outcome; scenario.steps],
        step_times: vec![elapsed],
        total_time: elapsed,
        terms,
        objective: terms.combine(weights),
        first_window_objective: Some(sol.objective_value),
        usable: outcome == StepOutcome::Optimal,
    })
}

/// Receding-horizon run with exact state propagation.
pub fn run_rho(
    scenario: &ScenarioSpec,
    weights: &ObjectiveWeights,
    cfg: &RhoConfig,
) -> Result<MissionResult, HorizonError> {
    run_rho_with_feedback(scenario, weights, cfg, |_, _| {})
}

/// Receding-horizon run. `feedback(t, state)` is called after step `t` has
/// been applied and may overwrite the measured state before the next solve.
pub fn run_rho_with_feedback<F>(
    scenario: &ScenarioSpec,
    weights: &ObjectiveWeights,
    cfg: &RhoConfig,
    mut feedback: F,
) -> Result<MissionResult, HorizonError>
where
    F: FnMut(usize, &mut SystemState),
{
    scenario.validate()?;
    if cfg.horizon == 0 || cfg.horizon > scenario.steps {
        return Err(HorizonError::BadHorizon {
            np: cfg.horizon,
            steps: scenario.steps,
        });
    }
    let mission_start = Instant::now();
    let mut state = scenario.initial_state();
    let mut steps = Vec::with_capacity(scenario.steps);
    let mut outcomes = Vec::with_capacity(scenario.steps);
    let mut step_times = Vec::with_capacity(scenario.steps);
    let mut last_plan: Option<DispatchPlan> = None;
    let mut first_window_objective = None;
    let mut warm: Option<(WindowLayout, LpBasis)> = None;

    for t in 0..scenario.steps {
        let started = Instant::now();
        let mut solver = cfg.solver.clone();
        if let Some(d) = cfg.deadline_per_step {
            solver.deadline = Some(started + d);
        }
        let solved = solve_window(scenario, &state, weights, cfg.horizon, &solver, &mut warm)?;
        let (applied, outcome) = match solved {
            Some((plan, outcome, objective)) => {
                if t == 0 {
                    first_window_objective = Some(objective);
                }
                let first = plan.steps[0].clone();
                last_plan = Some(plan);
                (first, outcome)
            }
            None => match last_plan
                .as_ref()
                .and_then(|p| shifted_step(scenario, &state, p))
            {
                Some(s) => (s, StepOutcome::ShiftedPlan),
                None => (greedy_hold(scenario, &state), StepOutcome::GreedyHold),
            },
        };
        step_times.push(started.elapsed());

        let applied = propagate(scenario, &mut state, applied);
        steps.push(applied);
        outcomes.push(outcome);
        feedback(t, &mut state);
    }

    let terms = ObjectiveTerms::of_trajectory(scenario, &steps);
    Ok(MissionResult {
        mode: Mode::Rho { np: cfg.horizon },
        weights: *weights,
        usable: outcomes.iter().all(|o| *o == StepOutcome::Optimal),
        steps,
        outcomes,
        step_times,
        total_time: mission_start.elapsed(),
        terms,
        objective: terms.combine(weights),
        first_window_objective,
    })
}

type Solved = Option<(DispatchPlan, StepOutcome, f64)>;

/// Builds and solves one window. `warm` holds the previous window's layout
/// and root basis and is replaced by this window's.
fn solve_window(
    scenario: &ScenarioSpec,
    state: &SystemState,
    weights: &ObjectiveWeights,
    horizon: usize,
    solver: &SolverConfig,
    warm: &mut Option<(WindowLayout, LpBasis)>,
) -> Result<Solved, HorizonError> {
    let prev = warm.take();
    let model = match build_window_milp(scenario, state, weights, horizon) {
        Ok(m) => m,
        // Measured state outside what the ramp limits can reach.
        Err(ModelError::InconsistentRamp { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let start_basis = prev.and_then(|(layout, basis)| model.layout.shift_basis(&layout, &basis));
    let sol = match solve_milp_warm(&model.problem, solver, start_basis.as_ref()) {
        Ok(s) => s,
        Err(MilpError::Lp(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if let Some(b) = &sol.root_basis {
        *warm = Some((model.layout.clone(), b.clone()));
    }
    let outcome = match sol.status {
        MilpStatus::Optimal => StepOutcome::Optimal,
        MilpStatus::TimedOut if sol.has_incumbent() => StepOutcome::Incumbent,
        _ => return Ok(None),
    };
    let plan = decode_plan(&sol, &model.layout, scenario, state, weights)?;
    Ok(Some((plan, outcome, sol.objective_value)))
}

/// Applies `step` to `state` and returns it with the propagated SoC.
fn propagate(
    scenario: &ScenarioSpec,
    state: &mut SystemState,
    mut step: StepDispatch,
) -> StepDispatch {
    for (e, s) in scenario.storage.iter().enumerate() {
        state.soc[e] = soc_step(
            state.soc[e],
            step.storage_power[e],
            scenario.dt,
            s.energy_capacity,
        );
    }
    step.soc = state.soc.clone();
    state.prev_storage_power = step.storage_power.clone();
    state.prev_generator_power = step.generator_power.clone();
    state.step_index += 1;
    step
}

/// The previous plan's entry for the current step, if it is still
/// reachable from the current state.
fn shifted_step(
    scenario: &ScenarioSpec,
    state: &SystemState,
    plan: &DispatchPlan,
) -> Option<StepDispatch> {
    let t = state.step_index;
    let step = plan.steps.get(t.checked_sub(plan.start)?)?;
    let dt = scenario.dt;
    for (g, gen) in scenario.generators.iter().enumerate() {
        let p = step.generator_power[g];
        if !scenario.is_available(g, t) && p != 0.0 {
            return None;
        }
        if ramp_applies(scenario, g, t) {
            let d = p - state.prev_generator_power[g];
            if d < gen.ramp_min * dt - 1e-9 || d > gen.ramp_max * dt + 1e-9 {
                return None;
            }
        }
    }
    for (e, s) in scenario.storage.iter().enumerate() {
        let p = step.storage_power[e];
        let d = p - state.prev_storage_power[e];
        if d < s.ramp_min * dt - 1e-9 || d > s.ramp_max * dt + 1e-9 {
            return None;
        }
        let soc = soc_step(state.soc[e], p, dt, s.energy_capacity);
        if soc < s.soc_min - 1e-9 || soc > s.soc_max + 1e-9 {
            return None;
        }
    }
    Some(step.clone())
}

/// Holds every source as close to its previous power as the limits allow and
/// sheds loads in ascending order of normalized weight until supply covers
/// demand.
pub fn greedy_hold(scenario: &ScenarioSpec, state: &SystemState) -> StepDispatch {
    let t = state.step_index;
    let dt = scenario.dt;
    let generator_power: Vec<f64> = scenario
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            if !scenario.is_available(g, t) {
                return 0.0;
            }
            let mut lo = gen.p_min;
            let mut up = gen.p_max;
            if ramp_applies(scenario, g, t) {
                let prev = state.prev_generator_power[g];
                lo = lo.max(prev + gen.ramp_min * dt);
                up = up.min(prev + gen.ramp_max * dt);
            }
            if lo > up {
                gen.p_min.max(state.prev_generator_power[g].min(gen.p_max))
            } else {
                state.prev_generator_power[g].clamp(lo, up)
            }
        })
        .collect();
    let storage_power: Vec<f64> = scenario
        .storage
        .iter()
        .enumerate()
        .map(|(e, s)| {
            let prev = state.prev_storage_power[e];
            let k = dt / s.energy_capacity;
            let ramp_lo = (prev + s.ramp_min * dt).max(s.p_min);
            let ramp_up = (prev + s.ramp_max * dt).min(s.p_max);
            let soc_lo = (state.soc[e] - s.soc_max) / k;
            let soc_up = (state.soc[e] - s.soc_min) / k;
            let lo = ramp_lo.max(soc_lo);
            let up = ramp_up.min(soc_up);
            if lo <= up {
                prev.clamp(lo, up)
            } else if soc_up < ramp_lo {
                ramp_lo
            } else {
                ramp_up
            }
        })
        .collect();

    let supply: f64 = generator_power.iter().sum::<f64>() + storage_power.iter().sum::<f64>();
    let demand_row = &scenario.demand[t];
    let mut served = vec![1.0; scenario.loads.len()];
    let mut excess: f64 = demand_row.iter().sum::<f64>() - supply;
    let w_hat = scenario.normalized_weights();
    let mut order: Vec<usize> = (0..scenario.loads.len()).collect();
    order.sort_by(|&a, &b| w_hat[a].total_cmp(&w_hat[b]).then(a.cmp(&b)));
    for i in order {
        if excess <= 0.0 {
            break;
        }
        let d = demand_row[i];
        if d <= 0.0 {
            continue;
        }
        let cut = match scenario.loads[i].step_size() {
            None => (excess / d).min(1.0),
            Some(step) => ((excess / d / step - 1e-12).ceil() * step).min(1.0),
        };
        served[i] = 1.0 - cut;
        if let Some(step) = scenario.loads[i].step_size() {
            served[i] = ((served[i] / step).round() * step).max(0.0);
        }
        excess -= cut * d;
    }
    StepDispatch {
        served,
        storage_power,
        generator_power,
        soc: state.soc.clone(),
    }
}

/// Weighted fraction of commanded load served over the mission.
pub fn operability(steps: &[StepDispatch], scenario: &ScenarioSpec) -> Result<f64, HorizonError> {
    let w_hat = scenario.normalized_weights();
    let per_step: f64 = w_hat.iter().sum();
    let den = per_step * steps.len() as f64;
    if den == 0.0 {
        return Err(HorizonError::ZeroDenominator);
    }
    let num: f64 = steps
        .iter()
        .map(|s| w_hat.iter().zip(&s.served).map(|(w, o)| w * o).sum::<f64>())
        .sum();
    Ok(num / den)
}

/// Relative loss of weighted service of `rho` against `fho`.
pub fn compare_f1(fho: &MissionResult, rho: &MissionResult) -> Result<f64, HorizonError> {
    if fho.terms.f1 == 0.0 {
        return Err(HorizonError::ZeroDenominator);
    }
    Ok((fho.terms.f1 - rho.terms.f1) / fho.terms.f1)
}
