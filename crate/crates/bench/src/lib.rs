//! Fixtures shared by the benchmarks.

use shipems::io::{synth_scenario, SynthSizes};
use shipems::lp::LpBasis;
use shipems::milp::{solve_milp_warm, SolverConfig};
use shipems::model::{
    build_window_milp, decode_plan, soc_step, ScenarioSpec, SystemState, WindowLayout, WindowModel,
};

/// The default 240-step synthetic mission.
pub fn desk_scenario(seed: u64) -> ScenarioSpec {
    synth_scenario(seed, SynthSizes::default())
}

/// First window of `sc` with a 60-step horizon.
pub fn first_window(sc: &ScenarioSpec) -> WindowModel {
    build_window_milp(sc, &sc.initial_state(), &sc.weights, 60.min(sc.steps))
        .expect("window builds")
}

/// Advances a receding-horizon run to step `t` and returns the window there
/// together with the shifted warm-start basis.
pub fn window_at(sc: &ScenarioSpec, t: usize) -> (WindowModel, Option<LpBasis>) {
    let cfg = SolverConfig::default();
    let mut state: SystemState = sc.initial_state();
    let mut warm: Option<(WindowLayout, LpBasis)> = None;
    for _ in 0..t {
        let m = build_window_milp(sc, &state, &sc.weights, 60).expect("window builds");
        let b = warm.take().and_then(|(l, b)| m.layout.shift_basis(&l, &b));
        let s = solve_milp_warm(&m.problem, &cfg, b.as_ref()).expect("window solves");
        warm = s.root_basis.clone().map(|b| (m.layout.clone(), b));
        let plan = decode_plan(&s, &m.layout, sc, &state, &sc.weights).expect("plan decodes");
        let p = &plan.steps[0];
        for (e, u) in sc.storage.iter().enumerate() {
            state.soc[e] = soc_step(state.soc[e], p.storage_power[e], sc.dt, u.energy_capacity);
        }
        state.prev_storage_power = p.storage_power.clone();
        state.prev_generator_power = p.generator_power.clone();
        state.step_index += 1;
    }
    let m = build_window_milp(sc, &state, &sc.weights, 60).expect("window builds");
    let b = warm.and_then(|(l, b)| m.layout.shift_basis(&l, &b));
    (m, b)
}
