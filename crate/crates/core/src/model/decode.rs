use super::{
    soc_step, DispatchPlan, LoadKind, ModelError, ObjectiveTerms, ObjectiveWeights, ScenarioSpec,
    StepDispatch, SystemState, WindowLayout,
};
use crate::milp::{MilpSolution, MilpStatus};

const SOC_TOL: f64 = 1e-7;
const OBJECTIVE_TOL: f64 = 1e-6;

/// Turns a window solution into physical decisions and cross-checks it.
pub fn decode_plan(
    sol: &MilpSolution,
    layout: &WindowLayout,
    scenario: &ScenarioSpec,
    state: &SystemState,
    weights: &ObjectiveWeights,
) -> Result<DispatchPlan, ModelError> {
    if !sol.has_incumbent() || sol.status == MilpStatus::Infeasible {
        return Err(ModelError::DecodeMismatch(format!(
            "no solution to decode (status {:?})",
            sol.status
        )));
    }
    if sol.x.len() != layout.num_columns() {
        return Err(ModelError::DecodeMismatch(format!(
            "solution has {} entries, layout expects {}",
            sol.x.len(),
            layout.num_columns()
        )));
    }
    let x = &sol.x;
    let mut soc = state.soc.clone();
    let mut steps = Vec::with_capacity(layout.len);
    for t in 0..layout.len {
        let served = scenario
            .loads
            .iter()
            .enumerate()
            .map(|(i, load)| {
                let v = x[layout.load(t, i)];
                match load.kind {
                    LoadKind::Continuous => v.clamp(0.0, 1.0),
                    LoadKind::Stepped(n) => (v.round() / n as f64).clamp(0.0, 1.0),
                }
            })
            .collect();
        let storage_power: Vec<f64> = (0..scenario.storage.len())
            .map(|e| x[layout.discharge(t, e)] - x[layout.charge(t, e)])
            .collect();
        let generator_power = (0..scenario.generators.len())
            .map(|g| x[layout.generator(t, g)])
            .collect();
        for (e, s) in scenario.storage.iter().enumerate() {
            soc[e] = soc_step(soc[e], storage_power[e], scenario.dt, s.energy_capacity);
            let internal = x[layout.soc(t, e)];
            if (soc[e] - internal).abs() > SOC_TOL {
                return Err(ModelError::DecodeMismatch(format!(
                    "storage {} step {}: recomputed SoC {} vs solver {}",
                    s.id,
                    layout.start + t,
                    soc[e],
                    internal
                )));
            }
        }
        steps.push(StepDispatch {
            served,
            storage_power,
            generator_power,
            soc: soc.clone(),
        });
    }
    let terms = ObjectiveTerms::of_trajectory(scenario, &steps);
    let recombined = terms.combine(weights);
    let tol = OBJECTIVE_TOL * sol.objective_value.abs().max(1.0);
    if (recombined - sol.objective_value).abs() > tol {
        return Err(ModelError::DecodeMismatch(format!(
            "recombined objective {recombined} vs solver {}",
            sol.objective_value
        )));
    }
    Ok(DispatchPlan {
        start: layout.start,
        steps,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_milp, SolverConfig};
    use crate::model::build::tests::tiny;
    use crate::model::build_window_milp;

    fn plan(sc: &ScenarioSpec, w: &ObjectiveWeights) -> DispatchPlan {
        let st = sc.initial_state();
        let m = build_window_milp(sc, &st, w, sc.steps).unwrap();
        let sol = solve_milp(&m.problem, &SolverConfig::default()).unwrap();
        decode_plan(&sol, &m.layout, sc, &st, w).unwrap()
    }

    #[test]
    fn ample_generation_serves_everything() {
        let sc = tiny(0, 3);
        let p = plan(&sc, &ObjectiveWeights::ZERO);
        assert!(p.steps.iter().all(|s| s.served == vec![1.0]));
        assert_eq!(p.terms.f2, 0.0);
        assert_eq!(p.terms.f3, 0.0);
        assert_eq!(p.terms.f1, 15.0);
    }

    #[test]
    fn stepped_load_decodes_fraction() {
        let mut sc = tiny(0, 1);
        sc.loads[0].kind = LoadKind::Stepped(4);
        sc.generators[0].p_max = 2.2;
        sc.generators[0].initial_power = 2.0;
        let p = plan(&sc, &ObjectiveWeights::ZERO);
        assert_eq!(p.steps[0].served, vec![0.5]);
    }

    #[test]
    fn storage_soc_is_consistent() {
        let mut sc = tiny(2, 4);
        sc.generators[0].p_max = 2.0;
        sc.generators[0].initial_power = 2.0;
        let w = ObjectiveWeights::new(0.01, 0.05, 0.1).unwrap();
        let p = plan(&sc, &w);
        for s in &p.steps {
            assert!(s.served[0] > 0.99);
        }
        assert!(p.terms.f2 > 0.0);
        assert!(p.steps.last().unwrap().soc.iter().all(|&v| v < 0.5));
    }

    #[test]
    fn tampered_solution_is_rejected() {
        let sc = tiny(1, 2);
        let st = sc.initial_state();
        let w = ObjectiveWeights::ZERO;
        let m = build_window_milp(&sc, &st, &w, 2).unwrap();
        let mut sol = solve_milp(&m.problem, &SolverConfig::default()).unwrap();
        sol.objective_value += 1.0;
        assert!(matches!(
            decode_plan(&sol, &m.layout, &sc, &st, &w),
            Err(ModelError::DecodeMismatch(_))
        ));
        sol.objective_value -= 1.0;
        sol.x[m.layout.soc(1, 0)] += 0.01;
        assert!(decode_plan(&sol, &m.layout, &sc, &st, &w).is_err());
    }
}
