use std::fmt;

use super::build::ramp_applies;
use super::{soc_step, LoadKind, ScenarioSpec, StepDispatch, SystemState};

const BALANCE_TOL: f64 = 1e-9;
const BOX_TOL: f64 = 1e-9;
const SOC_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Shape,
    LoadStatus,
    Balance,
    GeneratorLimit,
    GeneratorRamp,
    StorageLimit,
    StorageRamp,
    SocLimit,
    SocRecursion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Absolute step index.
    pub step: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {:?}: {}", self.step, self.kind, self.detail)
    }
}

/// Checks applied steps against every physical constraint, independently of
/// how they were produced. `steps[k]` is step `initial.step_index + k`.
pub fn check_trajectory(
    scenario: &ScenarioSpec,
    initial: &SystemState,
    steps: &[StepDispatch],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let dt = scenario.dt;
    let mut soc = initial.soc.clone();
    let mut prev_s = initial.prev_storage_power.clone();
    let mut prev_g = initial.prev_generator_power.clone();
    let (n_l, n_g, n_e) = (
        scenario.loads.len(),
        scenario.generators.len(),
        scenario.storage.len(),
    );

    for (k, s) in steps.iter().enumerate() {
        let t = initial.step_index + k;
        let mut push = |kind, detail: String| {
            out.push(Violation {
                step: t,
                kind,
                detail,
            })
        };
        if t >= scenario.steps
            || s.served.len() != n_l
            || s.generator_power.len() != n_g
            || s.storage_power.len() != n_e
            || s.soc.len() != n_e
        {
            push(
                ViolationKind::Shape,
                "step record has wrong dimensions".into(),
            );
            return out;
        }

        let mut demand = 0.0;
        for (i, load) in scenario.loads.iter().enumerate() {
            let o = s.served[i];
            if !(-BOX_TOL..=1.0 + BOX_TOL).contains(&o) {
                push(ViolationKind::LoadStatus, format!("{} served {o}", load.id));
            }
            if let LoadKind::Stepped(n) = load.kind {
                let level = o * n as f64;
                if (level - level.round()).abs() > 1e-9 {
                    push(
                        ViolationKind::LoadStatus,
                        format!("{} served {o} is not a multiple of 1/{n}", load.id),
                    );
                }
            }
            demand += scenario.demand[t][i] * o;
        }
        let supply: f64 =
            s.generator_power.iter().sum::<f64>() + s.storage_power.iter().sum::<f64>();
        let scale = demand.abs().max(supply.abs()).max(1.0);
        if demand - supply > BALANCE_TOL * scale {
            push(
                ViolationKind::Balance,
                format!("demand {demand} exceeds supply {supply}"),
            );
        }

        for (g, gen) in scenario.generators.iter().enumerate() {
            let p = s.generator_power[g];
            let (lo, up) = if scenario.is_available(g, t) {
                (gen.p_min, gen.p_max)
            } else {
                (0.0, 0.0)
            };
            if p < lo - BOX_TOL || p > up + BOX_TOL {
                push(
                    ViolationKind::GeneratorLimit,
                    format!("{} at {p} outside [{lo}, {up}]", gen.id),
                );
            }
            if ramp_applies(scenario, g, t) {
                let d = p - prev_g[g];
                if d < gen.ramp_min * dt - BOX_TOL || d > gen.ramp_max * dt + BOX_TOL {
                    push(
                        ViolationKind::GeneratorRamp,
                        format!("{} moved {d} MW in one step", gen.id),
                    );
                }
            }
            prev_g[g] = p;
        }

        for (e, st) in scenario.storage.iter().enumerate() {
            let p = s.storage_power[e];
            if p < st.p_min - BOX_TOL || p > st.p_max + BOX_TOL {
                push(
                    ViolationKind::StorageLimit,
                    format!("{} at {p} outside [{}, {}]", st.id, st.p_min, st.p_max),
                );
            }
            let d = p - prev_s[e];
            if d < st.ramp_min * dt - BOX_TOL || d > st.ramp_max * dt + BOX_TOL {
                push(
                    ViolationKind::StorageRamp,
                    format!("{} moved {d} MW in one step", st.id),
                );
            }
            prev_s[e] = p;
            soc[e] = soc_step(soc[e], p, dt, st.energy_capacity);
            if (soc[e] - s.soc[e]).abs() > SOC_TOL {
                push(
                    ViolationKind::SocRecursion,
                    format!(
                        "{} recorded SoC {} but kinematics give {}",
                        st.id, s.soc[e], soc[e]
                    ),
                );
            }
            if s.soc[e] < st.soc_min - BOX_TOL || s.soc[e] > st.soc_max + BOX_TOL {
                push(
                    ViolationKind::SocLimit,
                    format!(
                        "{} SoC {} outside [{}, {}]",
                        st.id, s.soc[e], st.soc_min, st.soc_max
                    ),
                );
            }
            soc[e] = s.soc[e];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build::tests::tiny;

    fn idle(sc: &ScenarioSpec) -> StepDispatch {
        StepDispatch {
            served: vec![1.0],
            storage_power: vec![0.0; sc.storage.len()],
            generator_power: vec![4.0],
            soc: vec![0.5; sc.storage.len()],
        }
    }

    #[test]
    fn clean_trajectory_passes() {
        let sc = tiny(1, 3);
        let steps = vec![idle(&sc); 3];
        assert!(check_trajectory(&sc, &sc.initial_state(), &steps).is_empty());
    }

    #[test]
    fn each_violation_is_reported() {
        let sc = tiny(1, 3);
        let init = sc.initial_state();

        let mut s = idle(&sc);
        s.generator_power[0] = 3.0;
        let v = check_trajectory(&sc, &init, &[s]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Balance);

        let mut s = idle(&sc);
        s.generator_power[0] = 6.0;
        let v = check_trajectory(&sc, &init, &[s]);
        assert_eq!(v[0].kind, ViolationKind::GeneratorRamp);

        let mut s = idle(&sc);
        s.storage_power[0] = 1.0;
        s.generator_power[0] = 3.0;
        let v = check_trajectory(&sc, &init, &[s]);
        assert_eq!(v[0].kind, ViolationKind::SocRecursion);

        let mut s = idle(&sc);
        s.served[0] = 1.5;
        s.generator_power[0] = 5.0;
        let v = check_trajectory(&sc, &init, &[s]);
        assert_eq!(v[0].kind, ViolationKind::LoadStatus);
    }

    #[test]
    fn trip_exempts_ramp_but_pins_power() {
        let mut sc = tiny(0, 3);
        sc.availability[0][1] = false;
        let mut steps = vec![idle(&sc); 3];
        steps[1].generator_power[0] = 0.0;
        steps[1].served[0] = 0.0;
        let v = check_trajectory(&sc, &sc.initial_state(), &steps);
        assert!(v.is_empty(), "{v:?}");
        steps[1].generator_power[0] = 4.0;
        let v = check_trajectory(&sc, &sc.initial_state(), &steps);
        assert_eq!(v[0].kind, ViolationKind::GeneratorLimit);
    }
}
