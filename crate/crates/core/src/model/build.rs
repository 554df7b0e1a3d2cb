use super::{LoadKind, ModelError, ObjectiveWeights, ScenarioSpec, SystemState};
use crate::lp::{BasisStatus, LinearProgram, LpBasis};
use crate::milp::MilpProblem;

/// Column and row indices of one window MILP.
///
/// Per step the columns are laid out as: load statuses, generator powers,
/// storage discharge, storage charge, storage SoC, pair imbalance. Storage
/// power is `discharge - charge`, so `discharge + charge` plays the role of
/// the throughput auxiliary.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLayout {
    pub start: usize,
    pub len: usize,
    n_loads: usize,
    n_gens: usize,
    n_storage: usize,
    pairs: Vec<(usize, usize)>,
}

impl WindowLayout {
    fn per_step(&self) -> usize {
        self.n_loads + self.n_gens + 3 * self.n_storage + self.pairs.len()
    }

    fn base(&self, t: usize) -> usize {
        debug_assert!(t < self.len);
        t * self.per_step()
    }

    pub fn load(&self, t: usize, i: usize) -> usize {
        self.base(t) + i
    }

    pub fn generator(&self, t: usize, g: usize) -> usize {
        self.base(t) + self.n_loads + g
    }

    pub fn discharge(&self, t: usize, e: usize) -> usize {
        self.base(t) + self.n_loads + self.n_gens + e
    }

    pub fn charge(&self, t: usize, e: usize) -> usize {
        self.discharge(t, e) + self.n_storage
    }

    pub fn soc(&self, t: usize, e: usize) -> usize {
        self.discharge(t, e) + 2 * self.n_storage
    }

    pub fn pair(&self, t: usize, k: usize) -> usize {
        self.base(t) + self.n_loads + self.n_gens + 3 * self.n_storage + k
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn num_columns(&self) -> usize {
        self.len * self.per_step()
    }

    /// Rows of step `t`: balance, generator ramps (not on the first step),
    /// storage ramps, SoC recursion, then two imbalance rows per pair.
    fn rows_in_step(&self, t: usize) -> usize {
        let base = 1 + 2 * self.n_storage + 2 * self.pairs.len();
        if t == 0 {
            base
        } else {
            base + self.n_gens
        }
    }

    fn step_row_start(&self, t: usize) -> usize {
        if t == 0 {
            0
        } else {
            self.rows_in_step(0) + (t - 1) * self.rows_in_step(1)
        }
    }

    pub fn balance_row(&self, t: usize) -> usize {
        self.step_row_start(t)
    }

    pub fn num_rows(&self) -> usize {
        self.step_row_start(self.len)
    }

    /// Carries a basis of the window starting one step earlier over to this
    /// window: every surviving variable keeps its status, variables of a
    /// newly added final step start nonbasic with their rows' logicals
    /// basic. The result always has one basic variable per row.
    pub fn shift_basis(&self, prev: &WindowLayout, basis: &LpBasis) -> Option<LpBasis> {
        let compatible = prev.start + 1 == self.start
            && prev.per_step() == self.per_step()
            && prev.n_gens == self.n_gens
            && basis.status.len() == prev.num_columns() + prev.num_rows()
            && basis.basic.len() == prev.num_rows()
            && (self.len == prev.len || self.len + 1 == prev.len);
        if !compatible {
            return None;
        }
        let nc = self.per_step();
        let (n, m) = (self.num_columns(), self.num_rows());
        let prev_n = prev.num_columns();
        let mut status = vec![BasisStatus::AtLower; n + m];
        for t in 0..self.len {
            let old = t + 1;
            let fresh = old >= prev.len;
            for k in 0..nc {
                if !fresh {
                    status[t * nc + k] = basis.status[old * nc + k];
                }
            }
            let (new_start, old_start) = (self.step_row_start(t), prev.step_row_start(old));
            for r in 0..self.rows_in_step(t) {
                // The first step has no generator ramp rows.
                let old_r = if t == 0 && r > 0 { r + self.n_gens } else { r };
                status[n + new_start + r] = if fresh {
                    BasisStatus::Basic
                } else {
                    basis.status[prev_n + old_start + old_r]
                };
            }
        }
        let mut basic: Vec<usize> = (0..n + m)
            .filter(|&j| status[j] == BasisStatus::Basic)
            .collect();
        // Too many: demote structurals, latest first.
        while basic.len() > m {
            let pos = basic.iter().rposition(|&j| j < n)?;
            status[basic.remove(pos)] = BasisStatus::AtLower;
        }
        // Too few: promote logicals, latest rows first.
        let mut r = m;
        while basic.len() < m && r > 0 {
            r -= 1;
            if status[n + r] != BasisStatus::Basic {
                status[n + r] = BasisStatus::Basic;
                basic.push(n + r);
            }
        }
        basic.sort_unstable();
        Some(LpBasis { basic, status })
    }
}

#[derive(Debug, Clone)]
pub struct WindowModel {
    pub problem: MilpProblem,
    pub layout: WindowLayout,
}

/// Builds the MILP for the window of `horizon` steps starting at
/// `state.step_index`, clipped at the mission end.
pub fn build_window_milp(
    scenario: &ScenarioSpec,
    state: &SystemState,
    weights: &ObjectiveWeights,
    horizon: usize,
) -> Result<WindowModel, ModelError> {
    if horizon == 0 {
        return Err(ModelError::EmptyHorizon(horizon));
    }
    let start = state.step_index;
    if start >= scenario.steps {
        return Err(ModelError::PastMissionEnd {
            step: start,
            steps: scenario.steps,
        });
    }
    state.check_shape(scenario)?;
    weights.validate()?;

    let len = horizon.min(scenario.steps - start);
    let layout = WindowLayout {
        start,
        len,
        n_loads: scenario.loads.len(),
        n_gens: scenario.generators.len(),
        n_storage: scenario.storage.len(),
        pairs: scenario.storage_pairs(),
    };
    let dt = scenario.dt;
    let w_hat = scenario.normalized_weights();
    let mut lp = LinearProgram::new();
    let mut integrality = Vec::new();

    for t in 0..len {
        let abs = start + t;
        for (i, load) in scenario.loads.iter().enumerate() {
            let (obj, up, int) = match load.kind {
                LoadKind::Continuous => (w_hat[i], 1.0, false),
                LoadKind::Stepped(n) => (w_hat[i] / n as f64, n as f64, true),
            };
            let c = lp.add_variable(obj, 0.0, up);
            debug_assert_eq!(c, layout.load(t, i));
            integrality.push(int);
        }
        for (g, gen) in scenario.generators.iter().enumerate() {
            let (mut lo, mut up) = if scenario.is_available(g, abs) {
                (gen.p_min, gen.p_max)
            } else {
                (0.0, 0.0)
            };
            if t == 0 && ramp_applies(scenario, g, abs) {
                let prev = state.prev_generator_power[g];
                lo = lo.max(prev + gen.ramp_min * dt);
                up = up.min(prev + gen.ramp_max * dt);
                if lo > up {
                    return Err(ModelError::InconsistentRamp {
                        id: gen.id.clone(),
                        prev,
                    });
                }
            }
            lp.add_variable(0.0, lo, up);
            integrality.push(false);
        }
        for s in &scenario.storage {
            lp.add_variable(-weights.omega1, 0.0, s.p_max);
            integrality.push(false);
        }
        for s in &scenario.storage {
            lp.add_variable(-weights.omega1, 0.0, -s.p_min);
            integrality.push(false);
        }
        for s in &scenario.storage {
            let obj = if t + 1 == len {
                weights.omega3 * s.terminal_priority
            } else {
                0.0
            };
            lp.add_variable(obj, s.soc_min, s.soc_max);
            integrality.push(false);
        }
        for &(l, m) in &layout.pairs {
            let cap = scenario.storage[l].soc_max.max(scenario.storage[m].soc_max);
            lp.add_variable(-weights.omega2, 0.0, cap);
            integrality.push(false);
        }
    }

    for t in 0..len {
        let abs = start + t;
        debug_assert_eq!(lp.num_rows(), layout.balance_row(t));
        // Demand minus supply must not be positive.
        let mut terms = Vec::new();
        for (i, load) in scenario.loads.iter().enumerate() {
            let d = scenario.demand[abs][i];
            let coef = match load.kind {
                LoadKind::Continuous => d,
                LoadKind::Stepped(n) => d / n as f64,
            };
            if coef != 0.0 {
                terms.push((layout.load(t, i), coef));
            }
        }
        for e in 0..scenario.storage.len() {
            terms.push((layout.discharge(t, e), -1.0));
            terms.push((layout.charge(t, e), 1.0));
        }
        for g in 0..scenario.generators.len() {
            terms.push((layout.generator(t, g), -1.0));
        }
        lp.add_le(terms, 0.0);

        // After the first step (whose ramp is folded into the bounds) every
        // step carries one ramp row per generator, so consecutive windows
        // share a row layout; rows that do not apply are left free.
        for (g, gen) in scenario.generators.iter().enumerate() {
            if t == 0 {
                break;
            }
            if ramp_applies(scenario, g, abs) {
                lp.add_range(
                    vec![
                        (layout.generator(t, g), 1.0),
                        (layout.generator(t - 1, g), -1.0),
                    ],
                    gen.ramp_min * dt,
                    gen.ramp_max * dt,
                );
            } else {
                lp.add_range(
                    vec![(layout.generator(t, g), 1.0)],
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                );
            }
        }

        for (e, s) in scenario.storage.iter().enumerate() {
            let mut terms = vec![(layout.discharge(t, e), 1.0), (layout.charge(t, e), -1.0)];
            let offset = if t == 0 {
                state.prev_storage_power[e]
            } else {
                terms.push((layout.discharge(t - 1, e), -1.0));
                terms.push((layout.charge(t - 1, e), 1.0));
                0.0
            };
            lp.add_range(terms, offset + s.ramp_min * dt, offset + s.ramp_max * dt);
        }

        for (e, s) in scenario.storage.iter().enumerate() {
            let k = dt / s.energy_capacity;
            let mut terms = vec![
                (layout.soc(t, e), 1.0),
                (layout.discharge(t, e), k),
                (layout.charge(t, e), -k),
            ];
            let rhs = if t == 0 {
                state.soc[e]
            } else {
                terms.push((layout.soc(t - 1, e), -1.0));
                0.0
            };
            lp.add_eq(terms, rhs);
        }

        for (k, &(l, m)) in layout.pairs.iter().enumerate() {
            let u = layout.pair(t, k);
            let (sl, sm) = (layout.soc(t, l), layout.soc(t, m));
            lp.add_ge(vec![(u, 1.0), (sl, -1.0), (sm, 1.0)], 0.0);
            lp.add_ge(vec![(u, 1.0), (sl, 1.0), (sm, -1.0)], 0.0);
        }
    }

    debug_assert_eq!(lp.num_rows(), layout.num_rows());
    debug_assert_eq!(lp.num_vars(), layout.num_columns());
    let problem = MilpProblem::new(lp, integrality)
        .map_err(|e| ModelError::DecodeMismatch(format!("layout bug: {e}")))?;
    Ok(WindowModel { problem, layout })
}

/// Whether generator `g` is ramp-limited between step `t - 1` and `t`.
/// Steps adjacent to a trip are exempt; step 0 ramps from the initial power.
pub(crate) fn ramp_applies(scenario: &ScenarioSpec, g: usize, t: usize) -> bool {
    scenario.is_available(g, t) && (t == 0 || scenario.is_available(g, t - 1))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::milp::{solve_milp, MilpStatus, SolverConfig};
    use crate::model::{GeneratorSpec, LoadSpec, StorageClass, StorageSpec};

    pub(crate) fn tiny(n_storage: usize, steps: usize) -> ScenarioSpec {
        ScenarioSpec {
            name: "tiny".into(),
            dt: 0.5,
            steps,
            horizon: steps,
            loads: vec![LoadSpec {
                id: "L1".into(),
                name: "pump".into(),
                rated_power: 5.0,
                weight: 1.0,
                kind: LoadKind::Continuous,
            }],
            generators: vec![GeneratorSpec {
                id: "G1".into(),
                p_min: 0.0,
                p_max: 10.0,
                ramp_min: -2.0,
                ramp_max: 2.0,
                initial_power: 4.0,
            }],
            storage: (0..n_storage)
                .map(|e| StorageSpec {
                    id: format!("S{e}"),
                    class: StorageClass::Battery,
                    p_min: -5.0,
                    p_max: 5.0,
                    ramp_min: -10.0,
                    ramp_max: 10.0,
                    energy_capacity: 100.0,
                    soc_min: 0.1,
                    soc_max: 0.8,
                    initial_soc: 0.5,
                    initial_power: 0.0,
                    terminal_priority: 0.5,
                })
                .collect(),
            demand: vec![vec![4.0]; steps],
            weight_profile: None,
            availability: vec![vec![true; steps]],
            weights: ObjectiveWeights::ZERO,
        }
    }

    #[test]
    fn minimal_instance_shape() {
        let sc = tiny(0, 1);
        let w = build_window_milp(&sc, &sc.initial_state(), &ObjectiveWeights::ZERO, 1).unwrap();
        assert_eq!(w.problem.lp.num_vars(), 2);
        assert_eq!(w.problem.lp.num_rows(), 1);
    }

    #[test]
    fn pair_counts() {
        let sc = tiny(2, 1);
        let w = build_window_milp(&sc, &sc.initial_state(), &ObjectiveWeights::ZERO, 1).unwrap();
        assert_eq!(w.layout.pairs().len(), 1);

        let sc = tiny(4, 3);
        let w = build_window_milp(&sc, &sc.initial_state(), &ObjectiveWeights::ZERO, 3).unwrap();
        assert_eq!(w.layout.pairs().len(), 6);
        let pair_cols: std::collections::HashSet<_> = (0..3)
            .flat_map(|t| (0..6).map(move |k| (t, k)))
            .map(|(t, k)| w.layout.pair(t, k))
            .collect();
        assert_eq!(pair_cols.len(), 18);
    }

    #[test]
    fn window_clips_at_mission_end() {
        let sc = tiny(1, 5);
        let mut st = sc.initial_state();
        st.step_index = 3;
        let w = build_window_milp(&sc, &st, &ObjectiveWeights::ZERO, 60).unwrap();
        assert_eq!(w.layout.len, 2);
        st.step_index = 5;
        assert!(build_window_milp(&sc, &st, &ObjectiveWeights::ZERO, 60).is_err());
        assert!(build_window_milp(&sc, &sc.initial_state(), &ObjectiveWeights::ZERO, 0).is_err());
    }

    #[test]
    fn tripped_generator_is_pinned_to_zero() {
        let mut sc = tiny(0, 4);
        sc.generators[0].initial_power = 0.0;
        sc.availability[0][2] = false;
        sc.availability[0][3] = false;
        let w = build_window_milp(&sc, &sc.initial_state(), &ObjectiveWeights::ZERO, 4).unwrap();
        let sol = solve_milp(&w.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        for t in 2..4 {
            assert_eq!(sol.x[w.layout.generator(t, 0)], 0.0);
            assert_eq!(sol.x[w.layout.load(t, 0)], 0.0);
        }
    }

    #[test]
    fn first_step_ramp_uses_previous_power() {
        let sc = tiny(0, 1);
        let mut st = sc.initial_state();
        st.prev_generator_power[0] = 0.0;
        let w = build_window_milp(&sc, &st, &ObjectiveWeights::ZERO, 1).unwrap();
        let g = w.layout.generator(0, 0);
        assert_eq!(w.problem.lp.upper()[g], 1.0);
        st.prev_generator_power[0] = 30.0;
        assert!(matches!(
            build_window_milp(&sc, &st, &ObjectiveWeights::ZERO, 1),
            Err(ModelError::InconsistentRamp { .. })
        ));
    }
}
