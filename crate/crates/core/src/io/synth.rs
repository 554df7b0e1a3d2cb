use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    GeneratorSpec, LoadKind, LoadSpec, ObjectiveWeights, ScenarioSpec, StorageClass, StorageSpec,
    DEFAULT_SOC_MAX, DEFAULT_SOC_MIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSizes {
    pub loads: usize,
    pub generators: usize,
    pub storage: usize,
    pub steps: usize,
}

impl Default for SynthSizes {
    fn default() -> Self {
        SynthSizes {
            loads: 8,
            generators: 3,
            storage: 4,
            steps: 240,
        }
    }
}

/// Deterministic desk-scale mission.
///
/// The first quarter of the loads form a pulsed high-ramp block carrying the
/// largest weights; every third remaining load is stepped. The largest
/// generator trips for the middle third of the mission, and the pulses
/// during the trip exceed what the remaining generation plus full storage
/// discharge can supply. Storage units
/// alternate between battery (10 MW, 1000 MJ, 5 MW/s) and supercapacitor
/// (10 MW, 200 MJ, 100 MW/s); generators ramp at 1 MW/s.
pub fn synth_scenario(seed: u64, sizes: SynthSizes) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let SynthSizes {
        loads: n_l,
        generators: n_g,
        storage: n_e,
        steps,
    } = sizes;
    let n_l = n_l.max(1);
    let n_g = n_g.max(1);
    let steps = steps.max(1);
    let dt = 0.5;

    let generators: Vec<GeneratorSpec> = (0..n_g)
        .map(|g| GeneratorSpec {
            id: format!("G{}", g + 1),
            p_min: 0.0,
            p_max: round2(15.0 * rng.gen_range(0.8..1.2)),
            ramp_min: -1.0,
            ramp_max: 1.0,
            initial_power: 0.0,
        })
        .collect();
    let capacity: f64 = generators.iter().map(|g| g.p_max).sum();
    let largest = (0..n_g)
        .max_by(|&a, &b| {
            generators[a]
                .p_max
                .total_cmp(&generators[b].p_max)
                .then(b.cmp(&a))
        })
        .unwrap_or(0);

    let storage: Vec<StorageSpec> = (0..n_e)
        .map(|e| {
            let class = if e % 2 == 0 {
                StorageClass::Battery
            } else {
                StorageClass::Supercapacitor
            };
            let (ramp, energy, prefix) = match class {
                StorageClass::Battery => (5.0, 1000.0, "BESS"),
                StorageClass::Supercapacitor => (100.0, 200.0, "SCESS"),
            };
            StorageSpec {
                id: format!("{prefix}{}", e / 2 + 1),
                class,
                p_min: -10.0,
                p_max: 10.0,
                ramp_min: -ramp,
                ramp_max: ramp,
                energy_capacity: energy,
                soc_min: DEFAULT_SOC_MIN,
                soc_max: DEFAULT_SOC_MAX,
                initial_soc: round2(rng.gen_range(0.45..0.7)),
                initial_power: 0.0,
                terminal_priority: class.default_priority(),
            }
        })
        .collect();
    let storage_power: f64 = storage.iter().map(|s| s.p_max).sum();

    let n_hrrl = n_l.div_ceil(4);
    let base_total = 0.7 * capacity;
    let trip_supply = capacity - generators[largest].p_max + storage_power;
    // Sized against the base-load floor so every synchronized pulse during
    // the trip overshoots the available supply.
    let hrrl_total = (1.1 * trip_supply - 0.5 * base_total).max(0.2 * capacity);

    let mut loads = Vec::with_capacity(n_l);
    let base_shares: Vec<f64> = (n_hrrl..n_l).map(|_| rng.gen_range(0.5..1.5)).collect();
    let share_sum: f64 = base_shares.iter().sum();
    for i in 0..n_l {
        let hrrl = i < n_hrrl;
        let rated = if hrrl {
            round2(hrrl_total / n_hrrl as f64)
        } else {
            round2(base_total * base_shares[i - n_hrrl] / share_sum.max(1e-9)).max(0.1)
        };
        let stepped = !hrrl && (i - n_hrrl) % 3 == 2;
        // Stepped loads rank just below the high-ramp block, so shortfalls
        // are absorbed by the continuous loads first.
        let weight = if hrrl {
            1.0
        } else if stepped {
            round2(rng.gen_range(0.8..0.95))
        } else {
            round2(rng.gen_range(0.1..0.7))
        };
        let kind = if stepped {
            LoadKind::Stepped(if rng.gen_bool(0.5) { 2 } else { 4 })
        } else {
            LoadKind::Continuous
        };
        loads.push(LoadSpec {
            id: format!("L{}", i + 1),
            name: if hrrl {
                format!("hrrl{}", i + 1)
            } else {
                format!("load{}", i + 1)
            },
            rated_power: rated,
            weight,
            kind,
        });
    }

    let trip_start = steps * 7 / 20;
    let trip_end = (steps * 13 / 20).max(trip_start + 1).min(steps);
    let period = 40.min(steps).max(2);
    let pulse = (period / 4).max(1);
    let mut level: Vec<f64> = (n_hrrl..n_l).map(|_| rng.gen_range(0.7..0.9)).collect();
    let mut demand = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut row = Vec::with_capacity(n_l);
        for (i, load) in loads.iter().enumerate() {
            let v = if i < n_hrrl {
                let phase = (t + i * pulse / n_hrrl.max(1)) % period;
                if phase >= period - pulse || (trip_start..trip_end).contains(&t) && t % 2 == 0 {
                    load.rated_power
                } else {
                    0.1 * load.rated_power
                }
            } else {
                let k = i - n_hrrl;
                level[k] = (level[k] + rng.gen_range(-0.03..0.03)).clamp(0.5, 1.0);
                load.rated_power * level[k]
            };
            row.push(round2(v));
        }
        demand.push(row);
    }

    // Start generators at a level that covers the first step on their own.
    let first: f64 = demand[0].iter().sum();
    let mut generators = generators;
    for g in &mut generators {
        g.initial_power = round2((g.p_max * first / capacity).min(g.p_max));
    }

    let mut availability = vec![vec![true; steps]; n_g];
    availability[largest][trip_start..trip_end]
        .iter_mut()
        .for_each(|a| *a = false);

    ScenarioSpec {
        name: format!("synth-{seed}"),
        dt,
        steps,
        horizon: 60.min(steps),
        loads,
        generators,
        storage,
        demand,
        weight_profile: None,
        availability,
        weights: ObjectiveWeights::default(),
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}
