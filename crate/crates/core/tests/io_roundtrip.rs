use std::fs;

use proptest::prelude::*;
use shipems::horizon::{operability, run_rho, RhoConfig};
use shipems::io::{
    load_scenario, parse_scenario, save_scenario, synth_scenario, DemandSource, IoError, SynthSizes,
};
use shipems::model::{
    GeneratorSpec, LoadKind, LoadSpec, ObjectiveWeights, ScenarioSpec, StorageClass, StorageSpec,
};

fn arb_load(i: usize) -> impl Strategy<Value = LoadSpec> {
    (
        0.1f64..50.0,
        0.0f64..1.0,
        prop_oneof![Just(0u32), 1u32..5],
        "[a-z]{1,6}",
    )
        .prop_map(move |(rated, weight, steps, name)| LoadSpec {
            id: format!("L{i}"),
            name,
            rated_power: rated,
            weight,
            kind: if steps == 0 {
                LoadKind::Continuous
            } else {
                LoadKind::Stepped(steps)
            },
        })
}

fn arb_generator(g: usize) -> impl Strategy<Value = GeneratorSpec> {
    (
        0.0f64..5.0,
        1.0f64..30.0,
        0.1f64..3.0,
        0.1f64..3.0,
        0.0f64..1.0,
    )
        .prop_map(move |(p_min, span, down, up, frac)| GeneratorSpec {
            id: format!("G{g}"),
            p_min,
            p_max: p_min + span,
            ramp_min: -down,
            ramp_max: up,
            initial_power: p_min + frac * span,
        })
}

fn arb_storage(e: usize) -> impl Strategy<Value = StorageSpec> {
    (
        any::<bool>(),
        1.0f64..20.0,
        1.0f64..100.0,
        10.0f64..2000.0,
        0.0f64..0.4,
        0.5f64..1.0,
        0.0f64..1.0,
        -1.0f64..1.0,
        0.0f64..2.0,
    )
        .prop_map(
            move |(bat, p, ramp, cap, lo, hi, frac, pw, prio)| StorageSpec {
                id: format!("E{e}"),
                class: if bat {
                    StorageClass::Battery
                } else {
                    StorageClass::Supercapacitor
                },
                p_min: -p,
                p_max: p,
                ramp_min: -ramp,
                ramp_max: ramp,
                energy_capacity: cap,
                soc_min: lo,
                soc_max: hi,
                initial_soc: lo + frac * (hi - lo),
                initial_power: pw * p,
                terminal_priority: prio,
            },
        )
}

prop_compose! {
    fn arb_scenario()(
        n_l in 1usize..4,
        n_g in 1usize..3,
        n_e in 0usize..4,
        steps in 1usize..7,
    )(
        loads in (0..n_l).map(arb_load).collect::<Vec<_>>(),
        generators in (0..n_g).map(arb_generator).collect::<Vec<_>>(),
        storage in (0..n_e).map(arb_storage).collect::<Vec<_>>(),
        demand in prop::collection::vec(prop::collection::vec(0.0f64..60.0, n_l), steps),
        availability in prop::collection::vec(prop::collection::vec(any::<bool>(), steps), n_g),
        profile in prop::option::of(prop::collection::vec(0.0f64..1.0, n_l)),
        weights in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        dt in prop_oneof![Just(0.5), 0.05f64..2.0],
        horizon in 1usize..80,
        steps in Just(steps),
    ) -> ScenarioSpec {
        ScenarioSpec {
            name: "prop".into(),
            dt,
            steps,
            horizon,
            loads,
            generators,
            storage,
            demand,
            weight_profile: profile,
            availability,
            weights: ObjectiveWeights::new(weights.0, weights.1, weights.2).unwrap(),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn roundtrip_inline(spec in arb_scenario()) {
        prop_assert!(spec.validate().is_ok());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        save_scenario(&spec, &path, &DemandSource::Inline).unwrap();
        prop_assert_eq!(load_scenario(&path).unwrap(), spec);
    }

    #[test]
    fn roundtrip_table(spec in arb_scenario()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        let table = dir.path().join("s_demand.csv");
        save_scenario(&spec, &path, &DemandSource::Table(table)).unwrap();
        prop_assert_eq!(load_scenario(&path).unwrap(), spec);
    }
}

const HEAD: &str = r#"
name = "table"
[timing]
steps = 3
[[load]]
id = "A"
rated_power = 5.0
weight = 1.0
[[load]]
id = "B"
rated_power = 2.0
weight = 0.5
[[generator]]
id = "G"
p_min = 0.0
p_max = 10.0
ramp_min = -1.0
ramp_max = 1.0
"#;

fn with_table(csv: &str) -> Result<ScenarioSpec, IoError> {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), csv).unwrap();
    let path = dir.path().join("s.toml");
    fs::write(&path, format!("{HEAD}\n[demand]\nfile = \"d.csv\"\n")).unwrap();
    load_scenario(&path)
}

#[test]
fn demand_table_loads() {
    let sc = with_table("A,B\n1.0,2.0\n3.0,0.5\n0,0\n").unwrap();
    assert_eq!(
        sc.demand,
        vec![vec![1.0, 2.0], vec![3.0, 0.5], vec![0.0, 0.0]]
    );
    assert_eq!(sc.horizon, 3);
}

#[test]
fn demand_table_wrong_columns() {
    match with_table("A,B,C\n1,2,3\n1,2,3\n1,2,3\n") {
        Err(IoError::Dimension { table, .. }) => assert!(table.contains("d.csv"), "{table}"),
        other => panic!("expected dimension error, got {other:?}"),
    }
}

#[test]
fn demand_table_wrong_ids() {
    assert!(with_table("B,A\n1,2\n1,2\n1,2\n").is_err());
}

#[test]
fn demand_table_wrong_rows() {
    assert!(matches!(
        with_table("A,B\n1,2\n"),
        Err(IoError::Dimension { .. })
    ));
}

#[test]
fn missing_table_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HEAD}\n[demand]\nfile = \"absent.csv\"\n");
    assert!(matches!(
        parse_scenario(&text, "inline", dir.path()),
        Err(IoError::Io { .. })
    ));
}

#[test]
fn fleet_file_matches_reference_values() {
    let text = r#"
[timing]
steps = 2
[[load]]
id = "L"
rated_power = 1.0
weight = 1.0
[[generator]]
id = "G1"
p_min = 0.0
p_max = 20.0
ramp_min = -1.0
ramp_max = 1.0
[[storage]]
id = "BESS1"
class = "battery"
p_min = -10.0
p_max = 10.0
ramp_min = -5.0
ramp_max = 5.0
energy_capacity = 1000.0
initial_soc = 0.5
[[storage]]
id = "BESS2"
class = "battery"
p_min = -10.0
p_max = 10.0
ramp_min = -5.0
ramp_max = 5.0
energy_capacity = 1000.0
initial_soc = 0.5
[[storage]]
id = "SCESS1"
class = "supercapacitor"
p_min = -10.0
p_max = 10.0
ramp_min = -100.0
ramp_max = 100.0
energy_capacity = 200.0
initial_soc = 0.5
[[storage]]
id = "SCESS2"
class = "supercapacitor"
p_min = -10.0
p_max = 10.0
ramp_min = -100.0
ramp_max = 100.0
energy_capacity = 200.0
initial_soc = 0.5
[demand]
rows = [[1.0], [1.0]]
"#;
    let sc = parse_scenario(text, "fleet", std::path::Path::new(".")).unwrap();
    assert_eq!(sc.storage.len(), 4);
    for s in &sc.storage[..2] {
        assert_eq!(s.class, StorageClass::Battery);
        assert_eq!((s.p_min, s.p_max), (-10.0, 10.0));
        assert_eq!((s.ramp_min, s.ramp_max), (-5.0, 5.0));
        assert_eq!(s.energy_capacity, 1000.0);
        assert_eq!(s.soc_max, 0.8);
    }
    for s in &sc.storage[2..] {
        assert_eq!(s.class, StorageClass::Supercapacitor);
        assert_eq!((s.ramp_min, s.ramp_max), (-100.0, 100.0));
        assert_eq!(s.energy_capacity, 200.0);
        assert!(s.terminal_priority > sc.storage[0].terminal_priority);
    }
    assert_eq!(sc.generators[0].ramp_max, 1.0);
}

#[test]
fn synth_files_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("s{k}.toml"));
        let table = dir.path().join(format!("s{k}_demand.csv"));
        let sc = synth_scenario(11, SynthSizes::default());
        save_scenario(&sc, &path, &DemandSource::Table(table.clone())).unwrap();
        let toml = fs::read_to_string(&path)
            .unwrap()
            .replace(&format!("s{k}_demand.csv"), "T");
        bytes.push((toml, fs::read(&table).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn synth_shape() {
    let sc = synth_scenario(
        5,
        SynthSizes {
            loads: 8,
            generators: 2,
            storage: 4,
            steps: 30,
        },
    );
    assert!(sc.demand.iter().all(|r| r.len() == 8));
    assert_eq!(sc.generators.len(), 2);
    // High-ramp loads carry the largest weights.
    let max_w = sc.loads.iter().map(|l| l.weight).fold(0.0, f64::max);
    assert_eq!(sc.loads[0].weight, max_w);
}

#[test]
fn synth_forces_shedding() {
    let sc = synth_scenario(
        3,
        SynthSizes {
            steps: 60,
            ..SynthSizes::default()
        },
    );
    // Peak demand in the shortfall exceeds everything that can be supplied.
    let supply = |t: usize| -> f64 {
        let gens: f64 = sc
            .generators
            .iter()
            .enumerate()
            .filter(|&(g, _)| sc.is_available(g, t))
            .map(|(_, g)| g.p_max)
            .sum();
        gens + sc.storage.iter().map(|s| s.p_max).sum::<f64>()
    };
    assert!((0..sc.steps).any(|t| sc.demand[t].iter().sum::<f64>() > supply(t)));
    let r = run_rho(&sc, &sc.weights, &RhoConfig::new(20)).unwrap();
    assert!(operability(&r.steps, &sc).unwrap() < 1.0);
}
