use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::model::{
    GeneratorSpec, LoadKind, LoadSpec, ObjectiveWeights, ScenarioSpec, StorageClass, StorageSpec,
    DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_MISSION_TIME, DEFAULT_SOC_MAX, DEFAULT_SOC_MIN,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    name: Option<String>,
    #[serde(default)]
    timing: Timing,
    weights: Option<ObjectiveWeights>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight_profile: Option<Vec<f64>>,
    #[serde(default, rename = "load")]
    loads: Vec<LoadDoc>,
    #[serde(default, rename = "generator")]
    generators: Vec<GeneratorDoc>,
    #[serde(default, rename = "storage")]
    storage: Vec<StorageDoc>,
    demand: DemandDoc,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Timing {
    dt: Option<f64>,
    /// Mission length in steps; derived from `mission_time` when absent.
    steps: Option<usize>,
    mission_time: Option<f64>,
    horizon: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadDoc {
    id: String,
    name: Option<String>,
    rated_power: f64,
    weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_count: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorDoc {
    id: String,
    p_min: f64,
    p_max: f64,
    ramp_min: f64,
    ramp_max: f64,
    initial_power: Option<f64>,
    /// Half-open step intervals `[start, end)` during which the unit is tripped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    outages: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StorageDoc {
    id: String,
    class: StorageClass,
    p_min: f64,
    p_max: f64,
    ramp_min: f64,
    ramp_max: f64,
    energy_capacity: f64,
    soc_min: Option<f64>,
    soc_max: Option<f64>,
    initial_soc: f64,
    initial_power: Option<f64>,
    terminal_priority: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<Vec<f64>>>,
}

/// Where [`save_scenario`] puts the demand matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DemandSource {
    Inline,
    /// CSV table written at this path, referenced relative to the scenario file.
    Table(PathBuf),
}

/// Reads and validates a scenario file. A demand table path is resolved
/// relative to the scenario file's directory.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, &path.display().to_string(), base)
}

/// Parses scenario text; `origin` only labels error messages.
pub fn parse_scenario(text: &str, origin: &str, base_dir: &Path) -> Result<ScenarioSpec, IoError> {
    let doc: FileDoc = toml::from_str(text).map_err(|e| IoError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;

    let dt = doc.timing.dt.unwrap_or(DEFAULT_DT);
    if !(dt.is_finite() && dt > 0.0) {
        return Err(schema("timing.dt", "must be positive"));
    }
    let steps = match doc.timing.steps {
        Some(n) => n,
        None => {
            let mission = doc.timing.mission_time.unwrap_or(DEFAULT_MISSION_TIME);
            if !(mission.is_finite() && mission > 0.0) {
                return Err(schema("timing.mission_time", "must be positive"));
            }
            (mission / dt).round() as usize
        }
    };

    let loads: Vec<LoadSpec> = doc
        .loads
        .into_iter()
        .map(|l| LoadSpec {
            name: l.name.unwrap_or_else(|| l.id.clone()),
            id: l.id,
            rated_power: l.rated_power,
            weight: l.weight,
            kind: match l.step_count {
                None => LoadKind::Continuous,
                Some(n) => LoadKind::Stepped(n),
            },
        })
        .collect();

    let mut availability = Vec::with_capacity(doc.generators.len());
    let mut generators = Vec::with_capacity(doc.generators.len());
    for (g, gd) in doc.generators.into_iter().enumerate() {
        let mut avail = vec![true; steps];
        for (k, &[a, b]) in gd.outages.iter().enumerate() {
            if a >= b || b > steps {
                return Err(schema(
                    format!("generator[{g}].outages[{k}]"),
                    format!("[{a}, {b}) is not a non-empty interval within {steps} steps"),
                ));
            }
            avail[a..b].iter_mut().for_each(|v| *v = false);
        }
        availability.push(avail);
        generators.push(GeneratorSpec {
            initial_power: gd.initial_power.unwrap_or(gd.p_min),
            id: gd.id,
            p_min: gd.p_min,
            p_max: gd.p_max,
            ramp_min: gd.ramp_min,
            ramp_max: gd.ramp_max,
        });
    }

    let storage = doc
        .storage
        .into_iter()
        .map(|s| StorageSpec {
            terminal_priority: s
                .terminal_priority
                .unwrap_or_else(|| s.class.default_priority()),
            id: s.id,
            class: s.class,
            p_min: s.p_min,
            p_max: s.p_max,
            ramp_min: s.ramp_min,
            ramp_max: s.ramp_max,
            energy_capacity: s.energy_capacity,
            soc_min: s.soc_min.unwrap_or(DEFAULT_SOC_MIN),
            soc_max: s.soc_max.unwrap_or(DEFAULT_SOC_MAX),
            initial_soc: s.initial_soc,
            initial_power: s.initial_power.unwrap_or(0.0),
        })
        .collect();

    let ids: Vec<&str> = loads.iter().map(|l| l.id.as_str()).collect();
    let demand = match (doc.demand.rows, doc.demand.file) {
        (Some(rows), None) => {
            check_matrix(&rows, steps, ids.len(), "demand.rows")?;
            rows
        }
        (None, Some(file)) => read_demand_table(&base_dir.join(&file), &file, &ids, steps)?,
        _ => {
            return Err(schema(
                "demand",
                "give exactly one of `rows` (inline) or `file` (CSV table)",
            ))
        }
    };

    let spec = ScenarioSpec {
        name: doc.name.unwrap_or_else(|| "scenario".into()),
        dt,
        steps,
        horizon: doc
            .timing
            .horizon
            .unwrap_or(DEFAULT_HORIZON.min(steps.max(1))),
        loads,
        generators,
        storage,
        demand,
        weight_profile: doc.weight_profile,
        availability,
        weights: doc.weights.unwrap_or_default(),
    };
    spec.validate()?;
    Ok(spec)
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn check_matrix(rows: &[Vec<f64>], steps: usize, cols: usize, table: &str) -> Result<(), IoError> {
    if rows.len() != steps {
        return Err(IoError::Dimension {
            table: table.into(),
            message: format!("{} rows, expected one per step ({steps})", rows.len()),
        });
    }
    if let Some((t, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(IoError::Dimension {
            table: table.into(),
            message: format!(
                "row {t} has {} columns, expected {cols} (one per load)",
                r.len()
            ),
        });
    }
    Ok(())
}

fn read_demand_table(
    path: &Path,
    label: &str,
    ids: &[&str],
    steps: usize,
) -> Result<Vec<Vec<f64>>, IoError> {
    let file = fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(label, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() != ids.len() {
        return Err(IoError::Dimension {
            table: label.into(),
            message: format!(
                "{} columns, expected {} (one per load)",
                header.len(),
                ids.len()
            ),
        });
    }
    if header.iter().zip(ids).any(|(h, id)| h != id) {
        return Err(IoError::Dimension {
            table: label.into(),
            message: format!("header {header:?} does not match load ids {ids:?}"),
        });
    }
    let mut rows = Vec::new();
    for (t, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IoError::Dimension {
            table: label.into(),
            message: e.to_string(),
        })?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.trim().parse::<f64>().map_err(|_| IoError::Parse {
                    path: label.into(),
                    message: format!("row {t}, column {}: {v:?} is not a number", ids[i]),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    check_matrix(&rows, steps, ids.len(), label)?;
    Ok(rows)
}

fn csv_error(label: &str, e: csv::Error) -> IoError {
    match e.kind() {
        csv::ErrorKind::Io(_) => IoError::Parse {
            path: label.into(),
            message: e.to_string(),
        },
        _ => IoError::Dimension {
            table: label.into(),
            message: e.to_string(),
        },
    }
}

fn to_doc(spec: &ScenarioSpec, demand_file: Option<String>) -> FileDoc {
    FileDoc {
        name: Some(spec.name.clone()),
        timing: Timing {
            dt: Some(spec.dt),
            steps: Some(spec.steps),
            mission_time: None,
            horizon: Some(spec.horizon),
        },
        weights: Some(spec.weights),
        weight_profile: spec.weight_profile.clone(),
        loads: spec
            .loads
            .iter()
            .map(|l| LoadDoc {
                id: l.id.clone(),
                name: Some(l.name.clone()),
                rated_power: l.rated_power,
                weight: l.weight,
                step_count: match l.kind {
                    LoadKind::Continuous => None,
                    LoadKind::Stepped(n) => Some(n),
                },
            })
            .collect(),
        generators: spec
            .generators
            .iter()
            .zip(&spec.availability)
            .map(|(g, avail)| GeneratorDoc {
                id: g.id.clone(),
                p_min: g.p_min,
                p_max: g.p_max,
                ramp_min: g.ramp_min,
                ramp_max: g.ramp_max,
                initial_power: Some(g.initial_power),
                outages: outages(avail),
            })
            .collect(),
        storage: spec
            .storage
            .iter()
            .map(|s| StorageDoc {
                id: s.id.clone(),
                class: s.class,
                p_min: s.p_min,
                p_max: s.p_max,
                ramp_min: s.ramp_min,
                ramp_max: s.ramp_max,
                energy_capacity: s.energy_capacity,
                soc_min: Some(s.soc_min),
                soc_max: Some(s.soc_max),
                initial_soc: s.initial_soc,
                initial_power: Some(s.initial_power),
                terminal_priority: Some(s.terminal_priority),
            })
            .collect(),
        demand: match demand_file {
            Some(f) => DemandDoc {
                file: Some(f),
                rows: None,
            },
            None => DemandDoc {
                file: None,
                rows: Some(spec.demand.clone()),
            },
        },
    }
}

fn outages(avail: &[bool]) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &a) in avail.iter().enumerate() {
        match (a, start) {
            (false, None) => start = Some(t),
            (true, Some(s)) => {
                out.push([s, t]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push([s, avail.len()]);
    }
    out
}

/// Serializes a scenario with an inline demand matrix.
pub fn scenario_to_toml(spec: &ScenarioSpec) -> Result<String, IoError> {
    toml::to_string(&to_doc(spec, None)).map_err(|e| IoError::Serialize(e.to_string()))
}

/// Writes `spec` to `path`, with the demand either inline or as a CSV table.
pub fn save_scenario(
    spec: &ScenarioSpec,
    path: &Path,
    demand: &DemandSource,
) -> Result<(), IoError> {
    let doc = match demand {
        DemandSource::Inline => to_doc(spec, None),
        DemandSource::Table(table) => {
            let file = fs::File::create(table).map_err(|e| IoError::io(table, e))?;
            let mut w = csv::Writer::from_writer(file);
            let ser = |e: csv::Error| IoError::Serialize(e.to_string());
            w.write_record(spec.loads.iter().map(|l| l.id.as_str()))
                .map_err(ser)?;
            for row in &spec.demand {
                w.write_record(row.iter().map(|v| v.to_string()))
                    .map_err(ser)?;
            }
            w.flush().map_err(|e| IoError::io(table, e))?;
            let rel = relative_to(table, path.parent().unwrap_or(Path::new(".")));
            to_doc(spec, Some(rel))
        }
    };
    let text = toml::to_string(&doc).map_err(|e| IoError::Serialize(e.to_string()))?;
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

fn relative_to(target: &Path, base: &Path) -> String {
    target
        .strip_prefix(base)
        .unwrap_or(target)
        .to_string_lossy()
        .into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[load]]
id = "L1"
rated_power = 5.0
weight = 1.0

[[generator]]
id = "G1"
p_min = 0.0
p_max = 10.0
ramp_min = -1.0
ramp_max = 1.0

[demand]
rows = [[4.0], [4.0]]

[timing]
steps = 2
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let text = MINIMAL.replace("[timing]\nsteps = 2\n", "");
        let rows = vec!["[4.0]"; 1200].join(", ");
        let text = text.replace("rows = [[4.0], [4.0]]", &format!("rows = [{rows}]"));
        let sc = parse_scenario(&text, "mem", Path::new(".")).unwrap();
        assert_eq!(sc.dt, 0.5);
        assert_eq!(sc.horizon, 60);
        assert_eq!(sc.steps, 1200);
        assert_eq!(sc.weights, ObjectiveWeights::default());
    }

    #[test]
    fn wrong_row_width_names_the_table() {
        let text = MINIMAL.replace("[[4.0], [4.0]]", "[[4.0], [4.0, 1.0]]");
        match parse_scenario(&text, "mem", Path::new(".")) {
            Err(IoError::Dimension { table, .. }) => assert_eq!(table, "demand.rows"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn percent_soc_is_rejected() {
        let text = format!(
            "{MINIMAL}\n[[storage]]\nid = \"B1\"\nclass = \"battery\"\np_min = -10.0\np_max = 10.0\n\
             ramp_min = -5.0\nramp_max = 5.0\nenergy_capacity = 1000.0\nsoc_max = 80.0\ninitial_soc = 0.5\n"
        );
        match parse_scenario(&text, "mem", Path::new(".")) {
            Err(IoError::Schema { field, .. }) => assert_eq!(field, "storage[0].soc_max"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_fail_to_parse() {
        let text = MINIMAL.replace("weight = 1.0", "weight = 1.0\nwieght = 2.0");
        assert!(matches!(
            parse_scenario(&text, "mem", Path::new(".")),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn outage_intervals_round_trip() {
        let avail = [true, false, false, true, false];
        assert_eq!(outages(&avail), vec![[1, 3], [4, 5]]);
        assert!(outages(&[true; 3]).is_empty());
    }
}
