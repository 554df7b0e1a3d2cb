use std::fs;
use std::path::Path;

use serde::Serialize;

use super::IoError;
use crate::horizon::{operability, MissionResult, Mode};
use crate::model::{check_trajectory, ObjectiveWeights, ScenarioSpec};

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct BundleSummary {
    pub scenario: String,
    pub mode: String,
    pub horizon: usize,
    pub steps: usize,
    pub weights: ObjectiveWeights,
    pub operability: Option<f64>,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    pub objective: f64,
    pub delta_f1: Option<f64>,
    pub total_time_ms: f64,
    pub max_step_ms: f64,
    pub mean_step_ms: f64,
    pub fallback_steps: Vec<usize>,
    pub usable: bool,
    pub violations: usize,
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Writes `summary.json` and `trajectory.csv` into `dir`.
///
/// The applied trajectory is re-checked first; a trajectory that breaks a
/// physical constraint is refused unless `force` is set, in which case the
/// violation count is recorded in the summary.
pub fn write_bundle(
    dir: &Path,
    scenario: &ScenarioSpec,
    result: &MissionResult,
    delta_f1: Option<f64>,
    force: bool,
) -> Result<BundleSummary, IoError> {
    if result.steps.len() != scenario.steps {
        return Err(IoError::Dimension {
            table: "trajectory".into(),
            message: format!(
                "{} steps in result, scenario has {}",
                result.steps.len(),
                scenario.steps
            ),
        });
    }
    let violations = check_trajectory(scenario, &scenario.initial_state(), &result.steps);
    if !violations.is_empty() && !force {
        return Err(IoError::InvariantViolation {
            count: violations.len(),
            first: violations[0].to_string(),
        });
    }
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;

    let (mode, horizon) = match result.mode {
        Mode::Fho => ("fho".to_string(), scenario.steps),
        Mode::Rho { np } => ("rho".to_string(), np),
    };
    let summary = BundleSummary {
        scenario: scenario.name.clone(),
        mode,
        horizon,
        steps: scenario.steps,
        weights: result.weights,
        operability: operability(&result.steps, scenario).ok(),
        f1: result.terms.f1,
        f2: result.terms.f2,
        f3: result.terms.f3,
        f4: result.terms.f4,
        objective: result.objective,
        delta_f1,
        total_time_ms: ms(result.total_time),
        max_step_ms: ms(result.max_step_time()),
        mean_step_ms: ms(result.mean_step_time()),
        fallback_steps: result.fallbacks(),
        usable: result.usable,
        violations: violations.len(),
    };
    let json =
        serde_json::to_string_pretty(&summary).map_err(|e| IoError::Serialize(e.to_string()))?;
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, json + "\n").map_err(|e| IoError::io(&summary_path, e))?;

    let traj_path = dir.join("trajectory.csv");
    let ser = |e: csv::Error| IoError::Serialize(e.to_string());
    let mut w = csv::Writer::from_path(&traj_path).map_err(ser)?;
    let mut header = vec!["t".to_string(), "time_s".to_string()];
    header.extend(scenario.loads.iter().map(|l| format!("o_{}", l.id)));
    header.extend(scenario.storage.iter().map(|s| format!("pe_{}", s.id)));
    header.extend(scenario.generators.iter().map(|g| format!("pg_{}", g.id)));
    header.extend(scenario.storage.iter().map(|s| format!("soc_{}", s.id)));
    header.push("solve_ms".into());
    header.push("status".into());
    w.write_record(&header).map_err(ser)?;
    for (t, s) in result.steps.iter().enumerate() {
        let mut rec = vec![t.to_string(), format!("{:.3}", t as f64 * scenario.dt)];
        rec.extend(s.served.iter().map(|v| v.to_string()));
        rec.extend(s.storage_power.iter().map(|v| v.to_string()));
        rec.extend(s.generator_power.iter().map(|v| v.to_string()));
        rec.extend(s.soc.iter().map(|v| v.to_string()));
        // A fixed-horizon run has one solve; it is reported on the first row.
        rec.push(match (result.mode, result.step_times.get(t)) {
            (Mode::Fho, Some(d)) if t == 0 => format!("{:.3}", ms(*d)),
            (Mode::Rho { .. }, Some(d)) => format!("{:.3}", ms(*d)),
            _ => String::new(),
        });
        rec.push(result.outcomes[t].as_str().into());
        w.write_record(&rec).map_err(ser)?;
    }
    w.flush().map_err(|e| IoError::io(&traj_path, e))?;
    Ok(summary)
}
