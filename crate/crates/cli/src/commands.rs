use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;
use shipems::horizon::{compare_f1, run_fho, run_rho, MissionResult, RhoConfig};
use shipems::io::{
    load_scenario, save_scenario, synth_scenario, write_bundle, DemandSource, SynthSizes,
};
use shipems::milp::SolverConfig;
use shipems::model::{build_window_milp, ObjectiveWeights, ScenarioSpec};
use shipems::tuner::{tune_weights, write_trace, EvalMode, MissionEvaluator, TunerConfig};

use crate::error::CliError;
use crate::{out_dir, CompareArgs, ModeArg, RunArgs, SolveArgs, SynthArgs, TuneArgs, ValidateArgs};

fn parse_triple(text: &str, flag: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || {
        CliError::Usage(format!(
            "--{flag} expects three comma-separated numbers, got {text:?}"
        ))
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut w = [0.0; 3];
    for (k, p) in parts.iter().enumerate() {
        w[k] = p.parse().map_err(|_| bad())?;
    }
    Ok(w)
}

fn weights(arg: &Option<String>, sc: &ScenarioSpec) -> Result<ObjectiveWeights, CliError> {
    match arg {
        Some(text) => Ok(ObjectiveWeights::from_array(parse_triple(
            text, "weights",
        )?)?),
        None => Ok(sc.weights),
    }
}

fn rho_config(args: &SolveArgs, sc: &ScenarioSpec) -> RhoConfig {
    let mut cfg = RhoConfig::new(args.np.unwrap_or(sc.horizon));
    cfg.deadline_per_step = args.deadline_ms.map(Duration::from_millis);
    cfg
}

fn fho_config(args: &SolveArgs) -> SolverConfig {
    SolverConfig {
        deadline: args
            .deadline_ms
            .map(|ms| Instant::now() + Duration::from_millis(ms)),
        ..SolverConfig::default()
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn print_summary(label: &str, sc: &ScenarioSpec, r: &MissionResult) {
    let o = shipems::horizon::operability(&r.steps, sc).unwrap_or(f64::NAN);
    println!("{label}: O = {o:.6}  objective = {:.6}", r.objective);
    println!(
        "  f1 = {:.6}  f2 = {:.6}  f3 = {:.6}  f4 = {:.6}",
        r.terms.f1, r.terms.f2, r.terms.f3, r.terms.f4
    );
    println!(
        "  total {:.1} ms, per-step max {:.3} ms, mean {:.3} ms{}",
        ms(r.total_time),
        ms(r.max_step_time()),
        ms(r.mean_step_time()),
        if r.usable {
            ""
        } else {
            "  (not usable: some steps not solved to optimality)"
        }
    );
    let fb = r.fallbacks();
    if !fb.is_empty() {
        println!("  fallback steps: {fb:?}");
    }
}

/// Counts of per-step solve times by bucket, plus quantiles.
fn timing_table(r: &MissionResult) {
    let mut t: Vec<f64> = r.step_times.iter().map(|d| ms(*d)).collect();
    if t.is_empty() {
        return;
    }
    t.sort_by(f64::total_cmp);
    let q = |p: f64| t[((t.len() - 1) as f64 * p).round() as usize];
    println!(
        "  step time ms: p50 {:.3}  p90 {:.3}  p99 {:.3}  max {:.3}",
        q(0.5),
        q(0.9),
        q(0.99),
        q(1.0)
    );
    let edges = [1.0, 10.0, 50.0, 100.0, 200.0, 500.0];
    let mut lo = 0.0;
    for hi in edges.iter().copied().chain([f64::INFINITY]) {
        let n = t.iter().filter(|&&v| v >= lo && v < hi).count();
        if hi.is_finite() {
            println!("    [{lo:>5}, {hi:>5}) ms: {n}");
        } else {
            println!("    [{lo:>5},   inf) ms: {n}");
        }
        lo = hi;
    }
}

pub fn run(args: RunArgs) -> Result<(), CliError> {
    let a = &args.solve;
    let out = out_dir(a.out.clone())?;
    let sc = load_scenario(&a.scenario)?;
    let w = weights(&a.weights, &sc)?;
    let r = match args.mode {
        ModeArg::Rho => run_rho(&sc, &w, &rho_config(a, &sc))?,
        ModeArg::Fho => run_fho(&sc, &w, &fho_config(a))?,
    };
    print_summary(
        match args.mode {
            ModeArg::Rho => "rho",
            ModeArg::Fho => "fho",
        },
        &sc,
        &r,
    );
    if args.mode == ModeArg::Rho {
        println!("max per-step solve time: {:.3} ms", ms(r.max_step_time()));
        timing_table(&r);
    }
    write_bundle(&out, &sc, &r, None, a.force)?;
    println!("bundle written to {}", out.display());
    Ok(())
}

pub fn compare(args: CompareArgs) -> Result<(), CliError> {
    let a = &args.solve;
    let out = out_dir(a.out.clone())?;
    let sc = load_scenario(&a.scenario)?;
    let w = weights(&a.weights, &sc)?;
    let fho = run_fho(&sc, &w, &fho_config(a))?;
    let rho = run_rho(&sc, &w, &rho_config(a, &sc))?;
    let delta = compare_f1(&fho, &rho)?;
    print_summary("fho", &sc, &fho);
    print_summary("rho", &sc, &rho);
    timing_table(&rho);
    println!("delta_f1 = {delta:.6e} ({:.4}%)", 100.0 * delta);
    if !fho.usable {
        println!("warning: the fixed-horizon solve did not reach optimality; delta_f1 is not a valid comparison");
    }
    write_bundle(&out.join("fho"), &sc, &fho, Some(delta), a.force)?;
    write_bundle(&out.join("rho"), &sc, &rho, Some(delta), a.force)?;
    println!("bundles written to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct TuneSummary {
    omega: [f64; 3],
    merit: f64,
    iterations: usize,
    converged: bool,
}

pub fn tune(args: TuneArgs) -> Result<(), CliError> {
    let out = out_dir(args.out.clone())?;
    let sc = load_scenario(&args.scenario)?;
    let mut cfg = TunerConfig {
        gamma: args.gamma,
        epsilon: args.eps,
        max_iterations: args.max_iter,
        ..TunerConfig::default()
    };
    if let Some(text) = &args.initial {
        cfg.initial = parse_triple(text, "initial")?;
    }
    let mode = match args.mode {
        ModeArg::Fho => EvalMode::Fho(SolverConfig::default()),
        ModeArg::Rho => EvalMode::Rho(RhoConfig::new(args.np.unwrap_or(sc.horizon))),
    };
    let ev = MissionEvaluator::new(&sc, mode);
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    let trace_path = out.join("trace.csv");
    let result = match tune_weights(&cfg, |w| ev.merit(w)) {
        Ok(r) => r,
        Err(shipems::tuner::TunerError::NonFiniteMerit {
            iteration,
            reason,
            trace,
        }) => {
            write_trace(&trace_path, &trace)?;
            return Err(shipems::tuner::TunerError::NonFiniteMerit {
                iteration,
                reason,
                trace,
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };
    write_trace(&trace_path, &result.trace)?;
    for e in &result.trace {
        println!(
            "{:>4}  w = [{:.6}, {:.6}, {:.6}]  merit {:.6}{}",
            e.iteration,
            e.omega[0],
            e.omega[1],
            e.omega[2],
            e.merit,
            if e.accepted { "" } else { "  (rejected)" }
        );
    }
    println!(
        "best w = [{:.6}, {:.6}, {:.6}], merit {:.6}, {} iterations, {}",
        result.omega[0],
        result.omega[1],
        result.omega[2],
        result.merit,
        result.iterations,
        if result.converged {
            "converged"
        } else {
            "iteration cap reached"
        }
    );
    let summary = TuneSummary {
        omega: result.omega,
        merit: result.merit,
        iterations: result.iterations,
        converged: result.converged,
    };
    let path = out.join("tuned.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Io(shipems::io::IoError::Serialize(e.to_string())))?;
    fs::write(&path, json + "\n").map_err(|e| io_error(&path, e))?;
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io(shipems::io::IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let sc = load_scenario(&args.scenario)?;
    println!(
        "{}: {} steps of {} s, horizon {}, {} loads, {} generators, {} storage units",
        sc.name,
        sc.steps,
        sc.dt,
        sc.horizon,
        sc.loads.len(),
        sc.generators.len(),
        sc.storage.len()
    );
    // The first window of one step exercises the ramp consistency of the
    // initial generator powers without solving anything.
    build_window_milp(&sc, &sc.initial_state(), &sc.weights, 1)?;
    let storage_out: f64 = sc.storage.iter().map(|s| s.p_max).sum();
    let short: Vec<usize> = (0..sc.steps)
        .filter(|&t| {
            let gen: f64 = sc
                .generators
                .iter()
                .enumerate()
                .filter(|&(g, _)| sc.is_available(g, t))
                .map(|(_, g)| g.p_max)
                .sum();
            sc.demand[t].iter().sum::<f64>() > gen + storage_out
        })
        .collect();
    if short.is_empty() {
        println!("demand never exceeds generation plus storage discharge capacity");
    } else {
        println!(
            "demand exceeds supply capacity at {} steps (first {}, last {}); shedding is forced",
            short.len(),
            short[0],
            short[short.len() - 1]
        );
    }
    println!("ok");
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    if args.loads == 0 || args.gens == 0 || args.steps == 0 {
        return Err(CliError::Usage(
            "--loads, --gens and --steps must be positive".into(),
        ));
    }
    let sc = synth_scenario(
        args.seed,
        SynthSizes {
            loads: args.loads,
            generators: args.gens,
            storage: args.storage,
            steps: args.steps,
        },
    );
    let stem = args
        .out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();
    let table = args.out.with_file_name(format!("{stem}_demand.csv"));
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    save_scenario(&sc, &args.out, &DemandSource::Table(table.clone()))?;
    println!("wrote {} and {}", args.out.display(), table.display());
    Ok(())
}
