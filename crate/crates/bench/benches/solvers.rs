use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use shipems::horizon::{run_rho, RhoConfig};
use shipems::io::{synth_scenario, SynthSizes};
use shipems::lp::{solve_lp, solve_lp_warm, LpConfig};
use shipems::milp::{solve_milp, solve_milp_warm, SolverConfig};
use shipems_bench::{desk_scenario, first_window, window_at};

fn lp(c: &mut Criterion) {
    let sc = desk_scenario(1);
    let m = first_window(&sc);
    let cfg = LpConfig::default();
    c.bench_function("lp/window60_cold", |b| {
        b.iter(|| solve_lp(black_box(&m.problem.lp), &cfg).unwrap())
    });
    let (m, basis) = window_at(&sc, 100);
    c.bench_function("lp/window60_warm_t100", |b| {
        b.iter(|| solve_lp_warm(black_box(&m.problem.lp), &cfg, basis.as_ref()).unwrap())
    });
}

fn milp(c: &mut Criterion) {
    let sc = desk_scenario(1);
    let cfg = SolverConfig::default();
    let m = first_window(&sc);
    let mut g = c.benchmark_group("milp");
    g.sample_size(10);
    g.bench_function("window60_cold", |b| {
        b.iter(|| solve_milp(black_box(&m.problem), &cfg).unwrap())
    });
    let (m, basis) = window_at(&sc, 100);
    g.bench_function("window60_warm_t100", |b| {
        b.iter(|| solve_milp_warm(black_box(&m.problem), &cfg, basis.as_ref()).unwrap())
    });
    g.finish();
}

fn mission(c: &mut Criterion) {
    let sc = synth_scenario(
        1,
        SynthSizes {
            steps: 40,
            ..SynthSizes::default()
        },
    );
    let mut g = c.benchmark_group("rho");
    g.sample_size(10);
    g.bench_function("mission40_np20", |b| {
        b.iter(|| run_rho(black_box(&sc), &sc.weights, &RhoConfig::new(20)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, lp, milp, mission);
criterion_main!(benches);
