mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shipems::lp::{solve_lp, LpConfig, LpStatus};

#[test]
fn polygon_matches_vertex_enumeration() {
    let mut lp = shipems::lp::LinearProgram::new();
    let x = lp.add_variable(3.0, 0.0, 100.0);
    let y = lp.add_variable(2.0, 0.0, 100.0);
    lp.add_le(vec![(x, 1.0), (y, 1.0)], 4.0);
    lp.add_le(vec![(x, 1.0), (y, 3.0)], 6.0);
    assert_eq!(common::vertex_enumeration(&lp), Some(12.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_vertex_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = common::random_feasible_lp(&mut rng, 6, 6);
        let sol = solve_lp(&lp, &LpConfig::default()).unwrap();
        let oracle = common::vertex_enumeration(&lp);
        let best = oracle.expect("generated problems are feasible and bounded");
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!((sol.objective_value - best).abs() <= 1e-7,
            "simplex {} vs oracle {}", sol.objective_value, best);
        prop_assert!(lp.max_violation(&sol.x) <= 1e-7);
    }

    #[test]
    fn objective_scaling(seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = common::random_feasible_lp(&mut rng, 6, 6);
        let base = solve_lp(&lp, &LpConfig::default()).unwrap();
        let mut scaled = lp.clone();
        scaled.objective_mut().iter_mut().for_each(|c| *c *= lambda);
        let s = solve_lp(&scaled, &LpConfig::default()).unwrap();
        prop_assert_eq!(base.status, s.status);
        if base.status == LpStatus::Optimal {
            let tol = 1e-7 * lambda.max(1.0) * base.objective_value.abs().max(1.0);
            prop_assert!((s.objective_value - lambda * base.objective_value).abs() <= tol);
        }
    }

    #[test]
    fn redundant_row_is_harmless(seed in any::<u64>(), slack in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = common::random_feasible_lp(&mut rng, 6, 6);
        let base = solve_lp(&lp, &LpConfig::default()).unwrap();
        // Sum of all upper bounds dominates sum of variables.
        let mut more = lp.clone();
        let terms: Vec<(usize, f64)> = (0..lp.num_vars()).map(|j| (j, 1.0)).collect();
        let cap: f64 = lp.upper().iter().sum::<f64>() + slack;
        more.add_le(terms, cap);
        let s = solve_lp(&more, &LpConfig::default()).unwrap();
        prop_assert_eq!(base.status, s.status);
        if base.status == LpStatus::Optimal {
            prop_assert!((s.objective_value - base.objective_value).abs() <= 1e-7);
        }
    }
}
