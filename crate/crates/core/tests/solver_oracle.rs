mod common;

use netrec_core::lp_build::{LpKind, LpProblem, VarKey};
use netrec_core::lp_solve::{solve, Backend, LpStatus, SolveOptions};
use proptest::prelude::*;

use common::{random_lp, rng, vertex_enumeration};

fn check_against_oracle(lp: &LpProblem, backend: Backend, tol: f64) -> Result<(), TestCaseError> {
    let sol = solve(lp, &SolveOptions::with_backend(backend)).unwrap();
    match vertex_enumeration(lp, 1e-9) {
        Some((obj, _)) => {
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            prop_assert!((sol.objective - obj).abs() <= tol, "{} vs oracle {}", sol.objective, obj);
            prop_assert!(sol.max_residual <= 1e-8);
        }
        None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dense_simplex_matches_vertex_enumeration(seed in any::<u64>()) {
        check_against_oracle(&random_lp(&mut rng(seed), 6), Backend::Dense, 1e-9)?;
    }

    #[test]
    fn sparse_backend_matches_vertex_enumeration(seed in any::<u64>()) {
        check_against_oracle(&random_lp(&mut rng(seed), 6), Backend::Sparse, 1e-7)?;
    }
}

/// Beale's example cycles under the textbook largest-coefficient rule.
fn beale() -> LpProblem {
    let mut lp = LpProblem::new(LpKind::Generic);
    for (j, c) in [-0.75, 150.0, -0.02, 6.0].into_iter().enumerate() {
        lp.add_var(VarKey::X(j), c, 0.0, f64::INFINITY);
    }
    lp.add_le("a", vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], 0.0);
    lp.add_le("b", vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], 0.0);
    lp.add_le("c", vec![(2, 1.0)], 1.0);
    lp
}

#[test]
fn degenerate_cycling_example_terminates() {
    let lp = beale();
    for stall_limit in [0, 1, 50] {
        let opts = SolveOptions { stall_limit, backend: Backend::Dense, ..Default::default() };
        let sol = solve(&lp, &opts).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 0.05).abs() < 1e-12, "{}", sol.objective);
    }
}

#[test]
fn fixed_and_negative_bounds() {
    let mut lp = LpProblem::new(LpKind::Generic);
    lp.add_var(VarKey::X(0), 1.0, -3.0, -1.0);
    lp.add_var(VarKey::X(1), -1.0, 2.0, 2.0);
    lp.add_ge("g", vec![(0, 1.0), (1, 1.0)], 0.5);
    let sol = solve(&lp, &SolveOptions::with_backend(Backend::Dense)).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.x[0] + 1.5).abs() < 1e-12);
    assert_eq!(sol.x[1], 2.0);
}

#[test]
fn iteration_limit_is_reported() {
    let opts = SolveOptions { max_iters: Some(1), backend: Backend::Dense, ..Default::default() };
    assert_eq!(solve(&beale(), &opts).unwrap().status, LpStatus::IterationLimit);
}
