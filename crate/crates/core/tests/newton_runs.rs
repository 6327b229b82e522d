use std::sync::Arc;

use entropy_dg_core::diagnostics::{check_mass_bounds, entropy_step_threshold};
use entropy_dg_core::solver::{initial_lambda, newton_solve, RunStatus};
use entropy_dg_core::{run_simulation, InitialDatum, Mesh1D, SchemeParams};

fn one_group(u: f64) -> InitialDatum {
    InitialDatum::Steps { segments: vec![(0.0, 0.5, u)], background: 0.0 }
}

fn params(p: usize, dt: f64, d: f64) -> SchemeParams {
    let mut prm = SchemeParams::new(p);
    prm.dt = dt;
    prm.diffusion = d;
    prm
}

#[test]
fn one_group_first_step_converges_quickly() {
    let mesh = Arc::new(Mesh1D::uniform(20, 0.0, 1.0).unwrap());
    let prm = params(1, 1.0 / 6.0, 1e-4);
    let lam0 = initial_lambda(&one_group(0.8), mesh, &prm).unwrap();
    let (lam1, stats) = newton_solve(&lam0, &lam0, &prm).unwrap();
    assert!(stats.iterations <= 50, "{} iterations", stats.iterations);
    assert!(stats.raw_residual <= prm.newton.tol, "raw residual {:e}", stats.raw_residual);
    assert!(lam1.coeffs().iter().all(|c| c.is_finite()));
}

#[test]
fn solution_does_not_depend_on_newton_start() {
    for p in 1..=3 {
        let mesh = Arc::new(Mesh1D::uniform(40, 0.0, 1.0).unwrap());
        let prm = params(p, 1.0 / 3.0, 1e-4);
        let lam0 = initial_lambda(&one_group(0.8), mesh, &prm).unwrap();
        let (a, _) = newton_solve(&lam0, &lam0, &prm).unwrap();
        let (b, _) = newton_solve(&a, &a, &prm).unwrap();
        let (b2, _) = newton_solve(&a.with_coeffs(a.coeffs().iter().map(|c| c + 0.01).collect()), &a, &prm).unwrap();
        let diff = b.coeffs().iter().zip(b2.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8, "p = {p}: starts differ by {diff:e}");
    }
}

#[test]
fn one_group_run_dissipates_entropy() {
    let mesh = Arc::new(Mesh1D::uniform(40, 0.0, 1.0).unwrap());
    let prm = params(1, 1.0 / 3.0, 1e-4);
    let series = run_simulation(&one_group(0.8), mesh, &prm, 60).unwrap();
    assert_eq!(series.status, RunStatus::Completed);
    assert_eq!(series.steps.len(), 61);
    for (k, w) in series.steps.windows(2).enumerate() {
        assert!(w[1].report.entropy <= w[0].report.entropy + 1e-9, "entropy rose at step {}", k + 1);
        assert!(w[1].t == (k + 1) as f64 * prm.dt);
        let threshold = entropy_step_threshold(&w[1].lambda, &prm);
        assert!(w[1].report.entropy_step_slack >= threshold, "step {}", k + 1);
        assert!(w[1].report.dgnorm_bound_ok);
        assert!(w[1].newton.as_ref().unwrap().raw_residual <= prm.newton.tol);
    }
    assert!(check_mass_bounds(&series).unwrap().ok);
    assert!(series.steps.iter().all(|s| s.report.min_density > 0.0 && s.report.max_density.is_finite()));
}

#[test]
fn constant_one_is_a_fixed_point() {
    let mesh = Arc::new(Mesh1D::uniform(8, 0.0, 1.0).unwrap());
    let prm = params(2, 0.5, 1.0);
    let series = run_simulation(&InitialDatum::Constant(1.0), mesh, &prm, 5).unwrap();
    for s in &series.steps {
        assert!(s.lambda.coeff_sup() < 1e-12);
        assert!(s.report.entropy.abs() < 1e-14);
        assert!((s.report.mass - 1.0).abs() < 1e-12);
    }
}

#[test]
fn floor_datum_grows_and_keeps_mass_bounds() {
    let mesh = Arc::new(Mesh1D::uniform(10, 0.0, 1.0).unwrap());
    let prm = params(1, 0.5, 1.0);
    let series = run_simulation(&InitialDatum::Constant(0.0), mesh, &prm, 10).unwrap();
    let report = check_mass_bounds(&series).unwrap();
    assert!(report.ok);
    assert!(series.steps.windows(2).all(|w| w[1].report.mass >= w[0].report.mass));
    assert!(series.steps.windows(2).all(|w| w[1].report.entropy <= w[0].report.entropy + 1e-9));
}

#[test]
fn invalid_time_step_is_rejected() {
    let mesh = Arc::new(Mesh1D::uniform(4, 0.0, 1.0).unwrap());
    let prm = params(1, 1.5, 1.0);
    let err = run_simulation(&InitialDatum::Constant(1.0), mesh, &prm, 3).unwrap_err();
    assert_eq!(err.step, 0);
    assert!(err.partial.steps.is_empty());
}
