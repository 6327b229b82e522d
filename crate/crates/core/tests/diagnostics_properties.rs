use std::sync::Arc;

use entropy_dg_core::diagnostics::*;
use entropy_dg_core::{run_simulation, DgFunction, InitialDatum, Mesh1D, Quadrature, SchemeParams};
use proptest::prelude::*;

proptest! {
    #[test]
    fn sigma_minus_inverts_lower_branch(x in 0.0f64..=1.0) {
        let back = sigma_minus(entropy_density(x).unwrap()).unwrap();
        prop_assert!((back - x).abs() < 1e-10, "{x} -> {back}");
    }

    #[test]
    fn sigma_plus_inverts_upper_branch(x in 1.0f64..=10.0) {
        let back = sigma_plus(entropy_density(x).unwrap()).unwrap();
        prop_assert!((back - x).abs() < 1e-10, "{x} -> {back}");
    }

    #[test]
    fn reaction_entropy_is_nonnegative(c in prop::collection::vec(-5.0f64..3.0, 12)) {
        let mesh = Arc::new(Mesh1D::uniform(4, 0.0, 1.0).unwrap());
        let lam = DgFunction::from_coeffs(mesh, 2, c).unwrap();
        prop_assert!(reaction_entropy(&lam, &Quadrature::default()).unwrap() >= -1e-12);
    }

    #[test]
    fn constant_state_l1_distance(c in -4.0f64..2.0, len in 0.5f64..3.0) {
        let mesh = Arc::new(Mesh1D::uniform(3, 0.0, len).unwrap());
        let lam = DgFunction::constant(mesh, 1, c);
        let d = l1_distance_to_one(&lam, &Quadrature::default()).unwrap();
        prop_assert!((d - (c.exp() - 1.0).abs() * len).abs() < 1e-13);
    }

    #[test]
    fn decay_fit_recovers_exact_rate(rate in -3.0f64..-0.01, s0 in 0.1f64..10.0) {
        let samples: Vec<(f64, f64)> = (0..40).map(|k| (0.25 * k as f64, s0 * (rate * 0.25 * k as f64).exp())).collect();
        let fitted = fit_decay_rate(&samples, 10..40).unwrap();
        prop_assert!((fitted - rate).abs() < 1e-10);
    }
}

#[test]
fn entropy_density_examples() {
    assert_eq!(entropy_density(1.0).unwrap(), 0.0);
    assert_eq!(entropy_density(0.0).unwrap(), 1.0);
    assert!((entropy_density(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
    assert!(entropy_density(-0.1).is_err());
}

#[test]
fn sigma_examples() {
    assert_eq!(sigma_minus(0.0).unwrap(), 1.0);
    assert_eq!(sigma_plus(0.0).unwrap(), 1.0);
    assert!(sigma_minus(1.0).unwrap().abs() < 1e-12);
    assert!((sigma_plus(1.0).unwrap() - std::f64::consts::E).abs() < 1e-10);
    assert!(sigma_minus(-1.0).is_err() && sigma_plus(-1.0).is_err());
}

#[test]
fn decay_fit_reference_slopes() {
    for base in [0.95f64, 0.5] {
        let samples: Vec<(f64, f64)> = (0..30).map(|k| (k as f64 / 3.0, base.powf(k as f64 / 3.0))).collect();
        assert!((fit_decay_rate(&samples, 0..30).unwrap() - base.ln()).abs() < 1e-10);
    }
    let flat = vec![(0.0, 1.0), (1.0, 0.0), (2.0, 1.0)];
    assert!(fit_decay_rate(&flat, 0..3).is_err());
    assert!(fit_decay_rate(&flat, 0..2).is_err());
}

#[test]
fn inverse_trace_constant() {
    assert!((compute_c_inv(1) - 6f64.sqrt()).abs() < 1e-12);
    for p in 1..8 {
        let (a, b) = (compute_c_inv(p), compute_c_inv(p + 1));
        assert!(b * b * ((p + 1) * (p + 1)) as f64 >= a * a * (p * p) as f64);
    }
    for p in 1..=8 {
        let unit = inverse_trace_eigenvalue(p, 1.0);
        let scaled = inverse_trace_eigenvalue(p, 0.37) * 0.37;
        assert!((unit - scaled).abs() < 1e-12 * unit, "p = {p}");
    }
    // dense scan over unit-norm affine ξ = cos θ + sin θ √3 (2x - 1): ξ(0)² + ξ(1)² = 2cos²θ + 6sin²θ
    let scan = (0..=20000)
        .map(|i| {
            let th = i as f64 * std::f64::consts::PI / 20000.0;
            2.0 * th.cos().powi(2) + 6.0 * th.sin().powi(2)
        })
        .fold(0.0, f64::max);
    assert!((scan - 6.0).abs() < 1e-12);
}

#[test]
fn constant_family_entropy_rises_to_domain_measure() {
    let mesh = Arc::new(Mesh1D::uniform(2, 0.0, 1.0).unwrap());
    let mut prm = SchemeParams::new(1);
    prm.dt = 0.5;
    let (lam0, s0) = remark_counterexample(0, 0.5, mesh.clone(), 1).unwrap();
    assert_eq!(s0, 0.0);
    assert_eq!(lam0.coeff_sup(), 0.0);
    let (_, s1) = remark_counterexample(1, 0.5, mesh.clone(), 1).unwrap();
    assert!((s1 - 0.153426409720027).abs() < 1e-12);
    let mut last = -1.0;
    for k in 0..=200 {
        let (_, s) = remark_counterexample(k, 0.5, mesh.clone(), 1).unwrap();
        // strictly increasing until rounding saturates near |Ω|
        assert!(s > last || (s == last && 1.0 - s < 1e-15), "k = {k}");
        last = s;
    }
    assert!((last - 1.0).abs() < 1e-6);
    // Along one family member λ_k = (L - k)⁺ log(1 - Δt), the certificate holds.
    let l = 40;
    for k in 1..=l + 2 {
        let prev = constant_family_member(l, k - 1, 0.5, mesh.clone(), 1).unwrap();
        let cur = constant_family_member(l, k, 0.5, mesh.clone(), 1).unwrap();
        assert!(check_entropy_step(&cur, &prev, &prm).unwrap() >= -1e-9, "k = {k}");
    }
}

#[test]
fn dg_bound_examples() {
    let mesh = Arc::new(Mesh1D::uniform(5, 0.0, 1.0).unwrap());
    let prm = SchemeParams::new(1);
    let zero = DgFunction::zeros(mesh.clone(), 1);
    let b = check_dgnorm_bound(&zero, 0.0, &prm).unwrap();
    assert!((b.lhs - prm.dt).abs() < 1e-14 && b.ok);
    // A wild function that is no scheme solution is reported, not rejected.
    let wild = DgFunction::from_coeffs(mesh, 1, (0..10).map(|i| if i % 4 == 0 { 6.0 } else { -6.0 }).collect()).unwrap();
    let b = check_dgnorm_bound(&wild, 0.0, &prm).unwrap();
    assert!(!b.ok);
}

#[test]
fn entropy_of_step_data() {
    let quad = Quadrature::default();
    for n in [3usize, 6, 12] {
        let mesh = Arc::new(Mesh1D::uniform(48, 0.0, 1.0).unwrap());
        let prm = SchemeParams::new(1);
        let u0 = InitialDatum::Steps { segments: vec![(0.0, 1.0 / n as f64, n as f64)], background: 0.0 };
        let lam = entropy_dg_core::solver::initial_lambda(&u0, mesh, &prm).unwrap();
        let s = discrete_entropy(&lam, &quad).unwrap();
        assert!((s - (n as f64).ln()).abs() < 2e-3, "n = {n}: {s}");
    }
    let mesh = Arc::new(Mesh1D::uniform(40, 0.0, 1.0).unwrap());
    let u0 = InitialDatum::Steps { segments: vec![(0.0, 0.5, 0.8)], background: 0.0 };
    let lam = entropy_dg_core::solver::initial_lambda(&u0, mesh, &SchemeParams::new(1)).unwrap();
    let s = discrete_entropy(&lam, &quad).unwrap();
    // 0.5 s(0.8) + 0.5 s(1e-16)
    assert!((s - 0.51074).abs() < 1e-4, "{s}");
}

#[test]
fn decay_run_obeys_l1_bound() {
    let mesh = Arc::new(Mesh1D::uniform(40, 0.0, 1.0).unwrap());
    let mut prm = SchemeParams::new(1);
    prm.dt = 0.1;
    prm.diffusion = 1.0;
    let u0 = InitialDatum::Steps { segments: vec![(0.0, 0.5, 0.8)], background: 0.0 };
    let series = run_simulation(&u0, mesh, &prm, 100).unwrap();
    let s0 = series.steps[0].report.entropy;
    assert!(s0 < 1.0);
    let c = l1_decay_constant(s0, 1.0).unwrap();
    for st in &series.steps {
        assert!(st.report.l1_dist <= c * st.report.entropy.sqrt() + 1e-12, "k = {}", st.k);
    }
    assert!(series.steps.windows(2).all(|w| w[1].report.entropy < w[0].report.entropy));
    assert!(series.last().report.entropy < 1e-3 * s0);
    assert!(check_mass_bounds(&series).unwrap().ok);
}
