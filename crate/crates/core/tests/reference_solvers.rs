use std::sync::Arc;

use entropy_dg_core::dgspace::l2_norm;
use entropy_dg_core::reference::wave::WAVE_SAMPLE_SPACING;
use entropy_dg_core::reference::{fem_p1_lambda_default, fem_p1_u, traveling_wave_reference, FemParams};
use entropy_dg_core::{run_simulation, InitialDatum, Mesh1D, Quadrature, SchemeParams};

fn one_group() -> InitialDatum {
    InitialDatum::Steps { segments: vec![(0.0, 0.5, 0.8)], background: 0.0 }
}

#[test]
fn density_fem_turns_negative() {
    for n in [20, 40] {
        let mesh = Arc::new(Mesh1D::uniform(n, 0.0, 1.0).unwrap());
        let prm = FemParams::new(1e-4, 1.0 / 6.0);
        let states = match fem_p1_u(&one_group(), mesh, &prm, 120) {
            Ok(s) => s,
            Err(e) => e.partial,
        };
        let min = states.iter().flat_map(|s| s.values.iter().copied()).fold(f64::INFINITY, f64::min);
        assert!(min < 0.0, "N_el = {n}: min nodal value {min}");
    }
}

#[test]
fn log_fem_stays_positive() {
    for n in [20, 40] {
        let mesh = Arc::new(Mesh1D::uniform(n, 0.0, 1.0).unwrap());
        let prm = FemParams::new(1e-4, 1.0 / 6.0);
        let states = fem_p1_lambda_default(&one_group(), mesh, &prm, 120).unwrap();
        assert_eq!(states.len(), 121);
        for s in &states {
            assert!(s.density().iter().all(|u| *u > 0.0 && u.is_finite()));
        }
    }
}

#[test]
fn fem_steady_states() {
    let mesh = Arc::new(Mesh1D::uniform(10, 0.0, 1.0).unwrap());
    let prm = FemParams::new(1.0, 0.2);
    for s in fem_p1_u(&InitialDatum::Constant(1.0), mesh.clone(), &prm, 5).unwrap() {
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }
    for s in fem_p1_lambda_default(&InitialDatum::Constant(1.0), mesh, &prm, 5).unwrap() {
        assert!(s.values.iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn density_fem_without_reaction_conserves_mass() {
    let mesh = Arc::new(Mesh1D::uniform(30, 0.0, 1.0).unwrap());
    let mut prm = FemParams::new(1e-2, 0.1);
    prm.reaction = false;
    let states = fem_p1_u(&one_group(), mesh, &prm, 20).unwrap();
    let quad = Quadrature::default();
    let m0 = states[0].mass(&quad);
    for s in &states {
        assert!((s.mass(&quad) - m0).abs() < 1e-10);
    }
}

#[test]
fn log_fem_agrees_with_dg_p1() {
    // smooth datum, T = 2
    let u0 = InitialDatum::Cosine { mean: 0.6, amplitude: 0.4, wavenumber: 1.0 };
    let (d, dt, steps) = (0.05, 1.0 / 6.0, 12);
    let dg_density = |n: usize| {
        let mesh = Arc::new(Mesh1D::uniform(n, 0.0, 1.0).unwrap());
        let mut prm = SchemeParams::new(1);
        prm.dt = dt;
        prm.diffusion = d;
        run_simulation(&u0, mesh, &prm, steps).unwrap().last().lambda.clone()
    };
    let coarse = dg_density(20);
    let fine = dg_density(40);
    let fem = fem_p1_lambda_default(&u0, Arc::new(Mesh1D::uniform(20, 0.0, 1.0).unwrap()), &FemParams::new(d, dt), steps).unwrap();
    let fem = fem.last().unwrap();
    let quad = Quadrature::default();
    let dist = |f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64| {
        let fine_mesh = Mesh1D::uniform(400, 0.0, 1.0).unwrap();
        (0..400)
            .map(|e| {
                let h = fine_mesh.diameter(e);
                h * quad.integrate(|xi| {
                    let x = fine_mesh.to_physical(e, xi);
                    (f(x) - g(x)).powi(2)
                })
            })
            .sum::<f64>()
            .sqrt()
    };
    let dens = |lam: &entropy_dg_core::DgFunction| {
        let lam = lam.clone();
        move |x: f64| lam.eval_at(x).unwrap().exp()
    };
    let (c, f) = (dens(&coarse), dens(&fine));
    let halving = dist(&c, &f);
    let fem_gap = dist(&c, &|x| fem.density_at(x).unwrap());
    assert!(fem_gap < halving * 4.0 + 1e-12, "fem gap {fem_gap:e}, halving {halving:e}");
    assert!(l2_norm(&coarse, &quad).is_finite());
}

#[test]
fn wave_profile_solves_second_order_equation() {
    let c = 2.0;
    let tol = 1e-10;
    let w = traveling_wave_reference(c, 20.0, 1.0, -1e-10, tol).unwrap();
    let h = WAVE_SAMPLE_SPACING;
    let psi: Vec<f64> = w.samples.iter().map(|s| s.2).collect();
    let mut worst: f64 = 0.0;
    // sixth-order central differences
    let d1w = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let d2w = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
    for i in 3..psi.len() - 3 {
        let win = &psi[i - 3..=i + 3];
        let d1 = win.iter().zip(&d1w).map(|(a, b)| a * b).sum::<f64>() / h;
        let d2 = win.iter().zip(&d2w).map(|(a, b)| a * b).sum::<f64>() / (h * h);
        worst = worst.max((d2 + c * d1 + psi[i] * (1.0 - psi[i])).abs());
    }
    assert!(worst <= 10.0 * tol, "residual {worst:e}");
    assert!(w.samples.windows(2).all(|p| p[1].0 > p[0].0));
}
