//! Diagnostics battery: inequality checkers, oracles and the constant-state family.

use std::sync::Arc;

use entropy_dg_core::diagnostics::{
    check_entropy_step, coercivity_sides, compute_c_inv, entropy_density, entropy_step_threshold,
    inverse_trace_eigenvalue, remark_counterexample, constant_family_member, sigma_minus, sigma_plus,
};
use entropy_dg_core::forms::{residual, residual_exact_p1};
use entropy_dg_core::solver::RunStatus;
use entropy_dg_core::{DgFunction, Mesh1D, SchemeParams, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Outcome of one certificate: `worst_slack` is the smallest margin seen
/// (negative means violated), `checked` the number of instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub name: String,
    pub pass: bool,
    pub worst_slack: f64,
    pub checked: usize,
    pub failed: usize,
    pub detail: String,
}

impl Certificate {
    /// Builds a certificate from per-instance margins; an instance passes
    /// when its margin is at least `-tol`.
    pub fn from_margins(name: &str, margins: impl IntoIterator<Item = f64>, tol: f64, detail: impl Into<String>) -> Self {
        let mut worst = f64::INFINITY;
        let (mut checked, mut failed) = (0, 0);
        for m in margins {
            checked += 1;
            // NaN margins count as failures
            if !(m >= -tol) {
                failed += 1;
            }
            worst = worst.min(if m.is_nan() { f64::NEG_INFINITY } else { m });
        }
        Self { name: name.into(), pass: failed == 0 && checked > 0, worst_slack: worst, checked, failed, detail: detail.into() }
    }

    pub fn failed(name: &str, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass: false, worst_slack: f64::NEG_INFINITY, checked: 0, failed: 1, detail: detail.into() }
    }
}

/// Coercivity `B(v; v, v) ≥ RHS` on `samples` seeded random DG functions with
/// `p ∈ {1, 2, 3}`, `N_el ∈ {4, 16}` and coefficients uniform in `[-2, 2]`.
/// `C_inv` defaults to the computed constant of each degree.
pub fn coercivity(samples: usize, seed: u64, c_inv: Option<f64>) -> Certificate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margins = Vec::with_capacity(samples);
    for i in 0..samples {
        let p = 1 + i % 3;
        let n_el = if (i / 3) % 2 == 0 { 4 } else { 16 };
        let mesh = Arc::new(Mesh1D::uniform(n_el, 0.0, 1.0).expect("valid mesh"));
        let coeffs: Vec<f64> = (0..n_el * (p + 1)).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        let v = DgFunction::from_coeffs(mesh, p, coeffs).expect("sizes match");
        let mut prm = SchemeParams::new(p);
        if let Some(c) = c_inv {
            prm.c_inv = c;
        }
        margins.push(match coercivity_sides(&v, &prm) {
            Ok((lhs, rhs)) => lhs - rhs,
            Err(_) => f64::NAN,
        });
    }
    let which = c_inv.map_or("computed C_inv(p)".to_string(), |c| format!("C_inv = {c}"));
    Certificate::from_margins("coercivity", margins, 1e-10, format!("{samples} random functions, seed {seed}, {which}"))
}

/// `σ_-(s(x)) = x` on `[0, 1]` and `σ_+(s(x)) = x` on `[1, 10]`; margin is
/// `1e-10 - error`.
pub fn sigma_round_trip(points: usize) -> Certificate {
    let n = points.max(2);
    let mut margins = Vec::with_capacity(2 * n);
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        let back = entropy_density(x).and_then(sigma_minus);
        margins.push(back.map_or(f64::NAN, |b| 1e-10 - (b - x).abs()));
        let y = 1.0 + 9.0 * i as f64 / (n - 1) as f64;
        let back = entropy_density(y).and_then(sigma_plus);
        margins.push(back.map_or(f64::NAN, |b| 1e-10 - (b - y).abs()));
    }
    Certificate::from_margins("sigma_round_trip", margins, 0.0, format!("{n} points per branch"))
}

/// `C_inv(1)² = 6`, growth of `p² C_inv(p)²` in `p` and independence of the
/// element size, for `p = 1..=8`.
pub fn c_inv_oracle() -> Certificate {
    let mut margins = vec![1e-12 - (compute_c_inv(1).powi(2) - 6.0).abs()];
    for p in 1..8usize {
        let (a, b) = (compute_c_inv(p), compute_c_inv(p + 1));
        margins.push(b * b * ((p + 1) * (p + 1)) as f64 - a * a * (p * p) as f64);
    }
    for p in 1..=8 {
        let unit = inverse_trace_eigenvalue(p, 1.0);
        let scaled = 0.37 * inverse_trace_eigenvalue(p, 0.37);
        margins.push(1e-12 * unit - (unit - scaled).abs());
    }
    Certificate::from_margins("c_inv_oracle", margins, 0.0, "p = 1..8")
}

/// Constant-state family with `L = 2k`: each member passes the entropy-step
/// certificate as a constant state, `S_k` increases and ends within `1e-6`
/// of `|Ω|`.
pub fn constant_state_family(dt: f64, k_max: usize) -> Certificate {
    let mesh = Arc::new(Mesh1D::uniform(2, 0.0, 1.0).expect("valid mesh"));
    let mut prm = SchemeParams::new(1);
    prm.dt = dt;
    let measure = mesh.measure();
    let mut margins = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for k in 0..=k_max {
        let Ok((_, s)) = remark_counterexample(k, dt, mesh.clone(), 1) else {
            return Certificate::failed("constant_state_family", format!("member {k} could not be built"));
        };
        // nondecreasing; rounding flattens the sequence once s((1-Δt)^k) = |Ω| in floating point
        margins.push(if k == 0 { 0.0 } else { s - last });
        last = s;
        let l = 2 * k_max;
        if k >= 1 {
            let prev = constant_family_member(l, k - 1, dt, mesh.clone(), 1);
            let cur = constant_family_member(l, k, dt, mesh.clone(), 1);
            let slack = match (prev, cur) {
                (Ok(p), Ok(c)) => check_entropy_step(&c, &p, &prm).unwrap_or(f64::NAN),
                _ => f64::NAN,
            };
            margins.push(slack + 1e-9);
        }
    }
    margins.push(1e-6 - (last - measure).abs());
    Certificate::from_margins("constant_state_family", margins, 0.0, format!("dt = {dt}, k = 0..={k_max}"))
}

/// Quadrature residual against the closed-form `p = 1` residual on `samples`
/// seeded iterates with `|λ'| h ≤ 4`; margin is `1e-8 - relative error`.
pub fn p1_quadrature_oracle(samples: usize, seed: u64) -> Certificate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s3 = 3f64.sqrt();
    let mut margins = Vec::with_capacity(samples);
    for _ in 0..samples {
        let n_el = rng.gen_range(1..=12);
        let mesh = Arc::new(Mesh1D::uniform(n_el, 0.0, 1.0).expect("valid mesh"));
        let linear = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n_el)
                .flat_map(|_| {
                    let slope: f64 = rng.gen_range(-4.0..=4.0);
                    let level: f64 = rng.gen_range(-3.0..=1.0);
                    [level + 0.5 * slope, slope / (2.0 * s3)]
                })
                .collect()
        };
        let lam = DgFunction::from_coeffs(mesh.clone(), 1, linear(&mut rng)).expect("sizes match");
        let prev = DgFunction::from_coeffs(mesh, 1, linear(&mut rng)).expect("sizes match");
        let mut prm = SchemeParams::new(1);
        prm.diffusion = rng.gen_range(1e-4..=1.0);
        prm.dt = rng.gen_range(0.05..0.95);
        let margin = match (residual(&lam, &prev, &prm), residual_exact_p1(&lam, &prev, &prm)) {
            (Ok(q), Ok(e)) => {
                let scale = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let err = q.iter().zip(&e).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                1e-8 - err / scale
            }
            _ => f64::NAN,
        };
        margins.push(margin);
    }
    Certificate::from_margins("p1_quadrature_oracle", margins, 0.0, format!("{samples} iterates, seed {seed}"))
}

/// Run certificates of a DG time series: positivity, entropy monotonicity,
/// the entropy-step certificate, mass bounds and the DG-norm bound.
pub fn run_certificates(series: &TimeSeries, sampled_min_density: &[f64]) -> Vec<Certificate> {
    let prm = &series.params;
    let mut out = Vec::new();
    let completed = matches!(series.status, RunStatus::Completed);
    let note = if completed { String::new() } else { format!("run stopped early: {:?}", series.status) };
    let steps = &series.steps;
    out.push(Certificate::from_margins(
        "positivity",
        steps.iter().zip(sampled_min_density).map(|(s, m)| {
            let lo = s.report.min_density.min(*m);
            if lo.is_finite() && s.report.max_density.is_finite() && lo > 0.0 {
                lo
            } else {
                f64::NAN
            }
        }),
        0.0,
        format!("smallest density over quadrature and sample points{note}"),
    ));
    out.push(Certificate::from_margins(
        "entropy_monotone",
        steps.windows(2).map(|w| w[0].report.entropy - w[1].report.entropy),
        1e-9,
        "S_k <= S_{k-1} + 1e-9",
    ));
    out.push(Certificate::from_margins(
        "entropy_step",
        steps.iter().skip(1).map(|s| s.report.entropy_step_slack - entropy_step_threshold(&s.lambda, prm)),
        0.0,
        "slack >= -(tol ||lambda||_1 + 1e-9)",
    ));
    let s0 = steps.first().map_or(f64::NAN, |s| s.report.entropy);
    let measure = steps.first().map_or(1.0, |s| s.lambda.mesh().measure());
    let bounds = entropy_dg_core::diagnostics::mass_bounds(s0, measure);
    out.push(match bounds {
        Ok((lower, upper)) => Certificate::from_margins(
            "mass_bounds",
            steps.iter().map(|s| (s.report.mean_mass - lower).min(upper - s.report.mean_mass)),
            entropy_dg_core::diagnostics::MASS_BOUND_TOL,
            format!("sigma_-(S0/|Omega|) = {lower}, sigma_+(S0/|Omega|) = {upper}"),
        ),
        Err(e) => Certificate::failed("mass_bounds", e.to_string()),
    });
    out.push(Certificate::from_margins(
        "dgnorm_bound",
        steps.iter().skip(1).map(|s| {
            entropy_dg_core::diagnostics::check_dgnorm_bound(&s.lambda, s0, prm).map_or(f64::NAN, |b| b.slack())
        }),
        entropy_dg_core::diagnostics::CERTIFICATE_ABS_TOL,
        "gradient constant scaled by 1/D",
    ));
    if !completed {
        for c in &mut out {
            c.pass = false;
        }
    }
    out
}

/// The DG-norm bound with the constants as stated for `D = 1`, without the
/// `1/D` scaling. Reported for information.
pub fn dgnorm_bound_unscaled(series: &TimeSeries) -> Certificate {
    let prm = &series.params;
    let Some(first) = series.steps.first() else {
        return Certificate::failed("dgnorm_bound_unscaled", "empty series");
    };
    let s0 = first.report.entropy;
    let measure = first.lambda.mesh().measure();
    let c2 = prm.c_inv * prm.c_inv;
    let rhs = 2.0 * prm.dt * measure + (1.0 / (2.0 * c2.min(1.0))).max(prm.dt) * s0;
    Certificate::from_margins(
        "dgnorm_bound_unscaled",
        series.steps.iter().skip(1).map(|s| {
            let n = s.report.dg_half_norm;
            rhs - prm.dt * n * n
        }),
        entropy_dg_core::diagnostics::CERTIFICATE_ABS_TOL,
        format!("literal D = 1 constants, D = {}", prm.diffusion),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_fold() {
        let c = Certificate::from_margins("x", [1.0, -0.5e-9, 2.0], 1e-9, "");
        assert!(c.pass);
        assert_eq!(c.worst_slack, -0.5e-9);
        let c = Certificate::from_margins("x", [1.0, f64::NAN], 1e-9, "");
        assert!(!c.pass && c.failed == 1);
        assert!(!Certificate::from_margins("x", [], 0.0, "").pass);
    }

    #[test]
    fn battery_passes_with_defaults() {
        for c in [coercivity(30, 1, None), sigma_round_trip(200), c_inv_oracle(), constant_state_family(0.5, 200), p1_quadrature_oracle(10, 2)] {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn tiny_inverse_constant_breaks_coercivity() {
        assert!(!coercivity(30, 1, Some(0.01)).pass);
    }
}
