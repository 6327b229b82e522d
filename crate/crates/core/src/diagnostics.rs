//! Entropy functionals and runtime certificates for the structural
//! properties of the scheme: coercivity of `B`, the discrete entropy
//! inequality, mass bracketing, the uniform DG-norm bound and entropy decay.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dgspace::{basis, dg_norm_of, trace_at, BasisTable, DgFunction, Quadrature};
use crate::error::{invalid, Error, Result};
use crate::forms::{Assembler, SchemeParams};
use crate::mesh::Mesh1D;
use crate::solver::TimeSeries;

/// Absolute slack allowed in the entropy and DG-norm certificates on top of
/// the Newton residual contribution.
pub const CERTIFICATE_ABS_TOL: f64 = 1e-9;

/// Tolerance of the mass bracketing certificate.
pub const MASS_BOUND_TOL: f64 = 1e-10;

/// Entropy density `s(u) = u (log u - 1) + 1`, with `s(0) = 1`.
pub fn entropy_density(u: f64) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return Err(invalid(format!("entropy density needs u >= 0, got {u}")));
    }
    Ok(entropy_of_density(u))
}

fn entropy_of_density(u: f64) -> f64 {
    if u == 0.0 {
        return 1.0;
    }
    let d = u - 1.0;
    if d.abs() < 1e-2 {
        // s(1 + d) = Σ_{n≥2} (-1)^n d^n / (n (n - 1))
        let mut pow = d * d;
        let mut sum = 0.0;
        for n in 2..24 {
            let term = pow / (n * (n - 1)) as f64;
            sum += if n % 2 == 0 { term } else { -term };
            pow *= d;
        }
        sum
    } else {
        u * u.ln() - u + 1.0
    }
}

/// `s(e^λ) = λ e^λ - (e^λ - 1)`, accurate for small `|λ|`.
pub fn entropy_of_log(lam: f64) -> f64 {
    if lam.abs() < 1e-2 {
        // Σ_{n≥2} λ^n (n - 1) / n!
        let mut term = lam; // λ^n / n!
        let mut sum = 0.0;
        for n in 2..20 {
            term *= lam / n as f64;
            sum += (n - 1) as f64 * term;
        }
        sum
    } else {
        lam * lam.exp() - lam.exp_m1()
    }
}

/// Quadrature value of `∫_Ω g(λ(x)) dx`; fails if `g` is not finite.
fn integrate_of(lam: &DgFunction, quad: &Quadrature, g: impl Fn(f64) -> f64) -> Result<f64> {
    let mesh = lam.mesh();
    let table = BasisTable::new(lam.degree(), quad);
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let c = lam.element_coeffs(e);
        let mut sum = 0.0;
        for (q, &w) in quad.weights().iter().enumerate() {
            let l: f64 = c.iter().zip(table.vals(q)).map(|(a, b)| a * b).sum();
            let val = g(l);
            if !val.is_finite() {
                return Err(Error::Overflow { element: e });
            }
            sum += w * val;
        }
        total += mesh.diameter(e) * sum;
    }
    Ok(total)
}

/// Discrete entropy `∫_Ω s(e^λ) dx`.
pub fn discrete_entropy(lam: &DgFunction, quad: &Quadrature) -> Result<f64> {
    integrate_of(lam, quad, entropy_of_log)
}

/// Total mass `∫_Ω e^λ dx`.
pub fn mass(lam: &DgFunction, quad: &Quadrature) -> Result<f64> {
    integrate_of(lam, quad, f64::exp)
}

/// `‖e^λ - 1‖_{L¹}`.
pub fn l1_distance_to_one(lam: &DgFunction, quad: &Quadrature) -> Result<f64> {
    integrate_of(lam, quad, |l| l.exp_m1().abs())
}

/// `∫_Ω e^λ (e^λ - 1) λ dx`, nonnegative pointwise.
pub fn reaction_entropy(lam: &DgFunction, quad: &Quadrature) -> Result<f64> {
    integrate_of(lam, quad, |l| l.exp() * l.exp_m1() * l)
}

/// `‖e^{λ/2}‖_DG`.
pub fn dg_half_norm(lam: &DgFunction, quad: &Quadrature) -> f64 {
    dg_norm_of(lam.mesh(), lam.degree(), quad, |e, xi| {
        let (v, g) = lam.eval_with_gradient(e, xi);
        let half = (0.5 * v).exp();
        (half, 0.5 * half * g)
    })
}

fn bisect(mut lo: f64, mut hi: f64, increasing: bool, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let above = f(mid) > target;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse of `s` on `[0, 1]`; zero for `v ≥ 1`.
pub fn sigma_minus(v: f64) -> Result<f64> {
    if v.is_nan() || v < 0.0 {
        return Err(invalid(format!("sigma_minus needs v >= 0, got {v}")));
    }
    if v >= 1.0 {
        return Ok(0.0);
    }
    if v == 0.0 {
        return Ok(1.0);
    }
    Ok(bisect(0.0, 1.0, false, v, entropy_of_density))
}

/// Inverse of `s` on `[1, ∞)`.
pub fn sigma_plus(v: f64) -> Result<f64> {
    if v.is_nan() || v < 0.0 || v.is_infinite() {
        return Err(invalid(format!("sigma_plus needs finite v >= 0, got {v}")));
    }
    if v == 0.0 {
        return Ok(1.0);
    }
    // s(v + 2) ≥ v for all v ≥ 0.
    Ok(bisect(1.0, v + 2.0, true, v, entropy_of_density))
}

/// Mean-mass bracket `[σ_-(S⁰/|Ω|), σ_+(S⁰/|Ω|)]`.
pub fn mass_bounds(s0: f64, measure: f64) -> Result<(f64, f64)> {
    let v = s0 / measure;
    Ok((sigma_minus(v)?, sigma_plus(v)?))
}

/// Constant `C` in `‖e^λ - 1‖_{L¹} ≤ C (S_h^k)^{1/2}`, valid when `S⁰ < |Ω|`.
pub fn l1_decay_constant(s0: f64, measure: f64) -> Result<f64> {
    let up = sigma_plus(s0 / measure)?;
    Ok((2.0 * up / measure).sqrt() + (std::f64::consts::E - 1.0) * measure.sqrt())
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Entropy `∫ s(e^λ)`.
    pub entropy: f64,
    pub mass: f64,
    pub mean_mass: f64,
    pub l1_dist: f64,
    pub dg_half_norm: f64,
    /// `B(λ; λ, λ)`.
    pub b_value: f64,
    pub reaction_entropy: f64,
    /// Slack of the entropy-step certificate (zero at the initial step).
    pub entropy_step_slack: f64,
    pub mass_lower_ok: bool,
    pub mass_upper_ok: bool,
    /// Uniform DG-norm bound; it only applies to solutions of the scheme,
    /// so it is reported as satisfied for the initial datum.
    pub dgnorm_bound_ok: bool,
    /// Smallest / largest density over quadrature nodes and element ends.
    pub min_density: f64,
    pub max_density: f64,
}

impl StepReport {
    pub fn mass_bounds_ok(&self) -> bool {
        self.mass_lower_ok && self.mass_upper_ok
    }
}

/// Diagnostics of `lam` as step `k` of a run whose initial entropy is `s0`;
/// `lam_prev` is step `k - 1` (`None` for the initial datum).
pub fn step_report(
    lam: &DgFunction,
    lam_prev: Option<&DgFunction>,
    s0: f64,
    params: &SchemeParams,
) -> Result<StepReport> {
    let quad = &params.quad;
    let measure = lam.mesh().measure();
    let entropy = discrete_entropy(lam, quad)?;
    let total_mass = mass(lam, quad)?;
    let mean_mass = total_mass / measure;
    let (lower, upper) = mass_bounds(s0, measure)?;
    let entropy_step_slack = match lam_prev {
        Some(prev) => check_entropy_step(lam, prev, params)?,
        None => 0.0,
    };
    let (min_density, max_density) = density_range(lam, quad);
    Ok(StepReport {
        entropy,
        mass: total_mass,
        mean_mass,
        l1_dist: l1_distance_to_one(lam, quad)?,
        dg_half_norm: dg_half_norm(lam, quad),
        b_value: Assembler::new(params).b_form(lam, lam, lam)?,
        reaction_entropy: reaction_entropy(lam, quad)?,
        entropy_step_slack,
        mass_lower_ok: mean_mass >= lower - MASS_BOUND_TOL,
        mass_upper_ok: mean_mass <= upper + MASS_BOUND_TOL,
        dgnorm_bound_ok: lam_prev.is_none() || check_dgnorm_bound(lam, s0, params)?.ok,
        min_density,
        max_density,
    })
}

/// Range of `e^λ` over the quadrature nodes and both ends of every element.
pub fn density_range(lam: &DgFunction, quad: &Quadrature) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in 0..lam.n_elements() {
        for xi in quad.nodes().iter().copied().chain([0.0, 1.0]) {
            let u = lam.eval(e, xi).exp();
            lo = lo.min(u);
            hi = hi.max(u);
        }
    }
    (lo, hi)
}

/// Entropy-step slack
/// `S_{k-1} - S_k - Δt D B(λ_k; λ_k, λ_k) - ε‖λ_k‖² - Δt ∫ e^λk (e^λk - 1) λ_k`.
///
/// Testing the scheme with `λ_k` and using convexity of `s` shows the slack
/// is at least `-⟨R(λ_k), λ_k⟩`, so it is nonnegative up to the Newton
/// residual and rounding. With the reaction switched off the last term is
/// dropped.
pub fn check_entropy_step(
    lam_k: &DgFunction,
    lam_prev: &DgFunction,
    params: &SchemeParams,
) -> Result<f64> {
    lam_k.check_same_space(lam_prev)?;
    let quad = &params.quad;
    let s_prev = discrete_entropy(lam_prev, quad)?;
    let s_k = discrete_entropy(lam_k, quad)?;
    let b = Assembler::new(params).b_form(lam_k, lam_k, lam_k)?;
    let reg = if params.eps > 0.0 { params.eps * integrate_of(lam_k, quad, |l| l * l)? } else { 0.0 };
    let react = if params.reaction { params.dt * reaction_entropy(lam_k, quad)? } else { 0.0 };
    Ok(s_prev - s_k - params.dt * params.diffusion * b - reg - react)
}

/// Certified lower limit for [`check_entropy_step`]: `-(tol ‖λ_k‖₁ + 1e-9)`,
/// where `‖λ_k‖₁ = Σ_K √h_K Σ_n |c_n|` is dual to the residual sup norm.
pub fn entropy_step_threshold(lam_k: &DgFunction, params: &SchemeParams) -> f64 {
    let mesh = lam_k.mesh();
    let weighted: f64 = (0..mesh.n_elements())
        .map(|e| mesh.diameter(e).sqrt() * lam_k.element_coeffs(e).iter().map(|c| c.abs()).sum::<f64>())
        .sum();
    -(params.newton.tol * weighted + CERTIFICATE_ABS_TOL)
}

/// Outcome of the uniform DG-norm bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgNormBound {
    /// `Δt ‖e^{λ/2}‖²_DG`.
    pub lhs: f64,
    /// `2Δt|Ω| + max{1/(2 D min{1, C_inv²}), Δt} S⁰`.
    pub rhs: f64,
    pub ok: bool,
}

impl DgNormBound {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Uniform DG-norm bound for a solution of the scheme. The diffusion
/// coefficient enters the gradient constant because it scales `B`; for
/// `D = 1` this is the classical bound.
pub fn check_dgnorm_bound(lam_k: &DgFunction, s0: f64, params: &SchemeParams) -> Result<DgNormBound> {
    let measure = lam_k.mesh().measure();
    let norm = dg_half_norm(lam_k, &params.quad);
    let lhs = params.dt * norm * norm;
    let c2 = params.c_inv * params.c_inv;
    let grad_const = 1.0 / (2.0 * params.diffusion * c2.min(1.0));
    let rhs = 2.0 * params.dt * measure + grad_const.max(params.dt) * s0;
    if !lhs.is_finite() {
        return Err(Error::Overflow { element: 0 });
    }
    Ok(DgNormBound { lhs, rhs, ok: lhs <= rhs + CERTIFICATE_ABS_TOL })
}

/// Result of the mass bracketing check over a whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBoundsReport {
    pub lower: f64,
    pub upper: f64,
    /// `min_k (mean_mass_k - lower)`.
    pub worst_lower_margin: f64,
    /// `min_k (upper - mean_mass_k)`.
    pub worst_upper_margin: f64,
    pub ok: bool,
}

/// Checks `σ_-(S⁰/|Ω|) ≤ mean mass ≤ σ_+(S⁰/|Ω|)` at every step of `series`.
pub fn check_mass_bounds(series: &TimeSeries) -> Result<MassBoundsReport> {
    let first = series.steps.first().ok_or_else(|| invalid("empty time series"))?;
    let measure = first.lambda.mesh().measure();
    let s0 = first.report.entropy;
    let (lower, upper) = mass_bounds(s0, measure)?;
    let mut worst_lower_margin = f64::INFINITY;
    let mut worst_upper_margin = f64::INFINITY;
    for step in &series.steps {
        worst_lower_margin = worst_lower_margin.min(step.report.mean_mass - lower);
        worst_upper_margin = worst_upper_margin.min(upper - step.report.mean_mass);
    }
    let ok = worst_lower_margin >= -MASS_BOUND_TOL && worst_upper_margin >= -MASS_BOUND_TOL;
    Ok(MassBoundsReport { lower, upper, worst_lower_margin, worst_upper_margin, ok })
}

/// Both sides of the coercivity inequality
/// `B(v; v, v) ≥ 2 Σ_K ∫ |∇e^{v/2}|² + 2 C_inv² Σ_f p²/h_f [e^{v/2}]²`.
pub fn coercivity_sides(v: &DgFunction, params: &SchemeParams) -> Result<(f64, f64)> {
    let lhs = Assembler::new(params).b_form(v, v, v)?;
    let mesh = v.mesh();
    let mut grad = 0.0;
    for e in 0..mesh.n_elements() {
        let h = mesh.diameter(e);
        grad += h * params.quad.integrate(|xi| {
            let (val, g) = v.eval_with_gradient(e, xi);
            let d = 0.5 * (0.5 * val).exp() * g;
            d * d
        });
    }
    let p2 = (params.degree * params.degree) as f64;
    let mut jumps = 0.0;
    for face in mesh.faces() {
        let (m, p) = trace_at(v, face);
        let j = (0.5 * m).exp() - (0.5 * p).exp();
        jumps += p2 / face.h * j * j;
    }
    let rhs = 2.0 * grad + 2.0 * params.c_inv * params.c_inv * jumps;
    Ok((lhs, rhs))
}

/// Least-squares slope of `log S` against `t` over `samples[window]`.
pub fn fit_decay_rate(samples: &[(f64, f64)], window: Range<usize>) -> Result<f64> {
    let w = samples
        .get(window.clone())
        .ok_or_else(|| invalid(format!("window {window:?} out of range")))?;
    if w.len() < 3 {
        return Err(invalid("decay fit needs at least three samples"));
    }
    if let Some(&(t, s)) = w.iter().find(|(_, s)| !(*s > 0.0)) {
        return Err(invalid(format!("nonpositive entropy {s} at t = {t}")));
    }
    let n = w.len() as f64;
    let tm = w.iter().map(|(t, _)| t).sum::<f64>() / n;
    let lm = w.iter().map(|(_, s)| s.ln()).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, s) in w {
        num += (t - tm) * (s.ln() - lm);
        den += (t - tm) * (t - tm);
    }
    if den == 0.0 {
        return Err(invalid("decay fit needs distinct times"));
    }
    Ok(num / den)
}

/// Step `k` of the constant-in-space family `λ_k = (L - k)⁺ log(1 - Δt)`.
pub fn constant_family_member(
    l: usize,
    k: usize,
    dt: f64,
    mesh: Arc<Mesh1D>,
    degree: usize,
) -> Result<DgFunction> {
    if !(dt > 0.0 && dt < 1.0) {
        return Err(invalid(format!("time step must lie in (0, 1), got {dt}")));
    }
    let value = l.saturating_sub(k) as f64 * (-dt).ln_1p();
    Ok(DgFunction::constant(mesh, degree, value))
}

/// Member `k` of the family with `L = 2k`: the constant `λ = k log(1 - Δt)`
/// together with its entropy `s((1 - Δt)^k) |Ω|`, which tends to `|Ω|`.
pub fn remark_counterexample(
    k: usize,
    dt: f64,
    mesh: Arc<Mesh1D>,
    degree: usize,
) -> Result<(DgFunction, f64)> {
    let measure = mesh.measure();
    let lam = constant_family_member(2 * k, k, dt, mesh, degree)?;
    let value = lam.element_coeffs(0)[0];
    Ok((lam, entropy_of_log(value) * measure))
}

/// Largest eigenvalue `μ` of `E x = μ M x` on `P_p(0, h)`, where `E` is the
/// Gram matrix of the two endpoint evaluations and `M` the `L²(0, h)` mass
/// matrix, both in the unnormalized Legendre basis.
pub fn inverse_trace_eigenvalue(degree: usize, h: f64) -> f64 {
    let nb = degree + 1;
    let quad = crate::dgspace::gauss_legendre_rule(degree + 2).expect("rule size within range");
    let unnormalized = |n: usize, xi: f64| {
        let mut vals = vec![0.0; nb];
        let mut ders = vec![0.0; nb];
        basis::eval_basis(degree, xi, &mut vals, &mut ders);
        vals[n] / (2.0 * n as f64 + 1.0).sqrt()
    };
    let mass = DMatrix::from_fn(nb, nb, |i, j| {
        h * quad.integrate(|xi| unnormalized(i, xi) * unnormalized(j, xi))
    });
    let a: Vec<f64> = (0..nb).map(|i| unnormalized(i, 0.0)).collect();
    let b: Vec<f64> = (0..nb).map(|i| unnormalized(i, 1.0)).collect();
    let gram = DMatrix::from_fn(nb, nb, |i, j| a[i] * a[j] + b[i] * b[j]);
    let chol = mass.cholesky().expect("mass matrix is positive definite");
    let l = chol.l();
    let l_inv = l.clone().try_inverse().expect("Cholesky factor is invertible");
    let reduced = &l_inv * gram * l_inv.transpose();
    let sym = 0.5 * (&reduced + reduced.transpose());
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest `C_inv` with `ξ(0)² + ξ(h)² ≤ C_inv² p²/h ‖ξ‖²_{L²(0,h)}` on `P_p`.
pub fn compute_c_inv(degree: usize) -> f64 {
    let p = degree.max(1) as f64;
    (inverse_trace_eigenvalue(degree.max(1), 1.0) / (p * p)).sqrt()
}
