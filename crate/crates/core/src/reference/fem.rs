//! Continuous P1 finite elements with implicit Euler, in the density `u`
//! or in `λ = log u`. Initial data enter by nodal interpolation.

use std::fmt;
use std::sync::Arc;

use crate::dgspace::{DgFunction, Quadrature};
use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh1D;
use crate::solver::{InitialDatum, NewtonControls, NonConvergence, DENSITY_FLOOR, STALL_ITERATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FemVariable {
    Density,
    Log,
}

impl FemVariable {
    pub fn tag(self) -> &'static str {
        match self {
            FemVariable::Density => "u",
            FemVariable::Log => "lambda",
        }
    }
}

/// Nodal values of a continuous piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct FemFunction {
    pub mesh: Arc<Mesh1D>,
    pub values: Vec<f64>,
    pub variable: FemVariable,
}

impl FemFunction {
    /// Nodal densities (`e^λ` for the log variable).
    pub fn density(&self) -> Vec<f64> {
        match self.variable {
            FemVariable::Density => self.values.clone(),
            FemVariable::Log => self.values.iter().map(|l| l.exp()).collect(),
        }
    }

    /// Density at `x` (interpolated in the solved variable).
    pub fn density_at(&self, x: f64) -> Option<f64> {
        let (e, xi) = self.mesh.locate(x)?;
        let v = (1.0 - xi) * self.values[e] + xi * self.values[e + 1];
        Some(match self.variable {
            FemVariable::Density => v,
            FemVariable::Log => v.exp(),
        })
    }

    /// Equispaced density samples per element, endpoints included.
    pub fn sampled(&self, points_per_element: usize) -> Vec<(f64, f64)> {
        crate::dgspace::sample_broken(&self.mesh, points_per_element, |e, xi| {
            let v = (1.0 - xi) * self.values[e] + xi * self.values[e + 1];
            match self.variable {
                FemVariable::Density => v,
                FemVariable::Log => v.exp(),
            }
        })
    }

    /// `∫ u` with the exact integral of the interpolant for the density variable
    /// and `quad` otherwise.
    pub fn mass(&self, quad: &Quadrature) -> f64 {
        let m = &self.mesh;
        (0..m.n_elements())
            .map(|e| {
                let (a, b) = (self.values[e], self.values[e + 1]);
                match self.variable {
                    FemVariable::Density => 0.5 * m.diameter(e) * (a + b),
                    FemVariable::Log => m.diameter(e) * quad.integrate(|xi| ((1.0 - xi) * a + xi * b).exp()),
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemParams {
    pub diffusion: f64,
    pub dt: f64,
    pub reaction: bool,
    pub quad: Quadrature,
    pub newton: NewtonControls,
}

impl FemParams {
    pub fn new(diffusion: f64, dt: f64) -> Self {
        Self { diffusion, dt, reaction: true, quad: Quadrature::default(), newton: NewtonControls::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return Err(invalid(format!("diffusion must be positive, got {}", self.diffusion)));
        }
        self.newton.validate()
    }
}

/// Failed reference run: the step index, the cause and the states computed
/// before it (initial state included).
#[derive(Debug)]
pub struct FemError {
    pub step: usize,
    pub source: Error,
    pub partial: Vec<FemFunction>,
}

impl fmt::Display for FemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.source)
    }
}

impl std::error::Error for FemError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Tridiagonal matrix stored by diagonals.
#[derive(Clone)]
struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n.saturating_sub(1)], diag: vec![0.0; n], upper: vec![0.0; n.saturating_sub(1)] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.diag[i] += v;
        } else if j == i + 1 {
            self.upper[i] += v;
        } else {
            self.lower[j] += v;
        }
    }

    /// Divides every row by its largest entry; returns the row scales.
    fn equilibrate(&mut self) -> Vec<f64> {
        let n = self.diag.len();
        let mut scales = vec![0.0; n];
        for (i, s) in scales.iter_mut().enumerate() {
            let mut m = self.diag[i].abs();
            if i > 0 {
                m = m.max(self.lower[i - 1].abs());
            }
            if i + 1 < n {
                m = m.max(self.upper[i].abs());
            }
            *s = if m > 0.0 { m } else { 1.0 };
            self.diag[i] /= *s;
            if i > 0 {
                self.lower[i - 1] /= *s;
            }
            if i + 1 < n {
                self.upper[i] /= *s;
            }
        }
        scales
    }

    /// Gaussian elimination with partial pivoting (one extra superdiagonal of fill).
    fn solve(mut self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.diag.len();
        let mut b = rhs.to_vec();
        let mut upper2 = vec![0.0; n.saturating_sub(2)];
        for i in 0..n.saturating_sub(1) {
            if self.lower[i].abs() > self.diag[i].abs() {
                // swap rows i and i + 1
                std::mem::swap(&mut self.diag[i], &mut self.lower[i]);
                let (u_i, d_next) = (self.upper[i], self.diag[i + 1]);
                self.upper[i] = d_next;
                self.diag[i + 1] = u_i;
                if i + 1 < n - 1 {
                    upper2[i] = self.upper[i + 1];
                    self.upper[i + 1] = 0.0;
                }
                b.swap(i, i + 1);
            }
            if self.diag[i] == 0.0 {
                return None;
            }
            let m = self.lower[i] / self.diag[i];
            self.diag[i + 1] -= m * self.upper[i];
            if i + 1 < n - 1 {
                self.upper[i + 1] -= m * upper2[i];
            }
            b[i + 1] -= m * b[i];
        }
        if self.diag[n - 1] == 0.0 {
            return None;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.upper[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= upper2[i] * x[i + 2];
            }
            x[i] = s / self.diag[i];
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

/// Pointwise model: for value `w` of the solved variable returns
/// `(density, d density/dw, reaction, d reaction/dw, diffusivity, d diffusivity/dw)`.
type Pointwise = fn(f64, bool) -> [f64; 6];

fn density_model(u: f64, reaction: bool) -> [f64; 6] {
    let (r, dr) = if reaction { (u * (1.0 - u), 1.0 - 2.0 * u) } else { (0.0, 0.0) };
    [u, 1.0, r, dr, 1.0, 0.0]
}

fn log_model(l: f64, reaction: bool) -> [f64; 6] {
    let e = l.exp();
    let (r, dr) = if reaction { (e * (1.0 - e), e - 2.0 * e * e) } else { (0.0, 0.0) };
    [e, e, r, dr, e, e]
}

/// Residual of `∫ (ρ(w) - ρ_prev) φ_i + Δt D ∫ a(w) w' φ_i' - Δt ∫ r(w) φ_i`
/// and, when requested, its tridiagonal Jacobian.
fn assemble(
    mesh: &Mesh1D,
    w: &[f64],
    w_prev: &[f64],
    prm: &FemParams,
    model: Pointwise,
    with_jacobian: bool,
) -> Result<(Vec<f64>, Option<Tridiagonal>)> {
    let n = w.len();
    let mut res = vec![0.0; n];
    let mut jac = with_jacobian.then(|| Tridiagonal::zeros(n));
    let dd = prm.dt * prm.diffusion;
    for e in 0..mesh.n_elements() {
        let h = mesh.diameter(e);
        let (w0, w1) = (w[e], w[e + 1]);
        let (p0, p1) = (w_prev[e], w_prev[e + 1]);
        let grad = (w1 - w0) / h;
        for (xi, wq) in prm.quad.iter() {
            let phi = [1.0 - xi, xi];
            let dphi = [-1.0 / h, 1.0 / h];
            let wv = phi[0] * w0 + phi[1] * w1;
            let rho_prev_q = model(phi[0] * p0 + phi[1] * p1, false)[0];
            let [rho, drho, r, dr, a, da] = model(wv, prm.reaction);
            if !(rho.is_finite() && r.is_finite() && a.is_finite()) {
                return Err(Error::Overflow { element: e });
            }
            let jw = wq * h;
            for i in 0..2 {
                res[e + i] += jw * ((rho - rho_prev_q) * phi[i] + dd * a * grad * dphi[i] - prm.dt * r * phi[i]);
                if let Some(jac) = jac.as_mut() {
                    for j in 0..2 {
                        let v = jw
                            * ((drho - prm.dt * dr) * phi[j] * phi[i]
                                + dd * (da * phi[j] * grad + a * dphi[j]) * dphi[i]);
                        jac.add(e + i, e + j, v);
                    }
                }
            }
        }
    }
    Ok((res, jac))
}

/// The continuous P1 function with nodal values `w`, as a degree-1 DG function.
fn as_dg(mesh: &Mesh1D, w: &[f64]) -> DgFunction {
    let s3 = 3f64.sqrt();
    let coeffs = w.windows(2).flat_map(|p| [0.5 * (p[0] + p[1]), (p[1] - p[0]) / (2.0 * s3)]).collect();
    DgFunction::from_coeffs(Arc::new(mesh.clone()), 1, coeffs)
        .unwrap_or_else(|_| DgFunction::zeros(Arc::new(mesh.clone()), 1))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest nodal change of `λ` per Newton iteration.
pub const LOG_STEP_CAP: f64 = 2.0;

/// Damped Newton warm-started at `w_prev`. Rows are equilibrated, steps are
/// accepted by the natural monotonicity test (the first trial is capped at
/// `max_update` in the sup norm), and convergence needs both
/// `‖R‖∞ ≤ tol` and `‖δ‖∞ ≤ step_tol`: in the log variable rows scale like
/// `e^λ`, so a small residual alone leaves floor nodes undetermined.
fn newton(mesh: &Mesh1D, w_prev: &[f64], prm: &FemParams, model: Pointwise, max_update: f64) -> Result<Vec<f64>> {
    let ctl = prm.newton;
    let mut w = w_prev.to_vec();
    let mut history = Vec::new();
    let mut best_step = f64::INFINITY;
    let mut stalled = 0;
    let fail = |w: &[f64], history: &[f64], reason: &str| {
        Error::NonConvergence(Box::new(NonConvergence {
            last_iterate: as_dg(mesh, w),
            residual_history: history.to_vec(),
            reason: reason.to_string(),
        }))
    };
    for _ in 0..ctl.max_iter {
        let (res, jac) = assemble(mesh, &w, w_prev, prm, model, true)?;
        let rn = sup(&res);
        history.push(rn);
        let mut jac = jac.expect("jacobian requested");
        let scales = jac.equilibrate();
        let scaled_rhs = |r: &[f64]| r.iter().zip(&scales).map(|(r, s)| -r / s).collect::<Vec<f64>>();
        let delta = jac
            .clone()
            .solve(&scaled_rhs(&res))
            .ok_or_else(|| fail(&w, &history, "singular Newton system"))?;
        let dn = sup(&delta);
        if rn <= ctl.tol {
            if dn <= ctl.step_tol || rn == 0.0 {
                return Ok(w);
            }
            stalled = if dn < best_step { 0 } else { stalled + 1 };
            if stalled >= STALL_ITERATIONS {
                return Ok(w);
            }
        }
        best_step = best_step.min(dn);
        let mut step = (max_update / dn).min(1.0);
        let mut accepted = None;
        for _ in 0..=ctl.max_halvings {
            let trial: Vec<f64> = w.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            if let Ok((r, _)) = assemble(mesh, &trial, w_prev, prm, model, false) {
                let simplified = jac.clone().solve(&scaled_rhs(&r));
                if simplified.is_some_and(|c| sup(&c) <= (1.0 - 0.5 * step) * dn || sup(&r) <= ctl.tol) {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= ctl.damping;
        }
        let Some(trial) = accepted else {
            return Err(fail(&w, &history, "no acceptable damped step"));
        };
        w = trial;
    }
    Err(fail(&w, &history, "maximal number of Newton iterations exceeded"))
}

fn run(
    initial: Vec<f64>,
    mesh: Arc<Mesh1D>,
    prm: &FemParams,
    n_steps: usize,
    variable: FemVariable,
    model: Pointwise,
) -> std::result::Result<Vec<FemFunction>, FemError> {
    let max_update = match variable {
        FemVariable::Density => f64::INFINITY,
        FemVariable::Log => LOG_STEP_CAP,
    };
    let mut states = vec![FemFunction { mesh: mesh.clone(), values: initial, variable }];
    if let Err(source) = prm.validate() {
        return Err(FemError { step: 0, source, partial: states });
    }
    for k in 1..=n_steps {
        let prev = &states[k - 1].values;
        match newton(&mesh, prev, prm, model, max_update) {
            Ok(values) => states.push(FemFunction { mesh: mesh.clone(), values, variable }),
            Err(source) => return Err(FemError { step: k, source, partial: states }),
        }
    }
    Ok(states)
}

fn nodal(u0: &InitialDatum, mesh: &Mesh1D) -> Result<Vec<f64>> {
    u0.validate()?;
    Ok(mesh.nodes().iter().map(|&x| u0.density(x)).collect())
}

/// Standard Galerkin P1 scheme for `u`, reaction implicit, no positivity
/// safeguard. Returns the initial state followed by one state per step.
pub fn fem_p1_u(
    u0: &InitialDatum,
    mesh: Arc<Mesh1D>,
    prm: &FemParams,
    n_steps: usize,
) -> std::result::Result<Vec<FemFunction>, FemError> {
    match nodal(u0, &mesh) {
        Ok(v) => run(v, mesh, prm, n_steps, FemVariable::Density, density_model),
        Err(source) => Err(FemError { step: 0, source, partial: Vec::new() }),
    }
}

/// Galerkin P1 scheme for `λ = log u` with `λ⁰ = log max(u₀, floor)` at the nodes.
pub fn fem_p1_lambda(
    u0: &InitialDatum,
    mesh: Arc<Mesh1D>,
    prm: &FemParams,
    n_steps: usize,
    floor: f64,
) -> std::result::Result<Vec<FemFunction>, FemError> {
    if !(floor > 0.0) {
        return Err(FemError { step: 0, source: invalid("density floor must be positive"), partial: Vec::new() });
    }
    match nodal(u0, &mesh) {
        Ok(v) => {
            let lam = v.into_iter().map(|u| u.max(floor).ln()).collect();
            run(lam, mesh, prm, n_steps, FemVariable::Log, log_model)
        }
        Err(source) => Err(FemError { step: 0, source, partial: Vec::new() }),
    }
}

/// [`fem_p1_lambda`] with the default floor `1e-16`.
pub fn fem_p1_lambda_default(
    u0: &InitialDatum,
    mesh: Arc<Mesh1D>,
    prm: &FemParams,
    n_steps: usize,
) -> std::result::Result<Vec<FemFunction>, FemError> {
    fem_p1_lambda(u0, mesh, prm, n_steps, DENSITY_FLOOR)
}
