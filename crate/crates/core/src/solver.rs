//! Damped Newton per implicit Euler step and full-run orchestration.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::{discrete_entropy, step_report, StepReport};
use crate::dgspace::{project_composition, project_l2, trace_at, DgFunction};
use crate::error::{invalid, Error, Result};
use crate::forms::{Assembler, SchemeParams};
use crate::mesh::Mesh1D;

/// See [`NewtonControls`].
pub const STALL_ITERATIONS: usize = 3;

/// Density used in place of zero initial data, so that `log u₀` is finite.
pub const DENSITY_FLOOR: f64 = 1e-16;

/// Newton controls. Convergence needs `‖R‖∞ ≤ tol` and, unless the residual
/// is exactly zero, a Newton correction with `‖δ‖∞ ≤ step_tol`. Rows where
/// `e^λ` is tiny can meet `tol` while `λ` there is still far off, hence the
/// second test. If the correction stops shrinking (rounding floor) for
/// [`STALL_ITERATIONS`] iterations with `‖R‖∞ ≤ tol`, the iterate is accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonControls {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub damping: f64,
    pub step_tol: f64,
}

impl Default for NewtonControls {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, max_halvings: 30, damping: 0.5, step_tol: 1e-10 }
    }
}

impl NewtonControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("Newton tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("Newton max_iter must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(invalid(format!("damping factor must lie in (0, 1), got {}", self.damping)));
        }
        if !(self.step_tol > 0.0 && self.step_tol.is_finite()) {
            return Err(invalid(format!("step tolerance must be positive, got {}", self.step_tol)));
        }
        Ok(())
    }
}

/// Payload of a failed Newton solve.
#[derive(Debug, Clone)]
pub struct NonConvergence {
    pub last_iterate: DgFunction,
    pub residual_history: Vec<f64>,
    pub reason: String,
}

impl fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} iterations (last residual {:e})",
            self.reason,
            self.residual_history.len().saturating_sub(1),
            self.residual_history.last().copied().unwrap_or(f64::NAN)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    /// Merit `‖F‖∞` of the face-force system before the first and after
    /// every accepted update.
    pub residual_history: Vec<f64>,
    /// Total number of step halvings.
    pub halvings: usize,
    /// `‖R(λ)‖∞` of the returned iterate, evaluated directly.
    pub raw_residual: f64,
    /// Number of diffusion-continuation stages (0 when not needed).
    pub continuation_stages: usize,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Faces whose penalty weight reaches this value get a force unknown.
pub const STIFF_PENALTY: f64 = 100.0;

/// The step equations with one force unknown `μ_f` per stiff face:
///
/// ```text
/// R₀(λ) + Σ_f μ_f t_f = 0,      [λ]_f - μ_f / w_f(λ) = 0,
/// ```
///
/// where `R₀` is the residual without the penalty of the stiff faces, `t_f`
/// the jump of the test functions and `w_f = Δt D p²/h_f α_f`. Eliminating
/// `μ` gives back `R(λ) = 0`. The penalty weights can exceed `1e15` when the
/// density spans many orders of magnitude; in this form they only enter
/// through `1/w_f`, so rounding in `[λ]_f` is not amplified by `w_f`.
struct ForceSystem<'a> {
    asm: Assembler<'a>,
    lam_prev: &'a DgFunction,
    n: usize,
    /// Stiff face indices.
    stiff: Vec<usize>,
    /// `penalized[f]` for faces kept in `R₀`.
    penalized: Vec<bool>,
}

impl<'a> ForceSystem<'a> {
    fn new(asm: Assembler<'a>, lam_init: &DgFunction, lam_prev: &'a DgFunction) -> Result<Self> {
        let w = asm.penalty_weights(lam_init)?;
        let penalized: Vec<bool> = w.iter().map(|&w| w < STIFF_PENALTY).collect();
        let stiff = (0..w.len()).filter(|&f| !penalized[f]).collect();
        Ok(Self { asm, lam_prev, n: lam_init.coeffs().len(), stiff, penalized })
    }

    fn m(&self) -> usize {
        self.stiff.len()
    }

    fn eval(&self, lam: &DgFunction, mu: &[f64]) -> Result<Vec<f64>> {
        let mut f = self.asm.residual_masked(lam, self.lam_prev, &self.penalized)?;
        let w = self.asm.penalty_weights(lam)?;
        let faces = lam.mesh().faces();
        for (&fi, &mu_f) in self.stiff.iter().zip(mu) {
            for (row, v) in self.asm.penalty_direction(lam, &faces[fi]) {
                f[row] += v * mu_f;
            }
        }
        for (&fi, &mu_f) in self.stiff.iter().zip(mu) {
            let (minus, plus) = trace_at(lam, &faces[fi]);
            f.push(minus - plus - mu_f / w[fi]);
        }
        Ok(f)
    }

    fn jacobian(&self, lam: &DgFunction, mu: &[f64]) -> Result<DMatrix<f64>> {
        let nb = lam.n_basis();
        let (n, m) = (self.n, self.m());
        let mut jac = DMatrix::zeros(n + m, n + m);
        let base = self.asm.jacobian_masked(lam, &self.penalized)?;
        jac.view_mut((0, 0), (n, n)).copy_from(&base);
        let w = self.asm.penalty_weights(lam)?;
        let faces = lam.mesh().faces();
        let mut vals = vec![0.0; nb];
        let mut ders = vec![0.0; nb];
        crate::dgspace::basis::eval_basis(lam.degree(), 1.0, &mut vals, &mut ders);
        let right_end = vals.clone();
        crate::dgspace::basis::eval_basis(lam.degree(), 0.0, &mut vals, &mut ders);
        let left_end = vals;
        for (k, &fi) in self.stiff.iter().enumerate() {
            let face = &faces[fi];
            for (row, v) in self.asm.penalty_direction(lam, face) {
                jac[(row, n + k)] = v;
            }
            jac[(n + k, n + k)] = -1.0 / w[fi];
            let (_, dlog) = self.asm.log_alpha_with_gradient(lam, face);
            let ratio = mu[k] / w[fi];
            for j in 0..nb {
                jac[(n + k, face.left * nb + j)] = right_end[j] + ratio * dlog[0][j];
                jac[(n + k, face.right * nb + j)] = -left_end[j] + ratio * dlog[1][j];
            }
        }
        Ok(jac)
    }

    /// Least-squares forces for a given `λ`: minimizes `‖R₀ + Σ μ_f t_f‖₂`.
    fn initial_forces(&self, lam: &DgFunction) -> Result<Vec<f64>> {
        let m = self.m();
        if m == 0 {
            return Ok(Vec::new());
        }
        let r0 = self.asm.residual_masked(lam, self.lam_prev, &self.penalized)?;
        let faces = lam.mesh().faces();
        let mut t = DMatrix::zeros(self.n, m);
        for (k, &fi) in self.stiff.iter().enumerate() {
            for (row, v) in self.asm.penalty_direction(lam, &faces[fi]) {
                t[(row, k)] = v;
            }
        }
        let rhs = -(t.transpose() * DVector::from_column_slice(&r0));
        let normal = t.transpose() * &t;
        let chol = normal.cholesky().ok_or(Error::SingularSystem)?;
        Ok(chol.solve(&rhs).iter().copied().collect())
    }
}

/// The continuation fallback ends once the added density is this small
/// relative to the smallest density of `λ_prev`.
const LIFT_END: f64 = 1e-3;

/// Solves the scheme for `λ^k` given `λ^{k-1} = lam_prev`, starting at `lam_init`.
///
/// Damped Newton on the face-force form of the step equations. If it fails
/// from `lam_init`, `λ_prev` is replaced by the projection of
/// `log(e^{λ_prev} + θ)` with `θ` equal to the largest density, and `θ` is
/// lowered geometrically to 0, each stage warm-started from the previous
/// one; only the final stage (`θ = 0`) is returned. Plain Newton can fail
/// when `λ_prev` drops by tens of units across a face: the penalty there
/// is huge while the linearized mass `e^λ` on the low side is tiny.
pub fn newton_solve(
    lam_init: &DgFunction,
    lam_prev: &DgFunction,
    params: &SchemeParams,
) -> Result<(DgFunction, NewtonStats)> {
    params.validate()?;
    lam_init.check_same_space(lam_prev)?;
    let direct = newton_direct(lam_init, lam_prev, params);
    let Err(Error::NonConvergence(first)) = direct else {
        return direct;
    };
    let (min_density, max_density) = crate::diagnostics::density_range(lam_prev, &params.quad);
    let lifted = |theta: f64| {
        if theta == 0.0 {
            Ok(lam_prev.clone())
        } else {
            project_composition(lam_prev, |l| (l.exp() + theta).ln(), &params.quad)
        }
    };
    let mut theta = max_density;
    let start = lifted(theta)?;
    let Ok((mut lam, stats)) = newton_direct(&start, &start, params) else {
        return Err(Error::NonConvergence(first));
    };
    let mut iterations = stats.iterations;
    let mut halvings = stats.halvings;
    let mut factor: f64 = 100.0;
    let mut stages = 1;
    loop {
        let next = if theta / factor < LIFT_END * min_density { 0.0 } else { theta / factor };
        match newton_direct(&lam, &lifted(next)?, params) {
            Ok((l, stats)) => {
                stages += 1;
                iterations += stats.iterations;
                halvings += stats.halvings;
                lam = l;
                theta = next;
                if theta == 0.0 {
                    return Ok((
                        lam,
                        NewtonStats {
                            iterations,
                            residual_history: stats.residual_history,
                            halvings,
                            raw_residual: stats.raw_residual,
                            continuation_stages: stages,
                        },
                    ));
                }
                factor = (factor * factor).min(1e4);
            }
            Err(Error::NonConvergence(nc)) => {
                factor = factor.sqrt();
                if factor < 1.05 || stages > 200 {
                    let mut nc = *nc;
                    nc.reason = format!("{} (continuation stalled at added density {theta:e})", nc.reason);
                    return Err(Error::NonConvergence(Box::new(nc)));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn newton_direct(
    lam_init: &DgFunction,
    lam_prev: &DgFunction,
    params: &SchemeParams,
) -> Result<(DgFunction, NewtonStats)> {
    let ctl = params.newton;
    let sys = ForceSystem::new(Assembler::new(params), lam_init, lam_prev)?;
    let (n, m) = (sys.n, sys.m());
    let mut lam = lam_init.clone();
    let mut mu = sys.initial_forces(&lam)?;
    let mut res = sys.eval(&lam, &mu)?;
    let mut rn = sup(&res);
    let mut history = vec![rn];
    let mut halvings = 0;
    let mut last_level = f64::INFINITY;
    let mut stalled = 0;
    let fail = |lam: &DgFunction, history: &[f64], reason: &str| {
        Error::NonConvergence(Box::new(NonConvergence {
            last_iterate: lam.clone(),
            residual_history: history.to_vec(),
            reason: reason.to_string(),
        }))
    };
    let done = |lam: DgFunction, iterations: usize, history: Vec<f64>, halvings: usize| {
        let raw_residual = sys.asm.residual(&lam, lam_prev).map(|r| sup(&r)).unwrap_or(f64::INFINITY);
        Ok((lam, NewtonStats { iterations, residual_history: history, halvings, raw_residual, continuation_stages: 0 }))
    };
    if rn == 0.0 {
        return done(lam, 0, history, halvings);
    }
    for iter in 1..=ctl.max_iter {
        let mut a = sys.jacobian(&lam, &mu)?;
        let mut b = DVector::from_iterator(res.len(), res.iter().map(|r| -r));
        // Row equilibration: rows in low-density regions scale like e^λ.
        let mut scales = Vec::with_capacity(res.len());
        for i in 0..res.len() {
            let scale = a.row(i).iter().fold(0.0f64, |mx, x| mx.max(x.abs()));
            if scale == 0.0 || !scale.is_finite() {
                return Err(fail(&lam, &history, "singular Jacobian row"));
            }
            a.row_mut(i).scale_mut(1.0 / scale);
            b[i] /= scale;
            scales.push(scale);
        }
        let lu = a.lu();
        let delta = match lu.solve(&b) {
            Some(d) if d.iter().all(|x| x.is_finite()) => d,
            _ => return Err(fail(&lam, &history, "singular Newton system")),
        };
        // Natural monotonicity: a trial is accepted when the Newton
        // correction it would receive from the current Jacobian is smaller
        // than the current one. Unlike `‖F‖∞` this does not depend on the
        // row scaling, and rows range from e^λ ≈ 1e-16 to O(1).
        let weights: Vec<f64> =
            (0..n + m).map(|i| if i < n { 1.0 } else { 1.0 / mu[i - n].abs().max(1.0) }).collect();
        let level = |d: &DVector<f64>| d.iter().zip(&weights).fold(0.0f64, |mx, (x, w)| mx.max((x * w).abs()));
        let level_now = level(&delta);
        if rn <= ctl.tol {
            stalled = if level_now > 0.5 * last_level { stalled + 1 } else { 0 };
            if level_now <= ctl.step_tol || stalled >= STALL_ITERATIONS {
                return done(lam, iter - 1, history, halvings);
            }
        }
        last_level = level_now;
        let simplified = |r: &[f64]| {
            let rhs = DVector::from_iterator(r.len(), r.iter().zip(&scales).map(|(x, s)| -x / s));
            lu.solve(&rhs).filter(|d| d.iter().all(|x| x.is_finite()))
        };
        let mut step = 1.0;
        let mut accepted = None;
        for h in 0..=ctl.max_halvings {
            let trial =
                lam.with_coeffs(lam.coeffs().iter().zip(delta.rows(0, n).iter()).map(|(c, d)| c + step * d).collect());
            let trial_mu: Vec<f64> = mu.iter().zip(delta.rows(n, m).iter()).map(|(c, d)| c + step * d).collect();
            // An overflowing trial counts as "no decrease".
            if let Ok(r) = sys.eval(&trial, &trial_mu) {
                if simplified(&r).is_some_and(|d| level(&d) < level_now) {
                    halvings += h;
                    accepted = Some((trial, trial_mu));
                    break;
                }
            }
            step *= ctl.damping;
        }
        let Some((trial, trial_mu)) = accepted else {
            if rn <= ctl.tol {
                // Rounding floor reached before the correction became small.
                return done(lam, iter - 1, history, halvings);
            }
            return Err(fail(&lam, &history, "no decrease after maximal damping"));
        };
        lam = trial;
        mu = trial_mu;
        res = sys.eval(&lam, &mu)?;
        rn = sup(&res);
        history.push(rn);
        if rn == 0.0 {
            return done(lam, iter, history, halvings);
        }
    }
    Err(fail(&lam, &history, "maximal number of Newton iterations exceeded"))
}

/// Initial densities `u₀`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    Constant(f64),
    /// `value` on each open interval `(a, b)`, `background` elsewhere.
    Steps { segments: Vec<(f64, f64, f64)>, background: f64 },
    /// `mean + amplitude · cos(wavenumber · π x)`.
    Cosine { mean: f64, amplitude: f64, wavenumber: f64 },
    /// Piecewise-linear interpolation of `(x, u)` samples, constant beyond the ends.
    Tabulated(Vec<(f64, f64)>),
}

impl InitialDatum {
    pub fn density(&self, x: f64) -> f64 {
        match self {
            InitialDatum::Constant(c) => *c,
            InitialDatum::Steps { segments, background } => segments
                .iter()
                .find(|(a, b, _)| *a < x && x < *b)
                .map_or(*background, |s| s.2),
            InitialDatum::Cosine { mean, amplitude, wavenumber } => {
                mean + amplitude * (wavenumber * std::f64::consts::PI * x).cos()
            }
            InitialDatum::Tabulated(pts) => {
                if pts.is_empty() {
                    return f64::NAN;
                }
                if x <= pts[0].0 {
                    return pts[0].1;
                }
                let last = pts[pts.len() - 1];
                if x >= last.0 {
                    return last.1;
                }
                let i = pts.partition_point(|p| p.0 <= x);
                let (x0, u0) = pts[i - 1];
                let (x1, u1) = pts[i];
                u0 + (u1 - u0) * (x - x0) / (x1 - x0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |v: f64| !(v.is_finite() && v >= 0.0);
        match self {
            InitialDatum::Constant(c) if bad(*c) => Err(invalid("initial density must be finite and >= 0")),
            InitialDatum::Steps { segments, background } => {
                if bad(*background) || segments.iter().any(|s| bad(s.2) || !(s.0 < s.1)) {
                    Err(invalid("step segments need a < b and finite values >= 0"))
                } else {
                    Ok(())
                }
            }
            InitialDatum::Cosine { mean, amplitude, wavenumber } => {
                if ![mean, amplitude, wavenumber].iter().all(|v| v.is_finite()) || *mean < amplitude.abs() {
                    Err(invalid("cosine datum must be finite and nonnegative"))
                } else {
                    Ok(())
                }
            }
            InitialDatum::Tabulated(pts) => {
                if pts.is_empty() || pts.iter().any(|p| !p.0.is_finite() || bad(p.1)) {
                    Err(invalid("tabulated datum needs finite samples with u >= 0"))
                } else if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                    Err(invalid("tabulated abscissae must be strictly increasing"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// `λ⁰ = Π_{L²} log(max(u₀, 1e-16))`.
pub fn initial_lambda(u0: &InitialDatum, mesh: Arc<Mesh1D>, params: &SchemeParams) -> Result<DgFunction> {
    u0.validate()?;
    project_l2(|x| u0.density(x).max(DENSITY_FLOOR).ln(), mesh, params.degree, &params.quad)
}

#[derive(Debug, Clone)]
pub struct TimeStep {
    pub k: usize,
    pub t: f64,
    pub lambda: DgFunction,
    pub report: StepReport,
    /// `None` for the initial datum.
    pub newton: Option<NewtonStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// Newton failed at this step.
    Failed { step: usize },
}

#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub params: SchemeParams,
    pub steps: Vec<TimeStep>,
    pub status: RunStatus,
}

impl TimeSeries {
    pub fn entropies(&self) -> Vec<(f64, f64)> {
        self.steps.iter().map(|s| (s.t, s.report.entropy)).collect()
    }

    pub fn last(&self) -> &TimeStep {
        self.steps.last().expect("a time series holds at least the initial step")
    }
}

/// A failed run: the step index, the cause and the steps completed so far.
#[derive(Debug)]
pub struct SimulationError {
    pub step: usize,
    pub source: Error,
    pub partial: TimeSeries,
}

impl fmt::Display for SimulationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.source)
    }
}

impl std::error::Error for SimulationError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl From<SimulationError> for Error {
    fn from(e: SimulationError) -> Self {
        e.source
    }
}

/// Runs `n_steps` implicit Euler steps from `u0`.
pub fn run_simulation(
    u0: &InitialDatum,
    mesh: Arc<Mesh1D>,
    params: &SchemeParams,
    n_steps: usize,
) -> std::result::Result<TimeSeries, SimulationError> {
    let early = |source| SimulationError {
        step: 0,
        source,
        partial: TimeSeries { params: params.clone(), steps: Vec::new(), status: RunStatus::Failed { step: 0 } },
    };
    let lam0 = initial_lambda(u0, mesh, params).map_err(early)?;
    run_simulation_from(lam0, params, n_steps)
}

/// Runs `n_steps` implicit Euler steps from a given `λ⁰`.
pub fn run_simulation_from(
    lam0: DgFunction,
    params: &SchemeParams,
    n_steps: usize,
) -> std::result::Result<TimeSeries, SimulationError> {
    let mut series = TimeSeries { params: params.clone(), steps: Vec::new(), status: RunStatus::Completed };
    let fail = |series: TimeSeries, step: usize, source: Error| {
        let mut partial = series;
        partial.status = RunStatus::Failed { step };
        SimulationError { step, source, partial }
    };
    if n_steps == 0 {
        return Err(fail(series, 0, invalid("at least one time step is required")));
    }
    if let Err(e) = params.validate() {
        return Err(fail(series, 0, e));
    }
    if lam0.degree() != params.degree {
        return Err(fail(series, 0, Error::Mismatch("initial datum degree differs from scheme".into())));
    }
    let s0 = match discrete_entropy(&lam0, &params.quad) {
        Ok(s) => s,
        Err(e) => return Err(fail(series, 0, e)),
    };
    let report = match step_report(&lam0, None, s0, params) {
        Ok(r) => r,
        Err(e) => return Err(fail(series, 0, e)),
    };
    series.steps.push(TimeStep { k: 0, t: 0.0, lambda: lam0, report, newton: None });
    for k in 1..=n_steps {
        let prev = &series.steps[k - 1].lambda;
        let outcome = newton_solve(prev, prev, params)
            .and_then(|(lam, stats)| step_report(&lam, Some(prev), s0, params).map(|r| (lam, stats, r)));
        match outcome {
            Ok((lam, stats, report)) => series.steps.push(TimeStep {
                k,
                t: k as f64 * params.dt,
                lambda: lam,
                report,
                newton: Some(stats),
            }),
            Err(e) => return Err(fail(series, k, e)),
        }
    }
    Ok(series)
}
