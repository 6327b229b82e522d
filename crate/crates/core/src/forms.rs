//! Interior-penalty forms of the exponential-variable scheme.
//!
//! The nonlinear diffusion form is
//!
//! ```text
//! B(u; v, w) = Σ_K ∫_K e^u v' w'
//!            + Σ_f ( -{e^u v'}[w] - {e^u w'}[v] + p²/h_f α(u) [v][w] )
//! ```
//!
//! with the face penalty
//! `α(u) = 3/2 C_inv² max{(e^u)_-, (e^u)_+}² max{exp‖u‖_{L∞(K-)}, exp‖u‖_{L∞(K+)}}`.
//! The scheme evaluates both maxima as log-sum-exp upper bounds with
//! sharpness [`PENALTY_SHARPNESS`] over the traces and over the sampled
//! values of `|u|` on both elements, so `α` never drops below the formula
//! above (with sampled sup norms) and is smooth in the coefficients.
//!
//! One implicit Euler step for `λ^k` solves, for every test function `φ`,
//!
//! ```text
//! ∫ (e^λ - e^λprev) φ + Δt D B(λ; λ, φ) + ε ∫ λ φ - Δt ∫ e^λ (1 - e^λ) φ = 0.
//! ```
//!
//! Residual component `(K, i)` is tested against the `L²(K)`-orthonormal
//! function `φ_i((x - x_K)/h_K) / √h_K`; unknowns are the reference-basis
//! coefficients stored in [`DgFunction`].

use nalgebra::DMatrix;

use crate::dgspace::basis::eval_basis;
use crate::dgspace::{elementwise_linf, linf_samples, trace_at, BasisTable, DgFunction, Quadrature};
use crate::error::{invalid, Error, Result};
use crate::mesh::InteriorFace;
use crate::solver::NewtonControls;

/// Everything one step of the scheme is parameterized by.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    /// Diffusion coefficient `D`; multiplies the whole form `B`.
    pub diffusion: f64,
    /// Time step, restricted to `(0, 1)`.
    pub dt: f64,
    /// Regularization `ε ≥ 0`.
    pub eps: f64,
    /// Polynomial degree `p ≥ 1`.
    pub degree: usize,
    /// Inverse-trace constant entering the penalty.
    pub c_inv: f64,
    pub quad: Quadrature,
    pub newton: NewtonControls,
    /// Logistic reaction on/off (off gives pure diffusion).
    pub reaction: bool,
}

impl SchemeParams {
    /// Defaults: `D = 1`, `Δt = 0.1`, `ε = 0`, computed `C_inv(p)`, 8-point Gauss.
    pub fn new(degree: usize) -> Self {
        Self {
            diffusion: 1.0,
            dt: 0.1,
            eps: 0.0,
            degree,
            c_inv: crate::diagnostics::compute_c_inv(degree.max(1)),
            quad: Quadrature::default(),
            newton: NewtonControls::default(),
            reaction: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt < 1.0) {
            return Err(invalid(format!("time step must lie in (0, 1), got {}", self.dt)));
        }
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return Err(invalid(format!("diffusion must be positive, got {}", self.diffusion)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("regularization must be >= 0, got {}", self.eps)));
        }
        if self.degree == 0 {
            return Err(invalid("polynomial degree must be at least 1"));
        }
        if !(self.c_inv > 0.0 && self.c_inv.is_finite()) {
            return Err(invalid(format!("C_inv must be positive, got {}", self.c_inv)));
        }
        self.newton.validate()
    }
}

/// Stabilization weight from the one-sided densities `e^{u_±}` and the
/// element-wise sup norms `‖u‖_{L∞(K±)}`, with exact maxima.
pub fn stabilization_alpha(
    exp_minus: f64,
    exp_plus: f64,
    linf_minus: f64,
    linf_plus: f64,
    c_inv: f64,
) -> Result<f64> {
    if !(exp_minus > 0.0 && exp_plus > 0.0) {
        return Err(invalid("exponential traces must be positive"));
    }
    if ![exp_minus, exp_plus, linf_minus, linf_plus, c_inv].iter().all(|x| x.is_finite()) {
        return Err(invalid("stabilization inputs must be finite"));
    }
    let trace = exp_minus.max(exp_plus).ln();
    Ok((log_alpha_base(c_inv) + 2.0 * trace + linf_minus.max(linf_plus)).exp())
}

fn log_alpha_base(c_inv: f64) -> f64 {
    (1.5 * c_inv * c_inv).ln()
}

/// Sharpness `β` of the smooth maxima `β⁻¹ log Σ e^{β a_i}` in the
/// scheme's penalty. They exceed the true maximum by at most `log(n)/β`.
pub const PENALTY_SHARPNESS: f64 = 10.0;

/// `β⁻¹ log Σ e^{β a_i}` and its gradient (softmax weights).
fn smooth_max(values: impl Iterator<Item = f64> + Clone) -> (f64, Vec<f64>) {
    let top = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.map(|a| (PENALTY_SHARPNESS * (a - top)).exp()).collect();
    let total: f64 = weights.iter().sum();
    (top + total.ln() / PENALTY_SHARPNESS, weights.into_iter().map(|w| w / total).collect())
}

/// `log α` of the scheme from the traces `λ_±` and the sampled values of
/// `λ` on the two elements.
pub fn smooth_log_alpha(lam_minus: f64, lam_plus: f64, samples_minus: &[f64], samples_plus: &[f64], c_inv: f64) -> f64 {
    let (traces, _) = smooth_max([2.0 * lam_minus, 2.0 * lam_plus].into_iter());
    let (linf, _) = smooth_max(samples_minus.iter().chain(samples_plus).map(|v| v.abs()));
    log_alpha_base(c_inv) + traces + linf
}

/// Values of `u` at the sup-norm sampling points of element `e`.
fn element_samples(u: &DgFunction, e: usize) -> Vec<f64> {
    linf_samples(u.degree()).into_iter().map(|xi| u.eval(e, xi)).collect()
}

/// Cached face quantities of a DG function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceData {
    pub lam_minus: f64,
    pub lam_plus: f64,
    pub exp_minus: f64,
    pub exp_plus: f64,
    pub grad_minus: f64,
    pub grad_plus: f64,
    /// Sampled `‖u‖_{L∞(K±)}`.
    pub linf_minus: f64,
    pub linf_plus: f64,
    /// The scheme's (smoothed) penalty weight.
    pub alpha: f64,
}

impl FaceData {
    pub fn new(u: &DgFunction, face: &InteriorFace, c_inv: f64) -> Result<Self> {
        let (lam_minus, grad_minus) = u.eval_with_gradient(face.left, 1.0);
        let (lam_plus, grad_plus) = u.eval_with_gradient(face.right, 0.0);
        let linf_minus = elementwise_linf(u, face.left);
        let linf_plus = elementwise_linf(u, face.right);
        let log_alpha = smooth_log_alpha(
            lam_minus,
            lam_plus,
            &element_samples(u, face.left),
            &element_samples(u, face.right),
            c_inv,
        );
        let alpha = log_alpha.exp();
        let (exp_minus, exp_plus) = (lam_minus.exp(), lam_plus.exp());
        if !alpha.is_finite() || !exp_minus.is_finite() || !exp_plus.is_finite() {
            return Err(Error::Overflow { element: face.left });
        }
        Ok(Self {
            lam_minus,
            lam_plus,
            exp_minus,
            exp_plus,
            grad_minus,
            grad_plus,
            linf_minus,
            linf_plus,
            alpha,
        })
    }
}

/// Assembly context: parameters plus the basis tabulated at the quadrature
/// nodes and at the sup-norm sampling points.
#[derive(Debug, Clone)]
pub struct Assembler<'a> {
    params: &'a SchemeParams,
    table: BasisTable,
    /// Basis values at the sampling points, one row of `p + 1` per point.
    sample_vals: Vec<Vec<f64>>,
}

impl<'a> Assembler<'a> {
    pub fn new(params: &'a SchemeParams) -> Self {
        let table = BasisTable::new(params.degree, &params.quad);
        let nb = params.degree + 1;
        let sample_vals = linf_samples(params.degree)
            .into_iter()
            .map(|xi| {
                let (mut vals, mut ders) = (vec![0.0; nb], vec![0.0; nb]);
                eval_basis(params.degree, xi, &mut vals, &mut ders);
                vals
            })
            .collect();
        Self { params, table, sample_vals }
    }

    pub fn params(&self) -> &SchemeParams {
        self.params
    }

    fn check_degree(&self, v: &DgFunction) -> Result<()> {
        if v.degree() != self.params.degree {
            return Err(Error::Mismatch(format!(
                "function degree {} but scheme degree {}",
                v.degree(),
                self.params.degree
            )));
        }
        Ok(())
    }

    fn samples(&self, lam: &DgFunction, e: usize) -> Vec<f64> {
        let c = lam.element_coeffs(e);
        self.sample_vals.iter().map(|v| v.iter().zip(c).map(|(a, b)| a * b).sum()).collect()
    }

    /// `log α_f` at `lam` and its gradient with respect to the coefficients
    /// of the left (`[0]`) and right (`[1]`) element of `face`.
    pub fn log_alpha_with_gradient(&self, lam: &DgFunction, face: &InteriorFace) -> (f64, [Vec<f64>; 2]) {
        let nb = self.table.n_basis();
        let (lv, _) = self.table.left();
        let (rv, _) = self.table.right();
        let (lm, lp) = trace_at(lam, face);
        let (traces, wt) = smooth_max([2.0 * lm, 2.0 * lp].into_iter());
        let (sm, sp) = (self.samples(lam, face.left), self.samples(lam, face.right));
        let (linf, ws) = smooth_max(sm.iter().chain(&sp).map(|v| v.abs()));
        let mut grad = [vec![0.0; nb], vec![0.0; nb]];
        let ns = sm.len();
        for j in 0..nb {
            grad[0][j] = 2.0 * wt[0] * rv[j];
            grad[1][j] = 2.0 * wt[1] * lv[j];
            for (k, v) in sm.iter().enumerate() {
                grad[0][j] += ws[k] * v.signum() * self.sample_vals[k][j];
            }
            for (k, v) in sp.iter().enumerate() {
                grad[1][j] += ws[ns + k] * v.signum() * self.sample_vals[k][j];
            }
        }
        (log_alpha_base(self.params.c_inv) + traces + linf, grad)
    }

    fn log_alpha(&self, lam: &DgFunction, face: &InteriorFace) -> f64 {
        let (lm, lp) = trace_at(lam, face);
        smooth_log_alpha(lm, lp, &self.samples(lam, face.left), &self.samples(lam, face.right), self.params.c_inv)
    }

    /// `B(u; v, w)` with the stabilization evaluated at `u`.
    pub fn b_form(&self, u: &DgFunction, v: &DgFunction, w: &DgFunction) -> Result<f64> {
        u.check_same_space(v)?;
        u.check_same_space(w)?;
        self.check_degree(u)?;
        let mesh = u.mesh();
        let nb = self.table.n_basis();
        let p2 = (self.params.degree * self.params.degree) as f64;
        let mut total = 0.0;
        for e in 0..mesh.n_elements() {
            let h = mesh.diameter(e);
            let (cu, cv, cw) = (u.element_coeffs(e), v.element_coeffs(e), w.element_coeffs(e));
            let mut sum = 0.0;
            for (q, &wq) in self.params.quad.weights().iter().enumerate() {
                let (vals, ders) = (self.table.vals(q), self.table.ders(q));
                let uq: f64 = (0..nb).map(|n| cu[n] * vals[n]).sum();
                let dv: f64 = (0..nb).map(|n| cv[n] * ders[n]).sum();
                let dw: f64 = (0..nb).map(|n| cw[n] * ders[n]).sum();
                let eu = uq.exp();
                if !eu.is_finite() {
                    return Err(Error::Overflow { element: e });
                }
                sum += wq * eu * dv * dw;
            }
            // ∫_K e^u v' w' dx = h ∫_0^1 e^u (v_ξ/h)(w_ξ/h) dξ
            total += sum / h;
        }
        for face in mesh.faces() {
            let (u_m, u_p) = trace_at(u, face);
            let (e_m, e_p) = (u_m.exp(), u_p.exp());
            let alpha = self.log_alpha(u, face).exp();
            if !alpha.is_finite() || !e_m.is_finite() || !e_p.is_finite() {
                return Err(Error::Overflow { element: face.left });
            }
            let (_, dv_m) = v.eval_with_gradient(face.left, 1.0);
            let (_, dv_p) = v.eval_with_gradient(face.right, 0.0);
            let (_, dw_m) = w.eval_with_gradient(face.left, 1.0);
            let (_, dw_p) = w.eval_with_gradient(face.right, 0.0);
            let (v_m, v_p) = trace_at(v, face);
            let (w_m, w_p) = trace_at(w, face);
            let jv = v_m - v_p;
            let jw = w_m - w_p;
            let avg_v = 0.5 * (e_m * dv_m + e_p * dv_p);
            let avg_w = 0.5 * (e_m * dw_m + e_p * dw_p);
            total += -avg_v * jw - avg_w * jv + p2 / face.h * alpha * jv * jw;
        }
        Ok(total)
    }

    /// Scheme residual at `lam` given the previous step `lam_prev`.
    pub fn residual(&self, lam: &DgFunction, lam_prev: &DgFunction) -> Result<Vec<f64>> {
        self.residual_parts(lam, lam_prev, None)
    }

    /// Residual with the face penalty `Δt D p²/h_f α [λ][φ_i]` kept only on
    /// the faces `f` with `penalized[f]`.
    ///
    /// The full residual is this plus `Σ_f w_f [λ]_f t_f` over the remaining
    /// faces, with the weights of [`Assembler::penalty_weights`] and
    /// directions of [`Assembler::penalty_direction`].
    pub fn residual_masked(&self, lam: &DgFunction, lam_prev: &DgFunction, penalized: &[bool]) -> Result<Vec<f64>> {
        self.residual_parts(lam, lam_prev, Some(penalized))
    }

    /// Face penalty weights `w_f = Δt D p²/h_f α_f`.
    pub fn penalty_weights(&self, lam: &DgFunction) -> Result<Vec<f64>> {
        let prm = self.params;
        let scale = prm.dt * prm.diffusion * (prm.degree * prm.degree) as f64;
        lam.mesh()
            .faces()
            .iter()
            .map(|face| {
                let w = scale / face.h * self.log_alpha(lam, face).exp();
                if w.is_finite() {
                    Ok(w)
                } else {
                    Err(Error::Overflow { element: face.left })
                }
            })
            .collect()
    }

    /// Nonzero entries `(row, value)` of the test-function jump `[φ_i]` at
    /// `face`, in residual row numbering.
    pub fn penalty_direction(&self, lam: &DgFunction, face: &InteriorFace) -> Vec<(usize, f64)> {
        let mesh = lam.mesh();
        let nb = self.table.n_basis();
        let (lv, _) = self.table.left();
        let (rv, _) = self.table.right();
        let (sl, sr) = (mesh.diameter(face.left).sqrt(), mesh.diameter(face.right).sqrt());
        (0..nb)
            .map(|i| (face.left * nb + i, rv[i] / sl))
            .chain((0..nb).map(|i| (face.right * nb + i, -lv[i] / sr)))
            .collect()
    }

    fn residual_parts(&self, lam: &DgFunction, lam_prev: &DgFunction, penalized: Option<&[bool]>) -> Result<Vec<f64>> {
        lam.check_same_space(lam_prev)?;
        self.check_degree(lam)?;
        let mesh = lam.mesh();
        let prm = self.params;
        let nb = self.table.n_basis();
        let dd = prm.dt * prm.diffusion;
        let mut res = vec![0.0; lam.coeffs().len()];

        for e in 0..mesh.n_elements() {
            let h = mesh.diameter(e);
            let sqrt_h = h.sqrt();
            let (c, cp) = (lam.element_coeffs(e), lam_prev.element_coeffs(e));
            let r = &mut res[e * nb..(e + 1) * nb];
            for (q, &wq) in prm.quad.weights().iter().enumerate() {
                let (vals, ders) = (self.table.vals(q), self.table.ders(q));
                let lq: f64 = (0..nb).map(|n| c[n] * vals[n]).sum();
                let dlq: f64 = (0..nb).map(|n| c[n] * ders[n]).sum::<f64>() / h;
                let lpq: f64 = (0..nb).map(|n| cp[n] * vals[n]).sum();
                let el = lq.exp();
                let elp = lpq.exp();
                if !el.is_finite() || !elp.is_finite() {
                    return Err(Error::Overflow { element: e });
                }
                let react = if prm.reaction { el * (1.0 - el) } else { 0.0 };
                let volume = (el - elp) + prm.eps * lq - prm.dt * react;
                let flux = dd * el * dlq;
                for i in 0..nb {
                    r[i] += wq * (sqrt_h * volume * vals[i] + flux * ders[i] / sqrt_h);
                }
            }
        }

        self.add_face_terms(lam, &mut res, penalized)?;
        Ok(res)
    }

    /// Adds the interior-face contributions of `Δt D B(λ; λ, φ_i)` to `res`.
    pub(crate) fn add_face_terms(&self, lam: &DgFunction, res: &mut [f64], penalized: Option<&[bool]>) -> Result<()> {
        let mesh = lam.mesh();
        let prm = self.params;
        let nb = self.table.n_basis();
        let dd = prm.dt * prm.diffusion;
        let p2 = (prm.degree * prm.degree) as f64;
        let (lv, ld) = self.table.left();
        let (rv, rd) = self.table.right();
        for (f, face) in mesh.faces().iter().enumerate() {
            let (l, r) = (face.left, face.right);
            let penalty = penalized.is_none_or(|mask| mask[f]);
            let (hl, hr) = (mesh.diameter(l), mesh.diameter(r));
            let (lam_m, grad_m) = lam.eval_with_gradient(l, 1.0);
            let (lam_p, grad_p) = lam.eval_with_gradient(r, 0.0);
            let (e_m, e_p) = (lam_m.exp(), lam_p.exp());
            let alpha = if penalty { self.log_alpha(lam, face).exp() } else { 0.0 };
            if !e_m.is_finite() || !e_p.is_finite() || !alpha.is_finite() {
                return Err(Error::Overflow { element: l });
            }
            let jump = lam_m - lam_p;
            let avg_flux = 0.5 * (e_m * grad_m + e_p * grad_p);
            let pen = p2 / face.h * alpha;
            let (sl, sr) = (hl.sqrt(), hr.sqrt());
            for i in 0..nb {
                let phi = rv[i] / sl;
                let avg_i = 0.5 * e_m * rd[i] / (hl * sl);
                res[l * nb + i] += dd * (-avg_flux * phi - avg_i * jump + pen * jump * phi);
                let phi = -lv[i] / sr;
                let avg_i = 0.5 * e_p * ld[i] / (hr * sr);
                res[r * nb + i] += dd * (-avg_flux * phi - avg_i * jump + pen * jump * phi);
            }
        }
        Ok(())
    }

    /// Jacobian of the residual at `lam` (it does not depend on `λ_prev`).
    pub fn jacobian(&self, lam: &DgFunction) -> Result<DMatrix<f64>> {
        self.jacobian_parts(lam, None)
    }

    /// Jacobian of [`Assembler::residual_masked`].
    pub fn jacobian_masked(&self, lam: &DgFunction, penalized: &[bool]) -> Result<DMatrix<f64>> {
        self.jacobian_parts(lam, Some(penalized))
    }

    /// Analytic derivatives. Finite differences lose the entries of rows
    /// where `e^λ` is tiny next to `O(1)` face terms: the perturbation falls
    /// below the rounding of the row value.
    fn jacobian_parts(&self, lam: &DgFunction, penalized: Option<&[bool]>) -> Result<DMatrix<f64>> {
        self.check_degree(lam)?;
        let mesh = lam.mesh();
        let prm = self.params;
        let nb = self.table.n_basis();
        let dd = prm.dt * prm.diffusion;
        let n = lam.coeffs().len();
        let mut jac = DMatrix::zeros(n, n);

        for e in 0..mesh.n_elements() {
            let h = mesh.diameter(e);
            let sqrt_h = h.sqrt();
            let c = lam.element_coeffs(e);
            let o = e * nb;
            for (q, &wq) in prm.quad.weights().iter().enumerate() {
                let (vals, ders) = (self.table.vals(q), self.table.ders(q));
                let lq: f64 = (0..nb).map(|k| c[k] * vals[k]).sum();
                let dlq: f64 = (0..nb).map(|k| c[k] * ders[k]).sum::<f64>() / h;
                let el = lq.exp();
                if !el.is_finite() {
                    return Err(Error::Overflow { element: e });
                }
                let react = if prm.reaction { el * (1.0 - 2.0 * el) } else { 0.0 };
                let dvolume = el + prm.eps - prm.dt * react;
                for j in 0..nb {
                    let dflux = dd * el * (vals[j] * dlq + ders[j] / h);
                    for i in 0..nb {
                        jac[(o + i, o + j)] += wq * (sqrt_h * dvolume * vals[j] * vals[i] + dflux * ders[i] / sqrt_h);
                    }
                }
            }
        }

        let p2 = (prm.degree * prm.degree) as f64;
        let (lv, ld) = self.table.left();
        let (rv, rd) = self.table.right();
        for (f, face) in mesh.faces().iter().enumerate() {
            let (l, r) = (face.left, face.right);
            let penalty = penalized.is_none_or(|mask| mask[f]);
            let (hl, hr) = (mesh.diameter(l), mesh.diameter(r));
            let (sl, sr) = (hl.sqrt(), hr.sqrt());
            let (lam_m, grad_m) = lam.eval_with_gradient(l, 1.0);
            let (lam_p, grad_p) = lam.eval_with_gradient(r, 0.0);
            let (e_m, e_p) = (lam_m.exp(), lam_p.exp());
            let (log_alpha, d_log_alpha) = if penalty {
                self.log_alpha_with_gradient(lam, face)
            } else {
                (f64::NEG_INFINITY, [vec![0.0; nb], vec![0.0; nb]])
            };
            let alpha = log_alpha.exp();
            if !e_m.is_finite() || !e_p.is_finite() || !alpha.is_finite() {
                return Err(Error::Overflow { element: l });
            }
            let jump = lam_m - lam_p;
            let pen = p2 / face.h * alpha;
            // Derivatives of the face quantities with respect to the
            // coefficients of the left ([0]) and right ([1]) element.
            let d_jump = [rv.to_vec(), lv.iter().map(|v| -v).collect::<Vec<_>>()];
            let d_exp = [
                rv.iter().map(|v| e_m * v).collect::<Vec<_>>(),
                lv.iter().map(|v| e_p * v).collect::<Vec<_>>(),
            ];
            let d_flux = [
                (0..nb).map(|j| 0.5 * (d_exp[0][j] * grad_m + e_m * rd[j] / hl)).collect::<Vec<_>>(),
                (0..nb).map(|j| 0.5 * (d_exp[1][j] * grad_p + e_p * ld[j] / hr)).collect::<Vec<_>>(),
            ];
            let elems = [l, r];
            for (side, &row_e) in elems.iter().enumerate() {
                for i in 0..nb {
                    let (phi, dphi, e_side) =
                        if side == 0 { (rv[i] / sl, rd[i] / (hl * sl), e_m) } else { (-lv[i] / sr, ld[i] / (hr * sr), e_p) };
                    let avg_i = 0.5 * e_side * dphi;
                    let row = row_e * nb + i;
                    for (cs, &col_e) in elems.iter().enumerate() {
                        for j in 0..nb {
                            let d_avg_i = if cs == side { 0.5 * d_exp[side][j] * dphi } else { 0.0 };
                            let v = -d_flux[cs][j] * phi - d_avg_i * jump - avg_i * d_jump[cs][j]
                                + pen * (d_log_alpha[cs][j] * jump + d_jump[cs][j]) * phi;
                            jac[(row, col_e * nb + j)] += dd * v;
                        }
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Finite-difference Jacobian of the residual at `lam`.
    ///
    /// Column `j` is `(R(λ + η e_j) - R(λ)) / η` with
    /// `η = √ε_mach · max(1, |λ_j|)`. A column perturbs a single element and
    /// only reaches the rows of that element and its two neighbours, so
    /// elements three apart are perturbed in the same residual evaluation.
    /// Only reliable where all rows of an element have comparable scale; see
    /// [`Assembler::jacobian`].
    pub fn fd_jacobian(&self, lam: &DgFunction, lam_prev: &DgFunction) -> Result<DMatrix<f64>> {
        let nb = self.table.n_basis();
        let n_el = lam.n_elements();
        colored_fd_jacobian(
            lam,
            |e| (e.saturating_sub(1) * nb..(e + 2).min(n_el) * nb).collect(),
            |trial| self.residual(trial, lam_prev),
        )
    }
}

/// Forward-difference Jacobian of `eval` at `lam`, one column per
/// coefficient, with step `η = √ε_mach · max(1, |c_j|)`.
///
/// `rows_of(e)` lists the rows a perturbation on element `e` can reach. It
/// must only cover rows influenced by elements `e - 1..=e + 1`, so that
/// elements three apart can be perturbed in the same evaluation.
pub fn colored_fd_jacobian(
    lam: &DgFunction,
    rows_of: impl Fn(usize) -> Vec<usize>,
    eval: impl Fn(&DgFunction) -> Result<Vec<f64>>,
) -> Result<DMatrix<f64>> {
    let base = eval(lam)?;
    let nb = lam.n_basis();
    let n_el = lam.n_elements();
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut jac = DMatrix::zeros(base.len(), lam.coeffs().len());
    let mut trial = lam.clone();
    for color in 0..n_el.min(3) {
        for j in 0..nb {
            let mut steps = Vec::new();
            for e in (color..n_el).step_by(3) {
                let idx = e * nb + j;
                let c = lam.coeffs()[idx];
                let shifted = c + sqrt_eps * c.abs().max(1.0);
                trial.coeffs_mut()[idx] = shifted;
                steps.push((e, idx, shifted - c));
            }
            let perturbed = eval(&trial)?;
            for &(e, idx, eta) in &steps {
                for row in rows_of(e) {
                    jac[(row, idx)] = (perturbed[row] - base[row]) / eta;
                }
                trial.coeffs_mut()[idx] = lam.coeffs()[idx];
            }
        }
    }
    Ok(jac)
}

/// `B(u; v, w)`; see [`Assembler::b_form`].
pub fn assemble_b(
    u: &DgFunction,
    v: &DgFunction,
    w: &DgFunction,
    params: &SchemeParams,
) -> Result<f64> {
    Assembler::new(params).b_form(u, v, w)
}

/// Scheme residual; see [`Assembler::residual`].
pub fn residual(lam: &DgFunction, lam_prev: &DgFunction, params: &SchemeParams) -> Result<Vec<f64>> {
    Assembler::new(params).residual(lam, lam_prev)
}

/// Newton Jacobian; see [`Assembler::jacobian`].
pub fn jacobian(lam: &DgFunction, params: &SchemeParams) -> Result<DMatrix<f64>> {
    Assembler::new(params).jacobian(lam)
}

/// Closed-form residual for `p = 1`.
///
/// On each element `λ`, `λ_prev` are affine in `ξ`, so every volume integral
/// is of the form `∫_0^1 ξ^m e^{aξ+b} dξ` and is evaluated analytically. Face
/// terms are point values and coincide with the quadrature assembly. Used as
/// an independent check of the quadrature path.
pub fn residual_exact_p1(
    lam: &DgFunction,
    lam_prev: &DgFunction,
    params: &SchemeParams,
) -> Result<Vec<f64>> {
    if params.degree != 1 || lam.degree() != 1 {
        return Err(invalid("closed-form residual is only available for p = 1"));
    }
    lam.check_same_space(lam_prev)?;
    let mesh = lam.mesh();
    let s3 = 3f64.sqrt();
    let dd = params.dt * params.diffusion;
    let mut res = vec![0.0; lam.coeffs().len()];
    for e in 0..mesh.n_elements() {
        let h = mesh.diameter(e);
        let sqrt_h = h.sqrt();
        // λ(ξ) = c0 + c1 √3 (2ξ - 1) = b + a ξ
        let affine = |c: &[f64]| (2.0 * s3 * c[1], c[0] - s3 * c[1]);
        let (a, b) = affine(lam.element_coeffs(e));
        let (ap, bp) = affine(lam_prev.element_coeffs(e));
        let exp_moment = |m: usize, a: f64, b: f64| b.exp() * exp_moment_unit(m, a);
        // φ_0 = 1, φ_1 = √3 (2ξ - 1); derivatives 0 and 2√3.
        let e0 = exp_moment(0, a, b);
        let e1 = exp_moment(1, a, b);
        let p0 = exp_moment(0, ap, bp);
        let p1 = exp_moment(1, ap, bp);
        let q0 = exp_moment(0, 2.0 * a, 2.0 * b);
        let q1 = exp_moment(1, 2.0 * a, 2.0 * b);
        let lin0 = b + 0.5 * a;
        let lin1 = b / 2.0 + a / 3.0;
        let proj = |m0: f64, m1: f64| [m0, s3 * (2.0 * m1 - m0)];
        let mass = proj(e0 - p0, e1 - p1);
        let reg = proj(lin0, lin1);
        let react = if params.reaction { proj(e0 - q0, e1 - q1) } else { [0.0, 0.0] };
        // ∫_K e^λ λ' φ_i' dx / √h = (a/h)(d_i/h) h e0 / √h
        let diff = [0.0, dd * (a / h) * (2.0 * s3 / h) * h * e0 / sqrt_h];
        for i in 0..2 {
            res[e * 2 + i] = sqrt_h * (mass[i] + params.eps * reg[i] - params.dt * react[i]) + diff[i];
        }
    }
    // Face terms are point evaluations, shared with the quadrature assembly.
    Assembler::new(params).add_face_terms(lam, &mut res, None)?;
    Ok(res)
}

/// `∫_0^1 ξ^m e^{aξ} dξ` for `m ≤ 2`.
fn exp_moment_unit(m: usize, a: f64) -> f64 {
    if a.abs() < 0.5 {
        // Σ_k a^k / (k! (m + k + 1))
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..40 {
            if k > 0 {
                term *= a / k as f64;
            }
            sum += term / (m + k + 1) as f64;
        }
        return sum;
    }
    let ea = a.exp();
    match m {
        0 => a.exp_m1() / a,
        1 => (ea * (a - 1.0) + 1.0) / (a * a),
        2 => (ea * (a * a - 2.0 * a + 2.0) - 2.0) / (a * a * a),
        _ => unreachable!("moments above 2 are not needed for p = 1"),
    }
}
