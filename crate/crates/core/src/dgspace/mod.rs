//! The broken polynomial space `V_h`.
//!
//! A [`DgFunction`] stores, for every element `K`, the coefficients of its
//! restriction in the reference basis `φ_0, …, φ_p` (see [`basis`]):
//! `v|_K(x) = Σ_n c_n φ_n((x - x_K) / h_K)`. With this convention
//! `‖v‖²_{L²(K)} = h_K Σ_n c_n²`.

pub mod basis;
pub mod quadrature;

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::mesh::{InteriorFace, Mesh1D};

pub use basis::BasisTable;
pub use quadrature::{gauss_legendre_rule, Quadrature};

#[derive(Debug, Clone)]
pub struct DgFunction {
    mesh: Arc<Mesh1D>,
    degree: usize,
    coeffs: Vec<f64>,
}

impl DgFunction {
    pub fn zeros(mesh: Arc<Mesh1D>, degree: usize) -> Self {
        let n = mesh.n_elements() * (degree + 1);
        Self { mesh, degree, coeffs: vec![0.0; n] }
    }

    /// The constant function `c` (exactly representable: `φ_0 ≡ 1`).
    pub fn constant(mesh: Arc<Mesh1D>, degree: usize, c: f64) -> Self {
        let mut v = Self::zeros(mesh, degree);
        let nb = degree + 1;
        for e in 0..v.n_elements() {
            v.coeffs[e * nb] = c;
        }
        v
    }

    pub fn from_coeffs(mesh: Arc<Mesh1D>, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if degree == 0 {
            return Err(invalid("polynomial degree must be at least 1"));
        }
        let expected = mesh.n_elements() * (degree + 1);
        if coeffs.len() != expected {
            return Err(invalid(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidFunction(format!("coefficient {i} is not finite")));
        }
        Ok(Self { mesh, degree, coeffs })
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn n_basis(&self) -> usize {
        self.degree + 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        let nb = self.n_basis();
        &self.coeffs[e * nb..(e + 1) * nb]
    }

    /// True when both functions live on the same mesh with the same degree.
    pub fn same_space(&self, other: &DgFunction) -> bool {
        self.degree == other.degree
            && (Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh)
    }

    pub(crate) fn check_same_space(&self, other: &DgFunction) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::Mismatch(format!(
                "degree {} on {} elements vs degree {} on {} elements",
                self.degree,
                self.n_elements(),
                other.degree,
                other.n_elements()
            )))
        }
    }

    /// Value at reference coordinate `xi` of element `e`.
    pub fn eval(&self, e: usize, xi: f64) -> f64 {
        basis::eval_expansion(self.element_coeffs(e), xi)
    }

    /// Value and physical derivative at reference coordinate `xi` of element `e`.
    pub fn eval_with_gradient(&self, e: usize, xi: f64) -> (f64, f64) {
        let (v, d) = basis::eval_expansion_with_derivative(self.element_coeffs(e), xi);
        (v, d / self.mesh.diameter(e))
    }

    /// Value at physical point `x` (right-continuous at interior nodes).
    pub fn eval_at(&self, x: f64) -> Option<f64> {
        self.mesh.locate(x).map(|(e, xi)| self.eval(e, xi))
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &DgFunction) -> Result<DgFunction> {
        self.check_same_space(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + a * y).collect();
        Ok(Self { mesh: self.mesh.clone(), degree: self.degree, coeffs })
    }

    pub fn scaled(&self, a: f64) -> DgFunction {
        Self {
            mesh: self.mesh.clone(),
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> DgFunction {
        debug_assert_eq!(coeffs.len(), self.coeffs.len());
        Self { mesh: self.mesh.clone(), degree: self.degree, coeffs }
    }

    /// Largest coefficient magnitude.
    pub fn coeff_sup(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Sum of coefficient magnitudes.
    pub fn coeff_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Element-wise coefficient rows `(element id, coefficients)`.
    pub fn coefficient_rows(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        (0..self.n_elements()).map(|e| (e, self.element_coeffs(e)))
    }

    /// Samples `(x, value)` on `points_per_element` equispaced points per
    /// element, endpoints included, so every interior face appears twice with
    /// its two one-sided values.
    pub fn sampled(&self, points_per_element: usize) -> Vec<(f64, f64)> {
        sample_broken(&self.mesh, points_per_element, |e, xi| self.eval(e, xi))
    }
}

/// Equispaced samples of a broken function, endpoints of each element included.
pub fn sample_broken(
    mesh: &Mesh1D,
    points_per_element: usize,
    f: impl Fn(usize, f64) -> f64,
) -> Vec<(f64, f64)> {
    let n = points_per_element.max(2);
    let mut out = Vec::with_capacity(mesh.n_elements() * n);
    for e in 0..mesh.n_elements() {
        for i in 0..n {
            let xi = i as f64 / (n - 1) as f64;
            out.push((mesh.to_physical(e, xi), f(e, xi)));
        }
    }
    out
}

/// Element-wise L² projection of `f` onto `V_h`, evaluated with `quad`.
pub fn project_l2(
    f: impl Fn(f64) -> f64,
    mesh: Arc<Mesh1D>,
    degree: usize,
    quad: &Quadrature,
) -> Result<DgFunction> {
    if degree == 0 {
        return Err(invalid("polynomial degree must be at least 1"));
    }
    let table = BasisTable::new(degree, quad);
    let nb = degree + 1;
    let mut coeffs = vec![0.0; mesh.n_elements() * nb];
    for e in 0..mesh.n_elements() {
        for (q, (xi, w)) in quad.iter().enumerate() {
            let x = mesh.to_physical(e, xi);
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::InvalidFunction(format!("f({x}) = {fx}")));
            }
            for (n, phi) in table.vals(q).iter().enumerate() {
                coeffs[e * nb + n] += w * fx * phi;
            }
        }
    }
    DgFunction::from_coeffs(mesh, degree, coeffs)
}

/// Element-wise `L²` projection of `g ∘ v` onto the space of `v`.
pub fn project_composition(v: &DgFunction, g: impl Fn(f64) -> f64, quad: &Quadrature) -> Result<DgFunction> {
    let table = BasisTable::new(v.degree(), quad);
    let nb = v.n_basis();
    let mut coeffs = vec![0.0; v.coeffs().len()];
    for e in 0..v.n_elements() {
        for (q, (xi, w)) in quad.iter().enumerate() {
            let gx = g(v.eval(e, xi));
            if !gx.is_finite() {
                return Err(Error::InvalidFunction(format!("g(v) = {gx} on element {e}")));
            }
            for (n, phi) in table.vals(q).iter().enumerate() {
                coeffs[e * nb + n] += w * gx * phi;
            }
        }
    }
    Ok(v.with_coeffs(coeffs))
}

/// One-sided limits `(v_-, v_+)` at the interior face carried by `node`.
pub fn face_trace(v: &DgFunction, node: usize) -> Result<(f64, f64)> {
    let face = v
        .mesh
        .face_at_node(node)
        .ok_or_else(|| invalid(format!("node {node} is not an interior face")))?;
    Ok(trace_at(v, face))
}

pub(crate) fn trace_at(v: &DgFunction, face: &InteriorFace) -> (f64, f64) {
    (v.eval(face.left, 1.0), v.eval(face.right, 0.0))
}

/// Jump `v_- - v_+` and average `(v_- + v_+)/2` at the face carried by `node`.
pub fn jump_average(v: &DgFunction, node: usize) -> Result<(f64, f64)> {
    let (m, p) = face_trace(v, node)?;
    Ok(jump_and_average(m, p))
}

pub fn jump_and_average(minus: f64, plus: f64) -> (f64, f64) {
    (minus - plus, 0.5 * (minus + plus))
}

/// DG norm of a broken function given by element-local value/gradient
/// evaluation `local(e, xi) -> (value, d/dx value)`.
///
/// `degree` enters through the jump weight `p² / h_f`.
pub fn dg_norm_of(
    mesh: &Mesh1D,
    degree: usize,
    quad: &Quadrature,
    local: impl Fn(usize, f64) -> (f64, f64),
) -> f64 {
    let p2 = (degree * degree) as f64;
    let mut sum = 0.0;
    for e in 0..mesh.n_elements() {
        let h = mesh.diameter(e);
        for (xi, w) in quad.iter() {
            let (v, g) = local(e, xi);
            sum += w * h * (v * v + g * g);
        }
    }
    for face in mesh.faces() {
        let (minus, _) = local(face.left, 1.0);
        let (plus, _) = local(face.right, 0.0);
        let jump = minus - plus;
        sum += p2 / face.h * jump * jump;
    }
    sum.sqrt()
}

/// DG norm `(‖v‖² + Σ_K ‖v'‖²_K + Σ_f p²/h_f [v]²)^{1/2}`.
pub fn dg_norm(v: &DgFunction, quad: &Quadrature) -> f64 {
    dg_norm_of(&v.mesh, v.degree, quad, |e, xi| v.eval_with_gradient(e, xi))
}

/// `‖v‖_{L²(Ω)}` by quadrature.
pub fn l2_norm(v: &DgFunction, quad: &Quadrature) -> f64 {
    let mut sum = 0.0;
    for e in 0..v.n_elements() {
        let h = v.mesh.diameter(e);
        sum += h * quad.integrate(|xi| v.eval(e, xi).powi(2));
    }
    sum.sqrt()
}

/// Location of the element-wise maximum of `|v|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfPoint {
    /// `max_K |v|`.
    pub value: f64,
    /// Reference coordinate where it is attained.
    pub xi: f64,
    /// Sign of `v` there (`+1` or `-1`).
    pub sign: f64,
}

/// Sample abscissae for the element-wise maximum: both endpoints, the
/// default Gauss nodes and a Chebyshev-Lobatto grid of `4p + 1` points.
pub(crate) fn linf_samples(degree: usize) -> Vec<f64> {
    let m = 4 * degree + 1;
    let mut xs: Vec<f64> = (0..m)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / (m - 1) as f64).cos()))
        .collect();
    xs.extend_from_slice(Quadrature::default().nodes());
    xs.push(0.0);
    xs.push(1.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    xs
}

/// Maximum of `|v|` on element `e` with its location.
///
/// The maximum is taken over a fixed sampling grid; every interior local
/// maximum of the samples is then polished by golden-section search between
/// its neighbouring samples. Exact at the endpoints, hence for `p = 1`.
pub fn elementwise_linf_point(v: &DgFunction, e: usize) -> LinfPoint {
    let coeffs = v.element_coeffs(e);
    let f = |xi: f64| basis::eval_expansion(coeffs, xi);
    let xs = linf_samples(v.degree);
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best = LinfPoint { value: -1.0, xi: 0.0, sign: 1.0 };
    let mut consider = |xi: f64, y: f64| {
        if y.abs() > best.value {
            best = LinfPoint { value: y.abs(), xi, sign: if y < 0.0 { -1.0 } else { 1.0 } };
        }
    };
    for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
        consider(x, y);
        if i == 0 || i + 1 == xs.len() {
            continue;
        }
        let a = ys[i].abs();
        if a >= ys[i - 1].abs() && a >= ys[i + 1].abs() {
            let (xm, ym) = golden_max(|t| f(t).abs(), xs[i - 1], xs[i + 1]);
            consider(xm, f(xm).signum() * ym);
        }
    }
    best
}

/// `max_K |v|` (see [`elementwise_linf_point`]).
pub fn elementwise_linf(v: &DgFunction, e: usize) -> f64 {
    elementwise_linf_point(v, e).value
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..80 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    if gc > gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_mesh(n: usize) -> Arc<Mesh1D> {
        Arc::new(Mesh1D::uniform(n, 0.0, 1.0).unwrap())
    }

    fn random_function(mesh: Arc<Mesh1D>, p: usize, rng: &mut ChaCha8Rng) -> DgFunction {
        let n = mesh.n_elements() * (p + 1);
        let coeffs = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        DgFunction::from_coeffs(mesh, p, coeffs).unwrap()
    }

    #[test]
    fn projection_of_constant_is_exact() {
        let q = Quadrature::default();
        let v = project_l2(|_| 2.5, unit_mesh(5), 3, &q).unwrap();
        for e in 0..5 {
            let c = v.element_coeffs(e);
            assert!((c[0] - 2.5).abs() < 1e-14);
            assert!(c[1..].iter().all(|x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn projection_reproduces_affine_functions() {
        let q = Quadrature::default();
        for p in 1..=3 {
            let v = project_l2(|x| 3.0 * x - 1.0, unit_mesh(7), p, &q).unwrap();
            for e in 0..7 {
                for &xi in q.nodes() {
                    let x = v.mesh().to_physical(e, xi);
                    assert!((v.eval(e, xi) - (3.0 * x - 1.0)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn projection_of_log_step_is_piecewise_constant() {
        let q = Quadrature::default();
        let u0 = |x: f64| if x > 0.0 && x < 0.5 { 0.8 } else { 0.0 };
        let floor = 1e-16;
        let v = project_l2(|x| f64::max(u0(x), floor).ln(), unit_mesh(8), 2, &q).unwrap();
        for e in 0..8 {
            let expected = if e < 4 { 0.8f64.ln() } else { floor.ln() };
            let c = v.element_coeffs(e);
            assert!((c[0] - expected).abs() < 1e-13 * expected.abs().max(1.0));
            assert!(c[1..].iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn projection_rejects_nan() {
        let q = Quadrature::default();
        let r = project_l2(|x| if x > 0.5 { f64::NAN } else { 0.0 }, unit_mesh(4), 1, &q);
        assert!(matches!(r, Err(Error::InvalidFunction(_))));
    }

    #[test]
    fn projection_is_idempotent() {
        let q = Quadrature::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = random_function(unit_mesh(6), 3, &mut rng);
        let w = project_l2(|x| v.eval_at(x).unwrap(), unit_mesh(6), 3, &q);
        // eval_at is right-continuous, so nodes are never hit by Gauss points.
        let w = w.unwrap();
        for (a, b) in v.coeffs().iter().zip(w.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_per_element() {
        let q = gauss_legendre_rule(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mesh = Arc::new(Mesh1D::graded(&[0.0, 0.1, 0.45, 0.5, 1.0]).unwrap());
        let v = random_function(mesh.clone(), 4, &mut rng);
        for e in 0..mesh.n_elements() {
            let h = mesh.diameter(e);
            let quad_norm = h * q.integrate(|xi| v.eval(e, xi).powi(2));
            let coeff_norm: f64 = h * v.element_coeffs(e).iter().map(|c| c * c).sum::<f64>();
            assert!(((quad_norm - coeff_norm) / coeff_norm).abs() < 1e-13);
        }
    }

    #[test]
    fn traces_and_jumps() {
        let mesh = unit_mesh(2);
        let v = DgFunction::from_coeffs(mesh.clone(), 1, vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(face_trace(&v, 1).unwrap(), (2.0, 0.0));
        assert_eq!(jump_average(&v, 1).unwrap(), (2.0, 1.0));
        assert!(face_trace(&v, 0).is_err());
        assert!(face_trace(&v, 2).is_err());

        let q = Quadrature::default();
        let cont = project_l2(|x| x * x, mesh, 2, &q).unwrap();
        let (jump, avg) = jump_average(&cont, 1).unwrap();
        assert!(jump.abs() < 1e-14);
        assert!((avg - 0.25).abs() < 1e-14);
    }

    #[test]
    fn jump_product_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (vm, vp, wm, wp): (f64, f64, f64, f64) = rng.gen();
            let (jv, av) = jump_and_average(vm, vp);
            let (jw, aw) = jump_and_average(wm, wp);
            let (jvw, _) = jump_and_average(vm * wm, vp * wp);
            assert!((jvw - (jv * aw + av * jw)).abs() < 1e-14);
        }
    }

    #[test]
    fn dg_norm_examples() {
        let q = Quadrature::default();
        let c = DgFunction::constant(unit_mesh(3), 2, -1.5);
        assert!((dg_norm(&c, &q) - 1.5).abs() < 1e-14);

        let lin = project_l2(|x| x, unit_mesh(4), 1, &q).unwrap();
        assert!((dg_norm(&lin, &q) - (1.0f64 / 3.0 + 1.0).sqrt()).abs() < 1e-13);

        let step = DgFunction::from_coeffs(unit_mesh(2), 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let expected = (0.5f64 + 1.0 / 0.5).sqrt();
        assert!((dg_norm(&step, &q) - expected).abs() < 1e-14);
    }

    #[test]
    fn dg_norm_dominates_l2_norm() {
        let q = Quadrature::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in 1..=3 {
            let v = random_function(unit_mesh(5), p, &mut rng);
            assert!(dg_norm(&v, &q) >= l2_norm(&v, &q));
        }
    }

    #[test]
    fn linf_examples() {
        let c = DgFunction::constant(unit_mesh(2), 2, -0.7);
        assert!((elementwise_linf(&c, 1) - 0.7).abs() < 1e-15);

        // p = 1 with endpoint values 1 and -3: c0 - √3 c1 = 1, c0 + √3 c1 = -3.
        let s3 = 3f64.sqrt();
        let v = DgFunction::from_coeffs(unit_mesh(1), 1, vec![-1.0, -2.0 / s3]).unwrap();
        assert!((v.eval(0, 0.0) - 1.0).abs() < 1e-14);
        let pt = elementwise_linf_point(&v, 0);
        assert!((pt.value - 3.0).abs() < 1e-14);
        assert_eq!(pt.xi, 1.0);
        assert_eq!(pt.sign, -1.0);
    }

    #[test]
    fn linf_matches_dense_scan_for_cubics() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let v = random_function(unit_mesh(1), 3, &mut rng);
            let scan = (0..=100_000)
                .map(|i| v.eval(0, i as f64 / 100_000.0).abs())
                .fold(0.0, f64::max);
            let got = elementwise_linf(&v, 0);
            assert!((got - scan).abs() < 1e-6, "{got} vs {scan}");
            assert!(got >= scan - 1e-12);
        }
    }

    #[test]
    fn sampled_form_repeats_faces() {
        let v = DgFunction::from_coeffs(unit_mesh(2), 1, vec![1.0, 0.0, 3.0, 0.0]).unwrap();
        let s = v.sampled(10);
        assert_eq!(s.len(), 20);
        assert_eq!(s[9], (0.5, 1.0));
        assert_eq!(s[10], (0.5, 3.0));
    }
}
