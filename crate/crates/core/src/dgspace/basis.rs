//! L²-orthonormal shifted Legendre basis on the reference interval `[0, 1]`.
//!
//! `φ_n(ξ) = √(2n+1) P_n(2ξ - 1)`, so that `∫₀¹ φ_n φ_m dξ = δ_nm`.

use super::quadrature::Quadrature;

/// Values and `ξ`-derivatives of `φ_0, …, φ_p` at `xi`.
pub fn eval_basis(p: usize, xi: f64, vals: &mut [f64], ders: &mut [f64]) {
    debug_assert!(vals.len() > p && ders.len() > p);
    let t = 2.0 * xi - 1.0;
    // Legendre recurrences for P_n and P_n'.
    let (mut p_prev, mut p_cur) = (1.0, t);
    let (mut d_prev, mut d_cur) = (0.0, 1.0);
    for n in 0..=p {
        let (pn, dn) = match n {
            0 => (1.0, 0.0),
            1 => (t, 1.0),
            _ => {
                let k = (n - 1) as f64;
                let p_next = ((2.0 * k + 1.0) * t * p_cur - k * p_prev) / (k + 1.0);
                let d_next = d_prev + (2.0 * k + 1.0) * p_cur;
                p_prev = p_cur;
                p_cur = p_next;
                d_prev = d_cur;
                d_cur = d_next;
                (p_cur, d_cur)
            }
        };
        let scale = (2.0 * n as f64 + 1.0).sqrt();
        vals[n] = scale * pn;
        ders[n] = 2.0 * scale * dn;
    }
}

/// Value of `Σ c_n φ_n(ξ)`.
pub fn eval_expansion(coeffs: &[f64], xi: f64) -> f64 {
    let p = coeffs.len() - 1;
    let mut vals = vec![0.0; p + 1];
    let mut ders = vec![0.0; p + 1];
    eval_basis(p, xi, &mut vals, &mut ders);
    coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
}

/// Value and `ξ`-derivative of `Σ c_n φ_n(ξ)`.
pub fn eval_expansion_with_derivative(coeffs: &[f64], xi: f64) -> (f64, f64) {
    let p = coeffs.len() - 1;
    let mut vals = vec![0.0; p + 1];
    let mut ders = vec![0.0; p + 1];
    eval_basis(p, xi, &mut vals, &mut ders);
    let v = coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum();
    let d = coeffs.iter().zip(&ders).map(|(c, d)| c * d).sum();
    (v, d)
}

/// Basis tabulated at the quadrature nodes and at both reference endpoints.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub degree: usize,
    n_quad: usize,
    quad_vals: Vec<f64>,
    quad_ders: Vec<f64>,
    left_vals: Vec<f64>,
    left_ders: Vec<f64>,
    right_vals: Vec<f64>,
    right_ders: Vec<f64>,
}

impl BasisTable {
    pub fn new(degree: usize, quad: &Quadrature) -> Self {
        let nb = degree + 1;
        let n_quad = quad.n_points();
        let mut quad_vals = vec![0.0; n_quad * nb];
        let mut quad_ders = vec![0.0; n_quad * nb];
        for (q, &xi) in quad.nodes().iter().enumerate() {
            eval_basis(
                degree,
                xi,
                &mut quad_vals[q * nb..(q + 1) * nb],
                &mut quad_ders[q * nb..(q + 1) * nb],
            );
        }
        let mut left_vals = vec![0.0; nb];
        let mut left_ders = vec![0.0; nb];
        let mut right_vals = vec![0.0; nb];
        let mut right_ders = vec![0.0; nb];
        eval_basis(degree, 0.0, &mut left_vals, &mut left_ders);
        eval_basis(degree, 1.0, &mut right_vals, &mut right_ders);
        Self {
            degree,
            n_quad,
            quad_vals,
            quad_ders,
            left_vals,
            left_ders,
            right_vals,
            right_ders,
        }
    }

    pub fn n_basis(&self) -> usize {
        self.degree + 1
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    /// Basis values at quadrature node `q`.
    pub fn vals(&self, q: usize) -> &[f64] {
        let nb = self.n_basis();
        &self.quad_vals[q * nb..(q + 1) * nb]
    }

    /// Basis `ξ`-derivatives at quadrature node `q`.
    pub fn ders(&self, q: usize) -> &[f64] {
        let nb = self.n_basis();
        &self.quad_ders[q * nb..(q + 1) * nb]
    }

    /// Values and derivatives at `ξ = 0`.
    pub fn left(&self) -> (&[f64], &[f64]) {
        (&self.left_vals, &self.left_ders)
    }

    /// Values and derivatives at `ξ = 1`.
    pub fn right(&self) -> (&[f64], &[f64]) {
        (&self.right_vals, &self.right_ders)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgspace::quadrature::gauss_legendre_rule;

    #[test]
    fn orthonormal_up_to_degree_eight() {
        let p = 8;
        let q = gauss_legendre_rule(12).unwrap();
        let t = BasisTable::new(p, &q);
        for n in 0..=p {
            for m in 0..=p {
                let g: f64 = (0..q.n_points())
                    .map(|k| q.weights()[k] * t.vals(k)[n] * t.vals(k)[m])
                    .sum();
                let expected = if n == m { 1.0 } else { 0.0 };
                assert!((g - expected).abs() < 1e-13, "({n}, {m}) -> {g}");
            }
        }
    }

    #[test]
    fn endpoint_values() {
        let mut v = [0.0; 5];
        let mut d = [0.0; 5];
        eval_basis(4, 1.0, &mut v, &mut d);
        for (n, val) in v.iter().enumerate() {
            assert!((val - (2.0 * n as f64 + 1.0).sqrt()).abs() < 1e-14);
        }
        eval_basis(4, 0.0, &mut v, &mut d);
        for (n, val) in v.iter().enumerate() {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((val - sign * (2.0 * n as f64 + 1.0).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = 5;
        let mut v0 = [0.0; 6];
        let mut v1 = [0.0; 6];
        let mut d = [0.0; 6];
        let mut scratch = [0.0; 6];
        for &xi in &[0.1, 0.37, 0.5, 0.93] {
            let h = 1e-6;
            eval_basis(p, xi, &mut scratch, &mut d);
            eval_basis(p, xi + h, &mut v1, &mut scratch);
            eval_basis(p, xi - h, &mut v0, &mut scratch);
            for n in 0..=p {
                let fd = (v1[n] - v0[n]) / (2.0 * h);
                assert!((fd - d[n]).abs() < 1e-6 * (1.0 + d[n].abs()), "n = {n}");
            }
        }
    }
}
