//! Gauss-Legendre quadrature on the reference interval `[0, 1]`.

use crate::error::{invalid, Result};

/// Largest supported number of Gauss points.
pub const MAX_POINTS: usize = 64;

/// Point count used by all scheme integrals unless configured otherwise.
pub const DEFAULT_POINTS: usize = 8;

/// A quadrature rule on `[0, 1]` with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn n_points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterator over `(node, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integral of `f` over `[0, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        gauss_legendre_rule(DEFAULT_POINTS).expect("default rule size is valid")
    }
}

/// Legendre polynomial `P_n(t)` and its derivative.
fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    let dp = nf * (t * p - p_prev) / (t * t - 1.0);
    (p, dp)
}

/// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
///
/// Nodes are the roots of `P_n`, found by Newton's method from the usual
/// cosine initial guesses, and are returned in increasing order.
pub fn gauss_legendre_rule(n_points: usize) -> Result<Quadrature> {
    if n_points == 0 || n_points > MAX_POINTS {
        return Err(invalid(format!(
            "Gauss-Legendre rule needs 1..={MAX_POINTS} points, got {n_points}"
        )));
    }
    let n = n_points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        // t is the i-th largest root; mirror it onto the lower half.
        nodes[n - 1 - i] = 0.5 * (1.0 + t);
        nodes[i] = 0.5 * (1.0 - t);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    Ok(Quadrature { nodes, weights })
}
