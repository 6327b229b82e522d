//! Traveling-wave reference profile from the first-order system
//! `φ' = -cφ + ψ(ψ - 1)`, `ψ' = φ`, integrated with an adaptive
//! Dormand-Prince 5(4) pair.

use crate::error::{invalid, Error, Result};

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(s, y)` from `s = 0` to `s_end` and returns `y` on the
/// uniform grid `s_i = i · s_end / n_out`, `i = 0..=n_out`. Steps are
/// clipped so that every grid point is hit exactly. The error control is
/// mixed: `|err_i| ≤ tol · (1e-3 + |y_i|)`.
pub fn dopri5(
    f: impl Fn(f64, &[f64], &mut [f64]),
    y0: &[f64],
    s_end: f64,
    n_out: usize,
    tol: f64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if !(s_end > 0.0 && s_end.is_finite()) || !(tol > 0.0) || n_out == 0 {
        return Err(invalid("integration needs s_end > 0, tol > 0 and at least one output interval"));
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut s = 0.0;
    let mut h = (s_end / n_out as f64).min(1e-3 * s_end.max(1.0));
    let mut out = vec![(0.0, y.clone())];
    let mut k = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    for i in 1..=n_out {
        let target = s_end * i as f64 / n_out as f64;
        while s < target {
            let last = target - s <= h;
            let step = if last { target - s } else { h };
            if step < 1e-14 * s_end.max(1.0) {
                return Err(Error::StepSizeUnderflow { at: s });
            }
            f(s, &y, &mut k[0]);
            for st in 1..7 {
                let (done, rest) = k.split_at_mut(st);
                for d in 0..dim {
                    stage[d] = y[d] + step * (0..st).map(|j| A[st][j] * done[j][d]).sum::<f64>();
                }
                f(s + C[st] * step, &stage, &mut rest[0]);
            }
            let mut err: f64 = 0.0;
            for d in 0..dim {
                y5[d] = y[d] + step * (0..7).map(|j| B5[j] * k[j][d]).sum::<f64>();
                let e = step * (0..7).map(|j| (B5[j] - B4[j]) * k[j][d]).sum::<f64>();
                let scale = tol * (1e-3 + y[d].abs().max(y5[d].abs()));
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() {
                h = 0.25 * step;
                continue;
            }
            if err <= 1.0 {
                s = if last { target } else { s + step };
                y.copy_from_slice(&y5);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // Do not let a clipped final step shrink the regular step size.
            if !(last && err <= 1.0) || factor < 1.0 {
                h = step * factor;
            }
        }
        out.push((target, y.clone()));
    }
    Ok(out)
}

/// Samples `(s, φ(s), ψ(s))` of the traveling-wave system with speed `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveProfile {
    pub c: f64,
    pub samples: Vec<(f64, f64, f64)>,
}

impl WaveProfile {
    fn interpolate(&self, s: f64, pick: impl Fn(&(f64, f64, f64)) -> f64) -> Option<f64> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if s < first.0 || s > last.0 {
            return None;
        }
        let i = self.samples.partition_point(|p| p.0 <= s).clamp(1, self.samples.len() - 1);
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let w = (s - a.0) / (b.0 - a.0);
        Some(pick(a) + w * (pick(b) - pick(a)))
    }

    /// Linear interpolation of `φ`.
    pub fn phi_at(&self, s: f64) -> Option<f64> {
        self.interpolate(s, |p| p.1)
    }

    /// Linear interpolation of `ψ`.
    pub fn psi_at(&self, s: f64) -> Option<f64> {
        self.interpolate(s, |p| p.2)
    }
}

/// Default output spacing of [`traveling_wave_reference`].
pub const WAVE_SAMPLE_SPACING: f64 = 1e-2;

/// Integrates the traveling-wave system on `[0, s_end]` from `(φ0, ψ0)`
/// with relative tolerance `tol`, sampled every [`WAVE_SAMPLE_SPACING`].
pub fn traveling_wave_reference(c: f64, s_end: f64, phi0: f64, psi0: f64, tol: f64) -> Result<WaveProfile> {
    if !c.is_finite() || !phi0.is_finite() || !psi0.is_finite() {
        return Err(invalid("wave speed and initial values must be finite"));
    }
    let n_out = (s_end / WAVE_SAMPLE_SPACING).ceil().max(1.0) as usize;
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = -c * y[0] + y[1] * (y[1] - 1.0);
        dy[1] = y[0];
    };
    let raw = dopri5(rhs, &[phi0, psi0], s_end, n_out, tol)?;
    let samples = raw.into_iter().map(|(s, y)| (s, y[0], y[1])).collect();
    Ok(WaveProfile { c, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibria_stay_put() {
        for (phi, psi) in [(0.0, 0.0), (0.0, 1.0)] {
            let w = traveling_wave_reference(2.0, 5.0, phi, psi, 1e-8).unwrap();
            assert!(w.samples.iter().all(|&(_, a, b)| a == phi && b == psi));
        }
    }

    #[test]
    fn exponential_decay_test_problem() {
        let tol = 1e-8;
        let out = dopri5(|_, y, dy| dy[0] = -y[0], &[1.0], 5.0, 50, tol).unwrap();
        for (s, y) in &out {
            assert!((y[0] - (-s).exp()).abs() <= 10.0 * tol, "s = {s}");
        }
        assert_eq!(out.last().unwrap().0, 5.0);
    }

    #[test]
    fn harmonic_oscillator_phase() {
        let out = dopri5(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[1.0, 0.0],
            10.0,
            100,
            1e-10,
        )
        .unwrap();
        for (s, y) in &out {
            assert!((y[0] - s.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(traveling_wave_reference(2.0, 0.0, 1.0, 0.0, 1e-8).is_err());
        assert!(traveling_wave_reference(2.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }
}
