//! Real trigonometric interpolation on uniform periodic grids.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Uniform nodes `2πj/n`, `j = 0..n`.
pub fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

/// Coefficients `c_k = (1/n) Σ_j v_j e^{-ikθ_j}` for `k = 0..=n/2`.
pub fn coefficients(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    (0..=n / 2)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in samples.iter().enumerate() {
                let phase = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                acc += Complex64::from_polar(*v, phase);
            }
            acc / n as f64
        })
        .collect()
}

/// Periodic interpolant built from samples on a uniform grid.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(samples: &[f64]) -> Self {
        Self { n: samples.len(), coeffs: coefficients(samples) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Weight of mode `k` in the real reconstruction (the Nyquist mode of an
    /// even grid is counted once).
    fn weight(&self, k: usize) -> f64 {
        if k == 0 || (self.n.is_multiple_of(2) && k == self.n / 2) {
            1.0
        } else {
            2.0
        }
    }

    /// `d`-th derivative of the interpolant at `theta`.
    pub fn derivative(&self, theta: f64, d: u32) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let kf = k as f64;
            let nyquist = self.n.is_multiple_of(2) && k == self.n / 2;
            if nyquist && d % 2 == 1 {
                continue;
            }
            // d^d/dθ^d e^{ikθ} = (ik)^d e^{ikθ}
            let ik = Complex64::new(0.0, kf).powu(d);
            let term = if nyquist {
                // real part of c cos(kθ) only; the sine part vanishes on the grid
                c.re * (ik * Complex64::new((kf * theta).cos(), 0.0)).re
            } else {
                (c * ik * Complex64::from_polar(1.0, kf * theta)).re
            };
            acc += self.weight(k) * term;
        }
        acc
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.derivative(theta, 0)
    }

    /// Samples of the interpolant shifted by `shift`, on `m` uniform nodes.
    pub fn resample(&self, m: usize, shift: f64) -> Vec<f64> {
        nodes(m).into_iter().map(|t| self.eval(t + shift)).collect()
    }
}

/// Spectral derivative of order `d` at the sample nodes.
pub fn spectral_derivative(samples: &[f64], d: u32) -> Vec<f64> {
    let interp = TrigInterpolant::new(samples);
    nodes(samples.len()).into_iter().map(|t| interp.derivative(t, d)).collect()
}
