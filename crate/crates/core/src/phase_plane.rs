//! Positive 2π-periodic solutions of `w'' + A²w − λ/w² = 0`.
//!
//! Every solution is either the equilibrium `w₀ = (λ/A²)^{1/3}` or a periodic
//! orbit oscillating between `w₁ < w₀ < w₂`. With `τ = w₂/w₁` the half period is
//!
//! ```text
//! L(τ) = (1/A) ∫₁^τ dy / √((y − 1)(τ − y)(y + 1 + τ)/y)
//! ```
//!
//! which decreases strictly from `π/(√3A)` to `π/(2A)`. A `2π/j`-periodic orbit
//! exists exactly when `L(τ) = π/j` has a root, i.e. when `√3A < j < 2A`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fourier::{self, TrigInterpolant};
use crate::quadrature::{self, QuadratureError, Tolerance};

/// Relative tolerance used to decide that `√3A` or `2A` sits on an integer.
pub const ENDPOINT_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("alpha = {alpha} is not admissible: {reason}")]
    InadmissibleAlpha { alpha: f64, reason: String },
    #[error("no {j}-mode orbit: j must lie strictly inside ({lower}, {upper})")]
    NoSuchMode { j: u32, lower: f64, upper: f64 },
    #[error("half-period quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("could not bracket L(tau) = {target} within tau in [{tau_lo}, {tau_hi}]")]
    Bracket { target: f64, tau_lo: f64, tau_hi: f64 },
    #[error("root of L(tau) = {target} only reached {achieved}")]
    RootTolerance { target: f64, achieved: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    a: f64,
    lambda: f64,
}

impl PhaseParams {
    pub fn new(a: f64, lambda: f64) -> Result<Self, PhaseError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(PhaseError::InvalidParameter(format!("A must be positive, got {a}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(PhaseError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { a, lambda })
    }

    /// Parameters of the circle equation attached to the weight `|x|^α`.
    pub fn from_alpha(alpha: f64, lambda: f64) -> Result<Self, PhaseError> {
        if !(alpha > -2.0) {
            return Err(PhaseError::InadmissibleAlpha { alpha, reason: "alpha must exceed -2".into() });
        }
        Self::new((2.0 + alpha) / 3.0, lambda)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// A level set of the first integral `(w')² + g(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub energy: f64,
    pub tau: f64,
    pub w1: f64,
    pub w2: f64,
}

pub fn equilibrium(params: &PhaseParams) -> f64 {
    (params.lambda / (params.a * params.a)).cbrt()
}

/// Minimum of `g`, attained at the equilibrium.
pub fn ground_energy(params: &PhaseParams) -> f64 {
    3.0 * (params.lambda * params.a).powf(2.0 / 3.0)
}

/// `g(w) = A²w² + 2λ/w`.
pub fn energy_at(params: &PhaseParams, w: f64) -> Result<f64, PhaseError> {
    if !(w > 0.0) {
        return Err(PhaseError::InvalidParameter(format!("w must be positive, got {w}")));
    }
    Ok(params.a * params.a * w * w + 2.0 * params.lambda / w)
}

fn check_tau(tau: f64) -> Result<(), PhaseError> {
    if !(tau.is_finite() && tau > 1.0) {
        return Err(PhaseError::InvalidParameter(format!("tau must exceed 1, got {tau}")));
    }
    Ok(())
}

pub fn level_from_tau(params: &PhaseParams, tau: f64) -> Result<EnergyLevel, PhaseError> {
    check_tau(tau)?;
    let a2 = params.a * params.a;
    let w1 = (2.0 * params.lambda / (a2 * tau * (1.0 + tau))).cbrt();
    let w2 = tau * w1;
    Ok(EnergyLevel { energy: energy_at(params, w1)?, tau, w1, w2 })
}

/// Radicand of the half-period integral as written: `1 + τ(1+τ) − y² − τ(1+τ)/y`.
pub fn radicand(tau: f64, y: f64) -> f64 {
    let p = tau * (1.0 + tau);
    1.0 + p - y * y - p / y
}

/// Factored radicand `(y − 1)(τ − y)(y + 1 + τ)/y`.
pub fn radicand_factored(tau: f64, y: f64) -> f64 {
    (y - 1.0) * (tau - y) * (y + 1.0 + tau) / y
}

/// Integrand of `A·L` after `y = c + h sin φ`, with `c = (1+τ)/2`, `h = (τ−1)/2`.
///
/// The factor `(y−1)(τ−y) = h² cos² φ` cancels the Jacobian `h cos φ`, leaving
/// `√(y/(y + 1 + τ))`.
fn reduced_integrand(tau: f64, phi: f64) -> f64 {
    let y = substituted_y(tau, phi);
    (y / (y + 1.0 + tau)).sqrt()
}

fn substituted_y(tau: f64, phi: f64) -> f64 {
    0.5 * (1.0 + tau) + 0.5 * (tau - 1.0) * phi.sin()
}

/// `L(τ)` together with its quadrature error estimate.
pub fn half_period_integral(params: &PhaseParams, tau: f64) -> Result<quadrature::Integral, PhaseError> {
    check_tau(tau)?;
    debug_assert!({
        let y = 0.5 * (1.0 + tau);
        let direct = radicand(tau, y);
        (direct - radicand_factored(tau, y)).abs() <= 1e-12 * (1.0 + tau * tau)
    });
    let tol = Tolerance { abs: 1e-13 * params.a, rel: 1e-14, max_panels: 8192 };
    let r = quadrature::integrate(|phi| reduced_integrand(tau, phi), -FRAC_PI_2, FRAC_PI_2, tol)?;
    Ok(quadrature::Integral { value: r.value / params.a, error: r.error / params.a, panels: r.panels })
}

pub fn half_period(params: &PhaseParams, tau: f64) -> Result<f64, PhaseError> {
    Ok(half_period_integral(params, tau)?.value)
}

/// `(τ, L(τ))` pairs for each requested amplitude ratio.
pub fn period_curve(params: &PhaseParams, taus: &[f64]) -> Result<Vec<(f64, f64)>, PhaseError> {
    taus.iter().map(|&t| Ok((t, half_period(params, t)?))).collect()
}

/// Integers strictly inside `(√3A, 2A)`, and whether an endpoint landed on an integer.
pub fn mode_window(a: f64) -> (Vec<u32>, bool) {
    let snap = |x: f64| {
        let r = x.round();
        if (x - r).abs() <= ENDPOINT_SNAP * x.abs().max(1.0) {
            (r, true)
        } else {
            (x, false)
        }
    };
    let (lo, hit_lo) = snap(3f64.sqrt() * a);
    let (hi, hit_hi) = snap(2.0 * a);
    let first = lo.floor() as i64 + 1;
    let last = hi.ceil() as i64 - 1;
    let modes = (first.max(1)..=last).map(|j| j as u32).collect();
    (modes, hit_lo || hit_hi)
}

/// Membership of `A` in the isotropic set: true iff `(√3A, 2A)` holds no integer.
pub fn classify_a(a: f64) -> bool {
    mode_window(a).0.is_empty()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    IsotropicOnly,
    Anisotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub alpha: f64,
    #[serde(rename = "P_positive")]
    pub p_positive: bool,
    #[serde(rename = "A")]
    pub a: f64,
    pub regime: Regime,
    #[serde(rename = "N0")]
    pub n0: usize,
    #[serde(rename = "modes")]
    pub mode_indices: Vec<u32>,
    /// `√3A` or `2A` is an integer to within [`ENDPOINT_SNAP`].
    pub endpoint_hit: bool,
}

/// Checks `α > −2`, and `α < 4` when the pressure is positive.
pub fn check_alpha(alpha: f64, p_positive: bool) -> Result<(), PhaseError> {
    if !alpha.is_finite() || alpha <= -2.0 {
        return Err(PhaseError::InadmissibleAlpha { alpha, reason: "alpha must exceed -2".into() });
    }
    if p_positive && alpha >= 4.0 {
        return Err(PhaseError::InadmissibleAlpha {
            alpha,
            reason: "alpha must be below 4 when P > 0".into(),
        });
    }
    Ok(())
}

pub fn classify_alpha(alpha: f64, p_positive: bool) -> Result<Classification, PhaseError> {
    check_alpha(alpha, p_positive)?;
    let a = (2.0 + alpha) / 3.0;
    let (modes, endpoint_hit) = mode_window(a);
    Ok(Classification {
        alpha,
        p_positive,
        a,
        regime: if modes.is_empty() { Regime::IsotropicOnly } else { Regime::Anisotropic },
        n0: modes.len(),
        mode_indices: modes,
        endpoint_hit,
    })
}

/// Finds `τ` with `L(τ) = π/j` by bisection in `ln(τ − 1)`.
pub fn solve_tau_for_mode(params: &PhaseParams, j: u32) -> Result<EnergyLevel, PhaseError> {
    let (modes, _) = mode_window(params.a);
    if !modes.contains(&j) {
        return Err(PhaseError::NoSuchMode { j, lower: 3f64.sqrt() * params.a, upper: 2.0 * params.a });
    }
    let target = PI / j as f64;
    let f = |tau: f64| -> Result<f64, PhaseError> { Ok(half_period(params, tau)? - target) };

    let mut lo = 1.0 + 1e-8;
    let mut hi = 1e8;
    while f(lo)? <= 0.0 {
        if lo - 1.0 < 1e-15 {
            return Err(PhaseError::Bracket { target, tau_lo: lo, tau_hi: hi });
        }
        lo = 1.0 + (lo - 1.0) * 1e-3;
    }
    while f(hi)? >= 0.0 {
        if hi > 1e15 {
            return Err(PhaseError::Bracket { target, tau_lo: lo, tau_hi: hi });
        }
        hi *= 1e3;
    }

    let mut u_lo = (lo - 1.0).ln();
    let mut u_hi = (hi - 1.0).ln();
    loop {
        let u = 0.5 * (u_lo + u_hi);
        let tau = 1.0 + u.exp();
        let t_lo = 1.0 + u_lo.exp();
        let t_hi = 1.0 + u_hi.exp();
        if t_hi - t_lo <= 1e-12 * tau || u == u_lo || u == u_hi {
            let level = level_from_tau(params, tau)?;
            let achieved = half_period(params, tau)?;
            if (achieved - target).abs() > 1e-9 {
                return Err(PhaseError::RootTolerance { target, achieved });
            }
            return Ok(level);
        }
        if f(tau)? > 0.0 {
            u_lo = u;
        } else {
            u_hi = u;
        }
    }
}

/// Sampled `2π/j`-periodic orbit with its minimum at `θ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub j: u32,
    pub params: PhaseParams,
    pub level: EnergyLevel,
    pub half_period: f64,
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
    pub wprime: Vec<f64>,
}

/// `A·θ(φ)`: the rescaled time needed to travel from `w₁` to `w₁·y(φ)`.
fn scaled_time(tau: f64, phi_from: f64, phi_to: f64) -> Result<f64, PhaseError> {
    let tol = Tolerance { abs: 1e-14, rel: 1e-14, max_panels: 4096 };
    Ok(quadrature::integrate(|p| reduced_integrand(tau, p), phi_from, phi_to, tol)?.value)
}

pub fn construct_orbit(params: &PhaseParams, j: u32, n_samples: usize) -> Result<PeriodicOrbit, PhaseError> {
    if n_samples < 64 || !n_samples.is_multiple_of(2 * j as usize) {
        return Err(PhaseError::InvalidParameter(format!(
            "n_samples must be at least 64 and divisible by 2j = {}, got {n_samples}",
            2 * j
        )));
    }
    let level = solve_tau_for_mode(params, j)?;
    let tau = level.tau;
    let a = params.a;
    let big_l = half_period(params, tau)?;
    let half_count = n_samples / (2 * j as usize);
    let c = 0.5 * (1.0 + tau);
    let h = 0.5 * (tau - 1.0);

    let mut half_w = Vec::with_capacity(half_count + 1);
    let mut half_wp = Vec::with_capacity(half_count + 1);
    let mut phi = -FRAC_PI_2;
    let mut elapsed = 0.0;
    for i in 0..=half_count {
        let target = if i == half_count { a * big_l } else { a * big_l * i as f64 / half_count as f64 };
        let phi_i = if i == 0 {
            -FRAC_PI_2
        } else if i == half_count {
            FRAC_PI_2
        } else {
            invert_time(tau, phi, elapsed, target)?
        };
        if i > 0 && i < half_count {
            elapsed += scaled_time(tau, phi, phi_i)?;
            phi = phi_i;
        }
        let y = c + h * phi_i.sin();
        half_w.push(level.w1 * y);
        half_wp.push(a * level.w1 * h * phi_i.cos() * ((y + 1.0 + tau) / y).sqrt());
    }

    let period = n_samples / j as usize;
    let theta = fourier::nodes(n_samples);
    let mut w = Vec::with_capacity(n_samples);
    let mut wprime = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let p = i % period;
        if p <= half_count {
            w.push(half_w[p]);
            wprime.push(half_wp[p]);
        } else {
            w.push(half_w[period - p]);
            wprime.push(-half_wp[period - p]);
        }
    }
    Ok(PeriodicOrbit { j, params: *params, level, half_period: big_l, theta, w, wprime })
}

/// Solves `A·θ(φ) = target` for `φ`, starting from a known point `(phi0, t0)`.
fn invert_time(tau: f64, phi0: f64, t0: f64, target: f64) -> Result<f64, PhaseError> {
    let mut lo = phi0;
    let mut hi = FRAC_PI_2;
    let mut phi = phi0;
    let mut t_phi = t0;
    for _ in 0..200 {
        let slope = reduced_integrand(tau, phi);
        let mut next = phi + (target - t_phi) / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let t_next = t0 + scaled_time(tau, phi0, next)?;
        if t_next > target {
            hi = next;
        } else {
            lo = next;
        }
        let done = (t_next - target).abs() <= 1e-14 * target.max(1.0) || hi - lo <= 1e-15;
        phi = next;
        t_phi = t_next;
        if done {
            break;
        }
    }
    Ok(phi)
}

impl PeriodicOrbit {
    /// `(w')² + A²w² + 2λ/w` at every sample.
    pub fn first_integral(&self) -> Vec<f64> {
        let a2 = self.params.a * self.params.a;
        self.w
            .iter()
            .zip(&self.wprime)
            .map(|(w, wp)| wp * wp + a2 * w * w + 2.0 * self.params.lambda / w)
            .collect()
    }

    /// Largest relative deviation of the first integral from the level energy.
    pub fn first_integral_drift(&self) -> f64 {
        self.first_integral()
            .iter()
            .map(|e| (e - self.level.energy).abs() / self.level.energy)
            .fold(0.0, f64::max)
    }

    /// `(w, w')` at an arbitrary angle, evaluated from the quadrature parametrization.
    pub fn eval_exact(&self, theta: f64) -> Result<(f64, f64), PhaseError> {
        let period = 2.0 * PI / self.j as f64;
        let half = 0.5 * period;
        let mut x = theta.rem_euclid(period);
        let mut sign = 1.0;
        if x > half {
            x = period - x;
            sign = -1.0;
        }
        let tau = self.level.tau;
        let a = self.params.a;
        let target = a * self.half_period * (x / half);
        let phi = if x <= 0.0 {
            -FRAC_PI_2
        } else if x >= half {
            FRAC_PI_2
        } else {
            invert_time(tau, -FRAC_PI_2, 0.0, target)?
        };
        let c = 0.5 * (1.0 + tau);
        let h = 0.5 * (tau - 1.0);
        let y = c + h * phi.sin();
        let wp = a * self.level.w1 * h * phi.cos() * ((y + 1.0 + tau) / y).sqrt();
        Ok((self.level.w1 * y, sign * wp))
    }

    /// `max |w'' + A²w − λ/w²|` over the sample angles, with `w''` from an
    /// eighth-order central difference of [`Self::eval_exact`] with spacing `h`.
    pub fn residual_max_fd(&self, h: f64) -> Result<f64, PhaseError> {
        const C: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
        let a2 = self.params.a * self.params.a;
        let mut worst: f64 = 0.0;
        for &t in &self.theta {
            let w0 = self.eval_exact(t)?.0;
            let mut d2 = C[0] * w0;
            for (k, c) in C.iter().enumerate().skip(1) {
                let off = k as f64 * h;
                d2 += c * (self.eval_exact(t + off)?.0 + self.eval_exact(t - off)?.0);
            }
            d2 /= h * h;
            worst = worst.max((d2 + a2 * w0 - self.params.lambda / (w0 * w0)).abs());
        }
        Ok(worst)
    }

    /// Default residual check: [`Self::residual_max_fd`] with `h = 2e-3`.
    pub fn residual_max(&self) -> Result<f64, PhaseError> {
        self.residual_max_fd(2e-3)
    }

    pub fn interpolant(&self) -> TrigInterpolant {
        TrigInterpolant::new(&self.w)
    }

    /// Samples of `w(θ + shift)` on `m` uniform nodes.
    pub fn shifted_samples(&self, m: usize, shift: f64) -> Vec<f64> {
        self.interpolant().resample(m, shift)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "theta,w,wprime")?;
        for i in 0..self.w.len() {
            writeln!(
                out,
                "{},{},{}",
                crate::export::fmt(self.theta[i]),
                crate::export::fmt(self.w[i]),
                crate::export::fmt(self.wprime[i])
            )?;
        }
        Ok(())
    }
}

/// Pointwise `w'' + A²w − λ/w²` of uniformly sampled periodic data.
pub fn stationary_residual(params: &PhaseParams, w: &[f64]) -> Vec<f64> {
    let d2 = fourier::spectral_derivative(w, 2);
    let a2 = params.a * params.a;
    w.iter().zip(d2).map(|(w, d2)| d2 + a2 * w - params.lambda / (w * w)).collect()
}
