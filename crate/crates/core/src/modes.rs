//! Linearized Fourier-mode dynamics around the isotropic profile.
//!
//! Writing `v = m + V` with `m = (9λ/(2+α)²)^{1/3}` and `μ = (2+α)/3`, the `k`-th
//! Fourier coefficient of `V` obeys
//!
//! ```text
//! a'' − 2μ a' + (3μ² − k²) a = g(t)
//! ```
//!
//! with characteristic roots `μ ± √d`, `d = k² − 2μ²`. Only modes with
//! `|k| > √3μ` have a decaying homogeneous solution; every other mode is
//! slaved to its forcing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase_plane::check_alpha;
use crate::quadrature::{self, QuadratureError, Tolerance};

/// `|k|` within this distance of `√2μ` is treated with the critical kernel.
pub const CRITICAL_TOL: f64 = 1e-6;
/// `√3μ` within this distance of an integer is a resonance.
pub const RESONANCE_TOL: f64 = 1e-9;
/// Distance of `α` from `(3/2)√10 − 2` below which the mixed case is selected.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("alpha = {alpha} is the excluded resonance (k-1)*sqrt(3) - 2 with k = {k}")]
    ResonanceExcluded { alpha: f64, k: i64 },
    #[error("no refined prediction for alpha = {alpha}, P = {p}: {reason}")]
    UncoveredCase { alpha: f64, p: f64, reason: String },
    #[error("case not applicable: {0}")]
    NotApplicable(String),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedParams {
    pub alpha: f64,
    pub lambda: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub mu: f64,
    pub m: f64,
}

impl RefinedParams {
    pub fn new(alpha: f64, lambda: f64, p: f64) -> Result<Self, ModeError> {
        if !(lambda > 0.0) {
            return Err(ModeError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(p >= 0.0) {
            return Err(ModeError::InvalidParameter(format!("P must be nonnegative, got {p}")));
        }
        check_alpha(alpha, p > 0.0).map_err(|e| ModeError::InvalidParameter(e.to_string()))?;
        let mu = (2.0 + alpha) / 3.0;
        let s = 3f64.sqrt() * mu;
        if (s - s.round()).abs() <= RESONANCE_TOL && s.round() >= 1.0 {
            return Err(ModeError::ResonanceExcluded { alpha, k: s.round() as i64 + 1 });
        }
        let m = (9.0 * lambda / (2.0 + alpha).powi(2)).cbrt();
        Ok(Self { alpha, lambda, p, mu, m })
    }

    /// Decay rate `(4 − α)/3 = 2 − μ` of the pressure forcing.
    pub fn beta(&self) -> f64 {
        2.0 - self.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeRegime {
    Oscillatory,
    Critical,
    Subcritical,
    Supercritical,
}

/// Regime of mode `k` and whether `|k|` sat within tolerance of `√2μ` or `√3μ`.
pub fn mode_regime(k: i32, mu: f64) -> (ModeRegime, bool) {
    let kk = (k as f64).abs();
    let s2 = 2f64.sqrt() * mu;
    let s3 = 3f64.sqrt() * mu;
    if (kk - s2).abs() <= CRITICAL_TOL {
        (ModeRegime::Critical, true)
    } else if kk < s2 {
        (ModeRegime::Oscillatory, false)
    } else if kk <= s3 + RESONANCE_TOL {
        (ModeRegime::Subcritical, (kk - s3).abs() <= RESONANCE_TOL)
    } else {
        (ModeRegime::Supercritical, false)
    }
}

/// Free decay rate `√(k² − 2μ²) − μ` of a supercritical mode.
pub fn free_decay_rate(k: i32, mu: f64) -> f64 {
    ((k * k) as f64 - 2.0 * mu * mu).sqrt() - mu
}

/// `9P/(36 + 2(2+α)²)`: limit of `e^{(2−μ)t}` times the mean deviation under pressure.
pub fn forced_limit_coefficient(alpha: f64, p: f64) -> f64 {
    9.0 * p / (36.0 + 2.0 * (2.0 + alpha).powi(2))
}

/// Forcing `g(t)` with a known exponential decay rate.
#[derive(Clone, Copy)]
pub struct Forcing<'a> {
    pub g: &'a (dyn Fn(f64) -> f64 + Sync),
    pub decay_rate: f64,
}

impl Forcing<'static> {
    pub fn zero() -> Self {
        Forcing { g: &|_| 0.0, decay_rate: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub k: i32,
    pub mu: f64,
    pub d_k_mu: f64,
    pub regime: ModeRegime,
    /// `|k|` was within tolerance of a regime boundary.
    pub near_degenerate: bool,
    pub t_grid: Vec<f64>,
    pub a_k: Vec<f64>,
}

impl ModeSolution {
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,a_k")?;
        for (t, a) in self.t_grid.iter().zip(&self.a_k) {
            writeln!(out, "{}", crate::export::row(&[*t, *a]))?;
        }
        Ok(())
    }
}

/// Kernel `K(x)` of a tail integral `∫_t^∞ K(s − t) g(s) ds`.
#[derive(Clone, Copy)]
enum Kernel {
    /// `c·e^{−κx}`
    Exp { c: f64, kappa: f64 },
    /// `e^{−μx} sin(ωx)/ω`
    DampedSine { mu: f64, omega: f64 },
    /// `x e^{−μx}`
    Critical { mu: f64 },
}

impl Kernel {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            Kernel::Exp { c, kappa } => c * (-kappa * x).exp(),
            Kernel::DampedSine { mu, omega } => (-mu * x).exp() * (omega * x).sin() / omega,
            Kernel::Critical { mu } => x * (-mu * x).exp(),
        }
    }

    fn envelope_rate(&self) -> f64 {
        match *self {
            Kernel::Exp { kappa, .. } => kappa,
            Kernel::DampedSine { mu, .. } | Kernel::Critical { mu } => mu,
        }
    }

    /// `∫_X^∞ K(x) e^{−ρ(x − X)} dx`.
    fn tail(&self, x: f64, rho: f64) -> f64 {
        match *self {
            Kernel::Exp { c, kappa } => c * (-kappa * x).exp() / (kappa + rho),
            Kernel::DampedSine { mu, omega } => {
                let z = num_complex::Complex64::new(mu, -omega);
                let num = (-z * x).exp();
                (num / (z + rho)).im / omega
            }
            Kernel::Critical { mu } => (-mu * x).exp() * (x / (mu + rho) + 1.0 / (mu + rho).powi(2)),
        }
    }
}

/// `∫_t^∞ K(s − t) g(s) ds`, truncated where the integrand envelope drops below
/// `1e−16` of its initial size and completed with the analytic envelope tail.
fn tail_integral(kernel: Kernel, forcing: &Forcing, t: f64) -> Result<f64, ModeError> {
    let rho = forcing.decay_rate;
    if rho.is_infinite() {
        return Ok(0.0);
    }
    let total_rate = kernel.envelope_rate() + rho;
    if !(total_rate > 0.0) {
        return Err(ModeError::InvalidParameter("forcing decays too slowly for a bounded solution".into()));
    }
    let cut = 16.0 * 10f64.ln() / total_rate;
    let scale = (forcing.g)(t).abs().max(f64::MIN_POSITIVE);
    let tol = Tolerance { abs: 1e-16 * scale, rel: 1e-14, max_panels: 8192 };
    let body = quadrature::integrate(|s| kernel.eval(s - t) * (forcing.g)(s), t, t + cut, tol)?.value;
    let g_cut = (forcing.g)(t + cut);
    Ok(body + g_cut * kernel.tail(cut, rho))
}

fn finite_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, scale: f64) -> Result<f64, ModeError> {
    let tol = Tolerance { abs: 1e-16 * scale.max(f64::MIN_POSITIVE), rel: 1e-14, max_panels: 8192 };
    Ok(quadrature::integrate(f, a, b, tol)?.value)
}

/// Bounded solution of the mode equation at a single time.
///
/// `t0` and `a_t0` enter only the supercritical formula, which carries the
/// decaying homogeneous solution through `a(t0) = a_t0`.
pub fn bounded_mode_value(k: i32, mu: f64, forcing: &Forcing, t: f64, t0: f64, a_t0: f64) -> Result<f64, ModeError> {
    if !(mu > 0.0) {
        return Err(ModeError::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let d = (k * k) as f64 - 2.0 * mu * mu;
    let (regime, _) = mode_regime(k, mu);
    match regime {
        ModeRegime::Oscillatory => {
            let omega = (-d).sqrt();
            tail_integral(Kernel::DampedSine { mu, omega }, forcing, t)
        }
        ModeRegime::Critical => tail_integral(Kernel::Critical { mu }, forcing, t),
        ModeRegime::Subcritical => {
            let sd = d.sqrt();
            let c = 0.5 / sd;
            let slow = tail_integral(Kernel::Exp { c, kappa: mu - sd }, forcing, t)?;
            let fast = tail_integral(Kernel::Exp { c: -c, kappa: mu + sd }, forcing, t)?;
            Ok(slow + fast)
        }
        ModeRegime::Supercritical => {
            if t < t0 {
                return Err(ModeError::InvalidParameter(format!("t = {t} precedes t0 = {t0}")));
            }
            let sd = d.sqrt();
            let lm = mu - sd;
            let lp = mu + sd;
            let c = 0.5 / sd;
            let homogeneous = (lm * (t - t0)).exp();
            let from_t0 = tail_integral(Kernel::Exp { c, kappa: lp }, forcing, t0)?;
            let scale = (forcing.g)(t0).abs();
            let history = if forcing.decay_rate.is_infinite() {
                0.0
            } else {
                finite_integral(|s| (forcing.g)(s) * (lm * (t - s)).exp(), t0, t, scale)?
            };
            let ahead = tail_integral(Kernel::Exp { c, kappa: lp }, forcing, t)?;
            Ok(a_t0 * homogeneous + from_t0 * homogeneous - c * history - ahead)
        }
    }
}

/// Bounded solution sampled on `t_grid`; the supercritical homogeneous part is
/// anchored at `t_grid[0]` with value `a_t0`.
pub fn bounded_mode_solution(k: i32, mu: f64, forcing: &Forcing, t_grid: &[f64], a_t0: f64) -> Result<ModeSolution, ModeError> {
    let Some(&t0) = t_grid.first() else {
        return Err(ModeError::InvalidParameter("empty t grid".into()));
    };
    let (regime, near_degenerate) = mode_regime(k, mu);
    let a_k = t_grid
        .iter()
        .map(|&t| bounded_mode_value(k, mu, forcing, t, t0, a_t0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModeSolution {
        k,
        mu,
        d_k_mu: (k * k) as f64 - 2.0 * mu * mu,
        regime,
        near_degenerate,
        t_grid: t_grid.to_vec(),
        a_k,
    })
}

/// Mean-mode coefficient of the pressure forcing, `√(2π)·P·e^{−(2−μ)t}`.
pub fn pressure_forcing_amplitude(p: f64) -> f64 {
    (2.0 * PI).sqrt() * p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitShape {
    PureMode(u32),
    Constant,
    MixedMode3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPrediction {
    pub alpha: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub case: u8,
    pub k: u32,
    pub t_exponent: f64,
    pub r_exponent: f64,
    pub limit_shape: LimitShape,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_coefficient: Option<f64>,
    /// Constant added to `sin(3θ + θ₃)` in the mixed case, `P/9`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixed_offset: Option<f64>,
}

/// Case boundaries in α: `2√3 − 2`, `(3/2)√10 − 2`, `3√3 − 2`.
pub fn case_boundaries() -> [f64; 3] {
    [2.0 * 3f64.sqrt() - 2.0, 1.5 * 10f64.sqrt() - 2.0, 3.0 * 3f64.sqrt() - 2.0]
}

/// Leading-order correction to the isotropic profile.
pub fn predicted_decay(params: &RefinedParams) -> Result<DecayPrediction, ModeError> {
    let RefinedParams { alpha, p, mu, .. } = *params;
    let [b2, bm, b3] = case_boundaries();
    let k = (3f64.sqrt() * mu).floor() as u32 + 1;
    let pure = |case: u8| {
        let t = free_decay_rate(k as i32, mu);
        DecayPrediction {
            alpha,
            p,
            case,
            k,
            t_exponent: t,
            r_exponent: t + mu,
            limit_shape: LimitShape::PureMode(k),
            limit_coefficient: None,
            mixed_offset: None,
        }
    };
    let forced = 2.0 - mu;
    if p > 0.0 {
        if (alpha - bm).abs() <= TIE_TOL {
            return Ok(DecayPrediction {
                alpha,
                p,
                case: 4,
                k: 3,
                t_exponent: forced,
                r_exponent: 2.0,
                limit_shape: LimitShape::MixedMode3,
                limit_coefficient: None,
                mixed_offset: Some(p / 9.0),
            });
        }
        if (alpha > b2 && alpha < bm) || (alpha > b3 && alpha < 4.0) {
            return Ok(DecayPrediction {
                alpha,
                p,
                case: 3,
                k: 0,
                t_exponent: forced,
                r_exponent: 2.0,
                limit_shape: LimitShape::Constant,
                limit_coefficient: Some(forced_limit_coefficient(alpha, p)),
                mixed_offset: None,
            });
        }
        if k == 1 {
            return Err(ModeError::UncoveredCase {
                alpha,
                p,
                reason: "the pure-mode statement for P > 0 covers k = 2, 3 only".into(),
            });
        }
        return Ok(pure(1));
    }
    if (alpha > b2 && alpha <= bm) || (alpha > b3 && alpha < 4.0) {
        return Ok(pure(2));
    }
    Ok(pure(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateSource {
    Mode(u32),
    Forced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetingRate {
    pub source: RateSource,
    pub t_exponent: f64,
}

/// Competing decay rates sorted ascending: the two slowest supercritical modes
/// and, when `P > 0`, the forced rate `2 − μ`.
pub fn exponent_dominance(params: &RefinedParams) -> Vec<CompetingRate> {
    let k0 = (3f64.sqrt() * params.mu).floor() as u32 + 1;
    let mut rates: Vec<CompetingRate> = (k0..k0 + 2)
        .map(|k| CompetingRate { source: RateSource::Mode(k), t_exponent: free_decay_rate(k as i32, params.mu) })
        .collect();
    if params.p > 0.0 {
        rates.push(CompetingRate { source: RateSource::Forced, t_exponent: 2.0 - params.mu });
    }
    rates.sort_by(|a, b| a.t_exponent.total_cmp(&b.t_exponent));
    rates
}

/// True when the two slowest rates agree to within `tol`.
pub fn is_tie(rates: &[CompetingRate], tol: f64) -> bool {
    rates.len() >= 2 && (rates[1].t_exponent - rates[0].t_exponent).abs() <= tol
}
