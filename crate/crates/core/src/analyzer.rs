//! Post-processing: decay fits, limit coefficients, growth slopes and
//! empirical Łojasiewicz exponents.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cylinder::{CylinderError, CylinderField, PolarSamples};
use crate::fourier::{self, TrigInterpolant};
use crate::modes::{self, DecayPrediction, ModeError, RefinedParams};
use crate::phase_plane::PhaseParams;

pub const R2_GATE: f64 = 0.99;
pub const AMPLITUDE_FLOOR: f64 = 1e-13;
pub const SLOPE_TOL: f64 = 0.02;
/// Highest Fourier mode in Łojasiewicz perturbations.
pub const LOJ_MODES: usize = 8;
pub const THETA_STEP: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyzerError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("amplitude {amplitude:e} below the noise floor at t = {t}")]
    WindowTooLate { t: f64, amplitude: f64 },
    #[error("no window passes the r^2 gate (best {r_squared})")]
    FitRejected { r_squared: f64 },
    #[error("samples span {decades:.3} decades of r, need 2")]
    InsufficientRange { decades: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error(transparent)]
    Cylinder(#[from] CylinderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub k: i64,
    pub window: (f64, f64),
    pub fitted_exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<DecayPrediction>,
}

impl DecayFit {
    pub fn relative_error(&self) -> Option<f64> {
        self.predicted_exponent.map(|p| (self.fitted_exponent - p).abs() / p.abs())
    }
}

struct LineFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit { slope, intercept: my - slope * mx, r_squared }
}

/// Exponent `γ` of `|amp| ≈ C e^{−γt}` by least squares on `ln|amp|`.
///
/// The window shrinks symmetrically by 10% per attempt until `r² ≥ 0.99`.
pub fn fit_decay(t: &[f64], amp: &[f64], window: (f64, f64)) -> Result<DecayFit, AnalyzerError> {
    if t.len() != amp.len() {
        return Err(AnalyzerError::InvalidInput("t and amplitude lengths differ".into()));
    }
    let (mut lo, mut hi) = window;
    if !(hi > lo) {
        return Err(AnalyzerError::InvalidInput(format!("empty window ({lo}, {hi})")));
    }
    let mut best_r2 = f64::NEG_INFINITY;
    for _ in 0..20 {
        let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= lo && t[i] <= hi).collect();
        if idx.len() < 4 {
            break;
        }
        if let Some(&i) = idx.iter().find(|&&i| !(amp[i].abs() > AMPLITUDE_FLOOR)) {
            return Err(AnalyzerError::WindowTooLate { t: t[i], amplitude: amp[i].abs() });
        }
        let x: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| amp[i].abs().ln()).collect();
        let fit = least_squares(&x, &y);
        if fit.r_squared >= R2_GATE {
            return Ok(DecayFit {
                k: 0,
                window: (lo, hi),
                fitted_exponent: -fit.slope,
                intercept: fit.intercept,
                r_squared: fit.r_squared,
                samples: idx.len(),
                predicted_exponent: None,
                predicted: None,
            });
        }
        best_r2 = best_r2.max(fit.r_squared);
        let shrink = 0.05 * (hi - lo);
        lo += shrink;
        hi -= shrink;
    }
    Err(AnalyzerError::FitRejected { r_squared: best_r2 })
}

/// Middle third of the field's `t` range.
pub fn interior_third(field: &CylinderField) -> (f64, f64) {
    let a = field.t_grid[0];
    let b = *field.t_grid.last().expect("nonempty grid");
    (a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0)
}

/// Decay fit of `|a_k(t)|`; `k = 0` fits the mean deviation from `m`.
pub fn fit_mode_decay(field: &CylinderField, k: i64, window: Option<(f64, f64)>) -> Result<DecayFit, AnalyzerError> {
    let window = window.unwrap_or_else(|| interior_third(field));
    let amp = if k == 0 {
        let eq = field.equation.ok_or(CylinderError::MissingEquation)?;
        field.mean_deviation(eq.m)
    } else {
        field.mode_amplitude(k)
    };
    let mut fit = fit_decay(&field.t_grid, &amp, window)?;
    fit.k = k;
    if let Some(eq) = field.equation {
        let kk = k.unsigned_abs() as i32;
        let (regime, _) = modes::mode_regime(kk, eq.mu);
        fit.predicted_exponent = match regime {
            modes::ModeRegime::Supercritical => Some(modes::free_decay_rate(kk, eq.mu)),
            _ if kk == 0 && eq.p > 0.0 => Some(eq.beta),
            _ => None,
        };
        fit.predicted = RefinedParams::new(eq.alpha, eq.lambda, eq.p).ok().and_then(|p| modes::predicted_decay(&p).ok());
    }
    Ok(fit)
}

/// CSV `t,log_amplitude`.
pub fn write_log_amplitude_csv<W: std::io::Write>(t: &[f64], amp: &[f64], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "t,log_amplitude")?;
    for (a, b) in t.iter().zip(amp) {
        writeln!(out, "{}", crate::export::row(&[*a, b.abs().ln()]))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub error: f64,
    pub predicted: f64,
    pub nodes: [f64; 3],
}

/// True for `α ∈ (2√3−2, (3/2)√10−2) ∪ (3√3−2, 4)`.
pub fn in_forced_regime(alpha: f64) -> bool {
    let [b2, bm, b3] = modes::case_boundaries();
    (alpha > b2 && alpha < bm) || (alpha > b3 && alpha < 4.0)
}

/// `lim e^{(2−μ)t} V̄(t)` by Aitken extrapolation from three equally spaced
/// nodes at 50%, 60% and 70% of the cylinder.
pub fn limit_coefficient(field: &CylinderField, params: &RefinedParams) -> Result<LimitEstimate, AnalyzerError> {
    if !in_forced_regime(params.alpha) {
        return Err(AnalyzerError::NotApplicable(format!("alpha = {} is outside the forced-decay ranges", params.alpha)));
    }
    let beta = params.beta();
    let dev = field.mean_deviation(params.m);
    let n = field.t_grid.len();
    let pick = |f: f64| ((n - 1) as f64 * f).round() as usize;
    let idx = [pick(0.5), pick(0.6), pick(0.7)];
    let q: Vec<f64> = idx.iter().map(|&i| (beta * field.t_grid[i]).exp() * dev[i]).collect();
    let d1 = q[1] - q[0];
    let d2 = q[2] - q[1];
    let denom = d2 - d1;
    let value = if denom.abs() > 1e-15 * q[2].abs().max(1e-300) && (d2 / d1) > 0.0 && (d2 / d1) < 1.0 {
        q[2] - d2 * d2 / denom
    } else {
        q[2]
    };
    Ok(LimitEstimate {
        value,
        error: (value - q[2]).abs().max(d2.abs()),
        predicted: modes::forced_limit_coefficient(params.alpha, params.p),
        nodes: idx.map(|i| field.t_grid[i]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub log_r: Vec<f64>,
    pub log_u: Vec<f64>,
    pub fitted_slope: f64,
    pub target: f64,
    #[serde(rename = "C1_hat")]
    pub c1_hat: f64,
    #[serde(rename = "C2_hat")]
    pub c2_hat: f64,
    pub pass: bool,
}

/// Log-log slope of radial samples against `(2+α)/3`.
pub fn slope_check(r: &[f64], u: &[f64], alpha: f64) -> Result<SlopeCheck, AnalyzerError> {
    if r.len() != u.len() || r.len() < 2 {
        return Err(AnalyzerError::InvalidInput("need matching r and u with at least two samples".into()));
    }
    if let Some(i) = (0..r.len()).find(|&i| !(r[i] > 0.0 && u[i] > 0.0)) {
        return Err(AnalyzerError::InvalidInput(format!("r and u must be positive (r = {}, u = {})", r[i], u[i])));
    }
    let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let decades = (hi / lo).log10();
    if decades < 2.0 {
        return Err(AnalyzerError::InsufficientRange { decades });
    }
    let target = (2.0 + alpha) / 3.0;
    let log_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let log_u: Vec<f64> = u.iter().map(|x| x.ln()).collect();
    let fit = least_squares(&log_r, &log_u);
    let ratios = r.iter().zip(u).map(|(r, u)| u / r.powf(target));
    let (c1_hat, c2_hat) = ratios.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    Ok(SlopeCheck {
        log_r,
        log_u,
        fitted_slope: fit.slope,
        target,
        c1_hat,
        c2_hat,
        pass: (fit.slope - target).abs() <= SLOPE_TOL,
    })
}

/// [`slope_check`] on the θ-average of polar samples.
pub fn slope_check_polar(samples: &PolarSamples, alpha: f64) -> Result<SlopeCheck, AnalyzerError> {
    let u: Vec<f64> = samples.u.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect();
    slope_check(&samples.r, &u, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LojEstimate {
    pub w_reference: Vec<f64>,
    pub sample_count: usize,
    pub sigma: f64,
    pub seed: u64,
    pub theta_hat: f64,
    pub min_ratio: f64,
    /// Samples with `E(v) = E(w)`, where the inequality holds vacuously.
    pub vacuous: usize,
}

struct Functional {
    a2: f64,
    lambda: f64,
    w: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl Functional {
    fn new(params: &PhaseParams, w: &[f64]) -> Self {
        Self {
            a2: params.a() * params.a(),
            lambda: params.lambda(),
            w: w.to_vec(),
            w1: fourier::spectral_derivative(w, 1),
            w2: fourier::spectral_derivative(w, 2),
        }
    }

    /// `(E(v), ‖−v'' − A²v + λ/v²‖_{L²})` for `v = w + φ`.
    fn evaluate(&self, phi: &[f64], phi1: &[f64], phi2: &[f64]) -> (f64, f64) {
        let n = self.w.len();
        let dth = 2.0 * PI / n as f64;
        let (mut e, mut g) = (0.0, 0.0);
        for j in 0..n {
            let v = self.w[j] + phi[j];
            let v1 = self.w1[j] + phi1[j];
            let v2 = self.w2[j] + phi2[j];
            e += 0.5 * v1 * v1 - 0.5 * self.a2 * v * v - self.lambda / v;
            let r = -v2 - self.a2 * v + self.lambda / (v * v);
            g += r * r;
        }
        (e * dth, (g * dth).sqrt())
    }
}

/// Stationary residual `max|−w'' − A²w + λ/w²|` of sampled `w`.
pub fn stationary_residual_max(params: &PhaseParams, w: &[f64]) -> f64 {
    crate::phase_plane::stationary_residual(params, w).iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Random smooth perturbation with modes `|k| ≤ 8` and `H²` norm `radius`.
fn perturbation(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut a = [0.0; LOJ_MODES + 1];
    let mut b = [0.0; LOJ_MODES + 1];
    for k in 0..=LOJ_MODES {
        a[k] = rng.sample(StandardNormal);
        if k > 0 {
            b[k] = rng.sample(StandardNormal);
        }
    }
    let mut norm2 = 2.0 * PI * a[0] * a[0];
    for k in 1..=LOJ_MODES {
        let kf = k as f64;
        norm2 += PI * (a[k] * a[k] + b[k] * b[k]) * (1.0 + kf * kf + kf.powi(4));
    }
    let s = radius / norm2.sqrt();
    let mut phi = vec![0.0; n];
    let mut phi1 = vec![0.0; n];
    let mut phi2 = vec![0.0; n];
    for (j, t) in fourier::nodes(n).into_iter().enumerate() {
        phi[j] = a[0] * s;
        for k in 1..=LOJ_MODES {
            let kf = k as f64;
            let (sn, cs) = (kf * t).sin_cos();
            let (ak, bk) = (a[k] * s, b[k] * s);
            phi[j] += ak * cs + bk * sn;
            phi1[j] += kf * (bk * cs - ak * sn);
            phi2[j] -= kf * kf * (ak * cs + bk * sn);
        }
    }
    (phi, phi1, phi2)
}

/// Largest `θ` on the `0.005` grid in `(0, 1/2]` with `‖∇E(v)‖ ≥ |E(v)−E(w)|^{1−θ}`
/// for every sampled `v` in the `H²` ball of radius `sigma` around `w`.
///
/// Sample `i` draws from stream `i` of a ChaCha8 generator seeded with `seed`,
/// so results do not depend on thread scheduling.
pub fn loj_estimate(params: &PhaseParams, w: &[f64], sigma: f64, n_samples: usize, seed: u64) -> Result<LojEstimate, AnalyzerError> {
    if w.len() < 2 * LOJ_MODES + 2 {
        return Err(AnalyzerError::InvalidInput(format!("w needs at least {} samples", 2 * LOJ_MODES + 2)));
    }
    let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
    if !(wmin > 0.0) {
        return Err(AnalyzerError::InvalidInput("w must be positive".into()));
    }
    if !(sigma > 0.0 && sigma <= 0.05 * wmin) {
        return Err(AnalyzerError::InvalidInput(format!("sigma must lie in (0, 0.05 min w] = (0, {}]", 0.05 * wmin)));
    }
    let scale = 1.0 + params.a() * params.a() * w.iter().copied().fold(0.0, f64::max);
    let res = stationary_residual_max(params, w);
    if res > 1e-6 * scale {
        return Err(AnalyzerError::InvalidInput(format!("w is not stationary (residual {res:e})")));
    }
    let f = Functional::new(params, w);
    let zero = vec![0.0; w.len()];
    let (e_w, _) = f.evaluate(&zero, &zero, &zero);
    let pairs: Vec<(f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let radius = sigma * (1.0 - rng.random::<f64>());
            let (phi, phi1, phi2) = perturbation(&mut rng, w.len(), radius);
            let (e, g) = f.evaluate(&phi, &phi1, &phi2);
            (g, (e - e_w).abs())
        })
        .collect();
    let active: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.1 > 0.0).collect();
    let holds = |theta: f64| active.iter().all(|(g, gap)| *g >= gap.powf(1.0 - theta));
    let steps = (0.5 / THETA_STEP).round() as usize;
    let theta_hat = (1..=steps).rev().map(|i| i as f64 * THETA_STEP).find(|&th| holds(th)).unwrap_or(0.0);
    let min_ratio = active
        .iter()
        .map(|(g, gap)| g / gap.powf(1.0 - theta_hat))
        .fold(f64::INFINITY, f64::min);
    Ok(LojEstimate {
        w_reference: w.to_vec(),
        sample_count: n_samples,
        sigma,
        seed,
        theta_hat,
        min_ratio,
        vacuous: pairs.len() - active.len(),
    })
}

/// `w` resampled onto `n` nodes.
pub fn resample_profile(w: &[f64], n: usize) -> Vec<f64> {
    TrigInterpolant::new(w).resample(n, 0.0)
}
