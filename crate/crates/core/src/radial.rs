//! Radial solutions of `Δu = λ r^α / u² + P` on the unit ball with `u = 1` on the boundary.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::solve_tridiagonal;

/// Newton iterates are kept at or above this value.
pub const U_FLOOR: f64 = 1e-8;
/// Target max-norm residual of a converged radial solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Continuation stops once the failure bracket is this narrow.
pub const BRACKET_WIDTH: f64 = 1e-4;

const MAX_NEWTON: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("P = {p} is at or above P* = {p_star}: no positive solution exists")]
    NonexistenceRegime { p: f64, p_star: f64 },
    #[error("no admissible solution at lambda = {lambda}: {reason}")]
    NoAdmissibleSolution { lambda: f64, reason: String },
    #[error("continuation passed lambda = {reached} without a failure bracket (limit {limit})")]
    BracketNotFound { reached: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub lambda: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub dim: u32,
    pub n_grid: usize,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self { lambda: 0.0, p: 0.0, alpha: 0.0, dim: 2, n_grid: 256 }
    }
}

impl ProblemSpec {
    pub fn new(alpha: f64, p: f64) -> Self {
        Self { alpha, p, ..Self::default() }
    }

    /// All violated preconditions, empty when the problem is well posed.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.lambda >= 0.0) {
            v.push(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.p >= 0.0) {
            v.push(format!("P must be nonnegative, got {}", self.p));
        }
        if !(self.alpha >= 0.0) {
            v.push(format!("alpha must be nonnegative for radial solves (existence bounds need alpha >= 0), got {}", self.alpha));
        }
        if self.dim < 1 {
            v.push("N must be at least 1".into());
        }
        if self.n_grid < 64 {
            v.push(format!("grid must have at least 64 intervals, got {}", self.n_grid));
        }
        v
    }

    pub fn validate(&self) -> Result<(), RadialError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(RadialError::InvalidSpec(v.join("; ")))
        }
    }
}

/// Torsion data of the unit `N`-ball, `Φ = (1 − r²)/(2N)`, weighted by `f = r^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsionConstants {
    #[serde(rename = "P_star")]
    pub p_star: f64,
    pub integral_phi: f64,
    pub integral_phi_f: f64,
    pub volume: f64,
}

/// Volume of the unit ball in `R^n`.
pub fn ball_volume(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * ball_volume(n - 2),
    }
}

pub fn torsion_constants(dim: u32, alpha: f64) -> TorsionConstants {
    let n = dim as f64;
    let volume = ball_volume(dim);
    TorsionConstants {
        p_star: 2.0 * n,
        integral_phi: volume / (n * (n + 2.0)),
        integral_phi_f: volume / ((n + alpha) * (n + alpha + 2.0)),
        volume,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistenceBounds {
    #[serde(rename = "P_star")]
    pub p_star: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Analytic bracket for the pull-in value when `0 ≤ P < P*`.
pub fn existence_bounds(spec: &ProblemSpec) -> Result<ExistenceBounds, RadialError> {
    spec.validate()?;
    let tc = torsion_constants(spec.dim, spec.alpha);
    if spec.p >= tc.p_star {
        return Err(RadialError::NonexistenceRegime { p: spec.p, p_star: tc.p_star });
    }
    let sup_f = 1.0;
    let gap = tc.p_star - spec.p;
    Ok(ExistenceBounds {
        p_star: tc.p_star,
        lower: 4.0 * gap.powi(3) / (27.0 * tc.p_star * tc.p_star * sup_f),
        upper: (tc.volume - spec.p * tc.integral_phi) / tc.integral_phi_f,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub r_grid: Vec<f64>,
    pub u: Vec<f64>,
    pub converged: bool,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

impl RadialSolution {
    pub fn min_u(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Stencil weights of the conservative operator `(r^{N−1}u')'/r^{N−1}` at node `i`,
/// times `h²`: `(lower, upper)` neighbour coefficients.
fn stencil(dim: u32, i: usize) -> (f64, f64) {
    if i == 0 {
        // ghost node u_{-1} = u_1: the operator tends to N·u''(0)
        return (0.0, 2.0 * dim as f64);
    }
    // half-node fluxes over the shell volume, which makes L_h exact on quadratics
    let k = dim as i32 - 1;
    let (lo, hi) = (i as f64 - 0.5, i as f64 + 0.5);
    let shell = (hi.powi(k + 1) - lo.powi(k + 1)) / dim as f64;
    (lo.powi(k) / shell, hi.powi(k) / shell)
}

/// `λ r^α / u² + P − L_h u` at nodes `0..n` (the boundary node is excluded).
///
/// Node 0 is non-finite when `u(0) = 0`, as for the singular solutions.
pub fn residual(spec: &ProblemSpec, lambda: f64, u: &[f64]) -> Vec<f64> {
    let n = u.len() - 1;
    let h2 = (1.0 / n as f64).powi(2);
    (0..n)
        .map(|i| {
            let r = i as f64 / n as f64;
            let (cl, cu) = stencil(spec.dim, i);
            let left = if i == 0 { 0.0 } else { u[i - 1] };
            let lap = (cu * (u[i + 1] - u[i]) - cl * (u[i] - left)) / h2;
            lambda * r.powf(spec.alpha) / (u[i] * u[i]) + spec.p - lap
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residual target: [`RESIDUAL_TOL`] or the round-off floor of the `1/h²` stencil.
pub fn residual_tolerance(n: usize) -> f64 {
    RESIDUAL_TOL.max(2.0 * f64::EPSILON * (n as f64).powi(2))
}

/// Damped Newton solve, warm-started from `init` when given.
pub fn solve_radial(spec: &ProblemSpec, lambda: f64, init: Option<&RadialSolution>) -> Result<RadialSolution, RadialError> {
    spec.validate()?;
    if !(lambda >= 0.0) {
        return Err(RadialError::InvalidSpec(format!("lambda must be nonnegative, got {lambda}")));
    }
    let n = spec.n_grid;
    let r_grid = grid(n);
    let mut u = match init {
        Some(s) => {
            if s.u.len() != n + 1 || s.u.iter().any(|v| !(*v > 0.0)) {
                return Err(RadialError::InvalidSpec("initial guess must be positive on the same grid".into()));
            }
            s.u.clone()
        }
        None => vec![1.0; n + 1],
    };
    u[n] = 1.0;
    let h2 = (1.0 / n as f64).powi(2);
    let tol = residual_tolerance(n);
    let p_star = torsion_constants(spec.dim, spec.alpha).p_star;
    let mut touched_floor = false;

    let mut res = residual(spec, lambda, &u);
    let mut norm = max_abs(&res);
    let mut iters = 0;
    while norm > tol && iters < MAX_NEWTON {
        iters += 1;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 0..n {
            let r = r_grid[i];
            let (cl, cu) = stencil(spec.dim, i);
            sub[i] = -cl / h2;
            sup[i] = if i + 1 < n { -cu / h2 } else { 0.0 };
            diag[i] = (cl + cu) / h2 - 2.0 * lambda * r.powf(spec.alpha) / u[i].powi(3);
        }
        let rhs: Vec<f64> = res.iter().map(|x| -x).collect();
        let Some(delta) = solve_tridiagonal(&sub, &diag, &sup, &rhs) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = u.clone();
            let mut floor_hit = false;
            for i in 0..n {
                trial[i] = u[i] + step * delta[i];
                if trial[i] < U_FLOOR {
                    trial[i] = U_FLOOR;
                    floor_hit = true;
                }
            }
            let trial_res = residual(spec, lambda, &trial);
            let trial_norm = max_abs(&trial_res);
            if trial_norm.is_finite() && trial_norm < norm {
                touched_floor |= floor_hit;
                u = trial;
                res = trial_res;
                norm = trial_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let converged = norm <= tol;
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    let max_u = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if converged && min_u <= U_FLOOR * (1.0 + 1e-12) {
        return Err(RadialError::NoAdmissibleSolution { lambda, reason: "converged iterate touches the positivity floor".into() });
    }
    if converged && max_u > 1.0 + 1e-12 {
        return Err(RadialError::NoAdmissibleSolution { lambda, reason: format!("solution exceeds 1 (max {max_u})") });
    }
    if !converged && touched_floor {
        return Err(RadialError::NoAdmissibleSolution { lambda, reason: "Newton iterates were pushed to the positivity floor".into() });
    }
    if !converged && spec.p >= p_star {
        return Err(RadialError::NoAdmissibleSolution { lambda, reason: format!("P = {} >= P* = {p_star}", spec.p) });
    }
    Ok(RadialSolution { r_grid, u, converged, newton_iters: iters, residual_norm: norm })
}

/// Minimal-branch solution at `spec.lambda`, reached by warm-started steps from `λ = 0`.
pub fn solve_minimal(spec: &ProblemSpec) -> Result<RadialSolution, RadialError> {
    let target = spec.lambda;
    let mut current = solve_radial(spec, 0.0, None)?;
    if target == 0.0 {
        return Ok(current);
    }
    let mut lam = 0.0;
    let mut step = target / 16.0;
    while lam < target {
        let trial = (lam + step).min(target);
        match solve_radial(spec, trial, Some(&current)) {
            Ok(s) if s.converged && s.min_u() <= current.min_u() => {
                lam = trial;
                current = s;
                step *= 1.5;
            }
            Err(e @ RadialError::InvalidSpec(_)) => return Err(e),
            _ => {
                step *= 0.5;
                if step < 1e-6 * target {
                    return Err(RadialError::NoAdmissibleSolution {
                        lambda: target,
                        reason: format!("minimal branch ends near lambda = {lam}"),
                    });
                }
            }
        }
    }
    Ok(current)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub lambda: f64,
    pub min_u: f64,
    pub newton_iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub steps: Vec<ContinuationStep>,
    pub lambda_star_estimate: f64,
    pub bracket: (f64, f64),
    pub bounds: ExistenceBounds,
    /// Last solution on the minimal branch.
    #[serde(skip)]
    pub last_solution: Option<RadialSolution>,
}

/// Follows the minimal branch from `λ = 0` until Newton failures bracket the fold.
pub fn continue_in_lambda(spec: &ProblemSpec) -> Result<ContinuationTrace, RadialError> {
    let bounds = existence_bounds(spec)?;
    let limit = 1.05 * bounds.upper;
    let mut current = solve_radial(spec, 0.0, None)?;
    let mut lam_ok = 0.0;
    let mut steps = vec![ContinuationStep { lambda: 0.0, min_u: current.min_u(), newton_iters: current.newton_iters, converged: true }];
    let mut step = bounds.upper / 32.0;
    let mut failed = false;
    loop {
        let trial = lam_ok + step;
        let attempt = solve_radial(spec, trial, Some(&current));
        let accepted = match &attempt {
            Ok(s) => {
                s.converged
                    && s.min_u() < current.min_u()
                    && s.u.iter().zip(&current.u).all(|(new, old)| *new <= old + 1e-12)
            }
            Err(_) => false,
        };
        match attempt {
            Ok(s) if accepted => {
                steps.push(ContinuationStep { lambda: trial, min_u: s.min_u(), newton_iters: s.newton_iters, converged: true });
                lam_ok = trial;
                current = s;
                if !failed {
                    step *= 1.5;
                }
                if lam_ok > limit {
                    return Err(RadialError::BracketNotFound { reached: lam_ok, limit });
                }
            }
            other => {
                let (min_u, iters) = match &other {
                    Ok(s) => (s.min_u(), s.newton_iters),
                    Err(_) => (f64::NAN, 0),
                };
                steps.push(ContinuationStep { lambda: trial, min_u, newton_iters: iters, converged: false });
                failed = true;
                if step <= BRACKET_WIDTH {
                    return Ok(ContinuationTrace {
                        steps,
                        lambda_star_estimate: 0.5 * (lam_ok + trial),
                        bracket: (lam_ok, trial),
                        bounds,
                        last_solution: Some(current),
                    });
                }
                step *= 0.5;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullinRow {
    #[serde(rename = "P")]
    pub p: f64,
    pub lambda_star: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Pull-in estimates over a grid of pressures, computed in parallel.
pub fn pullin_sweep(base: &ProblemSpec, pressures: &[f64]) -> Result<Vec<PullinRow>, RadialError> {
    pressures
        .par_iter()
        .map(|&p| {
            let spec = ProblemSpec { p, ..*base };
            let trace = continue_in_lambda(&spec)?;
            Ok(PullinRow { p, lambda_star: trace.lambda_star_estimate, lower: trace.bounds.lower, upper: trace.bounds.upper })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[PullinRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "P,lambda_star,lower,upper")?;
    for r in rows {
        writeln!(out, "{}", crate::export::row(&[r.p, r.lambda_star, r.lower, r.upper]))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(2) - PI).abs() < 1e-15);
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_is_reproduced_exactly() {
        // L_h r² = 2N for every N: the scheme is exact on quadratics.
        for dim in 1..=4 {
            let spec = ProblemSpec { dim, ..ProblemSpec::default() };
            let n = 64;
            let u: Vec<f64> = grid(n).iter().map(|r| 1.0 + r * r).collect();
            let res = residual(&spec, 0.0, &u);
            let expected = -2.0 * dim as f64;
            assert!(res.iter().all(|x| (x - expected).abs() < 1e-9), "dim {dim}");
        }
    }

    #[test]
    fn lambda_zero_is_constant() {
        let s = solve_radial(&ProblemSpec::default(), 0.0, None).unwrap();
        assert!(s.converged);
        assert!(s.u.iter().all(|u| *u == 1.0));
    }
}
