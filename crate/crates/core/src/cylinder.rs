//! The Emden-transformed problem on a finite cylinder `[t₀, T] × S¹`.
//!
//! With `v = r^{−μ}u`, `t = −ln r` and `μ = (2+α)/3`, a singular solution turns into
//!
//! ```text
//! −v_tt + 2μ v_t = v_θθ + μ²v − λ/v² − P e^{−βt},   β = (4−α)/3.
//! ```
//!
//! The θ direction is discretized by collocation on `2K+1` nodes with the
//! nonlinearity evaluated on a padded grid; `t` uses second-order differences.
//! Directions of the far-end linearization that do not decay forward in `t`
//! receive Cauchy data at `T` instead of Dirichlet data at `t₀`, which keeps the
//! finite-cylinder problem well posed for every mode.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::row;
use crate::fourier::{self, TrigInterpolant};
use crate::linalg::BlockBanded;
use crate::phase_plane::{self, check_alpha, PhaseError, PhaseParams};

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_NEWTON: usize = 60;
/// Eigenvalues of the far-end linearization above this are treated as decaying.
pub const STABLE_EIG_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CylinderError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("boundary profile is not positive (min {min})")]
    NonPositiveProfile { min: f64 },
    #[error("input u must be positive (found {value} at r = {r})")]
    NonPositiveInput { r: f64, value: f64 },
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error("stationary profile polish did not converge (residual {residual:e})")]
    PolishFailed { residual: f64 },
    #[error("Newton diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("solution left the positive cone (min v = {min_v:e})")]
    SolutionEscapedBounds { min_v: f64 },
    #[error("field carries no equation parameters")]
    MissingEquation,
    #[error("no stationary profile within 0.1 of the far slice (nearest {distance:e})")]
    NotConverged { distance: f64 },
}

/// Boundary profile in θ at `t₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaProfile {
    Equilibrium,
    Constant { value: f64 },
    /// `m + amplitude·sin(kθ + phase)`
    Perturbed {
        amplitude: f64,
        k: u32,
        #[serde(default)]
        phase: f64,
    },
    Samples { values: Vec<f64> },
    Orbit {
        j: u32,
        #[serde(default)]
        shift: f64,
    },
}

/// Dirichlet data at `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FarBoundary {
    Equilibrium,
    Orbit {
        j: u32,
        #[serde(default)]
        shift: f64,
    },
    Custom { profile: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderConfig {
    pub alpha: f64,
    pub lambda: f64,
    #[serde(rename = "P", default)]
    pub p: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub n_t: usize,
    #[serde(rename = "K")]
    pub k_modes: usize,
    pub boundary_t0: ThetaProfile,
    #[serde(rename = "boundary_T")]
    pub boundary_t_end: FarBoundary,
}

impl CylinderConfig {
    /// Cylinder `[0, 30]` with `K = 32`, `Δt = 0.1` and equilibrium data at both ends.
    pub fn new(alpha: f64, lambda: f64, p: f64) -> Self {
        Self {
            alpha,
            lambda,
            p,
            t0: 0.0,
            t_end: 30.0,
            n_t: 301,
            k_modes: 32,
            boundary_t0: ThetaProfile::Equilibrium,
            boundary_t_end: FarBoundary::Equilibrium,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = check_alpha(self.alpha, self.p > 0.0) {
            v.push(e.to_string());
        }
        if !(self.lambda > 0.0) {
            v.push(format!("lambda must be positive (got {})", self.lambda));
        }
        if !(self.p >= 0.0) {
            v.push(format!("P must be nonnegative (got {})", self.p));
        }
        if !self.t0.is_finite() || !self.t_end.is_finite() || !(self.t_end > self.t0) {
            v.push(format!("T must exceed t0 (got t0 = {}, T = {})", self.t0, self.t_end));
        }
        if self.n_t < 128 {
            v.push(format!("n_t must be at least 128 (got {})", self.n_t));
        }
        if self.k_modes < 8 {
            v.push(format!("K must be at least 8 (got {})", self.k_modes));
        }
        v
    }

    pub fn validate(&self) -> Result<(), CylinderError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CylinderError::InvalidConfig(v))
        }
    }

    pub fn equation(&self) -> Equation {
        Equation::new(self.alpha, self.lambda, self.p)
    }

    pub fn n_theta(&self) -> usize {
        2 * self.k_modes + 1
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / (self.n_t - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub alpha: f64,
    pub lambda: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub mu: f64,
    pub beta: f64,
    pub m: f64,
}

impl Equation {
    pub fn new(alpha: f64, lambda: f64, p: f64) -> Self {
        let mu = (2.0 + alpha) / 3.0;
        Self { alpha, lambda, p, mu, beta: (4.0 - alpha) / 3.0, m: (lambda / (mu * mu)).cbrt() }
    }

    pub fn forcing(&self, t: f64) -> f64 {
        self.p * (-self.beta * t).exp()
    }

    fn j(&self, v: f64) -> f64 {
        self.mu * self.mu * v - self.lambda / (v * v)
    }
}

/// Differentiation and dealiasing matrices on `n` equispaced nodes.
#[derive(Debug, Clone)]
pub struct Operators {
    pub n: usize,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    /// Interpolation onto the padded grid.
    pub up: DMatrix<f64>,
    /// Truncation back onto the collocation nodes.
    pub down: DMatrix<f64>,
}

impl Operators {
    pub fn new(n: usize) -> Self {
        let k = (n - 1) / 2;
        let mut fine = 3 * k + 1;
        if fine.is_multiple_of(2) {
            fine += 1;
        }
        let mut d1 = DMatrix::zeros(n, n);
        let mut d2 = DMatrix::zeros(n, n);
        let mut up = DMatrix::zeros(fine, n);
        let fine_nodes = fourier::nodes(fine);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let it = TrigInterpolant::new(&e);
            for (i, t) in fourier::nodes(n).into_iter().enumerate() {
                d1[(i, j)] = it.derivative(t, 1);
                d2[(i, j)] = it.derivative(t, 2);
            }
            for (i, &t) in fine_nodes.iter().enumerate() {
                up[(i, j)] = it.eval(t);
            }
        }
        let down = up.transpose() * (n as f64 / fine as f64);
        Self { n, d1, d2, up, down }
    }

    /// Dealiased `λ/v²`.
    pub fn nonlinear(&self, v: &DVector<f64>, lambda: f64) -> DVector<f64> {
        let fine = &self.up * v;
        &self.down * fine.map(|x| lambda / (x * x))
    }

    /// Jacobian of [`Operators::nonlinear`].
    pub fn nonlinear_jacobian(&self, v: &DVector<f64>, lambda: f64) -> DMatrix<f64> {
        let fine = &self.up * v;
        let mut scaled = self.up.clone();
        for (i, mut r) in scaled.row_iter_mut().enumerate() {
            r *= -2.0 * lambda / fine[i].powi(3);
        }
        &self.down * scaled
    }

    fn min_padded(&self, v: &DVector<f64>) -> f64 {
        (&self.up * v).min()
    }

    /// `−w'' − μ²w + λ/w²`, zero at stationary profiles.
    pub fn stationary_residual(&self, eq: &Equation, w: &DVector<f64>) -> DVector<f64> {
        -(&self.d2 * w) - w * (eq.mu * eq.mu) + self.nonlinear(w, eq.lambda)
    }

    /// Linearization `−D² − μ² + N'(w)`, symmetrized.
    pub fn linearization(&self, eq: &Equation, w: &DVector<f64>) -> DMatrix<f64> {
        let mut l = -&self.d2 + self.nonlinear_jacobian(w, eq.lambda);
        for i in 0..self.n {
            l[(i, i)] -= eq.mu * eq.mu;
        }
        (&l + l.transpose()) * 0.5
    }
}

/// Newton polish of `w` onto a discrete stationary profile; the translation
/// kernel of orbits is handled by a pseudo-inverse step.
pub fn polish_stationary(ops: &Operators, eq: &Equation, w: &DVector<f64>) -> Result<DVector<f64>, CylinderError> {
    let mut w = w.clone();
    let scale = eq.mu * eq.mu * w.amax();
    let tol = 1e-13 * scale.max(1.0);
    let mut res = ops.stationary_residual(eq, &w).amax();
    for _ in 0..50 {
        if res <= tol {
            return Ok(w);
        }
        let f = ops.stationary_residual(eq, &w);
        let mut jac = -&ops.d2 + ops.nonlinear_jacobian(&w, eq.lambda);
        for i in 0..ops.n {
            jac[(i, i)] -= eq.mu * eq.mu;
        }
        let svd = jac.svd(true, true);
        let cut = 1e-9 * svd.singular_values.max();
        let step = svd.solve(&f, cut).map_err(|_| CylinderError::PolishFailed { residual: res })?;
        let candidate = &w - step;
        if ops.min_padded(&candidate) <= 0.0 {
            return Err(CylinderError::PolishFailed { residual: res });
        }
        let new_res = ops.stationary_residual(eq, &candidate).amax();
        w = candidate;
        if new_res >= res && res <= 1e3 * tol {
            return Ok(w);
        }
        res = new_res;
    }
    if res <= 1e3 * tol {
        Ok(w)
    } else {
        Err(CylinderError::PolishFailed { residual: res })
    }
}

/// Discrete stationary orbit `w_j(θ + shift)` on `n` nodes.
pub fn discrete_orbit(ops: &Operators, eq: &Equation, j: u32, shift: f64) -> Result<DVector<f64>, CylinderError> {
    let params = PhaseParams::new(eq.mu, eq.lambda)?;
    let orbit = phase_plane::construct_orbit(&params, j, (8 * ops.n).max(512))?;
    let mut samples = Vec::with_capacity(ops.n);
    for t in fourier::nodes(ops.n) {
        samples.push(orbit.eval_exact(t + shift)?.0);
    }
    polish_stationary(ops, eq, &DVector::from_vec(samples))
}

fn resample(values: &[f64], n: usize) -> Vec<f64> {
    if values.len() == n {
        values.to_vec()
    } else {
        TrigInterpolant::new(values).resample(n, 0.0)
    }
}

fn start_profile(profile: &ThetaProfile, ops: &Operators, eq: &Equation) -> Result<DVector<f64>, CylinderError> {
    let n = ops.n;
    Ok(match profile {
        ThetaProfile::Equilibrium => DVector::from_element(n, eq.m),
        ThetaProfile::Constant { value } => DVector::from_element(n, *value),
        ThetaProfile::Perturbed { amplitude, k, phase } => DVector::from_iterator(
            n,
            fourier::nodes(n).into_iter().map(|t| eq.m + amplitude * (*k as f64 * t + phase).sin()),
        ),
        ThetaProfile::Samples { values } => DVector::from_vec(resample(values, n)),
        ThetaProfile::Orbit { j, shift } => discrete_orbit(ops, eq, *j, *shift)?,
    })
}

fn far_profile(profile: &FarBoundary, ops: &Operators, eq: &Equation) -> Result<DVector<f64>, CylinderError> {
    Ok(match profile {
        FarBoundary::Equilibrium => DVector::from_element(ops.n, eq.m),
        FarBoundary::Orbit { j, shift } => discrete_orbit(ops, eq, *j, *shift)?,
        FarBoundary::Custom { profile } => DVector::from_vec(resample(profile, ops.n)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub newton_iterations: usize,
    pub jacobian_builds: usize,
    /// Max residual of the interior equations.
    pub residual_max: f64,
    pub min_v: f64,
    pub max_v: f64,
    /// Number of decaying directions anchored at `t₀`.
    pub stable_dim: usize,
}

/// Nodal field `v(t_i, θ_j)` with its equation data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderField {
    pub alpha: f64,
    pub mu: f64,
    pub equation: Option<Equation>,
    pub t_grid: Vec<f64>,
    pub theta: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub kmax: usize,
    pub report: Option<SolveReport>,
}

impl CylinderField {
    /// `a_k(t_i) = (1/√(2π)) ∫ v e^{−ikθ} dθ` for `k = 0..=kmax`.
    pub fn modes_at(&self, i: usize) -> Vec<Complex64> {
        let s = (2.0 * PI).sqrt();
        fourier::coefficients(&self.values[i]).into_iter().take(self.kmax + 1).map(|c| c * s).collect()
    }

    /// `a_k` along the whole `t` grid; negative `k` by conjugation.
    pub fn mode_series(&self, k: i64) -> Vec<Complex64> {
        let kk = k.unsigned_abs() as usize;
        let s = (2.0 * PI).sqrt();
        let n = self.theta.len();
        self.values
            .iter()
            .map(|v| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, x) in v.iter().enumerate() {
                    acc += Complex64::from_polar(*x, -2.0 * PI * ((kk * j) % n) as f64 / n as f64);
                }
                let a = acc * s / n as f64;
                if k < 0 {
                    a.conj()
                } else {
                    a
                }
            })
            .collect()
    }

    pub fn mode_amplitude(&self, k: i64) -> Vec<f64> {
        self.mode_series(k).into_iter().map(|a| a.norm()).collect()
    }

    /// Mean over θ minus `m`.
    pub fn mean_deviation(&self, m: f64) -> Vec<f64> {
        self.values.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64 - m).collect()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    pub fn write_modes_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,k,re_a_k,im_a_k")?;
        for (i, t) in self.t_grid.iter().enumerate() {
            let modes = self.modes_at(i);
            let k = self.kmax as i64;
            for kk in -k..=k {
                let a = if kk < 0 { modes[(-kk) as usize].conj() } else { modes[kk as usize] };
                writeln!(out, "{},{},{},{}", crate::export::fmt(*t), kk, crate::export::fmt(a.re), crate::export::fmt(a.im))?;
            }
        }
        Ok(())
    }

    /// `t,E,H,H_tilde,amp_k0,...` for `k = 0..=kmax`.
    pub fn write_diagnostics_csv<W: std::io::Write>(&self, reports: &[EnergyReport], out: &mut W) -> std::io::Result<()> {
        let mut header = String::from("t,E,H,H_tilde");
        for k in 0..=self.kmax {
            header.push_str(&format!(",amp_k{k}"));
        }
        writeln!(out, "{header}")?;
        for (i, r) in reports.iter().enumerate() {
            let mut vals = vec![r.t, r.energy, r.h, r.h_tilde];
            vals.extend(self.modes_at(i).iter().map(|a| a.norm()));
            writeln!(out, "{}", row(&vals))?;
        }
        Ok(())
    }
}

struct BoundarySplit {
    /// Rows `0..stable` project onto decaying directions, the rest onto the others.
    qt: DMatrix<f64>,
    stable: usize,
}

fn boundary_split(ops: &Operators, eq: &Equation, w_far: &DVector<f64>) -> BoundarySplit {
    let eig = SymmetricEigen::new(ops.linearization(eq, w_far));
    let n = ops.n;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let stable = order.iter().filter(|&&i| eig.eigenvalues[i] > STABLE_EIG_TOL).count();
    let mut qt = DMatrix::zeros(n, n);
    for (r, &i) in order.iter().enumerate() {
        qt.set_row(r, &eig.eigenvectors.column(i).transpose());
    }
    BoundarySplit { qt, stable }
}

struct Discretization<'a> {
    ops: &'a Operators,
    eq: Equation,
    t: Vec<f64>,
    dt: f64,
    g0: DVector<f64>,
    w_far: DVector<f64>,
    split: BoundarySplit,
}

impl Discretization<'_> {
    fn n_t(&self) -> usize {
        self.t.len()
    }

    /// Interior residual at node `p`; `next` overrides `v_{p+1}` for the ghost row.
    fn pde_residual(&self, v: &[DVector<f64>], p: usize, next: Option<&DVector<f64>>) -> DVector<f64> {
        let (dt, mu) = (self.dt, self.eq.mu);
        let prev = &v[p - 1];
        let next = match next {
            Some(x) => x,
            None => &v[p + 1],
        };
        let cur = &v[p];
        let vtt = (next - cur * 2.0 + prev) / (dt * dt);
        let vt = (next - prev) / (2.0 * dt);
        let mut r = -vtt + vt * (2.0 * mu) - &self.ops.d2 * cur - cur * (mu * mu) + self.ops.nonlinear(cur, self.eq.lambda);
        r.add_scalar_mut(self.eq.forcing(self.t[p]));
        r
    }

    fn node_residuals(&self, v: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let n = self.n_t();
        (0..n)
            .into_par_iter()
            .map(|p| {
                if p == 0 {
                    DVector::zeros(self.ops.n)
                } else if p + 1 == n {
                    self.pde_residual(v, p, Some(&v[p - 1]))
                } else {
                    self.pde_residual(v, p, None)
                }
            })
            .collect()
    }

    fn system_residual(&self, v: &[DVector<f64>], node: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let n = self.n_t();
        let s = self.split.stable;
        let m = self.ops.n;
        (0..n)
            .into_par_iter()
            .map(|b| {
                if b + 1 == n {
                    return &v[b] - &self.w_far;
                }
                let top = if b == 0 { &self.split.qt * (&v[0] - &self.g0) } else { &self.split.qt * &node[b] };
                let bottom = &self.split.qt * &node[b + 1];
                let mut out = DVector::zeros(m);
                out.rows_mut(0, s).copy_from(&top.rows(0, s));
                out.rows_mut(s, m - s).copy_from(&bottom.rows(s, m - s));
                out
            })
            .collect()
    }

    fn diag_block(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mu = self.eq.mu;
        let mut j = -&self.ops.d2 + self.ops.nonlinear_jacobian(v, self.eq.lambda);
        let c = 2.0 / (self.dt * self.dt) - mu * mu;
        for i in 0..self.ops.n {
            j[(i, i)] += c;
        }
        j
    }

    fn jacobian(&self, v: &[DVector<f64>]) -> BlockBanded {
        let n = self.n_t();
        let m = self.ops.n;
        let s = self.split.stable;
        let qt = &self.split.qt;
        let (dt, mu) = (self.dt, self.eq.mu);
        let a_m = -1.0 / (dt * dt) - mu / dt;
        let a_p = -1.0 / (dt * dt) + mu / dt;
        let qj: Vec<DMatrix<f64>> = (0..n).into_par_iter().map(|p| qt * self.diag_block(&v[p])).collect();
        let mut sys = BlockBanded::zeros(n, m);
        let top = |dst: &mut DMatrix<f64>, src: &DMatrix<f64>| dst.rows_mut(0, s).copy_from(&src.rows(0, s));
        let bottom = |dst: &mut DMatrix<f64>, src: &DMatrix<f64>| dst.rows_mut(s, m - s).copy_from(&src.rows(s, m - s));
        let qm = qt * a_m;
        let qp = qt * a_p;
        for b in 0..n - 1 {
            if b == 0 {
                top(&mut sys.diag[0], qt);
            } else {
                top(&mut sys.lower[b], &qm);
                top(&mut sys.diag[b], &qj[b]);
                top(&mut sys.upper1[b], &qp);
            }
            if b + 2 == n {
                bottom(&mut sys.diag[b], &(qt * (-2.0 / (dt * dt))));
                bottom(&mut sys.upper1[b], &qj[b + 1]);
            } else {
                bottom(&mut sys.diag[b], &qm);
                bottom(&mut sys.upper1[b], &qj[b + 1]);
                bottom(&mut sys.upper2[b], &qp);
            }
        }
        sys.diag[n - 1] = DMatrix::identity(m, m);
        sys
    }

    fn positive(&self, v: &[DVector<f64>]) -> bool {
        v.iter().all(|x| self.ops.min_padded(x) > 0.0)
    }
}

fn max_abs(v: &[DVector<f64>]) -> f64 {
    v.iter().map(|x| x.amax()).fold(0.0, f64::max)
}

fn interior_max(node: &[DVector<f64>]) -> f64 {
    max_abs(&node[1..node.len() - 1])
}

/// Newton solve of the discrete cylinder problem.
pub fn solve_cylinder(config: &CylinderConfig) -> Result<CylinderField, CylinderError> {
    config.validate()?;
    let eq = config.equation();
    let ops = Operators::new(config.n_theta());
    let g0 = start_profile(&config.boundary_t0, &ops, &eq)?;
    let w_far = far_profile(&config.boundary_t_end, &ops, &eq)?;
    let min_data = g0.min().min(w_far.min());
    if !(min_data > 0.0) {
        return Err(CylinderError::NonPositiveProfile { min: min_data });
    }
    let split = boundary_split(&ops, &eq, &w_far);
    let dt = config.dt();
    let t: Vec<f64> = (0..config.n_t).map(|i| config.t0 + i as f64 * dt).collect();
    let disc = Discretization { ops: &ops, eq, t, dt, g0, w_far, split };

    let n = config.n_t;
    let mut v: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            &disc.g0 * (1.0 - s) + &disc.w_far * s
        })
        .collect();

    let mut node = disc.node_residuals(&v);
    let mut res = disc.system_residual(&v, &node);
    let mut norm = max_abs(&res);
    let mut lu = None;
    let mut builds = 0;
    let mut iterations = 0;
    while norm > RESIDUAL_TOL {
        if iterations >= MAX_NEWTON {
            return Err(CylinderError::NewtonDiverged { iterations, residual: norm });
        }
        iterations += 1;
        let mut fresh = false;
        if lu.is_none() {
            lu = Some(disc.jacobian(&v).factor().ok_or(CylinderError::SingularJacobian { iteration: iterations })?);
            builds += 1;
            fresh = true;
        }
        let delta = lu
            .as_ref()
            .and_then(|f| f.solve(&res))
            .ok_or(CylinderError::SingularJacobian { iteration: iterations })?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<DVector<f64>> = v.iter().zip(&delta).map(|(x, d)| x - d * step).collect();
            if disc.positive(&trial) {
                let trial_node = disc.node_residuals(&trial);
                let trial_res = disc.system_residual(&trial, &trial_node);
                let trial_norm = max_abs(&trial_res);
                let enough = if fresh { trial_norm < norm } else { trial_norm < 0.5 * norm };
                if enough {
                    v = trial;
                    node = trial_node;
                    res = trial_res;
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
            }
            if !fresh {
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if fresh {
                return Err(CylinderError::NewtonDiverged { iterations, residual: norm });
            }
            lu = None;
        }
    }

    let values: Vec<Vec<f64>> = v.iter().map(|x| x.iter().copied().collect()).collect();
    let (min_v, max_v) = values.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(min_v > 0.0) {
        return Err(CylinderError::SolutionEscapedBounds { min_v });
    }
    Ok(CylinderField {
        alpha: eq.alpha,
        mu: eq.mu,
        equation: Some(eq),
        t_grid: disc.t.clone(),
        theta: fourier::nodes(ops.n),
        values,
        kmax: config.k_modes,
        report: Some(SolveReport {
            newton_iterations: iterations,
            jacobian_builds: builds,
            residual_max: interior_max(&node),
            min_v,
            max_v,
            stable_dim: disc.split.stable,
        }),
    })
}

/// Max residual of the interior equations for an arbitrary nodal field.
pub fn interior_residual(field: &CylinderField) -> Result<f64, CylinderError> {
    let eq = field.equation.ok_or(CylinderError::MissingEquation)?;
    let ops = Operators::new(field.theta.len());
    let dt = field.t_grid[1] - field.t_grid[0];
    let v: Vec<DVector<f64>> = field.values.iter().map(|x| DVector::from_column_slice(x)).collect();
    let n = v.len();
    let mut worst: f64 = 0.0;
    for p in 1..n - 1 {
        let vtt = (&v[p + 1] - &v[p] * 2.0 + &v[p - 1]) / (dt * dt);
        let vt = (&v[p + 1] - &v[p - 1]) / (2.0 * dt);
        let mut r = -vtt + vt * (2.0 * eq.mu) - &ops.d2 * &v[p] - &v[p] * (eq.mu * eq.mu) + ops.nonlinear(&v[p], eq.lambda);
        r.add_scalar_mut(eq.forcing(field.t_grid[p]));
        worst = worst.max(r.amax());
    }
    Ok(worst)
}

/// Samples `u(r_i, θ_j)` on a polar grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarSamples {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<Vec<f64>>,
}

/// `v = r^{−μ}u`, `t = −ln r`, ordered by increasing `t`.
pub fn emden_forward(samples: &PolarSamples, alpha: f64) -> Result<CylinderField, CylinderError> {
    let mu = (2.0 + alpha) / 3.0;
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::with_capacity(samples.r.len());
    for (r, u) in samples.r.iter().zip(&samples.u) {
        if !(*r > 0.0) {
            return Err(CylinderError::InvalidConfig(vec![format!("radius must be positive (got {r})")]));
        }
        if let Some(&bad) = u.iter().find(|x| !(**x > 0.0)) {
            return Err(CylinderError::NonPositiveInput { r: *r, value: bad });
        }
        let s = r.powf(-mu);
        rows.push((-r.ln(), u.iter().map(|x| x * s).collect()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (t_grid, values): (Vec<f64>, Vec<Vec<f64>>) = rows.into_iter().unzip();
    Ok(CylinderField {
        alpha,
        mu,
        equation: None,
        t_grid,
        theta: samples.theta.clone(),
        values,
        kmax: samples.theta.len().saturating_sub(1) / 2,
        report: None,
    })
}

/// `u = e^{−μt} v` on `r = e^{−t}`.
pub fn emden_inverse(field: &CylinderField) -> PolarSamples {
    let r = field.t_grid.iter().map(|t| (-t).exp()).collect();
    let u = field
        .t_grid
        .iter()
        .zip(&field.values)
        .map(|(t, v)| {
            let s = (-field.mu * t).exp();
            v.iter().map(|x| x * s).collect()
        })
        .collect();
    PolarSamples { r, theta: field.theta.clone(), u }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "H_tilde")]
    pub h_tilde: f64,
    pub epsilon_used: f64,
}

/// `ε₀ = 2μ/(sup|j′(v)| + 1)` over the field's range, with `j′ = μ² + 2λ/v³`.
pub fn epsilon_bound(field: &CylinderField) -> Result<f64, CylinderError> {
    let eq = field.equation.ok_or(CylinderError::MissingEquation)?;
    let (lo, _) = field.min_max();
    let sup = eq.mu * eq.mu + 2.0 * eq.lambda / lo.powi(3);
    Ok(2.0 * eq.mu / (sup + 1.0))
}

/// Default `ε = min(ε₀/2, 0.01)`.
pub fn default_epsilon(field: &CylinderField) -> Result<f64, CylinderError> {
    Ok((epsilon_bound(field)? / 2.0).min(0.01))
}

/// Young constant `1/(4ε) + ε/2` multiplying the forcing tail in `H̃`.
pub fn tail_constant(epsilon: f64) -> f64 {
    0.25 / epsilon + 0.5 * epsilon
}

fn time_derivative(field: &CylinderField, i: usize) -> Vec<f64> {
    let n = field.t_grid.len();
    let v = &field.values;
    let m = v[0].len();
    if i == 0 {
        let h = field.t_grid[1] - field.t_grid[0];
        (0..m).map(|j| (-3.0 * v[0][j] + 4.0 * v[1][j] - v[2][j]) / (2.0 * h)).collect()
    } else if i + 1 == n {
        let h = field.t_grid[n - 1] - field.t_grid[n - 2];
        (0..m).map(|j| (3.0 * v[n - 1][j] - 4.0 * v[n - 2][j] + v[n - 3][j]) / (2.0 * h)).collect()
    } else {
        let h = field.t_grid[i + 1] - field.t_grid[i - 1];
        (0..m).map(|j| (v[i + 1][j] - v[i - 1][j]) / h).collect()
    }
}

fn energy_with(field: &CylinderField, ops: &Operators, eq: &Equation, i: usize, epsilon: f64) -> EnergyReport {
    let v = DVector::from_column_slice(&field.values[i]);
    let m = v.len();
    let dtheta = 2.0 * PI / m as f64;
    let vth = &ops.d1 * &v;
    let vthth = &ops.d2 * &v;
    let vt = time_derivative(field, i);
    let mu2 = eq.mu * eq.mu;
    let mut e = 0.0;
    let mut kinetic = 0.0;
    let mut cross = 0.0;
    for j in 0..m {
        e += 0.5 * vth[j] * vth[j] - 0.5 * mu2 * v[j] * v[j] - eq.lambda / v[j];
        kinetic += vt[j] * vt[j];
        cross += (vthth[j] + eq.j(v[j])) * vt[j];
    }
    let (e, kinetic, cross) = (e * dtheta, kinetic * dtheta, cross * dtheta);
    let h = -0.5 * kinetic + (1.0 + 2.0 * eq.mu * epsilon) * e + epsilon * cross;
    let t = field.t_grid[i];
    let tail = if eq.p > 0.0 { 2.0 * PI * eq.p * eq.p * (-2.0 * eq.beta * t).exp() / (2.0 * eq.beta) } else { 0.0 };
    EnergyReport { t, energy: e, h, h_tilde: h + tail_constant(epsilon) * tail, epsilon_used: epsilon }
}

/// Energies at `t_index`; `ε` defaults to [`default_epsilon`].
pub fn energy(field: &CylinderField, t_index: usize, epsilon: Option<f64>) -> Result<EnergyReport, CylinderError> {
    let eq = field.equation.ok_or(CylinderError::MissingEquation)?;
    let eps = match epsilon {
        Some(e) => e,
        None => default_epsilon(field)?,
    };
    let ops = Operators::new(field.theta.len());
    Ok(energy_with(field, &ops, &eq, t_index, eps))
}

pub fn lyapunov_series(field: &CylinderField, epsilon: Option<f64>) -> Result<Vec<EnergyReport>, CylinderError> {
    let eq = field.equation.ok_or(CylinderError::MissingEquation)?;
    let eps = match epsilon {
        Some(e) => e,
        None => default_epsilon(field)?,
    };
    let ops = Operators::new(field.theta.len());
    Ok((0..field.t_grid.len()).into_par_iter().map(|i| energy_with(field, &ops, &eq, i, eps)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub max_increase: f64,
    pub tolerance: f64,
    pub violations: Vec<usize>,
}

impl MonotonicityCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `H̃` nonincreasing between consecutive interior nodes, up to `1e−6·max|H̃|`.
pub fn check_lyapunov(series: &[EnergyReport]) -> MonotonicityCheck {
    let scale = series.iter().map(|r| r.h_tilde.abs()).fold(1.0, f64::max);
    let tolerance = 1e-6 * scale;
    let mut max_increase = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let n = series.len();
    for i in 1..n.saturating_sub(2) {
        let inc = series[i + 1].h_tilde - series[i].h_tilde;
        max_increase = max_increase.max(inc);
        if inc > tolerance {
            violations.push(i);
        }
    }
    MonotonicityCheck { max_increase, tolerance, violations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitProfile {
    Equilibrium { m: f64 },
    Orbit { j: u32, shift: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceProfile {
    pub limit: LimitProfile,
    pub limit_samples: Vec<f64>,
    /// `max_θ |v(t,θ) − w(θ)|` per `t` node.
    pub distance: Vec<f64>,
    /// Nonincreasing over the second half of the cylinder.
    pub eventually_monotone: bool,
    /// Least-squares slope of `ln distance` against `ln(1+t)` over the second half; not asserted.
    pub algebraic_slope: Option<f64>,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Nearest stationary profile to the far slice, minimized over translations,
/// and the distance of every slice to it.
pub fn convergence_profile(field: &CylinderField) -> Result<ConvergenceProfile, CylinderError> {
    let eq = field.equation.ok_or(CylinderError::MissingEquation)?;
    let n = field.theta.len();
    let ops = Operators::new(n);
    let last = field.values.last().expect("nonempty field");
    let mut best = (sup_distance(last, &vec![eq.m; n]), LimitProfile::Equilibrium { m: eq.m }, vec![eq.m; n]);
    for j in phase_plane::mode_window(eq.mu).0 {
        let base = discrete_orbit(&ops, &eq, j, 0.0)?;
        let interp = TrigInterpolant::new(base.as_slice());
        let period = 2.0 * PI / j as f64;
        let dist = |a: f64| sup_distance(last, &interp.resample(n, a));
        let coarse = 256;
        let (mut a0, mut d0) = (0.0, f64::INFINITY);
        for i in 0..coarse {
            let a = period * i as f64 / coarse as f64;
            let d = dist(a);
            if d < d0 {
                (a0, d0) = (a, d);
            }
        }
        let h = period / coarse as f64;
        let (mut lo, mut hi) = (a0 - h, a0 + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        while hi - lo > 1e-14 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if dist(x1) <= dist(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let shift = (0.5 * (lo + hi)).rem_euclid(period);
        let d = dist(shift).min(d0);
        if d < best.0 {
            let samples = if d == d0 { interp.resample(n, a0) } else { interp.resample(n, shift) };
            let shift = if d == d0 { a0 } else { shift };
            best = (d, LimitProfile::Orbit { j, shift }, samples);
        }
    }
    let (far, limit, w) = best;
    if far > 0.1 {
        return Err(CylinderError::NotConverged { distance: far });
    }
    let distance: Vec<f64> = field.values.iter().map(|v| sup_distance(v, &w)).collect();
    let half = distance.len() / 2;
    let eventually_monotone = distance[half..].windows(2).all(|p| p[1] <= p[0] + 1e-10);
    let fit: Vec<(f64, f64)> = field.t_grid[half..]
        .iter()
        .zip(&distance[half..])
        .filter(|(_, d)| **d > 1e-14)
        .map(|(t, d)| ((1.0 + t - field.t_grid[0]).ln(), d.ln()))
        .collect();
    let algebraic_slope = (fit.len() >= 3).then(|| {
        let k = fit.len() as f64;
        let mx = fit.iter().map(|p| p.0).sum::<f64>() / k;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(ConvergenceProfile { limit, limit_samples: w, distance, eventually_monotone, algebraic_slope })
}

/// Finite-cylinder analogue of the ball-average hypothesis on `1/v`; advisory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallAverageAdvisory {
    pub beta: f64,
    pub sup_value: f64,
    pub centers: usize,
    pub radii: Vec<f64>,
}

/// `sup r^{−(4/3+β)} ∫_{B_r(x)} 1/v` over grid centers whose balls fit in `[t₀, T]`.
pub fn ball_average_advisory(field: &CylinderField, beta: f64) -> BallAverageAdvisory {
    let nt = field.t_grid.len();
    let m = field.theta.len();
    let dt = field.t_grid[1] - field.t_grid[0];
    let dth = 2.0 * PI / m as f64;
    let radii: Vec<f64> = [1.0, 0.5, 0.25, 0.125].into_iter().filter(|r| *r >= 2.0 * dt.max(dth)).collect();
    let expo = 4.0 / 3.0 + beta;
    let span = field.t_grid[nt - 1] - field.t_grid[0];
    let stride = (nt / 64).max(1);
    let results: Vec<(f64, usize)> = (0..nt)
        .step_by(stride)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| {
            let mut sup: f64 = 0.0;
            let mut count = 0;
            for j in (0..m).step_by((m / 16).max(1)) {
                sup = sup.max(PI / field.values[i][j]);
                count += 1;
                for &r in &radii {
                    let ti = field.t_grid[i];
                    if ti - r < field.t_grid[0] || ti + r > field.t_grid[0] + span {
                        continue;
                    }
                    let di = (r / dt).ceil() as usize;
                    let mut acc = 0.0;
                    for ii in i.saturating_sub(di)..=(i + di).min(nt - 1) {
                        let ddt = field.t_grid[ii] - ti;
                        for jj in 0..m {
                            let mut dth_ = (jj as f64 - j as f64).abs() * dth;
                            dth_ = dth_.min(2.0 * PI - dth_);
                            if ddt * ddt + dth_ * dth_ <= r * r {
                                acc += dt * dth / field.values[ii][jj];
                            }
                        }
                    }
                    sup = sup.max(acc / r.powf(expo));
                }
            }
            (sup, count)
        })
        .collect();
    BallAverageAdvisory {
        beta,
        sup_value: results.iter().map(|r| r.0).fold(0.0, f64::max),
        centers: results.iter().map(|r| r.1).sum(),
        radii,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dealiased_constant_is_exact() {
        let ops = Operators::new(17);
        let v = DVector::from_element(17, 1.7);
        let n = ops.nonlinear(&v, 2.0);
        assert!(n.iter().all(|x| (x - 2.0 / 1.7f64.powi(2)).abs() < 1e-13));
    }

    #[test]
    fn linearization_at_equilibrium_has_mode_spectrum() {
        let eq = Equation::new(0.0, 1.0, 0.0);
        let ops = Operators::new(17);
        let l = ops.linearization(&eq, &DVector::from_element(17, eq.m));
        let mut ev: Vec<f64> = SymmetricEigen::new(l).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let mu2 = eq.mu * eq.mu;
        assert!((ev[0] + 3.0 * mu2).abs() < 1e-10);
        assert!((ev[1] - (1.0 - 3.0 * mu2)).abs() < 1e-10);
        assert!((ev[3] - (4.0 - 3.0 * mu2)).abs() < 1e-10);
    }

    #[test]
    fn config_violations_listed() {
        let mut c = CylinderConfig::new(-3.0, -1.0, 0.0);
        c.n_t = 10;
        c.k_modes = 2;
        assert_eq!(c.violations().len(), 4);
    }
}
