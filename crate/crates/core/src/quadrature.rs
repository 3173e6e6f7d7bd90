//! Adaptive Gauss–Legendre quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use thiserror::Error;

/// Number of nodes of the base rule.
pub const ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge: estimate {value:e}, achieved error {error:e} after {panels} panels")]
    NotConverged { value: f64, error: f64, panels: usize },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Sum of the per-panel error estimates.
    pub error: f64,
    pub panels: usize,
}

/// Stopping rule: converged once `error <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-13, rel: 1e-13, max_panels: 4096 }
    }
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0, ..Self::default() }
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn base_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn apply<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64, QuadratureError> {
    let (nodes, weights) = base_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let xs = mid + half * x;
        let fx = f(xs);
        if !fx.is_finite() {
            return Err(QuadratureError::NonFinite { x: xs });
        }
        sum += w * fx;
    }
    Ok(sum * half)
}

struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn make_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Result<Panel, QuadratureError> {
    let m = 0.5 * (a + b);
    let left = apply(f, a, m)?;
    let right = apply(f, m, b)?;
    Ok(Panel { a, b, left, right, error: (whole - left - right).abs() })
}

/// Integrates `f` over `[a, b]`, bisecting the panel with the largest error
/// estimate until the total estimate meets `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral, QuadratureError> {
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, panels: 0 });
    }
    let whole = apply(&f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(make_panel(&f, a, b, whole)?);
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.left + p.right, e + p.error));
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Integral { value, error, panels: heap.len() });
        }
        if heap.len() >= tol.max_panels {
            return Err(QuadratureError::NotConverged { value, error, panels: heap.len() });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(QuadratureError::NotConverged { value, error, panels: heap.len() + 1 });
        }
        heap.push(make_panel(&f, worst.a, m, worst.left)?);
        heap.push(make_panel(&f, m, worst.b, worst.right)?);
    }
}
