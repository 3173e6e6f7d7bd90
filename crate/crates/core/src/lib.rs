//! Numerical toolkit for singular solutions of `Δu = λ|x|^α/u² + P`.
//!
//! * [`phase_plane`]: stationary profiles `w'' + A²w − λ/w² = 0` on the circle.
//! * [`radial`]: radial solves, λ-continuation and pull-in bounds on the unit ball.
//! * [`cylinder`]: the Emden-transformed problem on a finite cylinder.
//! * [`modes`]: bounded solutions of the linearized Fourier-mode equations and decay predictions.
//! * [`analyzer`]: decay fits, limit coefficients, slope checks and Łojasiewicz sampling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyzer;
pub mod cylinder;
pub mod export;
pub mod fourier;
pub mod linalg;
pub mod modes;
pub mod phase_plane;
pub mod quadrature;
pub mod radial;
