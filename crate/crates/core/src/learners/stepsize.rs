//! Closed-form minimiser of the Rayleigh quotient along the gradient line.
//!
//! For a unit row `gamma`, PSD `A` and `g = gamma A`,
//! `F(alpha) = (a - 2 alpha b + alpha^2 c) / (1 - 2 alpha a + alpha^2 b)`
//! with `a = gamma A gamma^T`, `b = gamma A^2 gamma^T`, `c = gamma A^3 gamma^T`.
//! Its stationary points solve
//! `(b^2 - ac) alpha^2 + (c - ab) alpha + (a^2 - b) = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{AolError, Result};

/// `|b^2 - ac|` below this multiple of `max(b^2, ac)` selects the linear branch.
pub const BRANCH_TOL: f64 = 1e-12;

/// `b - a^2` below this multiple of `b` means `gamma` is an eigenvector.
pub const EIGEN_TOL: f64 = 1e-14;

/// Most negative tolerated discriminant, relative to the size of its terms.
pub const DISCRIMINANT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepsizeScalars {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl StepsizeScalars {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// Scalars of row `gamma` against the symmetric matrix `acc`.
    pub fn from_row(gamma: &DVector<f64>, acc: &DMatrix<f64>) -> Self {
        let g = acc * gamma;
        let ag = acc * &g;
        Self {
            a: gamma.dot(&g),
            b: g.dot(&g),
            c: g.dot(&ag),
        }
    }

    /// `(c - ab)^2 - 4 (b^2 - ac)(a^2 - b)`.
    pub fn discriminant(&self) -> f64 {
        let Self { a, b, c } = *self;
        (c - a * b).powi(2) - 4.0 * (b * b - a * c) * (a * a - b)
    }

    /// The same quantity as `(c + 2a^3 - 3ab)^2 - 4 (a^2 - b)^3`, which is
    /// visibly nonnegative whenever `b >= a^2`.
    pub fn discriminant_identity(&self) -> f64 {
        let Self { a, b, c } = *self;
        (c + 2.0 * a.powi(3) - 3.0 * a * b).powi(2) - 4.0 * (a * a - b).powi(3)
    }

    /// `F(alpha)`; `NaN` where the line passes through the origin.
    pub fn rayleigh(&self, alpha: f64) -> f64 {
        let Self { a, b, c } = *self;
        (a - 2.0 * alpha * b + alpha * alpha * c) / (1.0 - 2.0 * alpha * a + alpha * alpha * b)
    }
}

/// The minimising stepsize `alpha` for `gamma - alpha g`.
///
/// Returns 0 when `b = 0` and when `gamma` is (numerically) an eigenvector of
/// `A`, where every step that avoids the origin keeps the row's direction.
pub fn optimal_stepsize(s: StepsizeScalars) -> Result<f64> {
    let StepsizeScalars { a, b, c } = s;
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(AolError::NumericalBranch {
            discriminant: f64::NAN,
        });
    }
    if b <= 0.0 {
        return Ok(0.0);
    }
    let q = b * b - a * c;
    let lin = a * b - c;
    let scale = 1f64.max(lin * lin).max((4.0 * q * (a * a - b)).abs());
    let raw = s.discriminant();
    if raw < -DISCRIMINANT_TOL * scale {
        return Err(AolError::NumericalBranch { discriminant: raw });
    }
    if b - a * a <= EIGEN_TOL * b {
        return Ok(0.0);
    }
    if q.abs() <= BRANCH_TOL * (b * b).max(a * c.abs()) {
        return Ok(a / b);
    }
    let root = s.discriminant_identity().max(0.0).sqrt();
    if lin >= 0.0 {
        Ok((lin + root) / (2.0 * q))
    } else {
        // Same root, rearranged to avoid cancellation in `lin + root`.
        Ok(2.0 * (a * a - b) / (lin - root))
    }
}
