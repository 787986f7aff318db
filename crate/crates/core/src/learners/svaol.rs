//! Replace every row by the eigenvector of its accumulator for the smallest
//! eigenvalue, found by shifted inverse iteration started from the row.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::Result;
use crate::objective::{accumulate, AnalyserAccumulator};
use crate::operator::AnalysisOperator;
use crate::signal::SignalBatch;

use super::check_accumulators;

pub const MAX_INVERSE_ITERATIONS: usize = 50;
pub const INVERSE_ITERATION_TOL: f64 = 1e-10;

/// A residual `||A x - rho x||` below this multiple of `trace(A)` is at the
/// rounding floor; further steps only shuffle noise.
pub const RESIDUAL_FLOOR: f64 = 1e-13;

/// Initial shift is `-SHIFT_FLOOR * trace(A)`, which keeps the solves
/// well-posed for singular `A`.
pub const SHIFT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub vector: DVector<f64>,
    /// Rayleigh quotient of `vector`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn shifted_cholesky(a: &DMatrix<f64>, shift: f64) -> Option<Cholesky<f64, Dyn>> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] -= shift;
    }
    Cholesky::new(m)
}

fn rayleigh_residual(a: &DMatrix<f64>, x: &DVector<f64>) -> (f64, f64) {
    let ax = a * x;
    let rho = x.dot(&ax);
    (rho, (ax - x * rho).norm())
}

/// Unit eigenvector of the symmetric PSD matrix `a` for its smallest
/// eigenvalue, with `<result, start> >= 0`.
///
/// The shift moves towards `rho - 2 r` (Rayleigh quotient minus twice the
/// residual) only after a Cholesky factorisation shows the new value lies
/// below the spectrum; failed attempts bisect the bracket instead. Convergence is
/// declared only after the same test certifies the final Rayleigh quotient as
/// the bottom of the spectrum.
pub fn smallest_eigenvector(a: &DMatrix<f64>, start: &DVector<f64>) -> EigenResult {
    let d = a.nrows();
    let scale = a.trace();
    let mut x = start.normalize();
    if scale.is_nan() || scale <= 0.0 || d == 1 {
        let (value, _) = rayleigh_residual(a, &x);
        return EigenResult {
            vector: x,
            value,
            iterations: 0,
            converged: true,
        };
    }
    let mut floor = SHIFT_FLOOR * scale;
    let (mut shift, mut chol) = loop {
        if let Some(c) = shifted_cholesky(a, -floor) {
            break (-floor, c);
        }
        floor *= 10.0;
    };
    // Every shift at or above `upper` is known to exceed the smallest eigenvalue.
    let mut upper = f64::INFINITY;
    let mut rejected = false;
    let mut kicks = 0usize;
    for it in 1..=MAX_INVERSE_ITERATIONS {
        let mut next = chol.solve(&x);
        let norm = next.norm();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        next /= norm;
        if next.dot(&x) < 0.0 {
            next.neg_mut();
        }
        let change = (&next - &x).norm();
        x = next;
        let (rho, r) = rayleigh_residual(a, &x);
        if change <= INVERSE_ITERATION_TOL || r <= RESIDUAL_FLOOR * scale {
            let bound = rho - 2.0 * r - INVERSE_ITERATION_TOL * scale;
            if shifted_cholesky(a, bound).is_some() {
                return finish(x, start, rho, it, true);
            }
            // Converged to an interior eigenvector: leave it.
            upper = upper.min(bound);
            kicks += 1;
            let tilt = DVector::from_fn(d, |i, _| ((i + kicks) as f64 * 0.618_034).fract() - 0.5);
            x = (x + tilt * 1e-3).normalize();
            continue;
        }
        upper = upper.min(rho);
        let mut candidate = rho - 2.0 * r;
        if rejected || candidate >= upper {
            candidate = 0.5 * (shift + upper);
        }
        rejected = false;
        if candidate > shift {
            match shifted_cholesky(a, candidate) {
                Some(c) => {
                    shift = candidate;
                    chol = c;
                }
                None => {
                    upper = candidate;
                    rejected = true;
                }
            }
        }
    }
    let (rho, _) = rayleigh_residual(a, &x);
    finish(x, start, rho, MAX_INVERSE_ITERATIONS, false)
}

fn finish(mut x: DVector<f64>, start: &DVector<f64>, value: f64, iterations: usize, converged: bool) -> EigenResult {
    if x.dot(start) < 0.0 {
        x.neg_mut();
    }
    EigenResult {
        vector: x,
        value,
        iterations,
        converged,
    }
}

#[derive(Clone, Debug)]
pub struct SvaolUpdate {
    pub operator: AnalysisOperator,
    /// Rows whose inverse iteration hit the step cap.
    pub unconverged: Vec<usize>,
}

/// `gamma_k <- ` smallest eigenvector of `A_k`, sign-aligned with `gamma_k`.
pub fn svaol_step(op: &AnalysisOperator, accs: &[AnalyserAccumulator]) -> Result<SvaolUpdate> {
    check_accumulators(op, accs)?;
    let mut rows = op.rows().clone();
    let mut unconverged = Vec::new();
    for (k, acc) in accs.iter().enumerate() {
        if acc.count == 0 {
            continue;
        }
        let eig = smallest_eigenvector(&acc.matrix, &op.row(k));
        if !eig.converged {
            unconverged.push(k);
        }
        rows.set_row(k, &eig.vector.transpose());
    }
    Ok(SvaolUpdate {
        operator: AnalysisOperator::from_rows_unchecked(rows),
        unconverged,
    })
}

/// Selection, accumulation and one SVAOL step on `batch`.
pub fn svaol_iteration(op: &AnalysisOperator, batch: &SignalBatch, cosparsity: usize) -> Result<SvaolUpdate> {
    svaol_step(op, &accumulate(op, batch, cosparsity)?.accumulators)
}
