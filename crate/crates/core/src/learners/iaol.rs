//! Linearised implicit Euler step `gamma (I + alpha A)^{-1}`.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{invalid, AolError, Result};
use crate::objective::{accumulate, AnalyserAccumulator};
use crate::operator::{normalized, AnalysisOperator};
use crate::signal::SignalBatch;

use super::check_accumulators;

pub const DEFAULT_IAOL_ALPHA: f64 = 100.0;

/// `gamma_k <- normalize(gamma_k (I + alpha A_k)^{-1})` for every row.
pub fn iaol_step(op: &AnalysisOperator, accs: &[AnalyserAccumulator], alpha: f64) -> Result<AnalysisOperator> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("IAOL stepsize must be positive, got {alpha}")));
    }
    check_accumulators(op, accs)?;
    let d = op.dim();
    let mut rows = op.rows().clone();
    for (k, acc) in accs.iter().enumerate() {
        if acc.count == 0 {
            continue;
        }
        let system = DMatrix::identity(d, d) + &acc.matrix * alpha;
        let chol = Cholesky::new(system).ok_or(AolError::SolveFailure(k))?;
        let x = chol.solve(&op.row(k));
        if !x.iter().all(|v| v.is_finite()) {
            return Err(AolError::SolveFailure(k));
        }
        let row = normalized(&x).ok_or(AolError::SolveFailure(k))?;
        rows.set_row(k, &row.transpose());
    }
    Ok(AnalysisOperator::from_rows_unchecked(rows))
}

/// Selection, accumulation and one IAOL step on `batch`.
pub fn iaol_iteration(op: &AnalysisOperator, batch: &SignalBatch, cosparsity: usize, alpha: f64) -> Result<AnalysisOperator> {
    iaol_step(op, &accumulate(op, batch, cosparsity)?.accumulators, alpha)
}
