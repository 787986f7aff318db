//! Recovery of a known target operator.

use crate::error::{mismatch, Result};
use crate::operator::AnalysisOperator;

/// A target row counts as recovered at this absolute overlap.
pub const RECOVERY_THRESHOLD: f64 = 0.99;

/// For every target row, `max_j |<omega_k, gamma_j>|`.
pub fn best_overlaps(learned: &AnalysisOperator, target: &AnalysisOperator) -> Result<Vec<f64>> {
    if learned.dim() != target.dim() {
        return Err(mismatch(target.dim(), learned.dim()));
    }
    let inner = target.rows() * learned.rows().transpose();
    Ok(inner
        .row_iter()
        .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect())
}

/// Fraction of target rows with some learned row at overlap `>= 0.99`.
/// One learned row may certify several target rows.
pub fn recovered_fraction(learned: &AnalysisOperator, target: &AnalysisOperator) -> Result<f64> {
    let overlaps = best_overlaps(learned, target)?;
    let hits = overlaps.iter().filter(|&&m| m >= RECOVERY_THRESHOLD).count();
    Ok(hits as f64 / overlaps.len() as f64)
}
