//! Decorrelation of coherent row pairs.
//!
//! Rows accumulate activation counters while learning. When two rows are
//! more coherent than the threshold, the less used one is orthogonalised
//! against the other.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::objective::CosupportSelection;
use crate::operator::AnalysisOperator;
use crate::rng::RandomSource;

pub const SYNTHETIC_THRESHOLD: f64 = 0.8;
pub const IMAGE_THRESHOLD: f64 = 0.99;

/// A residual shorter than this after orthogonalisation means the two rows
/// were parallel; the losing row is then redrawn.
pub const PARALLEL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ReplacementState {
    counters: Vec<u64>,
    threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplacementEvent {
    pub kept: usize,
    pub replaced: usize,
    /// `|<gamma_kept, gamma_replaced>|` before the replacement.
    pub coherence: f64,
    pub redrawn: bool,
}

impl ReplacementState {
    pub fn new(num_rows: usize, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(invalid(format!("coherence threshold must lie in (0, 1], got {threshold}")));
        }
        Ok(Self {
            counters: vec![0; num_rows],
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn counters(&self) -> &[u64] {
        &self.counters
    }

    /// Adds `|S_k|` to every counter.
    pub fn record(&mut self, selection: &CosupportSelection) {
        for (k, v) in self.counters.iter_mut().enumerate() {
            *v += selection.row(k).len() as u64;
        }
    }

    pub fn record_counts(&mut self, counts: &[usize]) {
        for (v, &c) in self.counters.iter_mut().zip(counts) {
            *v += c as u64;
        }
    }

    pub fn reset(&mut self) {
        self.counters.iter_mut().for_each(|v| *v = 0);
    }
}

fn most_coherent(gram: &DMatrix<f64>) -> Option<(usize, usize, f64)> {
    let k = gram.nrows();
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 0..k {
        for i in 0..j {
            let mu = gram[(i, j)].abs();
            if best.is_none_or(|(_, _, m)| mu > m) {
                best = Some((i, j, mu));
            }
        }
    }
    best
}

/// Orthogonalises coherent rows until no pair exceeds the threshold, most
/// coherent pair first. The row with the smaller counter is replaced (ties:
/// the higher index). Counters are reset afterwards.
pub fn replace_coherent(
    op: &AnalysisOperator,
    state: &mut ReplacementState,
    rng: &mut RandomSource,
) -> Result<(AnalysisOperator, Vec<ReplacementEvent>)> {
    let k = op.num_rows();
    if state.counters.len() != k {
        return Err(crate::error::mismatch(k, state.counters.len()));
    }
    let mut rows = op.rows().clone();
    let mut gram = &rows * rows.transpose();
    let mut events = Vec::new();
    let cap = k * k + k;
    while events.len() < cap {
        let Some((i, j, mu)) = most_coherent(&gram) else {
            break;
        };
        if mu <= state.threshold {
            break;
        }
        let (kept, replaced) = if state.counters[i] >= state.counters[j] { (i, j) } else { (j, i) };
        let keep: DVector<f64> = rows.row(kept).transpose();
        let mut v: DVector<f64> = rows.row(replaced).transpose();
        for _ in 0..2 {
            let p = keep.dot(&v);
            v.axpy(-p, &keep, 1.0);
        }
        let norm = v.norm();
        let redrawn = norm < PARALLEL_TOL;
        let v = if redrawn { rng.unit_vector(op.dim()) } else { v / norm };
        rows.set_row(replaced, &v.transpose());
        let col = &rows * &v;
        gram.set_column(replaced, &col);
        gram.set_row(replaced, &col.transpose());
        events.push(ReplacementEvent {
            kept,
            replaced,
            coherence: mu,
            redrawn,
        });
    }
    state.reset();
    Ok((AnalysisOperator::from_rows_unchecked(rows), events))
}
