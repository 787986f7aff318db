//! Single-pass streaming variant of FAOL.
//!
//! Every row keeps the running mean `g_k` of `<gamma_k, y_n> y_n` over the
//! signals that selected it. During the final `ceil(eps N)` signals the
//! running mean of `<g_k, y_n>^2` estimates `c_k`, always with the current
//! `g_k`. No `d x d` matrix is ever formed.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{invalid, mismatch, AolError, Result};
use crate::objective::smallest_responses;
use crate::operator::{normalized, AnalysisOperator};
use crate::signal::{check_dim, SignalBatch};

use super::faol::VANISHING_UPDATE;
use super::stepsize::{optimal_stepsize, StepsizeScalars};

pub const DEFAULT_SAOL_EPS: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct SaolState {
    op: AnalysisOperator,
    cosparsity: usize,
    total: usize,
    estimate_from: usize,
    seen: usize,
    /// Column `k` is `g_k`.
    gradients: DMatrix<f64>,
    used: Vec<usize>,
    estimated: Vec<usize>,
    c: Vec<f64>,
    objective: f64,
    scratch: Vec<usize>,
}

impl SaolState {
    /// State for a stream of exactly `total` signals.
    pub fn new(op: &AnalysisOperator, cosparsity: usize, total: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid(format!("SAOL split fraction must lie in (0, 1), got {eps}")));
        }
        if cosparsity > op.num_rows() {
            return Err(invalid(format!(
                "cosparsity {cosparsity} exceeds the number of rows {}",
                op.num_rows()
            )));
        }
        let phase = (eps * total as f64).ceil() as usize;
        if phase == 0 {
            return Err(AolError::EmptyPhase { signals: total, eps });
        }
        let k = op.num_rows();
        Ok(Self {
            op: op.clone(),
            cosparsity,
            total,
            estimate_from: total - phase.min(total),
            seen: 0,
            gradients: DMatrix::zeros(op.dim(), k),
            used: vec![0; k],
            estimated: vec![0; k],
            c: vec![0.0; k],
            objective: 0.0,
            scratch: Vec::with_capacity(k),
        })
    }

    /// Consumes the next signal of the stream.
    pub fn observe(&mut self, y: DVectorView<'_, f64>) -> Result<()> {
        if y.len() != self.op.dim() {
            return Err(mismatch(self.op.dim(), y.len()));
        }
        if self.seen == self.total {
            return Err(invalid(format!("stream longer than the announced {} signals", self.total)));
        }
        let responses: Vec<f64> = (self.op.rows() * y).iter().copied().collect();
        let cosupport = smallest_responses(&responses, self.cosparsity, &mut self.scratch);
        let estimating = self.seen >= self.estimate_from;
        for k in cosupport {
            self.objective += responses[k] * responses[k];
            self.used[k] += 1;
            let w = 1.0 / self.used[k] as f64;
            let mut g = self.gradients.column_mut(k);
            g *= 1.0 - w;
            g.axpy(w * responses[k], &y, 1.0);
            if estimating {
                self.estimated[k] += 1;
                let v = 1.0 / self.estimated[k] as f64;
                let p = g.dot(&y);
                self.c[k] = (1.0 - v) * self.c[k] + v * p * p;
            }
        }
        self.seen += 1;
        Ok(())
    }

    pub fn gradient(&self, k: usize) -> DVector<f64> {
        self.gradients.column(k).into_owned()
    }

    /// `(I_k, C_k, c_k)`.
    pub fn counters(&self, k: usize) -> (usize, usize, f64) {
        (self.used[k], self.estimated[k], self.c[k])
    }

    /// `f_N` of the starting operator over the signals seen so far.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// `I_k` for every row.
    pub fn row_counts(&self) -> &[usize] {
        &self.used
    }

    /// The updated operator; the stream must be complete.
    pub fn finish(self) -> Result<AnalysisOperator> {
        if self.seen != self.total {
            return Err(invalid(format!(
                "stream ended after {} of {} signals",
                self.seen, self.total
            )));
        }
        let mut rows = self.op.rows().clone();
        for k in 0..self.op.num_rows() {
            let gamma = self.op.row(k);
            let g = self.gradients.column(k);
            let s = StepsizeScalars {
                a: gamma.dot(&g),
                b: g.dot(&g),
                c: self.c[k],
            };
            let alpha = optimal_stepsize(s)?;
            if alpha == 0.0 {
                continue;
            }
            let step = &gamma - g * alpha;
            if step.norm() < VANISHING_UPDATE {
                continue;
            }
            if let Some(row) = normalized(&step) {
                rows.set_row(k, &row.transpose());
            }
        }
        Ok(AnalysisOperator::from_rows_unchecked(rows))
    }
}

/// One SAOL pass over the columns of `batch`, in order.
pub fn saol_iteration(op: &AnalysisOperator, batch: &SignalBatch, cosparsity: usize, eps: f64) -> Result<AnalysisOperator> {
    check_dim(batch, op.dim())?;
    let mut state = SaolState::new(op, cosparsity, batch.len(), eps)?;
    for n in 0..batch.len() {
        state.observe(batch.signal(n))?;
    }
    state.finish()
}
