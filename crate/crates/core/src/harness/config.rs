//! Training configuration.

use crate::error::{invalid, Result};
use crate::learners::{Algorithm, DEFAULT_IAOL_ALPHA, DEFAULT_SAOL_EPS};
use crate::operator::AnalysisOperator;

/// Desk-scale defaults keep `K = 2d` and `l` close to `0.86 K`.
pub const DEFAULT_ROWS: usize = 32;
pub const DEFAULT_DIM: usize = 16;
pub const DEFAULT_COSPARSITY: usize = 12;
pub const DEFAULT_BATCH_SIZE: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum InitMode {
    /// Rows drawn uniformly from the sphere.
    Random,
    /// `normalize(Omega + R)` around the target; needs a known target.
    Closeby,
    Given(AnalysisOperator),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub rows: usize,
    pub dim: usize,
    pub cosparsity: usize,
    pub batch_size: usize,
    pub iterations: usize,
    /// IAOL stepsize.
    pub alpha: f64,
    /// SAOL fraction of the stream used to estimate `c_k`.
    pub eps: f64,
    /// Coherence threshold; `None` disables replacement.
    pub replacement: Option<f64>,
    pub init: InitMode,
    pub seed: u64,
    /// Wall time in the history. Off keeps histories bit-reproducible.
    pub record_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Faol,
            rows: DEFAULT_ROWS,
            dim: DEFAULT_DIM,
            cosparsity: DEFAULT_COSPARSITY,
            batch_size: DEFAULT_BATCH_SIZE,
            iterations: 500,
            alpha: DEFAULT_IAOL_ALPHA,
            eps: DEFAULT_SAOL_EPS,
            replacement: None,
            init: InitMode::Random,
            seed: 0,
            record_time: false,
        }
    }
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, rows: usize, dim: usize, cosparsity: usize) -> Self {
        Self {
            algorithm,
            rows,
            dim,
            cosparsity,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.dim == 0 || self.batch_size == 0 {
            return Err(invalid("rows, dim and batch_size must be positive"));
        }
        if self.cosparsity == 0 || self.cosparsity > self.rows {
            return Err(invalid(format!(
                "cosparsity must lie in 1..={}, got {}",
                self.rows, self.cosparsity
            )));
        }
        if self.algorithm == Algorithm::Saol && !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.algorithm == Algorithm::Iaol && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(mu) = self.replacement {
            if !(mu > 0.0 && mu <= 1.0) {
                return Err(invalid(format!("replacement threshold must lie in (0, 1], got {mu}")));
            }
        }
        if let InitMode::Given(op) = &self.init {
            if op.num_rows() != self.rows || op.dim() != self.dim {
                return Err(invalid(format!(
                    "initial operator is {}x{}, config expects {}x{}",
                    op.num_rows(),
                    op.dim(),
                    self.rows,
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(TrainConfig::default().validate().is_ok());
        for alg in Algorithm::ALL {
            assert!(TrainConfig::new(alg, 8, 4, 8).validate().is_ok());
        }
    }

    #[test]
    fn rejects_bad_values() {
        let base = TrainConfig::new(Algorithm::Saol, 8, 4, 6);
        assert!(TrainConfig { cosparsity: 9, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { cosparsity: 0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { eps: 1.0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { replacement: Some(1.5), ..base.clone() }.validate().is_err());
        let iaol = TrainConfig::new(Algorithm::Iaol, 8, 4, 6);
        assert!(TrainConfig { alpha: 0.0, ..iaol }.validate().is_err());
        // eps is only checked for SAOL.
        assert!(TrainConfig { eps: 2.0, algorithm: Algorithm::Faol, ..base }.validate().is_ok());
    }
}
