//! One-iteration update rules. Each learner maps an operator and the
//! accumulators of one batch to a new operator; drawing batches is left to
//! the caller.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, mismatch, Result};
use crate::objective::AnalyserAccumulator;
use crate::operator::AnalysisOperator;

pub mod faol;
pub mod iaol;
pub mod replace;
pub mod saol;
pub mod stepsize;
pub mod svaol;

pub use faol::{faol_iteration, faol_step};
pub use iaol::{iaol_iteration, iaol_step, DEFAULT_IAOL_ALPHA};
pub use replace::{replace_coherent, ReplacementEvent, ReplacementState, IMAGE_THRESHOLD, SYNTHETIC_THRESHOLD};
pub use saol::{saol_iteration, SaolState, DEFAULT_SAOL_EPS};
pub use stepsize::{optimal_stepsize, StepsizeScalars};
pub use svaol::{smallest_eigenvector, svaol_iteration, svaol_step, EigenResult, SvaolUpdate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Faol,
    Saol,
    Iaol,
    Svaol,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Faol, Self::Saol, Self::Iaol, Self::Svaol];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Faol => "FAOL",
            Self::Saol => "SAOL",
            Self::Iaol => "IAOL",
            Self::Svaol => "SVAOL",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = crate::error::AolError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown algorithm '{s}' (valid: FAOL, SAOL, IAOL, SVAOL)")))
    }
}

fn check_accumulators(op: &AnalysisOperator, accs: &[AnalyserAccumulator]) -> Result<()> {
    if accs.len() != op.num_rows() {
        return Err(mismatch(
            format!("{} accumulators", op.num_rows()),
            accs.len(),
        ));
    }
    let d = op.dim();
    if let Some(a) = accs.iter().find(|a| a.matrix.shape() != (d, d)) {
        return Err(mismatch(format!("{d}x{d}"), format!("{:?}", a.matrix.shape())));
    }
    Ok(())
}
