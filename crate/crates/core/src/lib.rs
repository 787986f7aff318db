//! Analysis operator learning for the cosparse signal model.
//!
//! Signals are stored as the columns of a `d x N` matrix, operators as
//! `K x d` matrices with unit-norm rows.

pub mod error;
pub mod harness;
pub mod imaging;
pub mod learners;
pub mod objective;
pub mod operator;
pub mod rng;
pub mod signal;
pub mod textio;

pub use error::{AolError, Result};
pub use operator::{normalize_rows, AnalysisOperator};
pub use rng::{RandomSource, Stream};
pub use signal::{cosparse_projector, generate_signals, SignalBatch, SignalModelConfig};
