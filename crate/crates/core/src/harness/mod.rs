//! Experiment drivers: training loops, recovery metric, preprocessing.

mod config;
mod history;
mod isotropy;
mod recovery;
mod train;

pub use config::{InitMode, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_COSPARSITY, DEFAULT_DIM, DEFAULT_ROWS};
pub use history::{mean_curve_csv, HistoryRecord, TrainHistory, CSV_HEADER};
pub use isotropy::{isotropy_preprocess, IsotropyProjection, DEFAULT_CUTOFF};
pub use recovery::{best_overlaps, recovered_fraction, RECOVERY_THRESHOLD};
pub use train::{initial_operator, train, train_with_observer, DataSource, TrainFailure, TrainOutcome};
