//! Training loops over synthetic, fixed or patch-pool data.

use std::fmt;
use std::time::Instant;

use super::config::{InitMode, TrainConfig};
use super::history::{HistoryRecord, TrainHistory};
use super::recovery::recovered_fraction;
use crate::error::{invalid, AolError, Result};
use crate::learners::{faol_step, iaol_step, replace_coherent, svaol_step, Algorithm, ReplacementState, SaolState};
use crate::objective::accumulate;
use crate::operator::AnalysisOperator;
use crate::rng::{RandomSource, Stream};
use crate::signal::{generate_signals, SignalBatch, SignalModelConfig};

#[derive(Clone, Debug)]
pub enum DataSource {
    /// A fresh batch from the cosparse model every iteration.
    Synthetic {
        target: AnalysisOperator,
        model: SignalModelConfig,
    },
    /// The same batch every iteration.
    Fixed(SignalBatch),
    /// A uniform subsample without replacement of the pool every iteration.
    Patches(SignalBatch),
}

impl DataSource {
    pub fn target(&self) -> Option<&AnalysisOperator> {
        match self {
            Self::Synthetic { target, .. } => Some(target),
            _ => None,
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Synthetic { target, .. } => target.dim(),
            Self::Fixed(b) | Self::Patches(b) => b.dim(),
        }
    }

    fn check(&self, cfg: &TrainConfig) -> Result<()> {
        if self.dim() != cfg.dim {
            return Err(invalid(format!("data has dimension {}, config expects {}", self.dim(), cfg.dim)));
        }
        match self {
            Self::Synthetic { target, model } => model.validate(target),
            Self::Patches(pool) if pool.len() < cfg.batch_size => Err(invalid(format!(
                "patch pool holds {} patches, fewer than batch_size {}",
                pool.len(),
                cfg.batch_size
            ))),
            _ => Ok(()),
        }
    }

    fn next_batch<'a>(&'a self, n: usize, rng: &mut RandomSource) -> Result<std::borrow::Cow<'a, SignalBatch>> {
        use std::borrow::Cow;
        match self {
            Self::Synthetic { target, model } => Ok(Cow::Owned(generate_signals(target, model, n, rng)?.batch)),
            Self::Fixed(b) => Ok(Cow::Borrowed(b)),
            Self::Patches(pool) => {
                if n == pool.len() {
                    return Ok(Cow::Borrowed(pool));
                }
                Ok(Cow::Owned(pool.select(&rng.subset(pool.len(), n))?))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub operator: AnalysisOperator,
    pub history: TrainHistory,
    /// SVAOL rows whose inverse iteration hit the cap, summed over iterations.
    pub unconverged: usize,
}

/// A learner error together with the state reached before it.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: AolError,
    pub partial: TrainOutcome,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "training stopped after {} iterations: {}", self.partial.history.len(), self.error)
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// The starting operator for `cfg`, drawn from the init substream.
pub fn initial_operator(cfg: &TrainConfig, target: Option<&AnalysisOperator>) -> Result<AnalysisOperator> {
    let mut rng = RandomSource::substream(cfg.seed, Stream::Init);
    match &cfg.init {
        InitMode::Random => AnalysisOperator::random(cfg.rows, cfg.dim, &mut rng),
        InitMode::Closeby => {
            let target = target.ok_or_else(|| invalid("closeby initialisation needs a target operator"))?;
            if target.num_rows() != cfg.rows {
                return Err(invalid(format!(
                    "target has {} rows, config expects {}",
                    target.num_rows(),
                    cfg.rows
                )));
            }
            AnalysisOperator::closeby(target, &mut rng)
        }
        InitMode::Given(op) => Ok(op.clone()),
    }
}

pub fn train(cfg: &TrainConfig, source: &DataSource) -> std::result::Result<TrainOutcome, TrainFailure> {
    train_with_observer(cfg, source, |_, _| {})
}

/// Like [`train`]; `observer` sees the operator after every iteration.
pub fn train_with_observer<F>(
    cfg: &TrainConfig,
    source: &DataSource,
    mut observer: F,
) -> std::result::Result<TrainOutcome, TrainFailure>
where
    F: FnMut(usize, &AnalysisOperator),
{
    let fail_early = |error: AolError| TrainFailure {
        error,
        partial: TrainOutcome {
            operator: match &cfg.init {
                InitMode::Given(op) => op.clone(),
                _ => AnalysisOperator::from_rows_unchecked(nalgebra::DMatrix::zeros(0, cfg.dim)),
            },
            history: TrainHistory::default(),
            unconverged: 0,
        },
    };
    cfg.validate().map_err(fail_early)?;
    source.check(cfg).map_err(fail_early)?;
    let target = source.target();
    let mut op = initial_operator(cfg, target).map_err(fail_early)?;

    let mut batches = RandomSource::substream(cfg.seed, Stream::Batches);
    let mut redraws = RandomSource::substream(cfg.seed, Stream::Replacement);
    let mut replacement = match cfg.replacement {
        Some(mu) => Some(ReplacementState::new(cfg.rows, mu).map_err(fail_early)?),
        None => None,
    };
    let start = Instant::now();
    let mut history = TrainHistory::default();
    let mut unconverged = 0;

    for iter in 1..=cfg.iterations {
        let step = (|| -> Result<(AnalysisOperator, f64, usize, usize)> {
            let batch = source.next_batch(cfg.batch_size, &mut batches)?;
            let (mut next, objective, counts, missed) = match cfg.algorithm {
                Algorithm::Saol => {
                    let mut state = SaolState::new(&op, cfg.cosparsity, batch.len(), cfg.eps)?;
                    for n in 0..batch.len() {
                        state.observe(batch.signal(n))?;
                    }
                    let objective = state.objective();
                    let counts = state.row_counts().to_vec();
                    (state.finish()?, objective, counts, 0)
                }
                alg => {
                    let acc = accumulate(&op, &batch, cfg.cosparsity)?;
                    let counts = acc.selection.row_counts();
                    let (next, missed) = match alg {
                        Algorithm::Faol => (faol_step(&op, &acc.accumulators)?, 0),
                        Algorithm::Iaol => (iaol_step(&op, &acc.accumulators, cfg.alpha)?, 0),
                        _ => {
                            let up = svaol_step(&op, &acc.accumulators)?;
                            (up.operator, up.unconverged.len())
                        }
                    };
                    (next, acc.objective, counts, missed)
                }
            };
            let mut replaced = 0;
            if let Some(state) = replacement.as_mut() {
                state.record_counts(&counts);
                let (swapped, events) = replace_coherent(&next, state, &mut redraws)?;
                next = swapped;
                replaced = events.len();
            }
            Ok((next, objective, replaced, missed))
        })();
        match step {
            Ok((next, objective, replacements, missed)) => {
                op = next;
                unconverged += missed;
                let recovered = target.map(|t| recovered_fraction(&op, t).expect("dimensions checked"));
                history.records.push(HistoryRecord {
                    iter,
                    objective,
                    recovered,
                    replacements,
                    seconds: cfg.record_time.then(|| start.elapsed().as_secs_f64()),
                });
                observer(iter, &op);
            }
            Err(error) => {
                return Err(TrainFailure {
                    error,
                    partial: TrainOutcome {
                        operator: op,
                        history,
                        unconverged,
                    },
                })
            }
        }
    }
    Ok(TrainOutcome {
        operator: op,
        history,
        unconverged,
    })
}
