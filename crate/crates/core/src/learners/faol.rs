//! Explicit gradient step with the optimal stepsize.

use crate::error::Result;
use crate::objective::{accumulate, AnalyserAccumulator};
use crate::operator::{normalized, AnalysisOperator};
use crate::signal::SignalBatch;

use super::check_accumulators;
use super::stepsize::{optimal_stepsize, StepsizeScalars};

/// Below this norm `gamma - alpha g` counts as the zero vector.
pub const VANISHING_UPDATE: f64 = 1e-10;

/// `gamma_k <- normalize(gamma_k - alpha_k gamma_k A_k)` for every row.
///
/// Each `A_k` is divided by its trace first. The minimiser along the line is
/// the same, and the scalars stay of order one.
pub fn faol_step(op: &AnalysisOperator, accs: &[AnalyserAccumulator]) -> Result<AnalysisOperator> {
    check_accumulators(op, accs)?;
    let mut rows = op.rows().clone();
    for (k, acc) in accs.iter().enumerate() {
        let trace = acc.matrix.trace();
        if acc.count == 0 || trace <= 0.0 {
            continue;
        }
        let gamma = op.row(k);
        let scaled = &acc.matrix / trace;
        let g = &scaled * &gamma;
        let s = StepsizeScalars {
            a: gamma.dot(&g),
            b: g.dot(&g),
            c: g.dot(&(&scaled * &g)),
        };
        let alpha = optimal_stepsize(s)?;
        if alpha == 0.0 {
            continue;
        }
        let step = &gamma - &g * alpha;
        if step.norm() < VANISHING_UPDATE {
            continue;
        }
        if let Some(row) = normalized(&step) {
            rows.set_row(k, &row.transpose());
        }
    }
    Ok(AnalysisOperator::from_rows_unchecked(rows))
}

/// Selection, accumulation and one FAOL step on `batch`.
pub fn faol_iteration(op: &AnalysisOperator, batch: &SignalBatch, cosparsity: usize) -> Result<AnalysisOperator> {
    faol_step(op, &accumulate(op, batch, cosparsity)?.accumulators)
}


#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use crate::objective::objective_value;
    use crate::rng::RandomSource;
    use crate::signal::{generate_signals, SignalModelConfig};

    #[test]
    fn target_is_a_fixed_point_on_cosparse_data() {
        let mut rng = RandomSource::seed_from_u64(3);
        let omega = AnalysisOperator::random(32, 16, &mut rng).unwrap();
        let gen = generate_signals(&omega, &SignalModelConfig::noiseless(12), 2000, &mut rng).unwrap();
        let next = faol_iteration(&omega, &gen.batch, 12).unwrap();
        assert!((next.rows() - omega.rows()).amax() <= 1e-10);
    }

    #[test]
    fn never_increases_the_objective_on_a_fixed_batch() {
        let mut rng = RandomSource::seed_from_u64(8);
        for _ in 0..100 {
            let op = AnalysisOperator::random(10, 5, &mut rng).unwrap();
            let batch = SignalBatch::new(DMatrix::from_fn(5, 40, |_, _| rng.gaussian())).unwrap();
            let before = objective_value(&op, &batch, 3).unwrap();
            let next = faol_iteration(&op, &batch, 3).unwrap();
            let after = objective_value(&next, &batch, 3).unwrap();
            assert!(after <= before + 1e-10, "{after} > {before}");
            assert!(next.max_norm_deviation() <= 1e-12);
        }
    }

    #[test]
    fn invariant_under_accumulator_scaling() {
        let mut rng = RandomSource::seed_from_u64(12);
        let op = AnalysisOperator::random(16, 6, &mut rng).unwrap();
        let batch = SignalBatch::new(DMatrix::from_fn(6, 80, |_, _| rng.gaussian())).unwrap();
        let accs = accumulate(&op, &batch, 4).unwrap().accumulators;
        let scaled: Vec<_> = accs
            .iter()
            .map(|a| AnalyserAccumulator {
                matrix: &a.matrix * 7.3,
                count: a.count,
            })
            .collect();
        let x = faol_step(&op, &accs).unwrap();
        let y = faol_step(&op, &scaled).unwrap();
        assert!((x.rows() - y.rows()).amax() <= 1e-10);
    }

    #[test]
    fn eigenvector_rows_are_preserved() {
        let mut rng = RandomSource::seed_from_u64(4);
        let op = AnalysisOperator::from_unit_rows(DMatrix::identity(3, 3)).unwrap();
        let accs: Vec<_> = (0..3)
            .map(|_| {
                let diag = nalgebra::DVector::from_fn(3, |_, _| rng.uniform() + 0.1);
                AnalyserAccumulator {
                    matrix: DMatrix::from_diagonal(&diag),
                    count: 5,
                }
            })
            .collect();
        let next = faol_step(&op, &accs).unwrap();
        assert_eq!(next.rows(), op.rows());
    }

    #[test]
    fn unused_rows_are_kept() {
        let mut rng = RandomSource::seed_from_u64(4);
        let op = AnalysisOperator::random(4, 3, &mut rng).unwrap();
        let accs = vec![AnalyserAccumulator::zeros(3); 4];
        assert_eq!(faol_step(&op, &accs).unwrap(), op);
        assert!(faol_step(&op, &accs[..3]).is_err());
    }
}
