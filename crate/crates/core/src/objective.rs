//! Cosupport selection by hard thresholding, the accumulator matrices
//! `A_k = sum_{n in S_k} y_n y_n^T`, the objective
//! `f_N(Gamma) = sum_n min_{|J| = l} ||Gamma_J y_n||^2` and its row gradients.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{invalid, Result};
use crate::operator::AnalysisOperator;
use crate::signal::{check_dim, SignalBatch};

/// Per-signal cosupports `J_n` and the inverted per-row lists `S_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosupportSelection {
    cosparsity: usize,
    per_signal: Vec<Vec<usize>>,
    per_row: Vec<Vec<usize>>,
}

impl CosupportSelection {
    fn from_per_signal(num_rows: usize, cosparsity: usize, per_signal: Vec<Vec<usize>>) -> Self {
        let mut per_row = vec![Vec::new(); num_rows];
        for (n, j) in per_signal.iter().enumerate() {
            for &k in j {
                per_row[k].push(n);
            }
        }
        Self {
            cosparsity,
            per_signal,
            per_row,
        }
    }

    pub fn cosparsity(&self) -> usize {
        self.cosparsity
    }

    /// `J_n`, sorted ascending.
    pub fn signal(&self, n: usize) -> &[usize] {
        &self.per_signal[n]
    }

    /// `S_k = {n : k in J_n}`, sorted ascending.
    pub fn row(&self, k: usize) -> &[usize] {
        &self.per_row[k]
    }

    pub fn num_signals(&self) -> usize {
        self.per_signal.len()
    }

    pub fn num_rows(&self) -> usize {
        self.per_row.len()
    }

    /// `|S_k|` for every row.
    pub fn row_counts(&self) -> Vec<usize> {
        self.per_row.iter().map(Vec::len).collect()
    }
}

/// Accumulator of one analyser: `A_k` and `|S_k|`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyserAccumulator {
    pub matrix: DMatrix<f64>,
    pub count: usize,
}

impl AnalyserAccumulator {
    pub fn zeros(d: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(d, d),
            count: 0,
        }
    }

    /// `A_k / |S_k|`, or `None` for an unused row.
    pub fn normalised(&self) -> Option<DMatrix<f64>> {
        (self.count > 0).then(|| &self.matrix / self.count as f64)
    }

    /// `gamma A gamma^T`.
    pub fn quadratic_form(&self, gamma: &DVector<f64>) -> f64 {
        gamma.dot(&(&self.matrix * gamma))
    }
}

/// Everything one pass over a batch produces.
#[derive(Clone, Debug)]
pub struct Accumulation {
    pub selection: CosupportSelection,
    pub accumulators: Vec<AnalyserAccumulator>,
    /// `f_N(Gamma)` on the batch.
    pub objective: f64,
}

/// Orders `(|response|, index)` pairs; the lowest index wins ties.
fn by_magnitude(responses: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&i, &j| {
        responses[i]
            .abs()
            .total_cmp(&responses[j].abs())
            .then(i.cmp(&j))
    }
}

/// Indices of the `l` smallest `|responses[k]|`, sorted ascending.
pub(crate) fn smallest_responses(responses: &[f64], cosparsity: usize, scratch: &mut Vec<usize>) -> Vec<usize> {
    let k = responses.len();
    if cosparsity == 0 {
        return Vec::new();
    }
    scratch.clear();
    scratch.extend(0..k);
    if cosparsity < k {
        scratch.select_nth_unstable_by(cosparsity - 1, by_magnitude(responses));
    }
    let mut j = scratch[..cosparsity].to_vec();
    j.sort_unstable();
    j
}

fn check_cosparsity(op: &AnalysisOperator, cosparsity: usize) -> Result<()> {
    if cosparsity > op.num_rows() {
        return Err(invalid(format!(
            "cosparsity {cosparsity} exceeds the number of rows {}",
            op.num_rows()
        )));
    }
    Ok(())
}

/// `J = argmin_{|J| = l} ||Gamma_J y||^2`: the `l` rows with the smallest
/// absolute response, ties going to the lower index.
pub fn cosupport_select(op: &AnalysisOperator, y: DVectorView<'_, f64>, cosparsity: usize) -> Result<Vec<usize>> {
    check_cosparsity(op, cosparsity)?;
    if y.len() != op.dim() {
        return Err(crate::error::mismatch(op.dim(), y.len()));
    }
    let responses: Vec<f64> = (op.rows() * y).iter().copied().collect();
    Ok(smallest_responses(&responses, cosparsity, &mut Vec::new()))
}

/// `Gamma Y` together with the thresholded cosupports and the objective.
fn select_all(op: &AnalysisOperator, batch: &SignalBatch, cosparsity: usize) -> Result<(CosupportSelection, f64)> {
    check_cosparsity(op, cosparsity)?;
    check_dim(batch, op.dim())?;
    let responses = op.rows() * batch.matrix();
    let mut scratch = Vec::with_capacity(op.num_rows());
    let mut objective = 0.0;
    let per_signal: Vec<Vec<usize>> = responses
        .column_iter()
        .map(|col| {
            let r = col.as_slice();
            let j = smallest_responses(r, cosparsity, &mut scratch);
            objective += j.iter().map(|&k| r[k] * r[k]).sum::<f64>();
            j
        })
        .collect();
    Ok((
        CosupportSelection::from_per_signal(op.num_rows(), cosparsity, per_signal),
        objective,
    ))
}

/// Thresholded cosupports of every signal in the batch.
pub fn select_cosupports(op: &AnalysisOperator, batch: &SignalBatch, cosparsity: usize) -> Result<CosupportSelection> {
    Ok(select_all(op, batch, cosparsity)?.0)
}

/// Cosupports, accumulators `A_k = Y_k Y_k^T` (with `Y_k` the columns in
/// `S_k`) and the objective value, in one pass.
pub fn accumulate(op: &AnalysisOperator, batch: &SignalBatch, cosparsity: usize) -> Result<Accumulation> {
    let (selection, objective) = select_all(op, batch, cosparsity)?;
    let accumulators = accumulators_for(&selection, batch);
    Ok(Accumulation {
        selection,
        accumulators,
        objective,
    })
}

/// `A_k` for a given selection.
///
/// When most rows are selected for every signal (`K - l` well below `l`),
/// `A_k` is formed as `Y Y^T` minus the contribution of the signals outside
/// `S_k`, which touches far fewer outer products.
pub fn accumulators_for(selection: &CosupportSelection, batch: &SignalBatch) -> Vec<AnalyserAccumulator> {
    let d = batch.dim();
    let k = selection.num_rows();
    let n = selection.num_signals();
    let y = batch.matrix();
    let outer = |members: &[usize]| {
        let yk = y.select_columns(members);
        let mut m = DMatrix::zeros(d, d);
        m.gemm(1.0, &yk, &yk.transpose(), 0.0);
        m
    };
    if 2 * (k - selection.cosparsity()) < selection.cosparsity() {
        let mut total = DMatrix::zeros(d, d);
        total.gemm(1.0, y, &y.transpose(), 0.0);
        let mut outside = vec![Vec::new(); k];
        for j in 0..n {
            let mut inside = selection.signal(j).iter().peekable();
            for (row, list) in outside.iter_mut().enumerate() {
                if inside.peek() == Some(&&row) {
                    inside.next();
                } else {
                    list.push(j);
                }
            }
        }
        return outside
            .iter()
            .enumerate()
            .map(|(row, rest)| {
                let count = selection.row(row).len();
                if count == 0 {
                    return AnalyserAccumulator::zeros(d);
                }
                let mut matrix = total.clone();
                if !rest.is_empty() {
                    matrix -= outer(rest);
                }
                AnalyserAccumulator { matrix, count }
            })
            .collect();
    }
    (0..k)
        .map(|row| {
            let members = selection.row(row);
            if members.is_empty() {
                return AnalyserAccumulator::zeros(d);
            }
            AnalyserAccumulator {
                matrix: outer(members),
                count: members.len(),
            }
        })
        .collect()
}

/// `f_N(Gamma)` on the batch.
pub fn objective_value(op: &AnalysisOperator, batch: &SignalBatch, cosparsity: usize) -> Result<f64> {
    Ok(select_all(op, batch, cosparsity)?.1)
}

/// `sum_k gamma_k A_k gamma_k^T` for fixed accumulators (frozen cosupports).
pub fn frozen_objective(op: &AnalysisOperator, accumulators: &[AnalyserAccumulator]) -> f64 {
    accumulators
        .iter()
        .enumerate()
        .map(|(k, acc)| acc.quadratic_form(&op.row(k)))
        .sum()
}

/// Descent directions `g_k = sum_{n in S_k} <gamma_k, y_n> y_n`; the
/// derivative of `f_N` with respect to row `k` is `2 g_k` wherever it exists.
pub fn gradient_rows(selection: &CosupportSelection, batch: &SignalBatch, op: &AnalysisOperator) -> Result<Vec<DVector<f64>>> {
    check_dim(batch, op.dim())?;
    if selection.num_rows() != op.num_rows() || selection.num_signals() != batch.len() {
        return Err(crate::error::mismatch(
            format!("selection over {} rows / {} signals", op.num_rows(), batch.len()),
            format!("{} rows / {} signals", selection.num_rows(), selection.num_signals()),
        ));
    }
    Ok((0..op.num_rows())
        .map(|k| {
            let gamma = op.row(k);
            let mut g = DVector::zeros(op.dim());
            for &n in selection.row(k) {
                let y = batch.signal(n);
                g.axpy(gamma.dot(&y), &y, 1.0);
            }
            g
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;
    use crate::signal::{generate_signals, SignalModelConfig};

    fn random_batch(d: usize, n: usize, rng: &mut RandomSource) -> SignalBatch {
        SignalBatch::new(DMatrix::from_fn(d, n, |_, _| rng.gaussian())).unwrap()
    }

    /// All `size`-subsets of `0..n` in lexicographic order.
    fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
        if size == 0 {
            return vec![vec![]];
        }
        if n < size {
            return vec![];
        }
        let mut out = subsets(n - 1, size);
        for mut s in subsets(n - 1, size - 1) {
            s.push(n - 1);
            out.push(s);
        }
        out
    }

    fn brute_force_min(op: &AnalysisOperator, y: &DVector<f64>, size: usize) -> (f64, Vec<usize>) {
        subsets(op.num_rows(), size)
            .into_iter()
            .map(|j| {
                let v: f64 = j.iter().map(|&k| op.row(k).dot(y).powi(2)).sum();
                (v, j)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    }

    #[test]
    fn zero_response_wins() {
        let op = AnalysisOperator::from_unit_rows(DMatrix::identity(2, 2)).unwrap();
        let y = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(cosupport_select(&op, y.as_view(), 1).unwrap(), vec![1]);
        assert_eq!(cosupport_select(&op, y.as_view(), 2).unwrap(), vec![0, 1]);
        assert!(cosupport_select(&op, y.as_view(), 0).unwrap().is_empty());
        assert!(cosupport_select(&op, y.as_view(), 3).is_err());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let op = AnalysisOperator::from_unit_rows(DMatrix::identity(4, 4)).unwrap();
        let y = DVector::from_vec(vec![1.0, 1.0, -1.0, 1.0]);
        assert_eq!(cosupport_select(&op, y.as_view(), 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn selection_matches_exhaustive_search() {
        let mut rng = RandomSource::seed_from_u64(17);
        for _ in 0..200 {
            let op = AnalysisOperator::random(6, 4, &mut rng).unwrap();
            let y = rng.gaussian_vector(4);
            let j = cosupport_select(&op, y.as_view(), 3).unwrap();
            let (best, best_j) = brute_force_min(&op, &y, 3);
            let ours: f64 = j.iter().map(|&k| op.row(k).dot(&y).powi(2)).sum();
            assert!((ours - best).abs() <= 1e-14 * best.max(1.0));
            assert_eq!(j, best_j);
        }
    }

    #[test]
    fn dual_indexing_is_consistent() {
        let mut rng = RandomSource::seed_from_u64(2);
        let op = AnalysisOperator::random(10, 5, &mut rng).unwrap();
        let batch = random_batch(5, 37, &mut rng);
        let sel = select_cosupports(&op, &batch, 4).unwrap();
        assert_eq!(sel.row_counts().iter().sum::<usize>(), 37 * 4);
        for n in 0..37 {
            assert_eq!(sel.signal(n).len(), 4);
            for &k in sel.signal(n) {
                assert!(sel.row(k).contains(&n));
            }
        }
    }

    #[test]
    fn single_signal_accumulators() {
        let mut rng = RandomSource::seed_from_u64(5);
        let op = AnalysisOperator::random(6, 3, &mut rng).unwrap();
        let batch = random_batch(3, 1, &mut rng);
        let acc = accumulate(&op, &batch, 2).unwrap();
        let y = batch.signal(0);
        let yy = y * y.transpose();
        let nonzero: Vec<usize> = (0..6).filter(|&k| acc.accumulators[k].count > 0).collect();
        assert_eq!(nonzero, acc.selection.signal(0));
        for &k in &nonzero {
            assert!((&acc.accumulators[k].matrix - &yy).amax() < 1e-15);
        }
    }

    #[test]
    fn zero_cosparsity_gives_zero_accumulators() {
        let mut rng = RandomSource::seed_from_u64(5);
        let op = AnalysisOperator::random(6, 3, &mut rng).unwrap();
        let batch = random_batch(3, 20, &mut rng);
        let acc = accumulate(&op, &batch, 0).unwrap();
        assert!(acc.accumulators.iter().all(|a| a.count == 0 && a.matrix.amax() == 0.0));
        assert_eq!(acc.objective, 0.0);
    }

    #[test]
    fn accumulators_match_naive_double_loop() {
        let mut rng = RandomSource::seed_from_u64(23);
        let op = AnalysisOperator::random(8, 5, &mut rng).unwrap();
        let batch = random_batch(5, 50, &mut rng);
        let acc = accumulate(&op, &batch, 3).unwrap();
        for k in 0..8 {
            let mut naive = DMatrix::<f64>::zeros(5, 5);
            let mut count = 0;
            for n in 0..50 {
                if acc.selection.signal(n).contains(&k) {
                    count += 1;
                    for i in 0..5 {
                        for j in 0..5 {
                            naive[(i, j)] += batch.matrix()[(i, n)] * batch.matrix()[(j, n)];
                        }
                    }
                }
            }
            assert_eq!(acc.accumulators[k].count, count);
            assert!((&acc.accumulators[k].matrix - naive).amax() <= 1e-12);
            let a = &acc.accumulators[k].matrix;
            assert!((a - a.transpose()).amax() <= 1e-12);
        }
    }

    #[test]
    fn objective_hand_computed() {
        let op = AnalysisOperator::from_unit_rows(DMatrix::identity(2, 2)).unwrap();
        let batch = SignalBatch::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(objective_value(&op, &batch, 1).unwrap(), 0.0);
        assert_eq!(objective_value(&op, &batch, 2).unwrap(), 1.0);
    }

    #[test]
    fn objective_matches_brute_force_and_accumulators() {
        let mut rng = RandomSource::seed_from_u64(41);
        for _ in 0..20 {
            let op = AnalysisOperator::random(6, 4, &mut rng).unwrap();
            let batch = random_batch(4, 15, &mut rng);
            let f = objective_value(&op, &batch, 3).unwrap();
            let brute: f64 = (0..15)
                .map(|n| brute_force_min(&op, &batch.signal(n).into_owned(), 3).0)
                .sum();
            assert!((f - brute).abs() <= 1e-12 * brute.max(1.0));
            let acc = accumulate(&op, &batch, 3).unwrap();
            let via_a = frozen_objective(&op, &acc.accumulators);
            assert!((f - via_a).abs() <= 1e-10 * f.max(1e-300));
            assert_eq!(acc.objective, f);
        }
    }

    #[test]
    fn perfectly_cosparse_batch_has_zero_objective() {
        let mut rng = RandomSource::seed_from_u64(6);
        let op = AnalysisOperator::random(32, 16, &mut rng).unwrap();
        let n = 1000;
        let gen = generate_signals(&op, &SignalModelConfig::noiseless(12), n, &mut rng).unwrap();
        let f = objective_value(&op, &gen.batch, 12).unwrap();
        assert!(f <= 1e-18 * n as f64, "objective {f}");
    }

    #[test]
    fn gradient_rows_equal_gamma_times_accumulator() {
        let mut rng = RandomSource::seed_from_u64(14);
        let op = AnalysisOperator::random(9, 4, &mut rng).unwrap();
        let batch = random_batch(4, 30, &mut rng);
        let acc = accumulate(&op, &batch, 5).unwrap();
        let g = gradient_rows(&acc.selection, &batch, &op).unwrap();
        for (k, gk) in g.iter().enumerate() {
            let via_a = &acc.accumulators[k].matrix * op.row(k);
            assert!((gk - via_a).amax() <= 1e-12);
            if acc.selection.row(k).is_empty() {
                assert_eq!(gk.amax(), 0.0);
            }
        }
    }

    #[test]
    fn single_signal_gradient() {
        let mut rng = RandomSource::seed_from_u64(15);
        let op = AnalysisOperator::random(5, 3, &mut rng).unwrap();
        let batch = random_batch(3, 1, &mut rng);
        let sel = select_cosupports(&op, &batch, 2).unwrap();
        let g = gradient_rows(&sel, &batch, &op).unwrap();
        let y = batch.signal(0).into_owned();
        for &k in sel.signal(0) {
            assert!((&g[k] - &y * op.row(k).dot(&y)).amax() < 1e-15);
        }
    }

    #[test]
    fn complement_accumulation_matches_direct() {
        let mut rng = RandomSource::seed_from_u64(88);
        let op = AnalysisOperator::random(12, 4, &mut rng).unwrap();
        let batch = random_batch(4, 60, &mut rng);
        let acc = accumulate(&op, &batch, 10).unwrap();
        for k in 0..12 {
            let members = acc.selection.row(k);
            let mut direct = DMatrix::<f64>::zeros(4, 4);
            for &n in members {
                let y = batch.signal(n);
                direct += y * y.transpose();
            }
            assert_eq!(acc.accumulators[k].count, members.len());
            assert!((&acc.accumulators[k].matrix - direct).amax() <= 1e-12 * 60.0);
        }
    }
}
