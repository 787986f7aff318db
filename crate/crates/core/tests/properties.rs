use aol_core::harness::recovered_fraction;
use aol_core::objective::objective_value;
use aol_core::{AnalysisOperator, RandomSource, SignalBatch};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn instance(seed: u64, k: usize, d: usize, n: usize) -> (AnalysisOperator, SignalBatch) {
    let mut rng = RandomSource::seed_from_u64(seed);
    let op = AnalysisOperator::random(k, d, &mut rng).unwrap();
    let batch = SignalBatch::new(DMatrix::from_fn(d, n, |_, _| rng.gaussian())).unwrap();
    (op, batch)
}

/// A permutation of `0..n` drawn from `seed`.
fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = RandomSource::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.index(i + 1));
    }
    p
}

fn permuted_signed(op: &AnalysisOperator, perm: &[usize], flips: u64) -> AnalysisOperator {
    let mut m = DMatrix::zeros(op.num_rows(), op.dim());
    for (k, &src) in perm.iter().enumerate() {
        let sign = if flips >> (k % 64) & 1 == 1 { -1.0 } else { 1.0 };
        m.set_row(k, &(op.rows().row(src) * sign));
    }
    AnalysisOperator::from_unit_rows(m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_grows_with_cosparsity(seed in any::<u64>(), k in 2usize..12, d in 2usize..6) {
        let (op, batch) = instance(seed, k, d, 20);
        let mut last = 0.0;
        for ell in 1..=k {
            let f = objective_value(&op, &batch, ell).unwrap();
            prop_assert!(f >= last);
            last = f;
        }
    }

    #[test]
    fn objective_ignores_row_order_and_signs(seed in any::<u64>(), k in 2usize..12, d in 2usize..6, flips in any::<u64>()) {
        let (op, batch) = instance(seed, k, d, 15);
        let ell = 1 + (seed as usize % k);
        let other = permuted_signed(&op, &permutation(k, seed ^ 1), flips);
        let a = objective_value(&op, &batch, ell).unwrap();
        let b = objective_value(&other, &batch, ell).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn objective_is_quadratic_in_the_signals(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let (op, batch) = instance(seed, 8, 4, 10);
        let scaled = SignalBatch::new(batch.matrix() * scale).unwrap();
        let a = objective_value(&op, &batch, 5).unwrap();
        let b = objective_value(&op, &scaled, 5).unwrap();
        prop_assert!((b - scale * scale * a).abs() <= 1e-10 * b.max(1e-300));
    }

    #[test]
    fn recovery_ignores_row_order_and_signs(seed in any::<u64>(), flips in any::<u64>(), flips2 in any::<u64>()) {
        let mut rng = RandomSource::seed_from_u64(seed);
        let target = AnalysisOperator::random(10, 3, &mut rng).unwrap();
        let learned = AnalysisOperator::closeby(&target, &mut rng).unwrap();
        let base = recovered_fraction(&learned, &target).unwrap();
        let l2 = permuted_signed(&learned, &permutation(10, seed ^ 2), flips);
        let t2 = permuted_signed(&target, &permutation(10, seed ^ 3), flips2);
        prop_assert_eq!(recovered_fraction(&l2, &target).unwrap(), base);
        prop_assert_eq!(recovered_fraction(&learned, &t2).unwrap(), base);
        prop_assert!((0.0..=1.0).contains(&base));
    }
}
