//! Projection of a batch onto its numerically significant subspace.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::signal::SignalBatch;

pub const DEFAULT_CUTOFF: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct IsotropyProjection {
    /// Coordinates of the signals in `basis`, `r x N`.
    pub coords: SignalBatch,
    /// Orthonormal columns spanning the retained directions, `d x r`.
    pub basis: DMatrix<f64>,
    /// Singular values of `Y Y^T`, descending.
    pub spectrum: DVector<f64>,
    /// Largest over smallest retained singular value.
    pub condition: f64,
}

impl IsotropyProjection {
    pub fn retained(&self) -> usize {
        self.basis.ncols()
    }

    /// Maps coordinates back to the ambient space.
    pub fn lift(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        &self.basis * coords
    }
}

/// Keeps the eigenvectors of `Y Y^T` whose eigenvalue is at least
/// `cutoff` times the largest.
pub fn isotropy_preprocess(batch: &SignalBatch, cutoff: f64) -> Result<IsotropyProjection> {
    if !(0.0..1.0).contains(&cutoff) {
        return Err(invalid(format!("cutoff must lie in [0, 1), got {cutoff}")));
    }
    let y = batch.matrix();
    let eig = SymmetricEigen::new(y * y.transpose());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let spectrum = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
    let top = spectrum[0];
    if top <= 0.0 {
        return Err(invalid("batch has no energy"));
    }
    let keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] >= cutoff * top && eig.eigenvalues[i] > 0.0)
        .collect();
    let basis = eig.eigenvectors.select_columns(&keep);
    let smallest = eig.eigenvalues[*keep.last().expect("largest eigenvalue is kept")];
    let coords = SignalBatch::new(basis.transpose() * y)?;
    Ok(IsotropyProjection {
        coords,
        basis,
        spectrum,
        condition: top / smallest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;

    #[test]
    fn isotropic_batch_keeps_everything() {
        let mut rng = RandomSource::seed_from_u64(1);
        let batch = SignalBatch::new(DMatrix::from_fn(5, 400, |_, _| rng.gaussian())).unwrap();
        let p = isotropy_preprocess(&batch, DEFAULT_CUTOFF).unwrap();
        assert_eq!(p.retained(), 5);
        assert!(p.condition < 3.0);
        assert!((p.lift(p.coords.matrix()) - batch.matrix()).amax() < 1e-10);
    }

    #[test]
    fn planar_batch_keeps_two_directions() {
        let mut rng = RandomSource::seed_from_u64(2);
        let plane = DMatrix::from_fn(4, 2, |_, _| rng.gaussian());
        let batch = SignalBatch::new(&plane * DMatrix::from_fn(2, 100, |_, _| rng.gaussian())).unwrap();
        let p = isotropy_preprocess(&batch, DEFAULT_CUTOFF).unwrap();
        assert_eq!(p.retained(), 2);
        assert_eq!(p.coords.dim(), 2);
        let gram = p.basis.transpose() * &p.basis;
        assert!((gram - DMatrix::identity(2, 2)).amax() <= 1e-10);
        // The basis spans the plane.
        let residual = &plane - &p.basis * (p.basis.transpose() * &plane);
        assert!(residual.amax() <= 1e-10);
        assert!(p.spectrum.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_zero_batch() {
        let batch = SignalBatch::new(DMatrix::zeros(3, 4)).unwrap();
        assert!(isotropy_preprocess(&batch, DEFAULT_CUTOFF).is_err());
    }
}
