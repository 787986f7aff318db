//! Analysis operators: `K x d` matrices whose rows (analysers) have unit
//! Euclidean norm.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, AolError, Result};
use crate::rng::RandomSource;
use crate::textio;

/// Rows with norm below this are treated as zero.
pub const ZERO_ROW_NORM: f64 = 1e-14;

/// Maximum admissible deviation of a row norm from one.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// A point on the product of `K` unit spheres in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOperator {
    rows: DMatrix<f64>,
}

impl AnalysisOperator {
    /// Wraps `rows` after checking that every row is finite and unit-norm.
    pub fn from_unit_rows(rows: DMatrix<f64>) -> Result<Self> {
        check_shape(&rows)?;
        for (k, row) in rows.row_iter().enumerate() {
            let norm = row.norm();
            if !norm.is_finite() {
                return Err(invalid(format!("row {k} has non-finite entries")));
            }
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(invalid(format!("row {k} has norm {norm}, expected 1")));
            }
        }
        Ok(Self { rows })
    }

    /// `K x d` operator with i.i.d. rows uniform on the unit sphere.
    pub fn random(k: usize, d: usize, rng: &mut RandomSource) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(invalid(format!("operator shape must be positive, got {k}x{d}")));
        }
        let mut rows = DMatrix::zeros(k, d);
        for i in 0..k {
            rows.set_row(i, &rng.unit_vector(d).transpose());
        }
        Ok(Self { rows })
    }

    /// Initialisation close to `target`: row `k` is `normalize(omega_k + r_k)`
    /// with `r_k` uniform on the sphere.
    pub fn closeby(target: &AnalysisOperator, rng: &mut RandomSource) -> Result<Self> {
        let noise = Self::random(target.num_rows(), target.dim(), rng)?;
        normalize_rows(&(target.rows() + noise.rows()))
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn into_rows(self) -> DMatrix<f64> {
        self.rows
    }

    /// Number of analysers `K`.
    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Analyser `k` as a column vector.
    pub fn row(&self, k: usize) -> DVector<f64> {
        self.rows.row(k).transpose()
    }

    /// Largest absolute inner product between two distinct rows.
    pub fn coherence(&self) -> f64 {
        let gram = &self.rows * self.rows.transpose();
        let mut mu: f64 = 0.0;
        for i in 0..gram.nrows() {
            for j in i + 1..gram.ncols() {
                mu = mu.max(gram[(i, j)].abs());
            }
        }
        mu
    }

    /// Largest deviation of a row norm from one.
    pub fn max_norm_deviation(&self) -> f64 {
        self.rows
            .row_iter()
            .map(|r| (r.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn from_rows_unchecked(rows: DMatrix<f64>) -> Self {
        debug_assert!(rows.row_iter().all(|r| (r.norm() - 1.0).abs() < 1e-9));
        Self { rows }
    }

    pub fn write_text<W: Write>(&self, out: W) -> Result<()> {
        textio::write_matrix(out, &self.rows)
    }

    /// Reads the text format. Rows off unit norm by more than
    /// [`UNIT_NORM_TOL`] but within `1e-9` are rescaled; the rest are kept
    /// bit for bit and anything further off is rejected.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut rows = textio::read_matrix(input)?;
        check_shape(&rows)?;
        for k in 0..rows.nrows() {
            let norm = rows.row(k).norm();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
                return Err(AolError::Parse(format!(
                    "row {k} of operator file has norm {norm}"
                )));
            }
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                rows.row_mut(k).unscale_mut(norm);
            }
        }
        Ok(Self { rows })
    }
}

fn check_shape(rows: &DMatrix<f64>) -> Result<()> {
    if rows.nrows() == 0 || rows.ncols() == 0 {
        return Err(invalid(format!(
            "operator shape must be positive, got {}x{}",
            rows.nrows(),
            rows.ncols()
        )));
    }
    Ok(())
}

/// Scales every row of `m` to unit Euclidean norm.
///
/// Fails with [`AolError::ZeroRow`] on the first row whose norm is below
/// [`ZERO_ROW_NORM`].
pub fn normalize_rows(m: &DMatrix<f64>) -> Result<AnalysisOperator> {
    check_shape(m)?;
    let mut rows = m.clone();
    for k in 0..rows.nrows() {
        let norm = rows.row(k).norm();
        if !norm.is_finite() {
            return Err(invalid(format!("row {k} has non-finite entries")));
        }
        if norm < ZERO_ROW_NORM {
            return Err(AolError::ZeroRow(k));
        }
        rows.row_mut(k).unscale_mut(norm);
    }
    Ok(AnalysisOperator { rows })
}

/// Normalises a single vector, `None` if it is numerically zero.
pub(crate) fn normalized(v: &DVector<f64>) -> Option<DVector<f64>> {
    let norm = v.norm();
    (norm >= ZERO_ROW_NORM && norm.is_finite()).then(|| v / norm)
}
