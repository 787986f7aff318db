//! Training signals and the synthetic cosparse signal model.
//!
//! A [`SignalBatch`] stores signals as the columns of a `d x N` matrix.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{invalid, mismatch, AolError, Result};
use crate::operator::AnalysisOperator;
use crate::rng::RandomSource;
use crate::textio;

/// Relative cutoff below which a pivot of the rowspace factorisation is
/// treated as zero (rank-deficient cosupport).
pub const RANK_CUTOFF: f64 = 1e-12;

/// Pre-normalisation norm below which a generated signal is redrawn.
pub const DEGENERATE_SIGNAL_NORM: f64 = 1e-14;

/// Number of draws before [`generate_signals`] gives up on one signal.
pub const MAX_SIGNAL_ATTEMPTS: usize = 100;

/// `d x N` matrix of signals, one per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalBatch {
    signals: DMatrix<f64>,
}

impl SignalBatch {
    pub fn new(signals: DMatrix<f64>) -> Result<Self> {
        if signals.ncols() == 0 || signals.nrows() == 0 {
            return Err(invalid("a signal batch needs at least one signal of positive dimension"));
        }
        if signals.iter().any(|x| !x.is_finite()) {
            return Err(invalid("signal batch contains non-finite entries"));
        }
        Ok(Self { signals })
    }

    pub fn from_columns(columns: &[DVector<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(invalid("a signal batch needs at least one signal"));
        }
        Self::new(DMatrix::from_columns(columns))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.signals
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.signals
    }

    /// Signal dimension `d`.
    pub fn dim(&self) -> usize {
        self.signals.nrows()
    }

    /// Number of signals `N`.
    pub fn len(&self) -> usize {
        self.signals.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.ncols() == 0
    }

    pub fn signal(&self, n: usize) -> DVectorView<'_, f64> {
        self.signals.column(n)
    }

    /// Batch made of the columns listed in `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("cannot select an empty sub-batch"));
        }
        Ok(Self {
            signals: self.signals.select_columns(indices),
        })
    }

    pub fn write_text<W: Write>(&self, out: W) -> Result<()> {
        textio::write_matrix(out, &self.signals)
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        Self::new(textio::read_matrix(input)?)
    }
}

/// Parameters of the cosparse signal model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalModelConfig {
    /// Number of analysers each signal is orthogonal to (`l`).
    pub cosparsity: usize,
    /// Standard deviation of the additive Gaussian noise (`rho`).
    pub noise: f64,
}

impl SignalModelConfig {
    pub fn noiseless(cosparsity: usize) -> Self {
        Self { cosparsity, noise: 0.0 }
    }

    /// The customary noise level `0.2 / sqrt(d)`.
    pub fn noisy(cosparsity: usize, dim: usize) -> Self {
        Self {
            cosparsity,
            noise: 0.2 / (dim as f64).sqrt(),
        }
    }

    pub fn validate(&self, op: &AnalysisOperator) -> Result<()> {
        let max = op.num_rows().min(op.dim());
        if self.cosparsity > max {
            return Err(invalid(format!(
                "cosparsity {} exceeds min(K, d) = {max}",
                self.cosparsity
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid(format!("noise level must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Orthogonal basis of the span of a set of analysers, held as Householder
/// reflectors from a column-pivoted QR factorisation of `Omega_L^T`.
#[derive(Clone, Debug)]
pub struct RowspaceBasis {
    dim: usize,
    /// Reflector `j` acts on coordinates `j..dim`; stored with stride `dim`.
    reflectors: Vec<f64>,
    betas: Vec<f64>,
}

impl RowspaceBasis {
    pub fn new(op: &AnalysisOperator, cosupport: &[usize]) -> Result<Self> {
        let d = op.dim();
        let mut columns = Vec::with_capacity(d * cosupport.len());
        for &k in cosupport {
            if k >= op.num_rows() {
                return Err(invalid(format!(
                    "cosupport index {k} out of range for {} rows",
                    op.num_rows()
                )));
            }
            columns.extend(op.rows().row(k).iter());
        }
        Ok(Self::factor(d, columns))
    }

    /// Factorises the `dim x (columns.len() / dim)` column-major matrix.
    fn factor(dim: usize, mut a: Vec<f64>) -> Self {
        let m = a.len() / dim;
        let steps = dim.min(m);
        let mut reflectors = Vec::with_capacity(steps * dim);
        let mut betas = Vec::with_capacity(steps);
        let mut first_pivot = 0.0;

        for j in 0..steps {
            let tail_norm = |a: &[f64], c: usize| {
                a[c * dim + j..(c + 1) * dim]
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt()
            };
            let (pivot, norm) = (j..m)
                .map(|c| (c, tail_norm(&a, c)))
                .fold((j, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if j == 0 {
                first_pivot = norm;
            }
            if norm == 0.0 || norm <= RANK_CUTOFF * first_pivot {
                break;
            }
            if pivot != j {
                for i in 0..dim {
                    a.swap(j * dim + i, pivot * dim + i);
                }
            }

            let x0 = a[j * dim + j];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let mut v = vec![0.0; dim];
            v[j..].copy_from_slice(&a[j * dim + j..(j + 1) * dim]);
            v[j] -= alpha;
            let vv: f64 = v[j..].iter().map(|x| x * x).sum();
            let beta = 2.0 / vv;

            for c in j + 1..m {
                let col = &mut a[c * dim..(c + 1) * dim];
                let t = beta * (j..dim).map(|i| v[i] * col[i]).sum::<f64>();
                for i in j..dim {
                    col[i] -= t * v[i];
                }
            }
            reflectors.extend_from_slice(&v);
            betas.push(beta);
        }
        Self {
            dim,
            reflectors,
            betas,
        }
    }

    /// Numerical rank of the analyser set.
    pub fn rank(&self) -> usize {
        self.betas.len()
    }

    fn reflect(&self, j: usize, z: &mut [f64]) {
        let v = &self.reflectors[j * self.dim..(j + 1) * self.dim];
        let t = self.betas[j] * (j..self.dim).map(|i| v[i] * z[i]).sum::<f64>();
        for i in j..self.dim {
            z[i] -= t * v[i];
        }
    }

    /// Replaces `z` by its component orthogonal to the analysers.
    pub fn project_out(&self, z: &mut [f64]) {
        let r = self.rank();
        for j in 0..r {
            self.reflect(j, z);
        }
        z[..r].iter_mut().for_each(|x| *x = 0.0);
        for j in (0..r).rev() {
            self.reflect(j, z);
        }
    }

    /// The dense `d x d` projector `1 - Omega_L^+ Omega_L`.
    pub fn projector(&self) -> DMatrix<f64> {
        let mut p = DMatrix::identity(self.dim, self.dim);
        for mut col in p.column_iter_mut() {
            self.project_out(col.as_mut_slice());
        }
        // the two triangles agree up to rounding; pin exact symmetry
        (&p + p.transpose()) * 0.5
    }
}

/// Orthogonal projector onto the signals that are cosparse on `cosupport`,
/// i.e. `1 - Omega_L^+ Omega_L`.
pub fn cosparse_projector(op: &AnalysisOperator, cosupport: &[usize]) -> Result<DMatrix<f64>> {
    Ok(RowspaceBasis::new(op, cosupport)?.projector())
}

/// Signals drawn from the cosparse model together with their true cosupports.
#[derive(Clone, Debug)]
pub struct GeneratedSignals {
    pub batch: SignalBatch,
    /// Sorted cosupport `Lambda_n` of every signal.
    pub cosupports: Vec<Vec<usize>>,
}

/// Draws `n` unit-norm signals
/// `y = ((1 - Omega_L^+ Omega_L) z + r) / ||...||` with `z ~ N(0, I)`,
/// `r ~ N(0, rho^2 I)` and `L` a uniform `l`-subset of the rows.
pub fn generate_signals(
    op: &AnalysisOperator,
    cfg: &SignalModelConfig,
    n: usize,
    rng: &mut RandomSource,
) -> Result<GeneratedSignals> {
    cfg.validate(op)?;
    if n == 0 {
        return Err(invalid("number of signals must be positive"));
    }
    let d = op.dim();
    let mut signals = DMatrix::zeros(d, n);
    let mut cosupports = Vec::with_capacity(n);
    let mut y = vec![0.0; d];

    for col in 0..n {
        let mut attempt = 0;
        loop {
            if attempt == MAX_SIGNAL_ATTEMPTS {
                return Err(AolError::DegenerateSignal { attempts: attempt });
            }
            attempt += 1;
            let cosupport = rng.subset(op.num_rows(), cfg.cosparsity);
            let basis = RowspaceBasis::new(op, &cosupport)?;
            for yi in y.iter_mut() {
                *yi = rng.gaussian();
            }
            basis.project_out(&mut y);
            if cfg.noise > 0.0 {
                for yi in y.iter_mut() {
                    *yi += cfg.noise * rng.gaussian();
                }
            }
            let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < DEGENERATE_SIGNAL_NORM {
                continue;
            }
            for (dst, src) in signals.column_mut(col).iter_mut().zip(&y) {
                *dst = src / norm;
            }
            cosupports.push(cosupport);
            break;
        }
    }
    Ok(GeneratedSignals {
        batch: SignalBatch { signals },
        cosupports,
    })
}

/// Checks that `batch` has dimension `d`.
pub(crate) fn check_dim(batch: &SignalBatch, d: usize) -> Result<()> {
    if batch.dim() != d {
        return Err(mismatch(format!("signal dimension {d}"), batch.dim()));
    }
    Ok(())
}
