//! Patch-wise analysis-sparsity denoising,
//! `min_z lambda ||Gamma z||_1 + fidelity(z, y)`, solved by ADMM with the
//! splitting `u = Gamma z` (and `v = z - y` for the unsquared fidelity).
//!
//! Many patches are solved together: every ADMM step is a pair of matrix
//! products over all still-active patches, and converged patches are
//! retired from the working set.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{invalid, mismatch, Result};
use crate::operator::AnalysisOperator;

use super::image::{GrayImage, DEFAULT_PEAK};
use super::patches::extract_patches;

/// Data term of the denoising objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fidelity {
    /// `1/2 ||z - y||_2^2`.
    Squared,
    /// `||z - y||_2`. The objective is then positively homogeneous, so each
    /// patch is solved at unit norm and rescaled.
    Unsquared,
}

impl Fidelity {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Squared => "squared",
            Self::Unsquared => "unsquared",
        }
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Fidelity {
    type Err = crate::error::AolError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "squared" => Ok(Self::Squared),
            "unsquared" => Ok(Self::Unsquared),
            other => Err(invalid(format!("unknown fidelity '{other}' (valid: squared, unsquared)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseConfig {
    pub lambda: f64,
    pub patch: usize,
    pub max_iter: usize,
    /// Primal and dual residuals must both drop below `tol * sqrt(d)`.
    pub tol: f64,
    /// ADMM penalty parameter.
    pub penalty: f64,
    pub fidelity: Fidelity,
    pub peak: f64,
    pub max_workers: usize,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            patch: 8,
            max_iter: 500,
            tol: 1e-6,
            penalty: 1.0,
            fidelity: Fidelity::Squared,
            peak: DEFAULT_PEAK,
            max_workers: 1,
        }
    }
}

impl DenoiseConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.patch == 0 {
            return Err(invalid("patch size must be positive"));
        }
        if !(self.penalty > 0.0 && self.tol >= 0.0 && self.peak > 0.0) {
            return Err(invalid("penalty and peak must be positive, tolerance nonnegative"));
        }
        Ok(())
    }
}

/// Result of denoising a single patch.
#[derive(Clone, Debug)]
pub struct PatchOutcome {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value every `TRACE_EVERY` iterations, starting at iteration 0.
    pub trace: Vec<f64>,
}

/// Result of denoising a set of patches.
#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub z: DMatrix<f64>,
    pub unconverged: usize,
    pub max_iterations: usize,
}

pub const TRACE_EVERY: usize = 10;

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Precomputed factors for one operator, penalty and fidelity.
#[derive(Clone, Debug)]
pub struct AnalysisDenoiser {
    gamma: DMatrix<f64>,
    cfg: DenoiseConfig,
    /// `(I + rho Gamma^T Gamma)^{-1}` or `(Gamma^T Gamma + I)^{-1}`.
    inverse: DMatrix<f64>,
    /// `rho M Gamma^T` (squared) or `M Gamma^T` (unsquared).
    lift: DMatrix<f64>,
    gamma_norm: f64,
}

impl AnalysisDenoiser {
    pub fn new(op: &AnalysisOperator, cfg: &DenoiseConfig) -> Result<Self> {
        cfg.validate()?;
        let gamma = op.rows().clone();
        let d = op.dim();
        let gram = gamma.transpose() * &gamma;
        let rho = cfg.penalty;
        let system = match cfg.fidelity {
            Fidelity::Squared => DMatrix::identity(d, d) + gram * rho,
            Fidelity::Unsquared => DMatrix::identity(d, d) + gram,
        };
        let inverse = Cholesky::new(system)
            .ok_or_else(|| invalid("denoising system is not positive definite"))?
            .inverse();
        let lift = match cfg.fidelity {
            Fidelity::Squared => &inverse * gamma.transpose() * rho,
            Fidelity::Unsquared => &inverse * gamma.transpose(),
        };
        let gamma_norm = gamma.clone().svd(false, false).singular_values.max();
        Ok(Self {
            gamma,
            cfg: cfg.clone(),
            inverse,
            lift,
            gamma_norm,
        })
    }

    pub fn config(&self) -> &DenoiseConfig {
        &self.cfg
    }

    /// Denoising objective of `z` for the noisy patch `y`.
    pub fn objective(&self, z: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let l1 = (&self.gamma * z).lp_norm(1);
        let r = (z - y).norm();
        match self.cfg.fidelity {
            Fidelity::Squared => self.cfg.lambda * l1 + 0.5 * r * r,
            Fidelity::Unsquared => self.cfg.lambda * l1 + r,
        }
    }

    pub fn denoise_patch(&self, y: &DVector<f64>) -> Result<PatchOutcome> {
        if y.len() != self.gamma.ncols() {
            return Err(mismatch(self.gamma.ncols(), y.len()));
        }
        let mut trace = Vec::new();
        let (z, iters) = self.solve(&DMatrix::from_column_slice(y.len(), 1, y.as_slice()), Some(&mut trace));
        Ok(PatchOutcome {
            z: z.column(0).into_owned(),
            iterations: iters[0],
            converged: iters[0] < self.cfg.max_iter || self.cfg.lambda == 0.0,
            trace,
        })
    }

    /// Denoises every column of `y`.
    pub fn denoise_batch(&self, y: &DMatrix<f64>) -> Result<BatchOutcome> {
        if y.nrows() != self.gamma.ncols() {
            return Err(mismatch(self.gamma.ncols(), y.nrows()));
        }
        let n = y.ncols();
        let workers = self.cfg.max_workers.clamp(1, n.max(1));
        let chunk = n.div_ceil(workers).max(1);
        let parts: Vec<(DMatrix<f64>, Vec<usize>)> = if workers == 1 {
            vec![self.solve(y, None)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..n)
                    .step_by(chunk)
                    .map(|start| {
                        let cols = chunk.min(n - start);
                        let block = y.columns(start, cols).into_owned();
                        s.spawn(move || self.solve(&block, None))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("denoising worker panicked")).collect()
            })
        };
        let mut z = DMatrix::zeros(y.nrows(), n);
        let mut start = 0;
        let mut unconverged = 0;
        let mut max_iterations = 0;
        for (block, iters) in parts {
            z.columns_mut(start, block.ncols()).copy_from(&block);
            start += block.ncols();
            for it in iters {
                max_iterations = max_iterations.max(it);
                if it >= self.cfg.max_iter && self.cfg.lambda > 0.0 {
                    unconverged += 1;
                }
            }
        }
        Ok(BatchOutcome {
            z,
            unconverged,
            max_iterations,
        })
    }

    /// Solves all columns; returns the solutions and per-column iteration
    /// counts (`max_iter` for columns that never met the tolerance).
    fn solve(&self, y: &DMatrix<f64>, trace: Option<&mut Vec<f64>>) -> (DMatrix<f64>, Vec<usize>) {
        let n = y.ncols();
        if self.cfg.lambda == 0.0 || n == 0 {
            return (y.clone(), vec![0; n]);
        }
        match self.cfg.fidelity {
            Fidelity::Squared => self.solve_squared(y, trace),
            Fidelity::Unsquared => {
                let norms: Vec<f64> = y.column_iter().map(|c| c.norm()).collect();
                let mut unit = y.clone();
                for (mut c, &s) in unit.column_iter_mut().zip(&norms) {
                    if s > 0.0 {
                        c /= s;
                    }
                }
                let scaled_trace = trace.map(|t| (t, norms[0]));
                let (mut z, iters) = match scaled_trace {
                    Some((t, s)) => {
                        let (z, iters) = self.solve_unsquared(&unit, Some(&mut *t));
                        t.iter_mut().for_each(|v| *v *= s);
                        (z, iters)
                    }
                    None => self.solve_unsquared(&unit, None),
                };
                for (mut c, &s) in z.column_iter_mut().zip(&norms) {
                    c *= s;
                }
                (z, iters)
            }
        }
    }

    fn solve_squared(&self, y: &DMatrix<f64>, mut trace: Option<&mut Vec<f64>>) -> (DMatrix<f64>, Vec<usize>) {
        let (d, n) = y.shape();
        let k = self.gamma.nrows();
        let rho = self.cfg.penalty;
        let thresh = self.cfg.lambda / rho;
        let limit = self.cfg.tol * (d as f64).sqrt();

        let mut out = y.clone();
        let mut iters = vec![self.cfg.max_iter; n];
        let mut active: Vec<usize> = (0..n).collect();
        let mut ya = y.clone();
        let mut base = &self.inverse * &ya;
        let mut z = ya.clone();
        let mut u = &self.gamma * &z;
        let mut w = DMatrix::zeros(k, n);
        let mut v = DMatrix::zeros(k, n);
        let mut gz = DMatrix::zeros(k, n);
        if let Some(t) = trace.as_deref_mut() {
            t.push(self.column_objective(&z, &ya, 0));
        }
        for it in 1..=self.cfg.max_iter {
            v.copy_from(&u);
            v -= &w;
            z.copy_from(&base);
            z.gemm(1.0, &self.lift, &v, 1.0);
            gz.gemm(1.0, &self.gamma, &z, 0.0);
            let mut done = Vec::new();
            for (j, mut col) in u.column_iter_mut().enumerate() {
                let mut primal = 0.0;
                let mut change = 0.0;
                for i in 0..k {
                    let x = gz[(i, j)] + w[(i, j)];
                    let new = soft_threshold(x, thresh);
                    change += (new - col[i]) * (new - col[i]);
                    col[i] = new;
                    let r = gz[(i, j)] - new;
                    w[(i, j)] += r;
                    primal += r * r;
                }
                let dual = rho * self.gamma_norm * change.sqrt();
                if primal.sqrt() <= limit && dual <= limit {
                    done.push(j);
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                if it % TRACE_EVERY == 0 {
                    t.push(self.column_objective(&z, &ya, 0));
                }
            }
            if !done.is_empty() {
                for &j in &done {
                    out.set_column(active[j], &z.column(j));
                    iters[active[j]] = it;
                }
                let keep: Vec<usize> = (0..active.len()).filter(|j| done.binary_search(j).is_err()).collect();
                if keep.is_empty() {
                    return (out, iters);
                }
                if trace.is_some() {
                    // Single-patch mode: nothing left to do.
                    return (out, iters);
                }
                active = keep.iter().map(|&j| active[j]).collect();
                ya = ya.select_columns(&keep);
                base = base.select_columns(&keep);
                z = z.select_columns(&keep);
                u = u.select_columns(&keep);
                w = w.select_columns(&keep);
                v = DMatrix::zeros(k, keep.len());
                gz = DMatrix::zeros(k, keep.len());
            }
        }
        for (j, &col) in active.iter().enumerate() {
            out.set_column(col, &z.column(j));
        }
        (out, iters)
    }

    fn solve_unsquared(&self, y: &DMatrix<f64>, mut trace: Option<&mut Vec<f64>>) -> (DMatrix<f64>, Vec<usize>) {
        let (d, n) = y.shape();
        let k = self.gamma.nrows();
        let rho = self.cfg.penalty;
        let thresh = self.cfg.lambda / rho;
        let radius = 1.0 / rho;
        let limit = self.cfg.tol * (d as f64).sqrt();

        let mut out = y.clone();
        let mut iters = vec![self.cfg.max_iter; n];
        let mut active: Vec<usize> = (0..n).collect();
        let mut ya = y.clone();
        let mut z = ya.clone();
        let mut u = &self.gamma * &z;
        let mut rv = DMatrix::zeros(d, n);
        let mut w1 = DMatrix::zeros(k, n);
        let mut w2 = DMatrix::zeros(d, n);
        let mut a = DMatrix::zeros(k, n);
        let mut b = DMatrix::zeros(d, n);
        let mut gz = DMatrix::zeros(k, n);
        if let Some(t) = trace.as_deref_mut() {
            t.push(self.column_objective(&z, &ya, 0));
        }
        for it in 1..=self.cfg.max_iter {
            a.copy_from(&u);
            a -= &w1;
            b.copy_from(&rv);
            b += &ya;
            b -= &w2;
            z.gemm(1.0, &self.lift, &a, 0.0);
            z.gemm(1.0, &self.inverse, &b, 1.0);
            gz.gemm(1.0, &self.gamma, &z, 0.0);
            let mut done = Vec::new();
            for j in 0..z.ncols() {
                let mut primal = 0.0;
                let mut du = 0.0;
                for i in 0..k {
                    let x = gz[(i, j)] + w1[(i, j)];
                    let new = soft_threshold(x, thresh);
                    du += (new - u[(i, j)]) * (new - u[(i, j)]);
                    u[(i, j)] = new;
                    let r = gz[(i, j)] - new;
                    w1[(i, j)] += r;
                    primal += r * r;
                }
                let mut xnorm = 0.0;
                for i in 0..d {
                    let x = z[(i, j)] - ya[(i, j)] + w2[(i, j)];
                    xnorm += x * x;
                }
                let xnorm = xnorm.sqrt();
                let shrink = if xnorm > radius { 1.0 - radius / xnorm } else { 0.0 };
                let mut dv = 0.0;
                for i in 0..d {
                    let x = z[(i, j)] - ya[(i, j)] + w2[(i, j)];
                    let new = shrink * x;
                    dv += (new - rv[(i, j)]) * (new - rv[(i, j)]);
                    rv[(i, j)] = new;
                    let r = z[(i, j)] - ya[(i, j)] - new;
                    w2[(i, j)] += r;
                    primal += r * r;
                }
                let dual = rho * (self.gamma_norm * du.sqrt() + dv.sqrt());
                if primal.sqrt() <= limit && dual <= limit {
                    done.push(j);
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                if it % TRACE_EVERY == 0 {
                    t.push(self.column_objective(&z, &ya, 0));
                }
            }
            if !done.is_empty() {
                for &j in &done {
                    out.set_column(active[j], &z.column(j));
                    iters[active[j]] = it;
                }
                let keep: Vec<usize> = (0..active.len()).filter(|j| done.binary_search(j).is_err()).collect();
                if keep.is_empty() || trace.is_some() {
                    return (out, iters);
                }
                active = keep.iter().map(|&j| active[j]).collect();
                ya = ya.select_columns(&keep);
                z = z.select_columns(&keep);
                u = u.select_columns(&keep);
                rv = rv.select_columns(&keep);
                w1 = w1.select_columns(&keep);
                w2 = w2.select_columns(&keep);
                a = DMatrix::zeros(k, keep.len());
                b = DMatrix::zeros(d, keep.len());
                gz = DMatrix::zeros(k, keep.len());
            }
        }
        for (j, &col) in active.iter().enumerate() {
            out.set_column(col, &z.column(j));
        }
        (out, iters)
    }

    fn column_objective(&self, z: &DMatrix<f64>, y: &DMatrix<f64>, j: usize) -> f64 {
        self.objective(&z.column(j).into_owned(), &y.column(j).into_owned())
    }
}

/// Denoises one patch; see [`AnalysisDenoiser`].
pub fn denoise_patch(y: &DVector<f64>, op: &AnalysisOperator, cfg: &DenoiseConfig) -> Result<PatchOutcome> {
    AnalysisDenoiser::new(op, cfg)?.denoise_patch(y)
}

#[derive(Clone, Debug)]
pub struct DenoiseReport {
    pub image: GrayImage,
    pub patches: usize,
    pub unconverged: usize,
}

/// Extracts all patches, denoises each and averages them back.
pub fn denoise_image(img: &GrayImage, op: &AnalysisOperator, cfg: &DenoiseConfig) -> Result<DenoiseReport> {
    if op.dim() != cfg.patch * cfg.patch {
        return Err(mismatch(
            format!("operator with {} columns", cfg.patch * cfg.patch),
            op.dim(),
        ));
    }
    let set = extract_patches(img, cfg.patch)?;
    if cfg.lambda == 0.0 {
        return Ok(DenoiseReport {
            image: img.clone(),
            patches: set.batch.len(),
            unconverged: 0,
        });
    }
    let outcome = AnalysisDenoiser::new(op, cfg)?.denoise_batch(set.batch.matrix())?;
    Ok(DenoiseReport {
        image: set.reassemble(&outcome.z)?,
        patches: set.batch.len(),
        unconverged: outcome.unconverged,
    })
}
