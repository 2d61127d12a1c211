//! Core data carriers: matrix-valued time series and additive mean effects.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A length-`T` sequence of `p x q` observation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    rows: usize,
    cols: usize,
    frames: Vec<DMatrix<f64>>,
}

impl MatrixSeries {
    /// Builds a series from frames, checking that every frame shares the same
    /// shape and that all entries are finite.
    pub fn new(frames: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| {
            Error::InvalidParameter("series must contain at least one frame".into())
        })?;
        let (rows, cols) = first.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("frames must be non-empty".into()));
        }
        for (t, frame) in frames.iter().enumerate() {
            if frame.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "frame {t} has shape {:?}, expected ({rows}, {cols})",
                    frame.shape()
                )));
            }
            if frame.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "frame {t} contains a non-finite entry"
                )));
            }
        }
        Ok(Self { rows, cols, frames })
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Row dimension `p`.
    pub fn nrows(&self) -> usize {
        self.rows
    }

    /// Column dimension `q`.
    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn frame(&self, t: usize) -> &DMatrix<f64> {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[DMatrix<f64>] {
        &self.frames
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DMatrix<f64>> {
        self.frames.iter()
    }
}

/// Time-varying grand mean and row/column main effects.
///
/// Estimated instances satisfy the zero-sum identities `1'alpha_t = 0` and
/// `1'beta_t = 0` for every `t` (up to floating-point roundoff).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEffects {
    pub mu: Vec<f64>,
    pub alpha: Vec<DVector<f64>>,
    pub beta: Vec<DVector<f64>>,
}

impl MeanEffects {
    /// All-zero effects for a series of `t_len` frames of size `p x q`.
    pub fn zeros(t_len: usize, p: usize, q: usize) -> Self {
        Self {
            mu: vec![0.0; t_len],
            alpha: vec![DVector::zeros(p); t_len],
            beta: vec![DVector::zeros(q); t_len],
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// The additive part `mu_t 11' + alpha_t 1' + 1 beta_t'` at time `t`.
    pub fn additive_frame(&self, t: usize) -> DMatrix<f64> {
        let p = self.alpha[t].len();
        let q = self.beta[t].len();
        DMatrix::from_fn(p, q, |i, j| self.mu[t] + self.alpha[t][i] + self.beta[t][j])
    }
}
