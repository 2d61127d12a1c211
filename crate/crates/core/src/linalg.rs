//! Dense numeric kernels: double-centering, top-k symmetric eigenpairs,
//! projector-based column space distance and the spectral norm.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Top-k eigenpairs of a symmetric matrix, eigenvalues in descending order.
///
/// Eigenvector signs follow a fixed convention: each column is flipped so that
/// its largest-absolute-value entry is positive, ties broken by the lowest
/// index. Column spaces are only identified up to rotation, so the convention
/// exists purely to make repeated runs comparable.
#[derive(Debug, Clone)]
pub struct EigenTopK {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// `n x k` matrix whose columns are the matching eigenvectors.
    pub vectors: DMatrix<f64>,
}

/// Removes row means, column means and adds back the grand mean, entrywise.
///
/// Equivalent to the two-sided projection `M_p Y M_q` with
/// `M_m = I - 11'/m`, without ever materializing the projectors.
pub fn double_center(y: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = y.shape();
    let mut row_means = vec![0.0; p];
    let mut col_means = vec![0.0; q];
    let mut grand = 0.0;
    for j in 0..q {
        for i in 0..p {
            let v = y[(i, j)];
            row_means[i] += v;
            col_means[j] += v;
            grand += v;
        }
    }
    for m in row_means.iter_mut() {
        *m /= q as f64;
    }
    for m in col_means.iter_mut() {
        *m /= p as f64;
    }
    grand /= (p * q) as f64;
    DMatrix::from_fn(p, q, |i, j| y[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Largest `k` eigenpairs of a symmetric matrix, descending.
///
/// The full spectrum is computed and truncated; the dimensions in play here
/// are at most a few hundred, where the dense solver is both fast and robust.
pub fn sym_eig_topk(s: &DMatrix<f64>, k: usize) -> Result<EigenTopK> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {} x {}",
            s.nrows(),
            s.ncols()
        )));
    }
    check_symmetric(s)?;
    if k == 0 || k > n {
        return Err(Error::RankOutOfRange(format!("k = {k} not in [1, {n}]")));
    }

    let eig = s.clone().symmetric_eigen();
    // nalgebra does not order the spectrum; sort descending ourselves.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let values: Vec<f64> = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_signs(&mut vectors);
    Ok(EigenTopK { values, vectors })
}

/// Spectral-norm distance between the column spaces of `q1` and `q2`.
///
/// Computes `|| P1 - P2 ||` where `P = Q(Q'Q)^{-1}Q'`. Zero iff the spans
/// coincide; ranges over `[0, 1]` for equal ranks and `[0, sqrt(2)]` in
/// general. Symmetric in its arguments.
pub fn space_distance(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> Result<f64> {
    if q1.nrows() != q2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "projectors act on different spaces: {} vs {} rows",
            q1.nrows(),
            q2.nrows()
        )));
    }
    let diff = projector(q1)? - projector(q2)?;
    Ok(spectral_norm(&diff))
}

/// Orthogonal projector onto the column space of `q`.
pub fn projector(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = q.transpose() * q;
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min <= 1e-12 * max {
        return Err(Error::RankDeficient(format!(
            "column rank below {} (eigenvalue ratio {:e})",
            q.ncols(),
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    let solved = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("Gram matrix is not positive definite".into()))?
        .solve(&q.transpose());
    Ok(q * solved)
}

/// Spectral norm as the square root of the largest eigenvalue of `a'a`.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
        .max(0.0)
        .sqrt()
}

/// Flips each column so its largest-absolute-value entry is positive;
/// ties broken by the lowest index.
pub(crate) fn fix_signs(vectors: &mut DMatrix<f64>) {
    let (n, k) = vectors.shape();
    for j in 0..k {
        let mut best = 0;
        for i in 1..n {
            if vectors[(i, j)].abs() > vectors[(best, j)].abs() {
                best = i;
            }
        }
        if vectors[(best, j)] < 0.0 {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
}

fn check_symmetric(s: &DMatrix<f64>) -> Result<()> {
    let scale = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale.max(1.0);
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            if (s[(i, j)] - s[(j, i)]).abs() > tol {
                return Err(Error::NotSymmetric);
            }
        }
    }
    Ok(())
}
