//! Variance estimation and standardized statistics for the fitted model.
//!
//! Covers the residual-based variance estimates for the grand mean and
//! effect estimators, the standardized z-statistics built from them, the
//! rotation matrices that link estimated loadings to simulation truth, and
//! HAC covariance estimators (Bartlett weights) for individual loading rows.

use nalgebra::{DMatrix, DVector};

use crate::fit::MEFMFit;
use crate::{Error, Result};

/// Which loading matrix a statistic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Row,
    Column,
}

/// Residual-based variance estimates at a single time point.
#[derive(Debug, Clone)]
pub struct GammaEstimates {
    /// Per-row mean squared residual, length `p`.
    pub gamma_alpha_sq: Vec<f64>,
    /// Per-column mean squared residual, length `q`.
    pub gamma_beta_sq: Vec<f64>,
    /// Grand average; equals the mean of either vector.
    pub gamma_mu_sq: f64,
    /// Time index the estimates were taken at.
    pub t_used: usize,
}

/// HAC covariance estimate for one loading row.
#[derive(Debug, Clone)]
pub struct HACCovariance {
    pub side: Side,
    /// Loading row index the estimate refers to.
    pub j: usize,
    pub bandwidth: usize,
    /// `k x k` symmetric matrix.
    pub matrix: DMatrix<f64>,
}

/// Rotation linking estimated loadings to the true ones; computable only when
/// the truth is known (simulation).
#[derive(Debug, Clone)]
pub struct RotationMatrix {
    pub side: Side,
    pub matrix: DMatrix<f64>,
}

/// Standardized statistics for the mean and effect estimators at one time
/// point.
#[derive(Debug, Clone)]
pub struct EffectZStats {
    pub mu: f64,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
}

/// Standardized statistic for one loading row.
#[derive(Debug, Clone)]
pub struct LoadingRowStat {
    pub z: DVector<f64>,
    /// Set when the HAC matrix needed eigenvalue flooring to invert; the
    /// statistic is then a pseudo-inverse version and should be read with
    /// care.
    pub floored: bool,
}

/// Default HAC bandwidth `floor((T p q)^{1/4} / 5)`.
pub fn default_bandwidth(t_len: usize, p: usize, q: usize) -> usize {
    ((t_len * p * q) as f64).powf(0.25) as usize / 5
}

/// Per-row/per-column mean squared residuals at time `t`, and their grand
/// average.
pub fn gamma_estimates(residuals: &[DMatrix<f64>], t: usize) -> Result<GammaEstimates> {
    let frame = residuals.get(t).ok_or_else(|| {
        Error::InvalidParameter(format!("t = {t} out of range [0, {})", residuals.len()))
    })?;
    let (p, q) = frame.shape();
    let gamma_alpha_sq: Vec<f64> = (0..p)
        .map(|i| frame.row(i).iter().map(|v| v * v).sum::<f64>() / q as f64)
        .collect();
    let gamma_beta_sq: Vec<f64> = (0..q)
        .map(|j| frame.column(j).iter().map(|v| v * v).sum::<f64>() / p as f64)
        .collect();
    let gamma_mu_sq = gamma_alpha_sq.iter().sum::<f64>() / p as f64;
    Ok(GammaEstimates {
        gamma_alpha_sq,
        gamma_beta_sq,
        gamma_mu_sq,
        t_used: t,
    })
}

/// Convenience variant averaging the per-`t` estimates over the whole sample.
///
/// The single-`t` form in [`gamma_estimates`] is the canonical definition;
/// this average is provided for exploratory use only and has no matching
/// distribution theory here.
pub fn gamma_estimates_time_avg(residuals: &[DMatrix<f64>]) -> Result<GammaEstimates> {
    if residuals.is_empty() {
        return Err(Error::EmptySample);
    }
    let (p, q) = residuals[0].shape();
    let mut acc_alpha = vec![0.0; p];
    let mut acc_beta = vec![0.0; q];
    let mut acc_mu = 0.0;
    for t in 0..residuals.len() {
        let g = gamma_estimates(residuals, t)?;
        for (acc, v) in acc_alpha.iter_mut().zip(&g.gamma_alpha_sq) {
            *acc += v;
        }
        for (acc, v) in acc_beta.iter_mut().zip(&g.gamma_beta_sq) {
            *acc += v;
        }
        acc_mu += g.gamma_mu_sq;
    }
    let n = residuals.len() as f64;
    Ok(GammaEstimates {
        gamma_alpha_sq: acc_alpha.into_iter().map(|v| v / n).collect(),
        gamma_beta_sq: acc_beta.into_iter().map(|v| v / n).collect(),
        gamma_mu_sq: acc_mu / n,
        t_used: 0,
    })
}

/// Standardized z-statistics for the mean and effects at time `t`.
///
/// `truth` supplies the reference values (simulation truth or hypothesized
/// nulls); `None` tests against zero effects.
pub fn standardized_effect_stats(
    fit: &MEFMFit,
    t: usize,
    truth: Option<&crate::series::MeanEffects>,
) -> Result<EffectZStats> {
    let gammas = gamma_estimates(&fit.residuals, t)?;
    let p = gammas.gamma_alpha_sq.len();
    let q = gammas.gamma_beta_sq.len();

    let (mu0, alpha0, beta0) = match truth {
        Some(eff) => (eff.mu[t], eff.alpha[t].clone(), eff.beta[t].clone()),
        None => (0.0, DVector::zeros(p), DVector::zeros(q)),
    };

    let tol = gamma_floor(fit, t);
    if gammas.gamma_mu_sq <= tol {
        return Err(Error::DegenerateGamma(0));
    }
    let mu = (p as f64 * q as f64).sqrt() * (fit.effects.mu[t] - mu0) / gammas.gamma_mu_sq.sqrt();

    let mut alpha = DVector::zeros(p);
    for i in 0..p {
        let g = gammas.gamma_alpha_sq[i];
        if g <= tol {
            return Err(Error::DegenerateGamma(i));
        }
        alpha[i] = (q as f64).sqrt() * (fit.effects.alpha[t][i] - alpha0[i]) / g.sqrt();
    }
    let mut beta = DVector::zeros(q);
    for j in 0..q {
        let g = gammas.gamma_beta_sq[j];
        if g <= tol {
            return Err(Error::DegenerateGamma(j));
        }
        beta[j] = (p as f64).sqrt() * (fit.effects.beta[t][j] - beta0[j]) / g.sqrt();
    }
    Ok(EffectZStats { mu, alpha, beta })
}

/// Standardized contrast `sqrt(scale) g'(theta_hat - theta) / sqrt(g' diag(gamma^2) g)`
/// over the selected effect entries, where `scale` is `q` for row effects and
/// `p` for column effects.
pub fn effect_contrast_z(
    fit: &MEFMFit,
    t: usize,
    side: Side,
    indices: &[usize],
    g: &[f64],
    truth: Option<&crate::series::MeanEffects>,
) -> Result<f64> {
    if indices.len() != g.len() || indices.is_empty() {
        return Err(Error::InvalidParameter(
            "contrast weights and indices must be non-empty and equal length".into(),
        ));
    }
    let gammas = gamma_estimates(&fit.residuals, t)?;
    let est: &[DVector<f64>] = match side {
        Side::Row => &fit.effects.alpha,
        Side::Column => &fit.effects.beta,
    };
    let tru: Option<&[DVector<f64>]> = truth.map(|e| match side {
        Side::Row => e.alpha.as_slice(),
        Side::Column => e.beta.as_slice(),
    });
    let (gamma_sq, scale) = match side {
        Side::Row => (&gammas.gamma_alpha_sq, gammas.gamma_beta_sq.len() as f64),
        Side::Column => (&gammas.gamma_beta_sq, gammas.gamma_alpha_sq.len() as f64),
    };
    let mut num = 0.0;
    let mut var = 0.0;
    for (&i, &w) in indices.iter().zip(g.iter()) {
        if i >= est[t].len() {
            return Err(Error::InvalidParameter(format!(
                "contrast index {i} out of range"
            )));
        }
        let theta0 = tru.map_or(0.0, |v| v[t][i]);
        num += w * (est[t][i] - theta0);
        var += w * w * gamma_sq[i];
    }
    if var <= gamma_floor(fit, t) {
        return Err(Error::DegenerateGamma(indices[0]));
    }
    Ok(scale.sqrt() * num / var.sqrt())
}

/// A variance estimate below this floor cannot standardize anything: it is
/// pure roundoff from a (numerically) exact fit. The floor is relative to the
/// squared magnitude of the fitted frames at `t`.
fn gamma_floor(fit: &MEFMFit, t: usize) -> f64 {
    let scale = fit.common[t].amax().max(fit.residuals[t].amax());
    (1e-12 * scale).powi(2)
}

/// Rotation matrices mapping true loadings into the estimated bases:
///
/// `H_r = T^{-1} D_r^{-1} Q_r_hat' Q_r sum_t (F_{Z,t} Q_c' Q_c F_{Z,t}')`,
/// `H_c = T^{-1} D_c^{-1} Q_c_hat' Q_c sum_t (F_{Z,t}' Q_r' Q_r F_{Z,t})`.
pub fn rotation_h(
    fit: &MEFMFit,
    truth_q_row: &DMatrix<f64>,
    truth_q_col: &DMatrix<f64>,
    truth_fz: &[DMatrix<f64>],
) -> Result<(RotationMatrix, RotationMatrix)> {
    let t_len = fit.factors.len();
    let (p, k_row) = fit.q_row.shape();
    let (q, k_col) = fit.q_col.shape();
    if truth_q_row.shape() != (p, k_row)
        || truth_q_col.shape() != (q, k_col)
        || truth_fz.len() != t_len
        || truth_fz.iter().any(|f| f.shape() != (k_row, k_col))
    {
        return Err(Error::DimensionMismatch(
            "truth loadings/factors do not match the fitted dimensions".into(),
        ));
    }

    let d_row_inv = diag_inverse(&fit.d_row)?;
    let d_col_inv = diag_inverse(&fit.d_col)?;

    let qc_gram = truth_q_col.transpose() * truth_q_col;
    let qr_gram = truth_q_row.transpose() * truth_q_row;
    let mut sum_row = DMatrix::<f64>::zeros(k_row, k_row);
    let mut sum_col = DMatrix::<f64>::zeros(k_col, k_col);
    for f in truth_fz {
        sum_row += f * &qc_gram * f.transpose();
        sum_col += f.transpose() * &qr_gram * f;
    }
    let h_row = &d_row_inv * (fit.q_row.transpose() * truth_q_row) * sum_row / t_len as f64;
    let h_col = &d_col_inv * (fit.q_col.transpose() * truth_q_col) * sum_col / t_len as f64;
    Ok((
        RotationMatrix {
            side: Side::Row,
            matrix: h_row,
        },
        RotationMatrix {
            side: Side::Column,
            matrix: h_col,
        },
    ))
}

/// HAC covariance estimator for one loading row with Bartlett lag weights:
///
/// `Sigma_hat = D_0 + sum_{v=1}^{eta} (1 - v/(1+eta)) (D_v + D_v')`,
///
/// where `D_v` correlates, at lag `v`, the weighted residual-common cross
/// products attached to row (or column) `j`. `bandwidth = None` selects the
/// default `floor((Tpq)^{1/4}/5)`.
pub fn hac_loading(
    fit: &MEFMFit,
    side: Side,
    j: usize,
    bandwidth: Option<usize>,
) -> Result<HACCovariance> {
    let t_len = fit.common.len();
    let (p, q) = fit.common[0].shape();
    let eta = bandwidth.unwrap_or_else(|| default_bandwidth(t_len, p, q));
    if eta >= t_len {
        return Err(Error::InvalidParameter(format!(
            "bandwidth {eta} must be below the series length {t_len}"
        )));
    }
    let dim = match side {
        Side::Row => p,
        Side::Column => q,
    };
    if j >= dim {
        return Err(Error::InvalidParameter(format!(
            "index {j} out of range [0, {dim})"
        )));
    }

    // a_t = [T^{-1} D^{-1} Q_hat' (sum_s C_s C_s')] (C_t E_t')_{.j}; the
    // bracket collapses the literal per-row sums into one k x p (or k x q)
    // weight matrix.
    let (d_inv, q_hat) = match side {
        Side::Row => (diag_inverse(&fit.d_row)?, &fit.q_row),
        Side::Column => (diag_inverse(&fit.d_col)?, &fit.q_col),
    };
    let n = q_hat.nrows();
    let mut scatter = DMatrix::<f64>::zeros(n, n);
    for c in &fit.common {
        match side {
            Side::Row => scatter.gemm(1.0, c, &c.transpose(), 1.0),
            Side::Column => scatter.gemm(1.0, &c.transpose(), c, 1.0),
        }
    }
    let weights = &d_inv * q_hat.transpose() * scatter / t_len as f64;

    let a: Vec<DVector<f64>> = (0..t_len)
        .map(|t| {
            let g = match side {
                Side::Row => &fit.common[t] * fit.residuals[t].row(j).transpose(),
                Side::Column => fit.common[t].transpose() * fit.residuals[t].column(j),
            };
            &weights * g
        })
        .collect();

    let k = q_hat.ncols();
    let lag_product = |nu: usize| -> DMatrix<f64> {
        let mut d = DMatrix::<f64>::zeros(k, k);
        for t in nu..t_len {
            d.ger(1.0, &a[t], &a[t - nu], 1.0);
        }
        d
    };

    let mut matrix = lag_product(0);
    for nu in 1..=eta {
        let w = 1.0 - nu as f64 / (1.0 + eta as f64);
        let d = lag_product(nu);
        matrix += w * (&d + d.transpose());
    }
    Ok(HACCovariance {
        side,
        j,
        bandwidth: eta,
        matrix,
    })
}

/// Standardized loading-row statistic
/// `T * Sigma_hat^{-1/2} D_hat (Q_hat_{j.} - H Q_{j.})`.
///
/// A singular HAC matrix is handled by flooring its eigenvalues at
/// `1e-12 * trace` before the inverse square root; the `floored` flag
/// reports when that happened.
pub fn loading_row_z(
    fit: &MEFMFit,
    side: Side,
    j: usize,
    hac: &HACCovariance,
    h: &RotationMatrix,
    truth_q: &DMatrix<f64>,
) -> Result<LoadingRowStat> {
    let (q_hat, d) = match side {
        Side::Row => (&fit.q_row, &fit.d_row),
        Side::Column => (&fit.q_col, &fit.d_col),
    };
    let k = q_hat.ncols();
    if truth_q.nrows() != q_hat.nrows() || truth_q.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "truth loadings are {} x {}, expected {} x {}",
            truth_q.nrows(),
            truth_q.ncols(),
            q_hat.nrows(),
            k
        )));
    }
    if hac.matrix.shape() != (k, k) || h.matrix.shape() != (k, k) {
        return Err(Error::DimensionMismatch(
            "HAC or rotation matrix has wrong size".into(),
        ));
    }
    if j >= q_hat.nrows() {
        return Err(Error::InvalidParameter(format!(
            "row index {j} out of range"
        )));
    }

    let (inv_sqrt, floored) = inverse_sqrt(&hac.matrix)?;
    let diff = q_hat.row(j).transpose() - &h.matrix * truth_q.row(j).transpose();
    let d_mat = DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
    let z = fit.common.len() as f64 * inv_sqrt * d_mat * diff;
    Ok(LoadingRowStat { z, floored })
}

/// Symmetric inverse square root with eigenvalue flooring at `1e-12 * trace`.
fn inverse_sqrt(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let eig = m.clone().symmetric_eigen();
    let trace = m.trace();
    if !trace.is_finite() || trace <= 0.0 {
        return Err(Error::Singular("matrix has non-positive trace".into()));
    }
    let floor = 1e-12 * trace;
    let mut floored = false;
    let mut scaled = eig.eigenvectors.clone();
    for i in 0..m.nrows() {
        let lambda = eig.eigenvalues[i];
        let use_lambda = if lambda < floor {
            floored = true;
            floor
        } else {
            lambda
        };
        let s = use_lambda.sqrt().recip();
        for r in 0..m.nrows() {
            scaled[(r, i)] *= s;
        }
    }
    Ok((&scaled * eig.eigenvectors.transpose(), floored))
}

fn diag_inverse(d: &[f64]) -> Result<DMatrix<f64>> {
    let max = d.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return Err(Error::Singular("eigenvalue matrix is zero".into()));
    }
    let mut out = DMatrix::zeros(d.len(), d.len());
    for (i, &v) in d.iter().enumerate() {
        if v <= 1e-12 * max {
            return Err(Error::Singular(format!(
                "eigenvalue {i} is numerically zero"
            )));
        }
        out[(i, i)] = 1.0 / v;
    }
    Ok(out)
}
