//! Residual-based test of whether a plain FM is sufficient for a series, or
//! whether separate main effects are needed.
//!
//! Both models are fitted; per-time maxima of row/column mean squared
//! residuals from the MEFM fit (`x`) calibrate empirical quantile thresholds
//! against which the FM residual statistics (`y`) are compared. Under the
//! null that FM suffices, the rejection proportions sit near `1 - theta`.

use nalgebra::DMatrix;

use crate::fit::{fit_fm, fit_mefm};
use crate::series::MatrixSeries;
use crate::{Error, Result};

/// Per-time statistics, thresholds and rejection proportions of the test.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub theta: f64,
    /// Per-t max over rows of the MEFM residual mean square.
    pub x_alpha: Vec<f64>,
    /// Per-t max over rows of the FM residual mean square.
    pub y_alpha: Vec<f64>,
    /// Per-t max over columns of the MEFM residual mean square.
    pub x_beta: Vec<f64>,
    /// Per-t max over columns of the FM residual mean square.
    pub y_beta: Vec<f64>,
    /// `theta`-quantile of the `x_alpha` sample.
    pub q_x_alpha: f64,
    /// `theta`-quantile of the `x_beta` sample.
    pub q_x_beta: f64,
    /// Fraction of `t` with `y_alpha >= q_x_alpha`.
    pub reject_alpha: f64,
    /// Fraction of `t` with `y_beta >= q_x_beta`.
    pub reject_beta: f64,
    /// MEFM core ranks used.
    pub k_row: usize,
    pub k_col: usize,
    /// FM factor counts used.
    pub l_row: usize,
    pub l_col: usize,
}

/// Per-time maxima of the row/column mean squared residuals:
/// `(max_i (E_t E_t')_{ii}/q, max_j (E_t' E_t)_{jj}/p)` for each `t`.
pub fn residual_max_stats(residuals: &[DMatrix<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut row_stats = Vec::with_capacity(residuals.len());
    let mut col_stats = Vec::with_capacity(residuals.len());
    for e in residuals {
        let (p, q) = e.shape();
        let max_row = (0..p)
            .map(|i| e.row(i).iter().map(|v| v * v).sum::<f64>() / q as f64)
            .fold(0.0_f64, f64::max);
        let max_col = (0..q)
            .map(|j| e.column(j).iter().map(|v| v * v).sum::<f64>() / p as f64)
            .fold(0.0_f64, f64::max);
        row_stats.push(max_row);
        col_stats.push(max_col);
    }
    (row_stats, col_stats)
}

/// Generalized-inverse empirical quantile: the smallest sample value `c` with
/// `#\{x <= c\} / n >= theta`. No interpolation.
pub fn empirical_quantile(samples: &[f64], theta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0 < theta && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta = {theta} not in (0, 1)"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    for (m, value) in sorted.iter().enumerate() {
        if (m + 1) as f64 / n >= theta {
            return Ok(*value);
        }
    }
    Ok(*sorted.last().unwrap())
}

/// Runs the FM-sufficiency test.
///
/// Core ranks are estimated by the eigenvalue-ratio selector unless supplied;
/// the FM uses `(k_row + 1, k_col + 1)` factors unless `fm_ranks` overrides
/// that. One MEFM fit and one FM fit serve all time points.
pub fn run_fm_vs_mefm_test(
    y: &MatrixSeries,
    theta: f64,
    ranks: Option<(usize, usize)>,
    fm_ranks: Option<(usize, usize)>,
) -> Result<TestResult> {
    if !(0.0 < theta && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta = {theta} not in (0, 1)"
        )));
    }
    // the fit estimates ranks itself when none are given, sharing one
    // scatter pass
    let mefm = fit_mefm(y, ranks.map(|r| r.0), ranks.map(|r| r.1))?;
    let (k_row, k_col) = (mefm.k_row, mefm.k_col);
    let (l_row, l_col) = fm_ranks.unwrap_or((k_row + 1, k_col + 1));
    let fm = fit_fm(y, l_row, l_col)?;

    let (x_alpha, x_beta) = residual_max_stats(&mefm.residuals);
    let (y_alpha, y_beta) = residual_max_stats(&fm.residuals);

    let q_x_alpha = empirical_quantile(&x_alpha, theta)?;
    let q_x_beta = empirical_quantile(&x_beta, theta)?;

    let t_len = y.len() as f64;
    let reject_alpha = y_alpha.iter().filter(|v| **v >= q_x_alpha).count() as f64 / t_len;
    let reject_beta = y_beta.iter().filter(|v| **v >= q_x_beta).count() as f64 / t_len;

    Ok(TestResult {
        theta,
        x_alpha,
        y_alpha,
        x_beta,
        y_beta,
        q_x_alpha,
        q_x_beta,
        reject_alpha,
        reject_beta,
        k_row,
        k_col,
        l_row,
        l_col,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (sa.len(), sb.len());
    let mut i = 0;
    let mut j = 0;
    let mut stat = 0.0_f64;
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        stat = stat.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    Ok(stat)
}

/// One-sample Kolmogorov-Smirnov statistic against the standard normal.
pub fn ks_standard_normal(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = sorted.len() as f64;
    let mut stat = 0.0_f64;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = standard_normal_cdf(*x);
        stat = stat.max((cdf - i as f64 / n).abs());
        stat = stat.max(((i + 1) as f64 / n - cdf).abs());
    }
    Ok(stat)
}

/// Standard normal CDF via an `erfc` rational approximation (absolute error
/// below 1.2e-7, far inside the resolution any KS comparison here needs).
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}
