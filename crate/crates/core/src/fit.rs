//! MEFM and FM estimation pipelines.
//!
//! The MEFM fit removes the time-varying grand mean and main effects by
//! double-centering each frame, estimates the row/column loading spaces from
//! the eigenvectors of the averaged scatter matrices of the centered frames,
//! and projects to obtain factors, common components and residuals. The FM
//! fit runs the same spectral step on the raw frames with no centering.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{double_center, sym_eig_topk};
use crate::par;
use crate::rank;
use crate::series::{MatrixSeries, MeanEffects};
use crate::{Error, Result};

/// Frames per partial sum in the scatter accumulation. Fixed so that results
/// do not depend on the thread count.
const SCATTER_CHUNK: usize = 8;

/// Entry count above which the scatter accumulation switches to compensated
/// summation.
const KAHAN_THRESHOLD: usize = 10_000_000;

/// Factor frames, common components and residual frames of a projected
/// series.
pub type Decomposition = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

/// Estimated loading spaces and the matching scatter eigenvalues.
#[derive(Debug, Clone)]
pub struct Loadings {
    /// `p x k_row`, orthonormal columns.
    pub q_row: DMatrix<f64>,
    /// Row-side eigenvalues, descending.
    pub d_row: Vec<f64>,
    /// `q x k_col`, orthonormal columns.
    pub q_col: DMatrix<f64>,
    /// Column-side eigenvalues, descending.
    pub d_col: Vec<f64>,
    /// Set when the centered series carries (numerically) no signal at all;
    /// the loading spaces are then arbitrary and downstream consumers should
    /// check this flag rather than rely on them.
    pub degenerate: bool,
}

/// Full fitted MEFM decomposition.
#[derive(Debug, Clone)]
pub struct MEFMFit {
    pub effects: MeanEffects,
    /// `p x k_row` orthonormal row loadings.
    pub q_row: DMatrix<f64>,
    /// `q x k_col` orthonormal column loadings.
    pub q_col: DMatrix<f64>,
    /// Row-side scatter eigenvalues, descending.
    pub d_row: Vec<f64>,
    /// Column-side scatter eigenvalues, descending.
    pub d_col: Vec<f64>,
    /// Estimated factor frames, `k_row x k_col`, in the estimator's own basis
    /// (the factor series is only identified up to invertible rotations on
    /// both sides; compare against truth through the common component or the
    /// loading spaces, not entrywise).
    pub factors: Vec<DMatrix<f64>>,
    /// Estimated common components, `p x q`.
    pub common: Vec<DMatrix<f64>>,
    /// Residual frames, `p x q`.
    pub residuals: Vec<DMatrix<f64>>,
    pub k_row: usize,
    pub k_col: usize,
    /// See [`Loadings::degenerate`].
    pub degenerate: bool,
}

/// Plain FM fit: loading spaces from the raw (uncentered) scatter matrices.
#[derive(Debug, Clone)]
pub struct FMFit {
    /// `p x l_row`, orthonormal columns.
    pub a_row: DMatrix<f64>,
    /// `q x l_col`, orthonormal columns.
    pub a_col: DMatrix<f64>,
    pub common: Vec<DMatrix<f64>>,
    pub residuals: Vec<DMatrix<f64>>,
}

/// Moment estimators for the grand mean and the row/column effects:
/// `mu_t = 1'Y_t 1/(pq)`, `alpha_t = Y_t 1/q - mu_t 1`, `beta_t' = 1'Y_t/p - mu_t 1'`.
pub fn estimate_mean_effects(y: &MatrixSeries) -> MeanEffects {
    let (p, q) = (y.nrows(), y.ncols());
    let mut mu = Vec::with_capacity(y.len());
    let mut alpha = Vec::with_capacity(y.len());
    let mut beta = Vec::with_capacity(y.len());
    for frame in y.iter() {
        let grand = frame.sum() / (p * q) as f64;
        let a = DVector::from_fn(p, |i, _| frame.row(i).sum() / q as f64 - grand);
        let b = DVector::from_fn(q, |j, _| frame.column(j).sum() / p as f64 - grand);
        mu.push(grand);
        alpha.push(a);
        beta.push(b);
    }
    MeanEffects { mu, alpha, beta }
}

/// Double-centers every frame, removing the fitted additive structure.
pub fn detrend(y: &MatrixSeries) -> MatrixSeries {
    let frames = y.iter().map(double_center).collect();
    MatrixSeries::new(frames).expect("double-centering preserves shape and finiteness")
}

/// Averaged scatter pair of a series: `(T^{-1} sum_t L_t L_t', T^{-1} sum_t L_t' L_t)`.
///
/// Accumulation runs over fixed-size frame chunks combined in index order, so
/// the result is identical across thread counts and the sequential build.
/// Past ten million total entries the chunk partials are combined with
/// compensated summation.
pub fn mean_scatter(l: &MatrixSeries) -> (DMatrix<f64>, DMatrix<f64>) {
    let (p, q) = (l.nrows(), l.ncols());
    let t_len = l.len();
    let partials = par::map_chunks(l.frames(), SCATTER_CHUNK, |chunk| {
        let mut row = DMatrix::<f64>::zeros(p, p);
        let mut col = DMatrix::<f64>::zeros(q, q);
        for frame in chunk {
            row.gemm(1.0, frame, &frame.transpose(), 1.0);
            col.gemm(1.0, &frame.transpose(), frame, 1.0);
        }
        (row, col)
    });

    let compensated = t_len * p * q > KAHAN_THRESHOLD;
    let mut row = DMatrix::<f64>::zeros(p, p);
    let mut col = DMatrix::<f64>::zeros(q, q);
    if compensated {
        let mut row_c = DMatrix::<f64>::zeros(p, p);
        let mut col_c = DMatrix::<f64>::zeros(q, q);
        for (pr, pc) in &partials {
            kahan_add(&mut row, &mut row_c, pr);
            kahan_add(&mut col, &mut col_c, pc);
        }
    } else {
        for (pr, pc) in &partials {
            row += pr;
            col += pc;
        }
    }
    row /= t_len as f64;
    col /= t_len as f64;
    (row, col)
}

fn kahan_add(sum: &mut DMatrix<f64>, comp: &mut DMatrix<f64>, x: &DMatrix<f64>) {
    for ((s, c), v) in sum.iter_mut().zip(comp.iter_mut()).zip(x.iter()) {
        let y = v - *c;
        let t = *s + y;
        *c = (t - *s) - y;
        *s = t;
    }
}

/// Top loading spaces of a centered series.
///
/// `q_row`/`d_row` are the leading `k_row` eigenpairs of `T^{-1} sum_t L_t L_t'`,
/// `q_col`/`d_col` of `T^{-1} sum_t L_t' L_t`. The centered scatter matrices
/// have the all-ones vector in their null space, so the ranks must stay below
/// the matrix dimensions.
pub fn estimate_loadings(l: &MatrixSeries, k_row: usize, k_col: usize) -> Result<Loadings> {
    let (row_scatter, col_scatter) = mean_scatter(l);
    loadings_from_scatter(&row_scatter, &col_scatter, k_row, k_col)
}

fn loadings_from_scatter(
    row_scatter: &DMatrix<f64>,
    col_scatter: &DMatrix<f64>,
    k_row: usize,
    k_col: usize,
) -> Result<Loadings> {
    let p = row_scatter.nrows();
    let q = col_scatter.nrows();
    if k_row == 0 || k_row > p - 1 {
        return Err(Error::RankOutOfRange(format!(
            "k_row = {k_row} not in [1, {}]",
            p - 1
        )));
    }
    if k_col == 0 || k_col > q - 1 {
        return Err(Error::RankOutOfRange(format!(
            "k_col = {k_col} not in [1, {}]",
            q - 1
        )));
    }
    let degenerate = row_scatter.trace() <= 1e-30 * (p * q) as f64;
    let row = sym_eig_topk(row_scatter, k_row)?;
    let col = sym_eig_topk(col_scatter, k_col)?;
    Ok(Loadings {
        q_row: row.vectors,
        d_row: row.values,
        q_col: col.vectors,
        d_col: col.values,
        degenerate,
    })
}

/// Projects a series onto given loading spaces.
///
/// Returns `(factors, common, residuals)` with `F_t = Qr' L_t Qc`,
/// `C_t = Qr F_t Qc'` and `E_t = L_t - C_t`, where `L_t` is the
/// double-centered frame. For loadings estimated from the centered scatter
/// (whose columns are orthogonal to the ones-vector) `Qr' L_t Qc` coincides
/// with `Qr' Y_t Qc`; projecting the centered frame keeps the degenerate
/// all-additive corner exact as well.
pub fn estimate_factors(
    y: &MatrixSeries,
    q_row: &DMatrix<f64>,
    q_col: &DMatrix<f64>,
) -> Result<Decomposition> {
    if q_row.nrows() != y.nrows() || q_col.nrows() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "loadings ({} x {}, {} x {}) do not match frames ({} x {})",
            q_row.nrows(),
            q_row.ncols(),
            q_col.nrows(),
            q_col.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    if q_row.ncols() == 0 || q_col.ncols() == 0 {
        return Err(Error::RankOutOfRange(
            "loadings must have at least one column".into(),
        ));
    }
    Ok(project_centered(&detrend(y), q_row, q_col))
}

fn project_centered(
    centered: &MatrixSeries,
    q_row: &DMatrix<f64>,
    q_col: &DMatrix<f64>,
) -> Decomposition {
    let mut factors = Vec::with_capacity(centered.len());
    let mut common = Vec::with_capacity(centered.len());
    let mut residuals = Vec::with_capacity(centered.len());
    for frame in centered.iter() {
        let f = q_row.transpose() * frame * q_col;
        let c = q_row * &f * q_col.transpose();
        let e = frame - &c;
        factors.push(f);
        common.push(c);
        residuals.push(e);
    }
    (factors, common, residuals)
}

/// Fits the full MEFM decomposition.
///
/// Ranks may be supplied or left as `None`, in which case the eigenvalue-ratio
/// estimator picks them; the fit never guesses silently.
pub fn fit_mefm(y: &MatrixSeries, k_row: Option<usize>, k_col: Option<usize>) -> Result<MEFMFit> {
    let (p, q) = (y.nrows(), y.ncols());
    if p < 2 || q < 2 {
        return Err(Error::InvalidParameter(format!(
            "need p >= 2 and q >= 2, got ({p}, {q})"
        )));
    }
    let effects = estimate_mean_effects(y);
    let centered = detrend(y);
    let (row_scatter, col_scatter) = mean_scatter(&centered);
    let (k_row, k_col) = match (k_row, k_col) {
        (Some(r), Some(c)) => (r, c),
        (given_r, given_c) => {
            let mut norms: Vec<f64> = centered.iter().map(|f| f.norm()).collect();
            norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let sel = rank::select_ranks_from_scatter(
                &row_scatter,
                &col_scatter,
                centered.len(),
                norms[norms.len() / 2],
                rank::DEFAULT_XI_SCALE,
            )?;
            (given_r.unwrap_or(sel.k_row), given_c.unwrap_or(sel.k_col))
        }
    };
    let loadings = loadings_from_scatter(&row_scatter, &col_scatter, k_row, k_col)?;
    let (factors, common, residuals) =
        project_centered(&centered, &loadings.q_row, &loadings.q_col);

    // Scale-aware degeneracy: a series whose centered part is pure roundoff
    // from the additive structure carries no factor signal.
    let y_scale = y.iter().map(|f| f.amax()).fold(0.0_f64, f64::max);
    let degenerate =
        loadings.degenerate || row_scatter.trace() <= (1e-13 * y_scale).powi(2) * (p * q) as f64;

    Ok(MEFMFit {
        effects,
        q_row: loadings.q_row,
        q_col: loadings.q_col,
        d_row: loadings.d_row,
        d_col: loadings.d_col,
        factors,
        common,
        residuals,
        k_row,
        k_col,
        degenerate,
    })
}

/// Fits a plain FM with `l_row`/`l_col` factors on the raw frames.
pub fn fit_fm(y: &MatrixSeries, l_row: usize, l_col: usize) -> Result<FMFit> {
    let (p, q) = (y.nrows(), y.ncols());
    if l_row == 0 || l_row > p {
        return Err(Error::RankOutOfRange(format!(
            "l_row = {l_row} not in [1, {p}]"
        )));
    }
    if l_col == 0 || l_col > q {
        return Err(Error::RankOutOfRange(format!(
            "l_col = {l_col} not in [1, {q}]"
        )));
    }
    let (row_scatter, col_scatter) = mean_scatter(y);
    let a_row = sym_eig_topk(&row_scatter, l_row)?.vectors;
    let a_col = sym_eig_topk(&col_scatter, l_col)?.vectors;
    let mut common = Vec::with_capacity(y.len());
    let mut residuals = Vec::with_capacity(y.len());
    for frame in y.iter() {
        let c = &a_row * (a_row.transpose() * frame * &a_col) * a_col.transpose();
        residuals.push(frame - &c);
        common.push(c);
    }
    Ok(FMFit {
        a_row,
        a_col,
        common,
        residuals,
    })
}

/// Re-expresses an FM common component series in main-effects form.
///
/// Splits each `C_t` into a grand mean, zero-sum row/column effects and a
/// double-centered remainder; the four parts sum back to `C_t` exactly and
/// the zero-sum identities hold by construction.
pub fn fm_to_mefm(c: &MatrixSeries) -> (MeanEffects, MatrixSeries) {
    let effects = estimate_mean_effects(c);
    let centered = detrend(c);
    (effects, centered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    fn random_series(rng: &mut StdRng, t_len: usize, p: usize, q: usize) -> MatrixSeries {
        let frames = (0..t_len)
            .map(|_| DMatrix::from_fn(p, q, |_, _| rng.random_range(-2.0..2.0)))
            .collect();
        MatrixSeries::new(frames).unwrap()
    }

    #[test]
    fn constant_frame_effects() {
        let y = MatrixSeries::new(vec![DMatrix::from_element(2, 3, 5.0)]).unwrap();
        let eff = estimate_mean_effects(&y);
        assert_abs_diff_eq!(eff.mu[0], 5.0, epsilon = 1e-12);
        assert!(eff.alpha[0].amax() < 1e-12);
        assert!(eff.beta[0].amax() < 1e-12);
    }

    #[test]
    fn pure_row_effect_recovered() {
        // Y = a 1' with a = (1, -1)': grand mean 0, alpha = a, beta = 0.
        let y = MatrixSeries::new(vec![DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0])])
            .unwrap();
        let eff = estimate_mean_effects(&y);
        assert_abs_diff_eq!(eff.mu[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eff.alpha[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eff.alpha[0][1], -1.0, epsilon = 1e-12);
        assert!(eff.beta[0].amax() < 1e-12);
    }

    #[test]
    fn effects_match_direct_summation_oracle() {
        let mut rng = StdRng::seed_from_u64(7);
        let y = random_series(&mut rng, 1, 3, 4);
        let eff = estimate_mean_effects(&y);
        let f = y.frame(0);
        // brute force: grand/row/column means by direct summation
        let mut grand = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                grand += f[(i, j)];
            }
        }
        grand /= 12.0;
        assert_abs_diff_eq!(eff.mu[0], grand, epsilon = 1e-14);
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..4 {
                s += f[(i, j)];
            }
            assert_abs_diff_eq!(eff.alpha[0][i], s / 4.0 - grand, epsilon = 1e-14);
        }
        for j in 0..4 {
            let mut s = 0.0;
            for i in 0..3 {
                s += f[(i, j)];
            }
            assert_abs_diff_eq!(eff.beta[0][j], s / 3.0 - grand, epsilon = 1e-14);
        }
    }

    #[test]
    fn effect_zero_sums_hold() {
        let mut rng = StdRng::seed_from_u64(11);
        let y = random_series(&mut rng, 5, 6, 4);
        let eff = estimate_mean_effects(&y);
        for t in 0..5 {
            assert!(eff.alpha[t].sum().abs() < 1e-12 * 6.0);
            assert!(eff.beta[t].sum().abs() < 1e-12 * 4.0);
        }
    }

    #[test]
    fn reconstruction_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        let y = random_series(&mut rng, 4, 5, 7);
        let eff = estimate_mean_effects(&y);
        let l = detrend(&y);
        let scale = y.iter().map(max_abs).fold(1.0_f64, f64::max);
        for t in 0..4 {
            let rebuilt = eff.additive_frame(t) + l.frame(t);
            assert!(max_abs(&(rebuilt - y.frame(t))) < 1e-12 * scale);
        }
    }

    #[test]
    fn detrend_of_additive_series_is_zero() {
        let frames = (0..3)
            .map(|t| {
                DMatrix::from_fn(4, 5, |i, j| {
                    (t as f64) + (i as f64) * 0.5 - (j as f64) * 0.25
                })
            })
            .collect();
        let y = MatrixSeries::new(frames).unwrap();
        let l = detrend(&y);
        for t in 0..3 {
            assert!(max_abs(l.frame(t)) < 1e-12);
        }
    }

    #[test]
    fn null_space_property_of_centered_scatter() {
        let mut rng = StdRng::seed_from_u64(23);
        let y = random_series(&mut rng, 6, 5, 4);
        let l = detrend(&y);
        let (row, col) = mean_scatter(&l);
        let ones_p = DVector::from_element(5, 1.0);
        let ones_q = DVector::from_element(4, 1.0);
        assert!((&row * &ones_p).amax() < 1e-10);
        assert!((&col * &ones_q).amax() < 1e-10);
    }

    #[test]
    fn rank_one_centered_factor_recovered() {
        // L_t = f_t u v' with 1'u = 0 and 1'v = 0: the row space is span(u).
        let p = 8;
        let q = 6;
        let mut u = DVector::from_fn(p, |i, _| (i as f64 + 1.0).sin());
        u -= DVector::from_element(p, u.mean());
        let mut v = DVector::from_fn(q, |j, _| (j as f64 * 2.0 + 0.3).cos());
        v -= DVector::from_element(q, v.mean());
        let frames: Vec<DMatrix<f64>> = (0..20)
            .map(|t| {
                let f = ((t + 1) as f64 * 0.7).sin() + 1.5;
                f * &u * v.transpose()
            })
            .collect();
        let l = MatrixSeries::new(frames).unwrap();
        let loadings = estimate_loadings(&l, 1, 1).unwrap();
        let u_mat = DMatrix::from_column_slice(p, 1, u.as_slice());
        let v_mat = DMatrix::from_column_slice(q, 1, v.as_slice());
        assert!(crate::linalg::space_distance(&loadings.q_row, &u_mat).unwrap() < 1e-8);
        assert!(crate::linalg::space_distance(&loadings.q_col, &v_mat).unwrap() < 1e-8);
        assert!(!loadings.degenerate);
    }

    #[test]
    fn zero_series_flags_degenerate() {
        let l = MatrixSeries::new(vec![DMatrix::zeros(4, 4); 3]).unwrap();
        let loadings = estimate_loadings(&l, 1, 1).unwrap();
        assert!(loadings.degenerate);
        assert!(loadings.d_row[0].abs() < 1e-20);
    }

    #[test]
    fn loadings_rank_bounds() {
        let l = MatrixSeries::new(vec![DMatrix::zeros(4, 5); 2]).unwrap();
        assert!(estimate_loadings(&l, 4, 1).is_err());
        assert!(estimate_loadings(&l, 1, 5).is_err());
        assert!(estimate_loadings(&l, 0, 1).is_err());
    }

    #[test]
    fn factors_match_direct_multiplication_oracle() {
        let mut rng = StdRng::seed_from_u64(31);
        let y = random_series(&mut rng, 3, 6, 5);
        let fitted = fit_mefm(&y, Some(2), Some(2)).unwrap();
        for t in 0..3 {
            let oracle = &fitted.q_row
                * (fitted.q_row.transpose() * y.frame(t) * &fitted.q_col)
                * fitted.q_col.transpose();
            assert!(max_abs(&(&fitted.common[t] - &oracle)) < 1e-10);
        }
    }

    #[test]
    fn estimate_factors_rejects_mismatch() {
        let mut rng = StdRng::seed_from_u64(5);
        let y = random_series(&mut rng, 2, 4, 4);
        let q_bad = DMatrix::<f64>::identity(5, 2);
        let q_ok = DMatrix::<f64>::identity(4, 2);
        assert!(estimate_factors(&y, &q_bad, &q_ok).is_err());
    }

    #[test]
    fn projection_identity_zero_noise() {
        // C_t exactly in span(Qr) x span(Qc), centered, no noise: residuals vanish.
        let p = 6;
        let q = 5;
        let mut rng = StdRng::seed_from_u64(17);
        let mut u = DVector::from_fn(p, |i, _| ((i * i) as f64 * 0.31).sin());
        u -= DVector::from_element(p, u.mean());
        let mut v = DVector::from_fn(q, |j, _| ((j + 2) as f64 * 0.77).cos());
        v -= DVector::from_element(q, v.mean());
        let frames: Vec<DMatrix<f64>> = (0..12)
            .map(|_| rng.random_range(0.5..2.0) * &u * v.transpose())
            .collect();
        let y = MatrixSeries::new(frames).unwrap();
        let fitted = fit_mefm(&y, Some(1), Some(1)).unwrap();
        for e in &fitted.residuals {
            assert!(max_abs(e) < 1e-12);
        }
    }

    #[test]
    fn constant_series_fit_is_degenerate_with_tiny_common() {
        let y = MatrixSeries::new(vec![DMatrix::from_element(4, 4, 3.0); 5]).unwrap();
        let fitted = fit_mefm(&y, Some(1), Some(1)).unwrap();
        assert!(fitted.degenerate);
        for t in 0..5 {
            assert_abs_diff_eq!(fitted.effects.mu[t], 3.0, epsilon = 1e-12);
            assert!(fitted.common[t].norm() < 1e-12);
        }
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = StdRng::seed_from_u64(41);
        let y = random_series(&mut rng, 6, 7, 5);
        let scaled = MatrixSeries::new(y.iter().map(|f| 3.0 * f).collect::<Vec<_>>()).unwrap();
        let f1 = fit_mefm(&y, Some(2), Some(2)).unwrap();
        let f2 = fit_mefm(&scaled, Some(2), Some(2)).unwrap();
        for t in 0..6 {
            assert_abs_diff_eq!(f2.effects.mu[t], 3.0 * f1.effects.mu[t], epsilon = 1e-10);
            assert!(max_abs(&(&f2.common[t] - 3.0 * &f1.common[t])) < 1e-9);
        }
        assert!(crate::linalg::space_distance(&f1.q_row, &f2.q_row).unwrap() < 1e-10);
        assert!(crate::linalg::space_distance(&f1.q_col, &f2.q_col).unwrap() < 1e-10);
    }

    #[test]
    fn common_component_invariant_to_orthogonal_remix() {
        let mut rng = StdRng::seed_from_u64(43);
        let y = random_series(&mut rng, 4, 6, 6);
        let fitted = fit_mefm(&y, Some(2), Some(2)).unwrap();
        let theta = 0.6_f64;
        let rot =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let q_rot = &fitted.q_row * &rot;
        let (_, common_rot, _) = estimate_factors(&y, &q_rot, &fitted.q_col).unwrap();
        for (rotated, original) in common_rot.iter().zip(&fitted.common) {
            assert!(max_abs(&(rotated - original)) < 1e-10);
        }
    }

    #[test]
    fn fm_full_rank_residuals_vanish() {
        let mut rng = StdRng::seed_from_u64(53);
        let y = random_series(&mut rng, 3, 4, 3);
        let fm = fit_fm(&y, 4, 3).unwrap();
        for e in &fm.residuals {
            assert!(max_abs(e) < 1e-10);
        }
    }

    #[test]
    fn fm_recovers_exact_low_rank_series() {
        let p = 7;
        let q = 6;
        let u = DVector::from_fn(p, |i, _| 1.0 + (i as f64 * 0.4).sin());
        let v = DVector::from_fn(q, |j, _| 1.0 + (j as f64 * 0.9).cos());
        let frames: Vec<DMatrix<f64>> = (0..10)
            .map(|t| ((t + 1) as f64 * 0.3).cos() * &u * v.transpose())
            .collect();
        let y = MatrixSeries::new(frames).unwrap();
        let fm = fit_fm(&y, 1, 1).unwrap();
        for e in &fm.residuals {
            assert!(max_abs(e) < 1e-10);
        }
    }

    #[test]
    fn fm_matches_direct_multiplication_oracle() {
        let mut rng = StdRng::seed_from_u64(59);
        let y = random_series(&mut rng, 4, 5, 4);
        let fm = fit_fm(&y, 2, 2).unwrap();
        for t in 0..4 {
            let oracle =
                &fm.a_row * (fm.a_row.transpose() * y.frame(t) * &fm.a_col) * fm.a_col.transpose();
            assert!(max_abs(&(&fm.common[t] - &oracle)) < 1e-10);
            assert!(max_abs(&(y.frame(t) - &fm.common[t] - &fm.residuals[t])) < 1e-12);
        }
    }

    #[test]
    fn fm_rank_bounds() {
        let y = MatrixSeries::new(vec![DMatrix::zeros(3, 4)]).unwrap();
        assert!(fit_fm(&y, 4, 1).is_err());
        assert!(fit_fm(&y, 1, 5).is_err());
    }

    #[test]
    fn fm_to_mefm_of_ones_matrix() {
        let c = MatrixSeries::new(vec![DMatrix::from_element(3, 4, 1.0)]).unwrap();
        let (eff, centered) = fm_to_mefm(&c);
        assert_abs_diff_eq!(eff.mu[0], 1.0, epsilon = 1e-14);
        assert!(eff.alpha[0].amax() < 1e-14);
        assert!(eff.beta[0].amax() < 1e-14);
        assert!(max_abs(centered.frame(0)) < 1e-14);
    }

    #[test]
    fn fm_to_mefm_identity_on_conforming_input() {
        // Input already has zero grand mean, zero row/column means.
        let mut rng = StdRng::seed_from_u64(61);
        let raw = random_series(&mut rng, 2, 4, 5);
        let conforming = detrend(&raw);
        let (eff, centered) = fm_to_mefm(&conforming);
        for t in 0..2 {
            assert!(eff.mu[t].abs() < 1e-12);
            assert!(eff.alpha[t].amax() < 1e-12);
            assert!(eff.beta[t].amax() < 1e-12);
            assert!(max_abs(&(centered.frame(t) - conforming.frame(t))) < 1e-12);
        }
    }

    #[test]
    fn fm_to_mefm_reconstructs_and_satisfies_zero_sums() {
        let mut rng = StdRng::seed_from_u64(67);
        let c = random_series(&mut rng, 3, 5, 6);
        let (eff, centered) = fm_to_mefm(&c);
        for t in 0..3 {
            let rebuilt = eff.additive_frame(t) + centered.frame(t);
            assert!(max_abs(&(rebuilt - c.frame(t))) < 1e-12 * max_abs(c.frame(t)).max(1.0));
            assert!(eff.alpha[t].sum().abs() < 1e-12 * 5.0);
            assert!(eff.beta[t].sum().abs() < 1e-12 * 6.0);
            let ones_p = DVector::from_element(5, 1.0);
            let ones_q = DVector::from_element(6, 1.0);
            assert!((centered.frame(t).transpose() * ones_p).amax() < 1e-12 * 5.0);
            assert!((centered.frame(t) * ones_q).amax() < 1e-12 * 6.0);
        }
    }

    #[test]
    fn scatter_deterministic_across_chunking() {
        // Sum over a frame count that is not a multiple of the chunk size.
        let mut rng = StdRng::seed_from_u64(71);
        let y = random_series(&mut rng, SCATTER_CHUNK * 2 + 3, 4, 3);
        let (r1, c1) = mean_scatter(&y);
        let (r2, c2) = mean_scatter(&y);
        assert_eq!(r1, r2);
        assert_eq!(c1, c2);
    }
}
