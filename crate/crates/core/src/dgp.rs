//! Simulation data-generating process: AR-driven factors and noise,
//! strength-controlled loadings, time-varying effects, and named presets.
//!
//! Everything is a pure function of `(config, seed)`. Replications derive
//! child seeds with [`derive_child_seed`], so runs are reproducible no matter
//! how the replication loop is scheduled.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::series::{MatrixSeries, MeanEffects};
use crate::{Error, Result};

/// Innovation law driving the AR processes. Both are scaled to unit variance
/// (the raw t3 variance is 3, so those draws are divided by sqrt(3)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Innovation {
    Normal,
    StudentT3,
}

/// Law of the time-varying grand mean and main effects.
#[derive(Debug, Clone, PartialEq)]
pub enum EffectLaw {
    /// `v_mu ~ N(m_mu, sigma_mu^2)` and i.i.d. normal entries for the raw
    /// row/column effect vectors, which are then centered.
    Gaussian {
        m_mu: f64,
        sigma_mu: f64,
        m_alpha: f64,
        sigma_alpha: f64,
        m_beta: f64,
        sigma_beta: f64,
    },
    /// Rademacher signs scaled by `u_*`; `local_support = Some(s)` keeps only
    /// the first `s` raw row-effect entries non-zero before centering.
    Rademacher {
        u_mu: f64,
        u_alpha: f64,
        u_beta: f64,
        local_support: Option<usize>,
    },
    /// Deterministic sparse row-effect cycle with period three,
    /// `alpha_1 = scale * (1, 1, -2, 0, ...)`,
    /// `alpha_2 = scale * (1, 2, -3, 0, ...)`,
    /// `alpha_3 = scale * (2, -5, 3, 0, ...)`; grand mean and column effects
    /// are zero.
    FixedLocalPattern { scale: f64 },
}

/// Every knob of the simulation DGP.
#[derive(Debug, Clone, PartialEq)]
pub struct DGPConfig {
    pub t_len: usize,
    pub p: usize,
    pub q: usize,
    pub k_row: usize,
    pub k_col: usize,
    /// Per-factor strength exponents in `[0, 0.5]`; column `j` of the row
    /// loadings is scaled by `p^{-zeta_row[j]}` (0 = pervasive).
    pub zeta_row: Vec<f64>,
    pub zeta_col: Vec<f64>,
    /// AR coefficients of the factor, noise-factor and idiosyncratic
    /// processes; empty means white noise.
    pub ar_factor: Vec<f64>,
    pub ar_noise_factor: Vec<f64>,
    pub ar_idio: Vec<f64>,
    pub innovation: Innovation,
    /// Noise-factor dimensions.
    pub k_noise_row: usize,
    pub k_noise_col: usize,
    /// Probability that a noise-loading entry is zeroed.
    pub sparse_prob: f64,
    /// Multiplier on the idiosyncratic standard deviations; 0 removes the
    /// idiosyncratic part entirely.
    pub sigma_eps_scale: f64,
    pub effect_law: EffectLaw,
    pub seed: u64,
}

/// Everything the generator knows that an estimator must recover.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub effects: MeanEffects,
    /// `p x k_row` row loadings (zero column sums by construction).
    pub a_row: DMatrix<f64>,
    /// `q x k_col` column loadings.
    pub a_col: DMatrix<f64>,
    /// Core factor frames `F_t`, `k_row x k_col`.
    pub factors: Vec<DMatrix<f64>>,
    /// Common components `C_t = A_r F_t A_c'`.
    pub common: Vec<DMatrix<f64>>,
    /// Noise frames `E_t`.
    pub noise: Vec<DMatrix<f64>>,
    /// Idiosyncratic standard deviations, `p x q`.
    pub sigma_eps: DMatrix<f64>,
}

impl GroundTruth {
    /// Column-normalized row loadings `A_r diag(A_r'A_r)^{-1/2}`.
    pub fn q_row(&self) -> DMatrix<f64> {
        normalize_columns(&self.a_row)
    }

    /// Column-normalized column loadings.
    pub fn q_col(&self) -> DMatrix<f64> {
        normalize_columns(&self.a_col)
    }

    /// Factor frames in the normalized-loading parameterization,
    /// `diag(A_r'A_r)^{1/2} F_t diag(A_c'A_c)^{1/2}`.
    pub fn factors_z(&self) -> Vec<DMatrix<f64>> {
        let zr = column_norms(&self.a_row);
        let zc = column_norms(&self.a_col);
        self.factors
            .iter()
            .map(|f| DMatrix::from_fn(f.nrows(), f.ncols(), |a, b| zr[a] * f[(a, b)] * zc[b]))
            .collect()
    }
}

fn column_norms(a: &DMatrix<f64>) -> Vec<f64> {
    (0..a.ncols()).map(|j| a.column(j).norm()).collect()
}

fn normalize_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norms = column_norms(a);
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] / norms[j])
}

/// Deterministically derives an independent child seed from a master seed and
/// an index (splitmix64 finalizer).
pub fn derive_child_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        ^ index
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Analytic stationary standard deviation of an AR process with unit-variance
/// innovations, from the discrete Lyapunov equation of its companion form.
pub fn stationary_sd(coeffs: &[f64]) -> Result<f64> {
    let order = coeffs.len();
    if order == 0 {
        return Ok(1.0);
    }
    let companion = companion_matrix(coeffs);
    let radius = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    if radius >= 1.0 {
        return Err(Error::NonStationaryAr(radius));
    }
    // Solve P = A P A' + Q with Q = e1 e1' via (I - A (x) A) vec(P) = vec(Q).
    let d = order;
    let n = d * d;
    let mut system = DMatrix::<f64>::identity(n, n);
    for ci in 0..d {
        for ri in 0..d {
            for cj in 0..d {
                for rj in 0..d {
                    system[(ci * d + ri, cj * d + rj)] -= companion[(ri, rj)] * companion[(ci, cj)];
                }
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[0] = 1.0;
    let vec_p = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov system for the AR variance".into()))?;
    let var = vec_p[0];
    if !(var.is_finite() && var > 0.0) {
        return Err(Error::NonFinite(format!("stationary variance {var}")));
    }
    Ok(var.sqrt())
}

fn companion_matrix(coeffs: &[f64]) -> DMatrix<f64> {
    let d = coeffs.len();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for (j, phi) in coeffs.iter().enumerate() {
        a[(0, j)] = *phi;
    }
    for i in 1..d {
        a[(i, i - 1)] = 1.0;
    }
    a
}

fn draw_innovation<R: Rng>(rng: &mut R, innovation: Innovation, t3: &StudentT<f64>) -> f64 {
    match innovation {
        Innovation::Normal => StandardNormal.sample(rng),
        Innovation::StudentT3 => t3.sample(rng) / 3.0_f64.sqrt(),
    }
}

/// Generates `n_series` independent AR paths of length `t_len`, each scaled
/// by its analytic stationary standard deviation so the marginal variance is
/// exactly one. Burn-in of `200 + 10 * order` steps is discarded; white noise
/// (empty coefficients) skips the recursion entirely.
///
/// Returns an `n_series x t_len` matrix, one path per row.
pub fn gen_standardized_ar(
    coeffs: &[f64],
    innovation: Innovation,
    t_len: usize,
    n_series: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let sd = stationary_sd(coeffs)?;
    let order = coeffs.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let t3 = StudentT::new(3.0).expect("valid dof");
    let mut out = DMatrix::<f64>::zeros(n_series, t_len);
    if order == 0 {
        for s in 0..n_series {
            for t in 0..t_len {
                out[(s, t)] = draw_innovation(&mut rng, innovation, &t3);
            }
        }
        return Ok(out);
    }
    let burn = 200 + 10 * order;
    let total = burn + t_len;
    let mut path = vec![0.0_f64; total];
    for s in 0..n_series {
        path.fill(0.0);
        for t in 0..total {
            let mut x = draw_innovation(&mut rng, innovation, &t3);
            for (lag, phi) in coeffs.iter().enumerate() {
                if t > lag {
                    x += phi * path[t - lag - 1];
                }
            }
            path[t] = x;
        }
        for t in 0..t_len {
            out[(s, t)] = path[burn + t] / sd;
        }
    }
    Ok(out)
}

/// Draws an `n x k` loading matrix `U B` with i.i.d. standard normal `U` and
/// `B = diag(n^{-zeta_1}, ..., n^{-zeta_k})`; `centered` removes each
/// column's mean so the loadings have exact zero column sums.
pub fn gen_loadings(n: usize, k: usize, zeta: &[f64], seed: u64, centered: bool) -> DMatrix<f64> {
    assert_eq!(zeta.len(), k, "one strength exponent per factor");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut a = DMatrix::<f64>::zeros(n, k);
    for j in 0..k {
        let scale = (n as f64).powf(-zeta[j]);
        for i in 0..n {
            let u: f64 = StandardNormal.sample(&mut rng);
            a[(i, j)] = u * scale;
        }
    }
    if centered {
        for j in 0..k {
            let mean = a.column(j).mean();
            for i in 0..n {
                a[(i, j)] -= mean;
            }
        }
    }
    a
}

/// Noise frames together with the pieces that generated them:
/// `(E_t frames, sigma_eps, a_noise_row, a_noise_col)`.
pub type NoiseParts = (Vec<DMatrix<f64>>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);

/// Generates the noise series `E_t = A_er F_et A_ec' + Sigma o eps_t`.
pub fn gen_noise(config: &DGPConfig, seed: u64) -> Result<NoiseParts> {
    let (p, q, t_len) = (config.p, config.q, config.t_len);
    let (ker, kec) = (config.k_noise_row, config.k_noise_col);

    let a_row = gen_sparse_loadings(p, ker, config.sparse_prob, derive_child_seed(seed, 1));
    let a_col = gen_sparse_loadings(q, kec, config.sparse_prob, derive_child_seed(seed, 2));

    let f_series = gen_standardized_ar(
        &config.ar_noise_factor,
        config.innovation,
        t_len,
        ker * kec,
        derive_child_seed(seed, 3),
    )?;
    let eps_series = gen_standardized_ar(
        &config.ar_idio,
        config.innovation,
        t_len,
        p * q,
        derive_child_seed(seed, 4),
    )?;

    let mut sigma_rng = ChaCha12Rng::seed_from_u64(derive_child_seed(seed, 5));
    let mut sigma = DMatrix::<f64>::zeros(p, q);
    for j in 0..q {
        for i in 0..p {
            let z: f64 = StandardNormal.sample(&mut sigma_rng);
            sigma[(i, j)] = z.abs() * config.sigma_eps_scale;
        }
    }

    let mut frames = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let f_t = DMatrix::from_fn(ker, kec, |a, b| f_series[(b * ker + a, t)]);
        let mut e = &a_row * f_t * a_col.transpose();
        for j in 0..q {
            for i in 0..p {
                e[(i, j)] += sigma[(i, j)] * eps_series[(j * p + i, t)];
            }
        }
        frames.push(e);
    }
    Ok((frames, sigma, a_row, a_col))
}

/// Standard normal entries, each independently zeroed with probability
/// `sparse_prob`.
pub fn gen_sparse_loadings(n: usize, k: usize, sparse_prob: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut a = DMatrix::<f64>::zeros(n, k);
    for j in 0..k {
        for i in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let keep: f64 = rng.random();
            a[(i, j)] = if keep < sparse_prob { 0.0 } else { z };
        }
    }
    a
}

/// Generates the time-varying grand mean and main effects under
/// `config.effect_law`. Row/column effect vectors are centered, so the
/// zero-sum identities hold by construction.
pub fn gen_effects(config: &DGPConfig, seed: u64) -> MeanEffects {
    let (p, q, t_len) = (config.p, config.q, config.t_len);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut mu = Vec::with_capacity(t_len);
    let mut alpha = Vec::with_capacity(t_len);
    let mut beta = Vec::with_capacity(t_len);

    for t in 0..t_len {
        let (m, mut a, mut b) = match &config.effect_law {
            EffectLaw::Gaussian {
                m_mu,
                sigma_mu,
                m_alpha,
                sigma_alpha,
                m_beta,
                sigma_beta,
            } => {
                let z: f64 = StandardNormal.sample(&mut rng);
                let m = m_mu + sigma_mu * z;
                let a = DVector::from_fn(p, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m_alpha + sigma_alpha * z
                });
                let b = DVector::from_fn(q, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m_beta + sigma_beta * z
                });
                (m, a, b)
            }
            EffectLaw::Rademacher {
                u_mu,
                u_alpha,
                u_beta,
                local_support,
            } => {
                let m = u_mu * rademacher(&mut rng);
                let mut a = DVector::from_fn(p, |_, _| u_alpha * rademacher(&mut rng));
                if let Some(s) = local_support {
                    for i in *s..p {
                        a[i] = 0.0;
                    }
                }
                let b = DVector::from_fn(q, |_, _| u_beta * rademacher(&mut rng));
                (m, a, b)
            }
            EffectLaw::FixedLocalPattern { scale } => {
                let patterns: [[f64; 3]; 3] =
                    [[1.0, 1.0, -2.0], [1.0, 2.0, -3.0], [2.0, -5.0, 3.0]];
                let pat = patterns[t % 3];
                let mut a = DVector::zeros(p);
                for (i, v) in pat.iter().enumerate().take(p) {
                    a[i] = scale * v;
                }
                (0.0, a, DVector::zeros(q))
            }
        };
        let a_mean = a.mean();
        a.add_scalar_mut(-a_mean);
        let b_mean = b.mean();
        b.add_scalar_mut(-b_mean);
        mu.push(m);
        alpha.push(a);
        beta.push(b);
    }
    MeanEffects { mu, alpha, beta }
}

fn rademacher<R: Rng>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Assembles a full dataset
/// `Y_t = mu_t 11' + alpha_t 1' + 1 beta_t' + A_r F_t A_c' + E_t`
/// and keeps every generated piece as ground truth.
pub fn gen_dataset(config: &DGPConfig) -> Result<(MatrixSeries, GroundTruth)> {
    validate_config(config)?;
    let (p, q, t_len) = (config.p, config.q, config.t_len);
    let (kr, kc) = (config.k_row, config.k_col);

    let effects = gen_effects(config, derive_child_seed(config.seed, 0x01));
    let a_row = gen_loadings(
        p,
        kr,
        &config.zeta_row,
        derive_child_seed(config.seed, 0x02),
        true,
    );
    let a_col = gen_loadings(
        q,
        kc,
        &config.zeta_col,
        derive_child_seed(config.seed, 0x03),
        true,
    );
    let f_series = gen_standardized_ar(
        &config.ar_factor,
        config.innovation,
        t_len,
        kr * kc,
        derive_child_seed(config.seed, 0x04),
    )?;
    let (noise, sigma_eps, _, _) = gen_noise(config, derive_child_seed(config.seed, 0x05))?;

    let mut factors = Vec::with_capacity(t_len);
    let mut common = Vec::with_capacity(t_len);
    let mut frames = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let f_t = DMatrix::from_fn(kr, kc, |a, b| f_series[(b * kr + a, t)]);
        let c_t = &a_row * &f_t * a_col.transpose();
        let y_t = effects.additive_frame(t) + &c_t + &noise[t];
        factors.push(f_t);
        common.push(c_t);
        frames.push(y_t);
    }
    let series = MatrixSeries::new(frames)?;
    let truth = GroundTruth {
        effects,
        a_row,
        a_col,
        factors,
        common,
        noise,
        sigma_eps,
    };
    Ok((series, truth))
}

fn validate_config(config: &DGPConfig) -> Result<()> {
    if config.t_len == 0 || config.p < 2 || config.q < 2 {
        return Err(Error::InvalidParameter(format!(
            "need T >= 1, p >= 2, q >= 2, got ({}, {}, {})",
            config.t_len, config.p, config.q
        )));
    }
    if config.k_row == 0 || config.k_col == 0 {
        return Err(Error::InvalidParameter(
            "core ranks must be at least 1".into(),
        ));
    }
    if config.zeta_row.len() != config.k_row || config.zeta_col.len() != config.k_col {
        return Err(Error::InvalidParameter(
            "strength exponent lists must match the core ranks".into(),
        ));
    }
    for z in config.zeta_row.iter().chain(config.zeta_col.iter()) {
        if !(0.0..=0.5).contains(z) {
            return Err(Error::InvalidParameter(format!(
                "zeta = {z} outside [0, 0.5]"
            )));
        }
    }
    if !(0.0..=1.0).contains(&config.sparse_prob) {
        return Err(Error::InvalidParameter(format!(
            "sparse probability {} outside [0, 1]",
            config.sparse_prob
        )));
    }
    if config.sigma_eps_scale < 0.0 {
        return Err(Error::InvalidParameter(
            "sigma scale must be non-negative".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Default AR(5) coefficient sets driving the factor, noise-factor and
/// idiosyncratic processes in the named settings.
pub const AR5_FACTOR: [f64; 5] = [0.7, 0.3, -0.4, 0.2, -0.1];
pub const AR5_NOISE_FACTOR: [f64; 5] = [-0.7, -0.3, -0.4, 0.2, 0.1];
pub const AR5_IDIO: [f64; 5] = [0.8, 0.4, -0.4, 0.2, -0.1];

/// Optional adjustments applied on top of a named preset.
#[derive(Debug, Clone, Default)]
pub struct PresetOverrides {
    pub p: Option<usize>,
    pub q: Option<usize>,
    /// `T = round(t_factor * p * q)` for the rank-study presets.
    pub t_factor: Option<f64>,
    pub t_len: Option<usize>,
    /// Setting-specific scalar: `u_alpha` (IVa), `u_beta` (IVb),
    /// `u_local` support size (IVc).
    pub param: Option<f64>,
    pub seed: Option<u64>,
}

/// Returns the configuration of a named setting with default dimensions.
pub fn preset(name: &str) -> Result<DGPConfig> {
    preset_with(name, &PresetOverrides::default())
}

/// Returns the configuration of a named setting, honoring overrides.
///
/// Known names: `Ia`..`Ie`, `IIa`..`IIe` (white-noise variants), `IIIa`..
/// `IIIc` (rank studies; dimensions and `T = t_factor * p * q` adjustable),
/// `IVa`..`IVc` (test studies; the signal parameter is adjustable).
pub fn preset_with(name: &str, over: &PresetOverrides) -> Result<DGPConfig> {
    let canonical = name.trim();
    let mut config = match canonical {
        "Ia" | "IIa" => gaussian_base(100, 40, 40, 1, 2),
        "Ib" | "IIb" => {
            let mut c = gaussian_base(100, 40, 40, 1, 2);
            c.zeta_row[0] = 0.2;
            c.zeta_col[0] = 0.2;
            if let EffectLaw::Gaussian { m_alpha, .. } = &mut c.effect_law {
                *m_alpha = -2.0;
            }
            c
        }
        "Ic" | "IIc" => {
            let mut c = gaussian_base(100, 40, 40, 1, 2);
            c.innovation = Innovation::StudentT3;
            c
        }
        "Id" | "IId" => {
            let mut c = gaussian_base(100, 80, 80, 1, 2);
            c.zeta_row[0] = 0.2;
            c.zeta_col[0] = 0.2;
            if let EffectLaw::Gaussian {
                m_alpha,
                sigma_alpha,
                ..
            } = &mut c.effect_law
            {
                *m_alpha = -2.0;
                *sigma_alpha = 2.0;
            }
            c
        }
        "Ie" | "IIe" => {
            let mut c = preset("Id")?;
            c.t_len = 200;
            c
        }
        "IIIa" | "IIIb" | "IIIc" => {
            let p = over.p.unwrap_or(20);
            let q = over.q.unwrap_or(20);
            let t_factor = over.t_factor.unwrap_or(0.5);
            let t_len = over
                .t_len
                .unwrap_or(((t_factor * (p * q) as f64).round() as usize).max(1));
            let mut c = gaussian_base(t_len, p, q, 3, 3);
            match canonical {
                "IIIb" => {
                    c.zeta_row[0] = 0.2;
                    c.zeta_col[0] = 0.2;
                    c.zeta_col[1] = 0.2;
                }
                "IIIc" => {
                    c.zeta_row = vec![0.2; 3];
                    c.zeta_col = vec![0.2; 3];
                }
                _ => {}
            }
            c
        }
        "IVa" | "IVb" | "IVc" => {
            let mut c = gaussian_base(40, 40, 40, 2, 2);
            c.effect_law = match canonical {
                "IVa" => EffectLaw::Rademacher {
                    u_mu: 0.0,
                    u_alpha: over.param.unwrap_or(1.0),
                    u_beta: 0.0,
                    local_support: None,
                },
                "IVb" => EffectLaw::Rademacher {
                    u_mu: 0.0,
                    u_alpha: 0.1,
                    u_beta: over.param.unwrap_or(1.0),
                    local_support: None,
                },
                _ => EffectLaw::Rademacher {
                    u_mu: 0.0,
                    u_alpha: 1.0,
                    u_beta: 0.0,
                    local_support: Some(over.param.unwrap_or(2.0) as usize),
                },
            };
            c
        }
        other => return Err(Error::UnknownSetting(other.to_string())),
    };

    if canonical.starts_with("II") && !canonical.starts_with("III") {
        config.ar_factor = Vec::new();
        config.ar_noise_factor = Vec::new();
        config.ar_idio = Vec::new();
    }
    if !matches!(canonical, "IIIa" | "IIIb" | "IIIc") {
        if let Some(p) = over.p {
            config.p = p;
        }
        if let Some(q) = over.q {
            config.q = q;
        }
        if let Some(t) = over.t_len {
            config.t_len = t;
        }
    }
    if let Some(seed) = over.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn gaussian_base(t_len: usize, p: usize, q: usize, k_row: usize, k_col: usize) -> DGPConfig {
    DGPConfig {
        t_len,
        p,
        q,
        k_row,
        k_col,
        zeta_row: vec![0.0; k_row],
        zeta_col: vec![0.0; k_col],
        ar_factor: AR5_FACTOR.to_vec(),
        ar_noise_factor: AR5_NOISE_FACTOR.to_vec(),
        ar_idio: AR5_IDIO.to_vec(),
        innovation: Innovation::Normal,
        k_noise_row: 2,
        k_noise_col: 2,
        sparse_prob: 0.95,
        sigma_eps_scale: 1.0,
        effect_law: EffectLaw::Gaussian {
            m_mu: 0.0,
            sigma_mu: 1.0,
            m_alpha: 0.0,
            sigma_alpha: 1.0,
            m_beta: 0.0,
            sigma_beta: 1.0,
        },
        seed: 0,
    }
}

// ---------------------------------------------------------------------------
// Flat key=value serialization
// ---------------------------------------------------------------------------

impl DGPConfig {
    /// Serializes the configuration as flat `key=value` lines.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        push("T", self.t_len.to_string());
        push("p", self.p.to_string());
        push("q", self.q.to_string());
        push("kr", self.k_row.to_string());
        push("kc", self.k_col.to_string());
        push("zeta_r", join_floats(&self.zeta_row));
        push("zeta_c", join_floats(&self.zeta_col));
        push("ar_f", join_floats(&self.ar_factor));
        push("ar_e", join_floats(&self.ar_noise_factor));
        push("ar_eps", join_floats(&self.ar_idio));
        push(
            "innovation",
            match self.innovation {
                Innovation::Normal => "normal".into(),
                Innovation::StudentT3 => "student_t3".into(),
            },
        );
        push("ker", self.k_noise_row.to_string());
        push("kec", self.k_noise_col.to_string());
        push("sparse_prob", self.sparse_prob.to_string());
        push("sigma_eps_scale", self.sigma_eps_scale.to_string());
        match &self.effect_law {
            EffectLaw::Gaussian {
                m_mu,
                sigma_mu,
                m_alpha,
                sigma_alpha,
                m_beta,
                sigma_beta,
            } => {
                push("effect_law", "gaussian".into());
                push("m_mu", m_mu.to_string());
                push("sigma_mu", sigma_mu.to_string());
                push("m_alpha", m_alpha.to_string());
                push("sigma_alpha", sigma_alpha.to_string());
                push("m_beta", m_beta.to_string());
                push("sigma_beta", sigma_beta.to_string());
            }
            EffectLaw::Rademacher {
                u_mu,
                u_alpha,
                u_beta,
                local_support,
            } => {
                push("effect_law", "rademacher".into());
                push("u_mu", u_mu.to_string());
                push("u_alpha", u_alpha.to_string());
                push("u_beta", u_beta.to_string());
                if let Some(s) = local_support {
                    push("u_local", s.to_string());
                }
            }
            EffectLaw::FixedLocalPattern { scale } => {
                push("effect_law", "fixed_local".into());
                push("u_local_scale", scale.to_string());
            }
        }
        push("seed", self.seed.to_string());
        out
    }

    /// Parses a flat `key=value` configuration; `#` starts a comment, blank
    /// lines are skipped.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("line {}: expected key=value", lineno + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&String> {
            map.get(k)
                .ok_or_else(|| Error::InvalidParameter(format!("missing key `{k}`")))
        };
        let parse_usize = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("key `{k}` is not a count")))
        };
        let parse_f64 = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("key `{k}` is not a number")))
        };
        let parse_f64_or = |k: &str, default: f64| -> Result<f64> {
            match map.get(k) {
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("key `{k}` is not a number"))),
                None => Ok(default),
            }
        };

        let innovation = match get("innovation")?.as_str() {
            "normal" => Innovation::Normal,
            "student_t3" => Innovation::StudentT3,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown innovation `{other}`"
                )))
            }
        };
        let effect_law = match get("effect_law")?.as_str() {
            "gaussian" => EffectLaw::Gaussian {
                m_mu: parse_f64_or("m_mu", 0.0)?,
                sigma_mu: parse_f64_or("sigma_mu", 1.0)?,
                m_alpha: parse_f64_or("m_alpha", 0.0)?,
                sigma_alpha: parse_f64_or("sigma_alpha", 1.0)?,
                m_beta: parse_f64_or("m_beta", 0.0)?,
                sigma_beta: parse_f64_or("sigma_beta", 1.0)?,
            },
            "rademacher" => EffectLaw::Rademacher {
                u_mu: parse_f64_or("u_mu", 0.0)?,
                u_alpha: parse_f64_or("u_alpha", 0.0)?,
                u_beta: parse_f64_or("u_beta", 0.0)?,
                local_support: map
                    .get("u_local")
                    .map(|v| {
                        v.parse().map_err(|_| {
                            Error::InvalidParameter("key `u_local` is not a count".into())
                        })
                    })
                    .transpose()?,
            },
            "fixed_local" => EffectLaw::FixedLocalPattern {
                scale: parse_f64_or("u_local_scale", 1.0)?,
            },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown effect law `{other}`"
                )))
            }
        };
        let config = DGPConfig {
            t_len: parse_usize("T")?,
            p: parse_usize("p")?,
            q: parse_usize("q")?,
            k_row: parse_usize("kr")?,
            k_col: parse_usize("kc")?,
            zeta_row: split_floats(get("zeta_r")?)?,
            zeta_col: split_floats(get("zeta_c")?)?,
            ar_factor: split_floats(get("ar_f")?)?,
            ar_noise_factor: split_floats(get("ar_e")?)?,
            ar_idio: split_floats(get("ar_eps")?)?,
            innovation,
            k_noise_row: parse_usize("ker")?,
            k_noise_col: parse_usize("kec")?,
            sparse_prob: parse_f64("sparse_prob")?,
            sigma_eps_scale: parse_f64_or("sigma_eps_scale", 1.0)?,
            effect_law,
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::InvalidParameter("key `seed` is not a 64-bit seed".into()))?,
        };
        validate_config(&config)?;
        Ok(config)
    }
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn split_floats(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad number `{part}`")))
        })
        .collect()
}
