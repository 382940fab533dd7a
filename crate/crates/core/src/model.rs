//! Model configuration, parameter types and identification rules.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// The five skewness specifications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variant {
    /// Symmetric t everywhere.
    S0,
    /// Skew on idiosyncratic shocks only.
    SY,
    /// Skew on factor processes only.
    SF,
    /// Skew everywhere, no sparsity (kappa fixed at 1).
    SYF,
    /// Skew everywhere under the spike-and-slab prior.
    SSYF,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::S0, Variant::SY, Variant::SF, Variant::SYF, Variant::SSYF];

    pub fn name(self) -> &'static str {
        match self {
            Variant::S0 => "S0",
            Variant::SY => "SY",
            Variant::SF => "SF",
            Variant::SYF => "SYF",
            Variant::SSYF => "SSYF",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S0" => Ok(Variant::S0),
            "SY" => Ok(Variant::SY),
            "SF" => Ok(Variant::SF),
            "SYF" => Ok(Variant::SYF),
            "SSYF" => Ok(Variant::SSYF),
            other => Err(invalid(format!("unknown model variant {other:?}"))),
        }
    }

    /// Which of the `q = k + p` skewness parameters are free (not fixed at 0).
    /// Indices `0..k` are idiosyncratic shocks, `k..q` the factors.
    pub fn beta_mask(self, k: usize, p: usize) -> Vec<bool> {
        (0..k + p)
            .map(|i| match self {
                Variant::S0 => false,
                Variant::SY => i < k,
                Variant::SF => i >= k,
                Variant::SYF | Variant::SSYF => true,
            })
            .collect()
    }

    pub fn samples_kappa(self) -> bool {
        matches!(self, Variant::SSYF)
    }
}

/// How the two gamma priors (on `sigma^-2` and on `nu`) read their second
/// hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GammaConvention {
    #[default]
    ShapeRate,
    ShapeScale,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PriorSet {
    pub mu_mean: f64,
    pub mu_var: f64,
    /// Beta prior on `(phi + 1) / 2`.
    pub phi_beta_a: f64,
    pub phi_beta_b: f64,
    pub sigma_inv2_shape: f64,
    pub sigma_inv2_rate: f64,
    /// Beta prior on `(rho + 1) / 2`.
    pub rho_beta_a: f64,
    pub rho_beta_b: f64,
    /// Gamma prior on `nu`, truncated to `nu > 4`.
    pub nu_shape: f64,
    pub nu_rate: f64,
    pub kappa_beta_a: f64,
    pub kappa_beta_b: f64,
    /// Prior mean of the free loadings of a row (first `r` entries used).
    /// Empty means zeros.
    pub loading_prior_mean_vec: Vec<f64>,
    /// Prior covariance of the free loadings (leading `r x r` block used).
    /// Empty means the identity.
    pub loading_prior_cov: Vec<Vec<f64>>,
    pub gamma_convention: GammaConvention,
}

impl Default for PriorSet {
    fn default() -> Self {
        Self {
            mu_mean: -11.0,
            mu_var: 1.0,
            phi_beta_a: 20.0,
            phi_beta_b: 1.5,
            sigma_inv2_shape: 20.0,
            sigma_inv2_rate: 0.01,
            rho_beta_a: 1.0,
            rho_beta_b: 1.0,
            nu_shape: 24.0,
            nu_rate: 0.8,
            kappa_beta_a: 2.0,
            kappa_beta_b: 2.0,
            loading_prior_mean_vec: Vec::new(),
            loading_prior_cov: Vec::new(),
            gamma_convention: GammaConvention::ShapeRate,
        }
    }
}

impl PriorSet {
    fn effective_rate(&self, v: f64) -> f64 {
        match self.gamma_convention {
            GammaConvention::ShapeRate => v,
            GammaConvention::ShapeScale => 1.0 / v,
        }
    }

    /// Rate of the gamma prior on `sigma^-2` after applying the convention.
    pub fn sigma_inv2_rate_eff(&self) -> f64 {
        self.effective_rate(self.sigma_inv2_rate)
    }

    /// Rate of the truncated gamma prior on `nu` after applying the convention.
    pub fn nu_rate_eff(&self) -> f64 {
        self.effective_rate(self.nu_rate)
    }

    /// Prior mean and covariance of the `r` free loadings of a row.
    pub fn loading_prior(&self, r: usize) -> (Vec<f64>, DMatrix<f64>) {
        let mean = (0..r)
            .map(|j| self.loading_prior_mean_vec.get(j).copied().unwrap_or(0.0))
            .collect();
        let cov = if self.loading_prior_cov.is_empty() {
            DMatrix::identity(r, r)
        } else {
            DMatrix::from_fn(r, r, |a, b| self.loading_prior_cov[a][b])
        };
        (mean, cov)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let positive = [
            ("mu_var", self.mu_var),
            ("phi_beta_a", self.phi_beta_a),
            ("phi_beta_b", self.phi_beta_b),
            ("sigma_inv2_shape", self.sigma_inv2_shape),
            ("sigma_inv2_rate", self.sigma_inv2_rate),
            ("rho_beta_a", self.rho_beta_a),
            ("rho_beta_b", self.rho_beta_b),
            ("nu_shape", self.nu_shape),
            ("nu_rate", self.nu_rate),
            ("kappa_beta_a", self.kappa_beta_a),
            ("kappa_beta_b", self.kappa_beta_b),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("prior hyperparameter {name} must be positive, got {v}")));
            }
        }
        if !self.mu_mean.is_finite() {
            return Err(invalid("prior mu_mean must be finite"));
        }
        if !self.loading_prior_mean_vec.is_empty() && self.loading_prior_mean_vec.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "loading_prior_mean_vec has length {}, expected {p}",
                self.loading_prior_mean_vec.len()
            )));
        }
        if !self.loading_prior_cov.is_empty() {
            if self.loading_prior_cov.len() != p || self.loading_prior_cov.iter().any(|r| r.len() != p) {
                return Err(Error::DimensionMismatch(format!("loading_prior_cov must be {p} x {p}")));
            }
            let m = DMatrix::from_fn(p, p, |a, b| self.loading_prior_cov[a][b]);
            if m.cholesky().is_none() {
                return Err(Error::NotPositiveDefinite("loading_prior_cov".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct McmcSettings {
    pub burn_in: usize,
    /// Post-burn-in sweeps; every `thin`-th one is retained.
    pub n_draws: usize,
    pub thin: usize,
    pub seed: u64,
    pub sv_block_size: usize,
    /// Keep every retained h/f path instead of periodic snapshots.
    pub full_paths: bool,
    /// Retained-draw interval between stored path snapshots.
    pub snapshot_every: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            burn_in: 5_000,
            n_draws: 50_000,
            thin: 1,
            seed: 1,
            sv_block_size: 50,
            full_paths: false,
            snapshot_every: 50,
        }
    }
}

impl McmcSettings {
    /// Reduced sizes suitable for quick runs.
    pub fn desk() -> Self {
        Self { burn_in: 500, n_draws: 2_000, thin: 2, ..Self::default() }
    }

    pub fn retained(&self) -> usize {
        self.n_draws / self.thin
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub k: usize,
    pub p: usize,
    pub variant: Variant,
    #[cfg_attr(feature = "serde", serde(default))]
    pub priors: PriorSet,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mcmc: McmcSettings,
    #[cfg_attr(feature = "serde", serde(default = "default_tau0_sq"))]
    pub tau0_sq: f64,
}

#[cfg(feature = "serde")]
fn default_tau0_sq() -> f64 {
    10.0
}

impl ModelConfig {
    pub fn new(k: usize, p: usize, variant: Variant) -> Self {
        Self {
            k,
            p,
            variant,
            priors: PriorSet::default(),
            mcmc: McmcSettings::default(),
            tau0_sq: 10.0,
        }
    }

    pub fn q(&self) -> usize {
        self.k + self.p
    }
}

/// A configuration that passed [`validate_config`], with the variant's
/// skewness mask materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedConfig {
    pub cfg: ModelConfig,
    /// `beta_free[i]` is false when `beta_i` is fixed at 0 by the variant.
    pub beta_free: Vec<bool>,
}

impl CheckedConfig {
    pub fn q(&self) -> usize {
        self.cfg.q()
    }

    pub fn q_free(&self) -> usize {
        self.beta_free.iter().filter(|b| **b).count()
    }
}

fn check_dims(cfg: &ModelConfig) -> Result<()> {
    if cfg.p == 0 {
        return Err(invalid("at least one factor is required"));
    }
    if cfg.p >= cfg.k {
        return Err(Error::FactorCount { p: cfg.p, k: cfg.k });
    }
    if cfg.mcmc.n_draws == 0 {
        return Err(invalid("n_draws must be >= 1"));
    }
    if cfg.mcmc.thin == 0 {
        return Err(invalid("thin must be >= 1"));
    }
    if cfg.mcmc.sv_block_size == 0 {
        return Err(invalid("sv_block_size must be >= 1"));
    }
    if !(cfg.tau0_sq > 0.0 && cfg.tau0_sq.is_finite()) {
        return Err(invalid("tau0_sq must be positive"));
    }
    cfg.priors.validate(cfg.p)
}

/// Checks a configuration against a dataset and materializes the skewness mask.
pub fn validate_config(cfg: &ModelConfig, data: &Dataset) -> Result<CheckedConfig> {
    check_dims(cfg)?;
    if data.k() != cfg.k {
        return Err(Error::DimensionMismatch(format!(
            "config has k = {} but data has {} series",
            cfg.k,
            data.k()
        )));
    }
    Ok(CheckedConfig { cfg: cfg.clone(), beta_free: cfg.variant.beta_mask(cfg.k, cfg.p) })
}

/// Validation without a dataset (used by the simulator and forecasting).
pub fn validate_config_shape(cfg: &ModelConfig) -> Result<CheckedConfig> {
    check_dims(cfg)?;
    Ok(CheckedConfig { cfg: cfg.clone(), beta_free: cfg.variant.beta_mask(cfg.k, cfg.p) })
}

/// Parameters of one univariate SV-with-leverage series.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawSeriesParams"))]
pub struct SeriesParams {
    pub mu: f64,
    pub phi: f64,
    pub sigma: f64,
    pub rho: f64,
    pub nu: f64,
    pub beta: f64,
    #[cfg_attr(feature = "serde", serde(skip))]
    c: f64,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawSeriesParams {
    mu: f64,
    phi: f64,
    sigma: f64,
    rho: f64,
    nu: f64,
    beta: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<RawSeriesParams> for SeriesParams {
    type Error = Error;

    fn try_from(r: RawSeriesParams) -> Result<Self> {
        Self::new(r.mu, r.phi, r.sigma, r.rho, r.nu, r.beta)
    }
}

impl SeriesParams {
    pub fn new(mu: f64, phi: f64, sigma: f64, rho: f64, nu: f64, beta: f64) -> Result<Self> {
        let s = Self { mu, phi, sigma, rho, nu, beta, c: nu / (nu - 2.0) };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || !self.beta.is_finite() {
            return Err(invalid("mu and beta must be finite"));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(invalid(format!("|phi| must be < 1, got {}", self.phi)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(invalid(format!("|rho| must be < 1, got {}", self.rho)));
        }
        if !(self.nu > 4.0) {
            return Err(invalid(format!("nu must be > 4, got {}", self.nu)));
        }
        Ok(())
    }

    /// `E(z) = nu / (nu - 2)`.
    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn set_nu(&mut self, nu: f64) {
        self.nu = nu;
        self.c = nu / (nu - 2.0);
    }

    /// Restores `c` after deserialization.
    pub fn refresh_c(&mut self) {
        self.c = self.nu / (self.nu - 2.0);
    }

    /// Stationary variance of the log-volatility process.
    pub fn stationary_var(&self) -> f64 {
        self.sigma * self.sigma / (1.0 - self.phi * self.phi)
    }
}

/// `k x p` loading matrix in lower-triangular identified form: unit diagonal
/// and zeros above it in the first `p` rows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawLoadingMatrix"))]
pub struct LoadingMatrix {
    k: usize,
    p: usize,
    /// Row-major entries.
    entries: Vec<f64>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawLoadingMatrix {
    k: usize,
    p: usize,
    entries: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawLoadingMatrix> for LoadingMatrix {
    type Error = Error;

    fn try_from(r: RawLoadingMatrix) -> Result<Self> {
        Self::from_rows(r.k, r.p, r.entries)
    }
}

impl LoadingMatrix {
    /// Identified matrix with all free entries at zero.
    pub fn identified(k: usize, p: usize) -> Self {
        let mut entries = vec![0.0; k * p];
        for i in 0..p.min(k) {
            entries[i * p + i] = 1.0;
        }
        Self { k, p, entries }
    }

    /// Builds from row-major entries; fails unless the identification holds.
    pub fn from_rows(k: usize, p: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != k * p {
            return Err(Error::DimensionMismatch(format!("expected {} loadings", k * p)));
        }
        let b = Self { k, p, entries };
        b.validate()?;
        Ok(b)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.p..(i + 1) * self.p]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Number of free entries in row `i` (zero-based): `min(i, p)`.
    pub fn free_in_row(&self, i: usize) -> usize {
        i.min(self.p)
    }

    pub fn is_free(&self, i: usize, j: usize) -> bool {
        j < self.free_in_row(i)
    }

    /// Sets a free entry; fixed entries are rejected.
    pub fn set_free(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if i >= self.k || j >= self.p {
            return Err(Error::IndexOutOfRange { index: i * self.p + j, len: self.k * self.p });
        }
        if !self.is_free(i, j) {
            return Err(invalid(format!("loading B[{},{}] is fixed by identification", i + 1, j + 1)));
        }
        self.entries[i * self.p + j] = v;
        Ok(())
    }

    /// `(i, j)` pairs of free entries, row by row.
    pub fn free_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.k).flat_map(move |i| (0..self.free_in_row(i)).map(move |j| (i, j)))
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.k {
            for j in 0..self.p {
                let v = self.get(i, j);
                if i < self.p && j == i && v != 1.0 {
                    return Err(invalid(format!("B[{},{}] must be 1", i + 1, j + 1)));
                }
                if i < self.p && j > i && v != 0.0 {
                    return Err(invalid(format!("B[{},{}] must be 0", i + 1, j + 1)));
                }
                if !v.is_finite() {
                    return Err(invalid(format!("B[{},{}] is not finite", i + 1, j + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.p, &self.entries)
    }

    /// `B_(i) f` for a factor vector `f`.
    #[inline]
    pub fn row_dot(&self, i: usize, f: &[f64]) -> f64 {
        self.row(i).iter().zip(f).map(|(b, x)| b * x).sum()
    }
}

/// Latent paths: `h` and `z` for all `q` series, `f` for the `p` factors.
/// Stored per series, each of length `T`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatentState {
    pub h: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
}

impl LatentState {
    pub fn validate(&self, k: usize, p: usize, t_len: usize) -> Result<()> {
        let q = k + p;
        if self.h.len() != q || self.z.len() != q || self.f.len() != p {
            return Err(Error::DimensionMismatch("latent state series counts".into()));
        }
        if self.h.iter().chain(&self.z).chain(&self.f).any(|v| v.len() != t_len) {
            return Err(Error::DimensionMismatch("latent path lengths".into()));
        }
        if self.z.iter().flatten().any(|z| !(*z > 0.0)) {
            return Err(invalid("mixing variables must be positive"));
        }
        Ok(())
    }

    /// Factor vector at time `t`.
    pub fn factor_at(&self, t: usize) -> Vec<f64> {
        self.f.iter().map(|fj| fj[t]).collect()
    }
}

/// Observed returns, `T x k`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub dates: Vec<String>,
    returns: Vec<f64>,
    k: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, dates: Vec<String>, returns: Vec<f64>) -> Result<Self> {
        let k = names.len();
        if k == 0 {
            return Err(invalid("dataset needs at least one series"));
        }
        if returns.len() != dates.len() * k {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} dates x {k} series",
                returns.len(),
                dates.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::InsufficientData("need T >= 2 observations".into()));
        }
        if let Some(pos) = returns.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("missing or non-finite value at row {}, column {}", pos / k + 1, pos % k + 1)));
        }
        Ok(Self { names, dates, returns, k })
    }

    /// Dataset with generated names and dates from per-series columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let t_len = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != t_len) {
            return Err(Error::DimensionMismatch("columns must have equal length".into()));
        }
        let mut returns = Vec::with_capacity(t_len * k);
        for t in 0..t_len {
            for c in columns {
                returns.push(c[t]);
            }
        }
        let names = (1..=k).map(|i| format!("Y{i}")).collect();
        let dates = (1..=t_len).map(|t| format!("t{t:05}")).collect();
        Self::new(names, dates, returns)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_len(&self) -> usize {
        self.dates.len()
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.returns[t * self.k + i]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.returns[t * self.k..(t + 1) * self.k]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.t_len()).map(|t| self.get(t, i)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.k).map(|i| self.column(i)).collect()
    }

    /// First `t_len` observations.
    pub fn head(&self, t_len: usize) -> Result<Self> {
        let t_len = t_len.min(self.t_len());
        Self::new(
            self.names.clone(),
            self.dates[..t_len].to_vec(),
            self.returns[..t_len * self.k].to_vec(),
        )
    }

    /// Subtracts the column means computed over the first `window` rows.
    pub fn demean_with_window(&mut self, window: usize) {
        let w = window.clamp(1, self.t_len());
        for i in 0..self.k {
            let m = (0..w).map(|t| self.get(t, i)).sum::<f64>() / w as f64;
            for t in 0..self.t_len() {
                self.returns[t * self.k + i] -= m;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.returns {
            *v *= factor;
        }
    }

    /// Series in a new order.
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.k {
            return Err(Error::DimensionMismatch("order must list every series".into()));
        }
        let names = order.iter().map(|&i| self.names[i].clone()).collect();
        let mut returns = Vec::with_capacity(self.returns.len());
        for t in 0..self.t_len() {
            for &i in order {
                returns.push(self.get(t, i));
            }
        }
        Self::new(names, self.dates.clone(), returns)
    }
}

/// Pseudo-observations of series `i` (zero-based) given loadings and factors:
/// `y_i - B_(i) f` for an idiosyncratic index, the factor path itself otherwise.
pub fn residual_series(y: &Dataset, b: &LoadingMatrix, f: &[Vec<f64>], i: usize) -> Result<Vec<f64>> {
    let k = y.k();
    let p = b.p();
    if i >= k + p {
        return Err(Error::IndexOutOfRange { index: i, len: k + p });
    }
    if f.len() != p || f.iter().any(|fj| fj.len() != y.t_len()) {
        return Err(Error::DimensionMismatch("factor paths must be p x T".into()));
    }
    if i >= k {
        return Ok(f[i - k].clone());
    }
    let row = b.row(i);
    Ok((0..y.t_len())
        .map(|t| y.get(t, i) - row.iter().zip(f).map(|(bij, fj)| bij * fj[t]).sum::<f64>())
        .collect())
}

/// `Sigma_t = B Psi_t B' + Lambda_t` for one time point's log-variances `h`
/// (length `q`, idiosyncratic first).
pub fn implied_covariance(b: &LoadingMatrix, h: &[f64]) -> DMatrix<f64> {
    let (k, p) = (b.k(), b.p());
    let bm = b.to_matrix();
    let psi = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(p, (0..p).map(|j| h[k + j].exp())));
    let mut s = &bm * psi * bm.transpose();
    for i in 0..k {
        s[(i, i)] += h[i].exp();
    }
    s
}

/// Series ranked by the row sums of the sample correlation matrix, most
/// correlated first. The first `p` entries are natural factor founders.
pub fn rank_by_correlation(data: &Dataset) -> Vec<usize> {
    let k = data.k();
    let t_len = data.t_len() as f64;
    let cols = data.columns();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / t_len).collect();
    let sds: Vec<f64> = cols
        .iter()
        .zip(&means)
        .map(|(c, m)| (c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / t_len).sqrt())
        .collect();
    let mut sums = vec![0.0; k];
    for a in 0..k {
        for b in 0..k {
            let cov = cols[a]
                .iter()
                .zip(&cols[b])
                .map(|(x, y)| (x - means[a]) * (y - means[b]))
                .sum::<f64>()
                / t_len;
            let denom = sds[a] * sds[b];
            sums[a] += if denom > 0.0 { cov / denom } else { 0.0 };
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sums[b].partial_cmp(&sums[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(k: usize, t_len: usize) -> Dataset {
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..t_len).map(|t| ((t * (i + 3)) % 7) as f64 * 0.01 - 0.03).collect())
            .collect();
        Dataset::from_columns(&cols).unwrap()
    }

    #[test]
    fn s0_masks_everything() {
        let cfg = ModelConfig::new(5, 1, Variant::S0);
        let c = validate_config(&cfg, &toy(5, 10)).unwrap();
        assert_eq!(c.beta_free, vec![false; 6]);
    }

    #[test]
    fn sf_frees_only_the_factor() {
        let cfg = ModelConfig::new(5, 1, Variant::SF);
        let c = validate_config(&cfg, &toy(5, 10)).unwrap();
        assert_eq!(c.beta_free, vec![false, false, false, false, false, true]);
        let sy = Variant::SY.beta_mask(5, 1);
        assert_eq!(sy, vec![true, true, true, true, true, false]);
    }

    #[test]
    fn p_must_be_below_k() {
        let cfg = ModelConfig::new(5, 5, Variant::SSYF);
        let err = validate_config(&cfg, &toy(5, 10)).unwrap_err();
        assert_eq!(err, Error::FactorCount { p: 5, k: 5 });
        assert!(alloc::string::ToString::to_string(&err).contains("p must be < k"));
    }

    #[test]
    fn config_rejects_bad_priors_and_shapes() {
        let mut cfg = ModelConfig::new(3, 1, Variant::SSYF);
        assert!(matches!(validate_config(&cfg, &toy(4, 10)), Err(Error::DimensionMismatch(_))));
        cfg.priors.nu_rate = 0.0;
        assert!(validate_config(&cfg, &toy(3, 10)).is_err());
        let mut cfg = ModelConfig::new(3, 1, Variant::SSYF);
        cfg.tau0_sq = -1.0;
        assert!(validate_config(&cfg, &toy(3, 10)).is_err());
        let mut cfg = ModelConfig::new(3, 1, Variant::SSYF);
        cfg.mcmc.thin = 0;
        assert!(validate_config(&cfg, &toy(3, 10)).is_err());
    }

    #[test]
    fn residual_series_cases() {
        // k = 2, p = 1, B = (1, 0.5)', f_t = 2, y_2t = 3 -> 2.
        let data = Dataset::from_columns(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        let b = LoadingMatrix::from_rows(2, 1, vec![1.0, 0.5]).unwrap();
        let f = vec![vec![2.0, 2.0]];
        assert_eq!(residual_series(&data, &b, &f, 1).unwrap(), vec![2.0, 2.0]);
        assert_eq!(residual_series(&data, &b, &f, 2).unwrap(), f[0]);
        let zero = LoadingMatrix { k: 2, p: 1, entries: vec![0.0, 0.0] };
        assert_eq!(residual_series(&data, &zero, &f, 1).unwrap(), data.column(1));
        assert!(matches!(
            residual_series(&data, &b, &f, 3),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn identification_is_enforced() {
        let mut b = LoadingMatrix::identified(4, 2);
        assert!(b.set_free(0, 0, 2.0).is_err());
        assert!(b.set_free(0, 1, 2.0).is_err());
        assert!(b.set_free(1, 0, 0.3).is_ok());
        assert!(b.set_free(1, 1, 0.3).is_err());
        assert!(b.set_free(3, 1, 0.7).is_ok());
        let free: Vec<_> = b.free_indices().collect();
        assert_eq!(free, vec![(1, 0), (2, 0), (2, 1), (3, 0), (3, 1)]);
        assert!(LoadingMatrix::from_rows(2, 1, vec![0.9, 0.5]).is_err());
    }

    #[test]
    fn series_params_recompute_c() {
        let mut s = SeriesParams::new(-10.0, 0.9, 0.1, -0.3, 8.0, -1.0).unwrap();
        assert_eq!(s.c(), 8.0 / 6.0);
        s.set_nu(10.0);
        assert_eq!(s.c(), 10.0 / 8.0);
        assert!(SeriesParams::new(-10.0, 1.0, 0.1, 0.0, 8.0, 0.0).is_err());
        assert!(SeriesParams::new(-10.0, 0.5, 0.1, 0.0, 4.0, 0.0).is_err());
    }

    #[test]
    fn correlation_ranking_prefers_common_driver() {
        let mut rng = crate::rng::stream(3, crate::rng::Purpose::Misc, 0, 0);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| crate::dist::draw_standard_normal(&mut rng)).collect() };
        let common = draw(400);
        let (n0, n1, n2) = (draw(400), draw(400), draw(400));
        let cols = vec![
            n0,
            common.iter().zip(&n1).map(|(c, n)| c + 0.1 * n).collect(),
            common.iter().zip(&n2).map(|(c, n)| c + 2.0 * n).collect(),
        ];
        let d = Dataset::from_columns(&cols).unwrap();
        assert_eq!(rank_by_correlation(&d), vec![1, 2, 0]);
    }
}
