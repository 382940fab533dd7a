//! Synthetic data from the skew FSV data-generating process.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::dist::{self, draw_standard_normal};
use crate::engine::Executor;
use crate::error::{Error, Result};
use crate::model::{CheckedConfig, Dataset, LatentState, LoadingMatrix, SeriesParams};
use crate::rng::{stream, Purpose};

#[allow(unused_imports)]
use num_traits::Float;

/// Parameters that generate a dataset.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrueParams {
    /// `q = k + p` series, idiosyncratic first.
    pub series: Vec<SeriesParams>,
    pub loadings: LoadingMatrix,
}

impl TrueParams {
    pub fn k(&self) -> usize {
        self.loadings.k()
    }

    pub fn p(&self) -> usize {
        self.loadings.p()
    }

    /// The benchmark design: `phi = 0.995`, `sigma = 0.05`, `rho = -0.5`,
    /// `nu = 8`, `mu = -11` for idiosyncratic and `-10` for factor series,
    /// free loadings drawn from `U[0.5, 1.5]`.
    pub fn benchmark<R: Rng + ?Sized>(k: usize, p: usize, beta: &[f64], rng: &mut R) -> Result<Self> {
        if beta.len() != k + p {
            return Err(Error::DimensionMismatch(format!("expected {} skewness values", k + p)));
        }
        if p == 0 || p >= k {
            return Err(Error::FactorCount { p, k });
        }
        let series = beta
            .iter()
            .enumerate()
            .map(|(i, b)| SeriesParams::new(if i < k { -11.0 } else { -10.0 }, 0.995, 0.05, -0.5, 8.0, *b))
            .collect::<Result<Vec<_>>>()?;
        let mut loadings = LoadingMatrix::identified(k, p);
        let free: Vec<(usize, usize)> = loadings.free_indices().collect();
        for (i, j) in free {
            loadings.set_free(i, j, 0.5 + rng.random::<f64>())?;
        }
        Ok(Self { series, loadings })
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.len() != self.k() + self.p() {
            return Err(Error::DimensionMismatch("series parameter count must equal k + p".into()));
        }
        for s in &self.series {
            s.validate()?;
        }
        self.loadings.validate()
    }
}

/// Draws a full parameter set from the prior of a checked configuration.
/// Returns the parameters and `kappa`.
pub fn draw_prior_params<R: Rng + ?Sized>(checked: &CheckedConfig, rng: &mut R) -> Result<(TrueParams, f64)> {
    let cfg = &checked.cfg;
    let pr = &cfg.priors;
    let (k, p) = (cfg.k, cfg.p);
    let kappa = if cfg.variant.samples_kappa() { dist::draw_beta(pr.kappa_beta_a, pr.kappa_beta_b, rng)? } else { 1.0 };
    let open = |x: f64| x.clamp(-1.0 + 1e-12, 1.0 - 1e-12);
    let mut series = Vec::with_capacity(k + p);
    for i in 0..k + p {
        let mu = pr.mu_mean + pr.mu_var.sqrt() * draw_standard_normal(rng);
        let phi = open(2.0 * dist::draw_beta(pr.phi_beta_a, pr.phi_beta_b, rng)? - 1.0);
        let sigma = 1.0 / dist::draw_gamma(pr.sigma_inv2_shape, pr.sigma_inv2_rate_eff(), rng)?.sqrt();
        let rho = open(2.0 * dist::draw_beta(pr.rho_beta_a, pr.rho_beta_b, rng)? - 1.0);
        let nu = dist::draw_truncated_gamma(pr.nu_shape, pr.nu_rate_eff(), 4.0, rng)?;
        let beta = if checked.beta_free[i] && rng.random::<f64>() < kappa {
            cfg.tau0_sq.sqrt() * draw_standard_normal(rng)
        } else {
            0.0
        };
        series.push(SeriesParams::new(mu, phi, sigma, rho, nu, beta)?);
    }
    let mut loadings = LoadingMatrix::identified(k, p);
    for i in 0..k {
        let r = i.min(p);
        if r == 0 {
            continue;
        }
        let (b0, w0) = pr.loading_prior(r);
        let draw = dist::draw_multivariate_normal(&nalgebra::DVector::from_column_slice(&b0), &w0, rng)?;
        for j in 0..r {
            loadings.set_free(i, j, draw[j])?;
        }
    }
    Ok((TrueParams { series, loadings }, kappa))
}

/// Shocks `e^{h_t/2} w_t` of one series with their latent `h` and `z` paths.
pub fn simulate_series<R: Rng + ?Sized>(p: &SeriesParams, t_len: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut h = Vec::with_capacity(t_len);
    let mut z = Vec::with_capacity(t_len);
    let mut x = Vec::with_capacity(t_len);
    let c = p.c();
    let cond_sd = p.sigma * (1.0 - p.rho * p.rho).sqrt();
    let mut ht = p.mu + p.stationary_var().sqrt() * draw_standard_normal(rng);
    for _ in 0..t_len {
        let zt = dist::inverse_gamma_unchecked(0.5 * p.nu, 0.5 * p.nu, rng);
        let eps = draw_standard_normal(rng);
        let eta = p.rho * p.sigma * eps + cond_sd * draw_standard_normal(rng);
        h.push(ht);
        z.push(zt);
        x.push((0.5 * ht).exp() * (p.beta * (zt - c) + zt.sqrt() * eps));
        ht = p.mu + p.phi * (ht - p.mu) + eta;
    }
    (x, h, z)
}

/// Forward-simulates `T` observations; series `i` uses its own stream
/// derived from `seed`.
pub fn simulate(truth: &TrueParams, t_len: usize, seed: u64) -> Result<(Dataset, LatentState)> {
    truth.validate()?;
    if t_len < 2 {
        return Err(Error::InsufficientData("need T >= 2 observations".into()));
    }
    let (k, p) = (truth.k(), truth.p());
    let mut shocks = Vec::with_capacity(k + p);
    let mut hs = Vec::with_capacity(k + p);
    let mut zs = Vec::with_capacity(k + p);
    for (i, sp) in truth.series.iter().enumerate() {
        let mut rng = stream(seed, Purpose::Simulate, 0, i as u64);
        let (x, h, z) = simulate_series(sp, t_len, &mut rng);
        shocks.push(x);
        hs.push(h);
        zs.push(z);
    }
    let f: Vec<Vec<f64>> = shocks[k..].to_vec();
    let mut returns = Vec::with_capacity(t_len * k);
    for t in 0..t_len {
        let ft: Vec<f64> = f.iter().map(|fj| fj[t]).collect();
        for i in 0..k {
            returns.push(truth.loadings.row_dot(i, &ft) + shocks[i][t]);
        }
    }
    let names = (1..=k).map(|i| format!("Y{i}")).collect();
    let dates = (1..=t_len).map(|t| format!("t{t:05}")).collect();
    let data = Dataset::new(names, dates, returns)?;
    Ok((data, LatentState { h: hs, z: zs, f }))
}

/// Adjusted Fisher-Pearson sample skewness `G1`.
pub fn sample_skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    if n < 3.0 {
        return f64::NAN;
    }
    let m = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in x {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    let g1 = m3 / m2.powf(1.5);
    g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
}

/// Sample excess-free kurtosis `m4 / m2^2`.
pub fn sample_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let d2 = (v - m) * (v - m);
        m2 += d2;
        m4 += d2 * d2;
    }
    (m4 / n) / ((m2 / n) * (m2 / n))
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = prob.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median with 50% and 90% bands.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bands {
    pub median: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Bands {
    pub fn from_values(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        Self {
            median: quantile(&v, 0.5),
            q05: quantile(&v, 0.05),
            q25: quantile(&v, 0.25),
            q75: quantile(&v, 0.75),
            q95: quantile(&v, 0.95),
        }
    }

    pub fn half_width_50(&self) -> f64 {
        0.5 * (self.q75 - self.q25)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SkewnessCase {
    pub label: String,
    pub beta: Vec<f64>,
    /// One entry per observed series.
    pub series: Vec<Bands>,
}

/// The four skewness configurations for `k = 3`, `p = 2`.
pub fn skewness_cases() -> Vec<(String, Vec<f64>)> {
    vec![
        ("(i)".into(), vec![-1.0, -1.0, -1.0, 0.0, 0.0]),
        ("(ii)".into(), vec![0.0, 0.0, 0.0, -1.0, 0.0]),
        ("(iii)".into(), vec![0.0, 0.0, 0.0, -1.0, -1.0]),
        ("(iv)".into(), vec![-1.0; 5]),
    ]
}

/// Per-series skewness bands across `n_rep` replicates for each case of
/// skewness parameters, using the benchmark design with `p = q - k` factors.
pub fn skewness_study<E: Executor>(
    k: usize,
    cases: &[(String, Vec<f64>)],
    n_rep: usize,
    t_len: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<SkewnessCase>> {
    let mut out = Vec::with_capacity(cases.len());
    for (ci, (label, beta)) in cases.iter().enumerate() {
        if beta.len() <= k {
            return Err(Error::DimensionMismatch(format!("case {label} needs more than {k} values")));
        }
        let p = beta.len() - k;
        let reps: Vec<Result<Vec<f64>>> = exec.map(n_rep, |r| {
            let mut rng = stream(seed, Purpose::Simulate, ci as u64 + 1, r as u64);
            let truth = TrueParams::benchmark(k, p, beta, &mut rng)?;
            let (data, _) = simulate(&truth, t_len, rng.next_u64())?;
            Ok((0..k).map(|i| sample_skewness(&data.column(i))).collect())
        });
        let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
        let series = (0..k)
            .map(|i| Bands::from_values(&reps.iter().map(|r| r[i]).collect::<Vec<_>>()))
            .collect();
        out.push(SkewnessCase { label: label.clone(), beta: beta.clone(), series });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skewness_of_symmetric_sample_is_zero() {
        assert_eq!(sample_skewness(&[-1.0, 0.0, 1.0]), 0.0);
        assert!(sample_skewness(&[0.0, 0.0, 0.0, 10.0]) > 0.0);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn benchmark_rejects_wrong_length() {
        let mut rng = stream(1, Purpose::Misc, 0, 0);
        assert!(TrueParams::benchmark(3, 2, &[0.0; 4], &mut rng).is_err());
        let t = TrueParams::benchmark(3, 2, &[0.0; 5], &mut rng).unwrap();
        assert_eq!(t.loadings.get(1, 1), 1.0);
        assert!((0.5..1.5).contains(&t.loadings.get(2, 1)));
    }
}
