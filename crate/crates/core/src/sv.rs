//! Full conditional samplers for one univariate SV-with-leverage series.
//!
//! Given the pseudo-observations `y_t` of a series, the model is
//!
//! ```text
//! y_t     = { beta (z_t - c) + sqrt(z_t) eps_t } exp(h_t / 2)
//! h_{t+1} = mu + phi (h_t - mu) + eta_t,   h_1 ~ N(mu, sigma^2 / (1 - phi^2))
//! (eps_t, eta_t) ~ N(0, [[1, rho sigma], [rho sigma, sigma^2]]),  z_t ~ IG(nu/2, nu/2)
//! ```
//!
//! The last observation has no `eta_T`, so `eps_T` enters through its N(0, 1)
//! marginal. Conditional on `eta_t`, `y_t ~ N(alpha_t, sigma_hat_t^2)` with
//! `alpha_t = {beta (z_t - c) + sqrt(z_t) rho eta_t / sigma} e^{h_t/2}` and
//! `sigma_hat_t^2 = z_t (1 - rho^2) e^{h_t}`. Every kernel below leaves the
//! exact conditional posterior invariant.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::dist::{self, draw_standard_normal, ln_beta_pdf, ln_gamma_pdf, ln_normal};
use crate::error::{invalid, Result};
use crate::model::{PriorSet, SeriesParams};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const TARGET_ACCEPT: f64 = 0.3;
const MAX_SHRINKS: usize = 200;

/// Latent paths and parameters of one series, with the derived innovations
/// `eta_hat` (length `T - 1`) and conditional variances `sigma_hat_sq`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvSeriesState {
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub params: SeriesParams,
    pub eta_hat: Vec<f64>,
    pub sigma_hat_sq: Vec<f64>,
}

impl SvSeriesState {
    pub fn new(h: Vec<f64>, z: Vec<f64>, params: SeriesParams) -> Result<Self> {
        if h.len() != z.len() {
            return Err(invalid("h and z paths must have equal length"));
        }
        if z.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("mixing variables must be positive"));
        }
        params.validate()?;
        let mut s = Self { h, z, params, eta_hat: Vec::new(), sigma_hat_sq: Vec::new() };
        s.refresh();
        Ok(s)
    }

    pub fn t_len(&self) -> usize {
        self.h.len()
    }

    /// Recomputes `eta_hat` and `sigma_hat_sq` from `h`, `z` and the parameters.
    pub fn refresh(&mut self) {
        let n = self.h.len();
        let SeriesParams { mu, phi, rho, .. } = self.params;
        self.eta_hat.clear();
        self.eta_hat
            .extend((0..n.saturating_sub(1)).map(|t| (self.h[t + 1] - mu) - phi * (self.h[t] - mu)));
        self.sigma_hat_sq.clear();
        self.sigma_hat_sq.extend((0..n).map(|t| {
            let lev = if t + 1 < n { 1.0 - rho * rho } else { 1.0 };
            self.z[t] * lev * self.h[t].exp()
        }));
    }

    /// Conditional mean offsets `alpha_t`.
    pub fn offsets(&self) -> Vec<f64> {
        let n = self.h.len();
        let p = &self.params;
        (0..n)
            .map(|t| {
                let mut a = p.beta * (self.z[t] - p.c());
                if t + 1 < n {
                    a += self.z[t].sqrt() * p.rho * self.eta_hat[t] / p.sigma;
                }
                a * (0.5 * self.h[t]).exp()
            })
            .collect()
    }
}

/// Standardized return shocks `eps_t = (y_t e^{-h_t/2} - beta (z_t - c)) / sqrt(z_t)`.
pub fn standardized_shocks(y: &[f64], h: &[f64], z: &[f64], beta: f64, c: f64) -> Vec<f64> {
    y.iter()
        .zip(h)
        .zip(z)
        .map(|((y, h), z)| (y * (-0.5 * h).exp() - beta * (z - c)) / z.sqrt())
        .collect()
}

/// `log p(y, h | z, theta)` up to terms that depend on `z` alone.
fn log_lik_core(y: &[f64], h: &[f64], z: &[f64], p: &SeriesParams) -> f64 {
    let n = h.len();
    if n == 0 {
        return 0.0;
    }
    let s2 = p.sigma * p.sigma;
    let one_m = 1.0 - p.rho * p.rho;
    let cond_var = s2 * one_m;
    let mut acc = ln_normal(h[0], p.mu, s2 / (1.0 - p.phi * p.phi));
    let c = p.c();
    let half_ln_cond = 0.5 * cond_var.ln();
    for t in 0..n {
        let eps = (y[t] * (-0.5 * h[t]).exp() - p.beta * (z[t] - c)) / z[t].sqrt();
        acc += -0.5 * eps * eps - 0.5 * h[t];
        if t + 1 < n {
            let eta = (h[t + 1] - p.mu) - p.phi * (h[t] - p.mu);
            let d = eta - p.rho * p.sigma * eps;
            acc += -half_ln_cond - 0.5 * d * d / cond_var;
        }
    }
    acc
}

/// Complete log density `log p(y, h | z, theta)` of a series.
pub fn series_log_likelihood(y: &[f64], h: &[f64], z: &[f64], p: &SeriesParams) -> f64 {
    let n = h.len() as f64;
    let ln_z: f64 = z.iter().map(|v| v.ln()).sum();
    // One N(0,1) for each eps, one normalizing 2pi for each eta.
    log_lik_core(y, h, z, p) - 0.5 * ln_z - n * HALF_LN_2PI - (n - 1.0).max(0.0) * HALF_LN_2PI
}

/// Random-walk proposal scale adapted toward a fixed acceptance rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwScale {
    pub log_scale: f64,
    pub accepted: u64,
    pub proposed: u64,
}

impl RwScale {
    pub fn new(scale: f64) -> Self {
        Self { log_scale: scale.ln(), accepted: 0, proposed: 0 }
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn record(&mut self, log_ratio: f64, accepted: bool, adapt: Option<usize>) {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
        if let Some(n) = adapt {
            let a = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            let gain = 1.0 / (1.0 + n as f64).powf(0.6);
            self.log_scale = (self.log_scale + gain * (a - TARGET_ACCEPT)).clamp(-12.0, 3.0);
        }
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Adaptive proposal scales and acceptance counters for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTuning {
    pub phi: RwScale,
    pub sigma_rho: RwScale,
    pub nu: RwScale,
    /// Joint shift of `mu` and the whole `h` path.
    pub level: RwScale,
    /// Joint rescaling of `sigma` and the `h` deviations from `mu`.
    pub spread: RwScale,
    pub z_accepted: u64,
    pub z_proposed: u64,
    pub h_shrinks: u64,
    pub h_blocks: u64,
}

impl Default for SeriesTuning {
    fn default() -> Self {
        Self {
            phi: RwScale::new(0.2),
            sigma_rho: RwScale::new(0.15),
            nu: RwScale::new(0.3),
            level: RwScale::new(0.1),
            spread: RwScale::new(0.1),
            z_accepted: 0,
            z_proposed: 0,
            h_shrinks: 0,
            h_blocks: 0,
        }
    }
}

impl SeriesTuning {
    pub fn reset_counts(&mut self) {
        for s in [&mut self.phi, &mut self.sigma_rho, &mut self.nu, &mut self.level, &mut self.spread] {
            s.reset_counts();
        }
        self.z_accepted = 0;
        self.z_proposed = 0;
        self.h_shrinks = 0;
        self.h_blocks = 0;
    }

    pub fn z_rate(&self) -> f64 {
        if self.z_proposed == 0 {
            0.0
        } else {
            self.z_accepted as f64 / self.z_proposed as f64
        }
    }
}

#[inline]
fn mh_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

// ---------------------------------------------------------------------------
// h path

/// Per-site constants of the measurement terms `log N(y_t; alpha_t, sigma_hat_t^2)`
/// (dropping parts constant in `h`).
struct MeasurementTerms<'a> {
    y: &'a [f64],
    kz: Vec<f64>,
    lev_sqz: Vec<f64>,
    half_inv_var: Vec<f64>,
    mu: f64,
    phi: f64,
}

impl<'a> MeasurementTerms<'a> {
    fn new(y: &'a [f64], z: &[f64], p: &SeriesParams) -> Self {
        let n = y.len();
        let one_m = 1.0 - p.rho * p.rho;
        let lev = p.rho / p.sigma;
        Self {
            y,
            kz: z.iter().map(|z| p.beta * (z - p.c())).collect(),
            lev_sqz: z.iter().map(|z| lev * z.sqrt()).collect(),
            half_inv_var: (0..n)
                .map(|t| 0.5 / (z[t] * if t + 1 < n { one_m } else { 1.0 }))
                .collect(),
            mu: p.mu,
            phi: p.phi,
        }
    }

    /// Site term at `t` given `h_t` and, unless `t` is the last index, `h_{t+1}`.
    #[inline]
    fn site(&self, t: usize, ht: f64, hnext: Option<f64>) -> f64 {
        let mut r = self.y[t] * (-0.5 * ht).exp() - self.kz[t];
        if let Some(hn) = hnext {
            let eta = (hn - self.mu) - self.phi * (ht - self.mu);
            r -= self.lev_sqz[t] * eta;
        }
        -0.5 * ht - r * r * self.half_inv_var[t]
    }

    /// Sum of the site terms touching `h[a..=b]`.
    fn block(&self, h: &[f64], a: usize, b: usize) -> f64 {
        let n = h.len();
        let start = a.saturating_sub(1);
        let mut acc = 0.0;
        for t in start..=b {
            let next = if t + 1 < n { Some(h[t + 1]) } else { None };
            acc += self.site(t, h[t], next);
        }
        acc
    }
}

/// Draws the block deviations and conditional mean of `h[a..=b]` under the
/// AR(1) prior given `h[a-1]` and `h[b+1]`. Returns `(mean, draw - mean)`.
fn bridge_prior<R: Rng + ?Sized>(
    h: &[f64],
    a: usize,
    b: usize,
    p: &SeriesParams,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let len = b - a + 1;
    let phi = p.phi;
    let phi2 = phi * phi;
    // Precision scaled by sigma^2: tridiagonal with -phi off the diagonal.
    let diag = |t: usize| -> f64 {
        if n == 1 {
            1.0 - phi2
        } else if t == 0 || t == n - 1 {
            1.0
        } else {
            1.0 + phi2
        }
    };
    let mut d = vec![0.0; len];
    let mut l = vec![0.0; len];
    for i in 0..len {
        let q = diag(a + i);
        if i == 0 {
            d[0] = q.sqrt();
        } else {
            l[i] = -phi / d[i - 1];
            d[i] = (q - l[i] * l[i]).sqrt();
        }
    }
    let mut rhs = vec![0.0; len];
    if a > 0 {
        rhs[0] += phi * (h[a - 1] - p.mu);
    }
    if b + 1 < n {
        rhs[len - 1] += phi * (h[b + 1] - p.mu);
    }
    // Forward then backward substitution for the mean.
    let mut w = vec![0.0; len];
    for i in 0..len {
        let prev = if i > 0 { l[i] * w[i - 1] } else { 0.0 };
        w[i] = (rhs[i] - prev) / d[i];
    }
    let mut mean = vec![0.0; len];
    for i in (0..len).rev() {
        let next = if i + 1 < len { l[i + 1] * mean[i + 1] } else { 0.0 };
        mean[i] = (w[i] - next) / d[i];
    }
    for m in &mut mean {
        *m += p.mu;
    }
    let mut dev = vec![0.0; len];
    for i in (0..len).rev() {
        let e = draw_standard_normal(rng);
        let next = if i + 1 < len { l[i + 1] * dev[i + 1] } else { 0.0 };
        dev[i] = (e - next) / d[i];
    }
    for v in &mut dev {
        *v *= p.sigma;
    }
    (mean, dev)
}

/// Updates the log-volatility path by elliptical slice sampling on blocks of
/// about `block_size` sites with random boundaries. Each block move uses the
/// AR(1) bridge prior conditional on the neighbouring sites, so it leaves
/// `p(h | y, z, theta)` invariant. Returns the number of shrink steps.
pub fn sample_h_path<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut SvSeriesState,
    block_size: usize,
    rng: &mut R,
) -> u64 {
    let n = state.t_len();
    if n == 0 {
        return 0;
    }
    let block_size = block_size.max(1);
    let terms = MeasurementTerms::new(y, &state.z, &state.params);
    let mut work = state.h.clone();
    let mut shrinks = 0u64;
    let offset = if n > block_size { rng.random_range(0..block_size) } else { 0 };
    let mut a = 0;
    while a < n {
        let b = if a == 0 && offset > 0 { offset - 1 } else { (a + block_size - 1).min(n - 1) };
        shrinks += slice_block(&terms, &mut state.h, &mut work, a, b, &state.params, rng);
        a = b + 1;
    }
    state.refresh();
    shrinks
}

fn slice_block<R: Rng + ?Sized>(
    terms: &MeasurementTerms<'_>,
    h: &mut [f64],
    work: &mut [f64],
    a: usize,
    b: usize,
    p: &SeriesParams,
    rng: &mut R,
) -> u64 {
    let (mean, nu) = bridge_prior(h, a, b, p, rng);
    let cur: Vec<f64> = (a..=b).map(|t| h[t] - mean[t - a]).collect();
    let ll_cur = terms.block(h, a, b);
    let threshold = ll_cur + rng.random::<f64>().ln();
    let mut theta = rng.random::<f64>() * 2.0 * PI;
    let (mut lo, mut hi) = (theta - 2.0 * PI, theta);
    for shrink in 0..MAX_SHRINKS {
        let (s, c) = theta.sin_cos();
        for i in 0..cur.len() {
            work[a + i] = mean[i] + cur[i] * c + nu[i] * s;
        }
        let ll = terms.block(work, a, b);
        if ll.is_finite() && ll > threshold {
            h[a..=b].copy_from_slice(&work[a..=b]);
            return shrink as u64;
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
    // Bracket collapsed onto the current point.
    work[a..=b].copy_from_slice(&h[a..=b]);
    MAX_SHRINKS as u64
}

// ---------------------------------------------------------------------------
// z path

/// Updates every `z_t` by Metropolis-Hastings with an inverse-gamma proposal
/// collecting all `x^{-a-1} e^{-b/x}` factors of the conditional; the residual
/// factor goes into the acceptance ratio. Returns the number of acceptances.
pub fn sample_z_path<R: Rng + ?Sized>(y: &[f64], state: &mut SvSeriesState, rng: &mut R) -> u64 {
    let n = state.t_len();
    let p = state.params;
    let shape = 0.5 * (p.nu + 1.0);
    let one_m = 1.0 - p.rho * p.rho;
    let mut accepted = 0;
    for t in 0..n {
        let u = y[t] * (-0.5 * state.h[t]).exp();
        let v = u + p.beta * p.c();
        let (a, s2) = if t + 1 < n { (p.rho * state.eta_hat[t] / p.sigma, one_m) } else { (0.0, 1.0) };
        let scale = 0.5 * p.nu + 0.5 * v * v / s2;
        let rest = |z: f64| -> f64 {
            let sq = z.sqrt();
            (-0.5 * p.beta * p.beta * z + v * a / sq - p.beta * a * sq) / s2
        };
        let prop = dist::inverse_gamma_unchecked(shape, scale, rng);
        if !(prop > 0.0 && prop.is_finite()) {
            continue;
        }
        let log_ratio = rest(prop) - rest(state.z[t]);
        if mh_accept(log_ratio, rng) {
            state.z[t] = prop;
            accepted += 1;
        }
    }
    state.refresh();
    accepted
}

/// MH acceptance probability of a z proposal, for inspection in tests.
pub fn z_acceptance_log_ratio(y_t: f64, h_t: f64, eta_t: Option<f64>, p: &SeriesParams, z_new: f64, z_old: f64) -> f64 {
    let u = y_t * (-0.5 * h_t).exp();
    let v = u + p.beta * p.c();
    let (a, s2) = match eta_t {
        Some(e) => (p.rho * e / p.sigma, 1.0 - p.rho * p.rho),
        None => (0.0, 1.0),
    };
    let rest = |z: f64| (-0.5 * p.beta * p.beta * z + v * a / z.sqrt() - p.beta * a * z.sqrt()) / s2;
    rest(z_new) - rest(z_old)
}

// ---------------------------------------------------------------------------
// parameters

/// Exact Gibbs draw of `mu` given the path, shocks and the other parameters.
pub fn sample_mu<R: Rng + ?Sized>(y: &[f64], state: &mut SvSeriesState, prior: &PriorSet, rng: &mut R) {
    let (mean, var) = mu_conditional(y, state, prior);
    state.params.mu = mean + var.sqrt() * draw_standard_normal(rng);
    state.refresh();
}

/// Mean and variance of the normal full conditional of `mu`.
pub fn mu_conditional(y: &[f64], state: &SvSeriesState, prior: &PriorSet) -> (f64, f64) {
    let n = state.t_len();
    let p = &state.params;
    let mut prec = 1.0 / prior.mu_var;
    let mut num = prior.mu_mean / prior.mu_var;
    if n > 0 {
        let s2 = p.sigma * p.sigma;
        let stat = (1.0 - p.phi * p.phi) / s2;
        prec += stat;
        num += stat * state.h[0];
    }
    if n > 1 {
        let eps = standardized_shocks(y, &state.h, &state.z, p.beta, p.c());
        let cond_var = p.sigma * p.sigma * (1.0 - p.rho * p.rho);
        let om = 1.0 - p.phi;
        let mut s = 0.0;
        for t in 0..n - 1 {
            s += state.h[t + 1] - p.phi * state.h[t] - p.rho * p.sigma * eps[t];
        }
        prec += (n - 1) as f64 * om * om / cond_var;
        num += om * s / cond_var;
    }
    (num / prec, 1.0 / prec)
}

/// Log density of the `sigma` prior implied by `sigma^-2 ~ Gamma(shape, rate)`.
pub fn ln_sigma_prior(sigma: f64, prior: &PriorSet) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let prec = 1.0 / (sigma * sigma);
    ln_gamma_pdf(prec, prior.sigma_inv2_shape, prior.sigma_inv2_rate_eff()) + core::f64::consts::LN_2
        - 3.0 * sigma.ln()
}

pub fn ln_phi_prior(phi: f64, prior: &PriorSet) -> f64 {
    ln_beta_pdf(0.5 * (phi + 1.0), prior.phi_beta_a, prior.phi_beta_b) - core::f64::consts::LN_2
}

pub fn ln_rho_prior(rho: f64, prior: &PriorSet) -> f64 {
    ln_beta_pdf(0.5 * (rho + 1.0), prior.rho_beta_a, prior.rho_beta_b) - core::f64::consts::LN_2
}

pub fn ln_nu_prior(nu: f64, prior: &PriorSet) -> f64 {
    dist::ln_truncated_gamma_pdf(nu, prior.nu_shape, prior.nu_rate_eff(), 4.0)
}

/// Terms of `log p(h | eps, theta)` that involve `(mu, phi, sigma, rho)`.
fn ln_h_given_eps(h: &[f64], eps: &[f64], mu: f64, phi: f64, sigma: f64, rho: f64) -> f64 {
    let n = h.len();
    if n == 0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    let cond_var = s2 * (1.0 - rho * rho);
    let mut acc = ln_normal(h[0], mu, s2 / (1.0 - phi * phi));
    let mut q = 0.0;
    for t in 0..n - 1 {
        let d = (h[t + 1] - mu) - phi * (h[t] - mu) - rho * sigma * eps[t];
        q += d * d;
    }
    acc += -0.5 * (n - 1) as f64 * cond_var.ln() - 0.5 * q / cond_var;
    acc
}

fn atanh(x: f64) -> f64 {
    0.5 * ((1.0 + x) / (1.0 - x)).ln()
}

/// MH updates of `phi` (random walk on `atanh(phi)`) and of `(sigma, rho)`
/// jointly (random walk on `(log sigma, atanh rho)`).
pub fn sample_phi_sigma_rho<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut SvSeriesState,
    prior: &PriorSet,
    tune: &mut SeriesTuning,
    adapt: Option<usize>,
    rng: &mut R,
) {
    let eps = standardized_shocks(y, &state.h, &state.z, state.params.beta, state.params.c());
    let SeriesParams { mu, phi, sigma, rho, .. } = state.params;
    let target_phi = |phi: f64| -> f64 {
        if !(phi.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        ln_phi_prior(phi, prior) + ln_h_given_eps(&state.h, &eps, mu, phi, sigma, rho) + (1.0 - phi * phi).ln()
    };
    let prop = (atanh(phi) + tune.phi.scale() * draw_standard_normal(rng)).tanh();
    let log_ratio = target_phi(prop) - target_phi(phi);
    let acc = prop.abs() < 1.0 && mh_accept(log_ratio, rng);
    tune.phi.record(log_ratio, acc, adapt);
    let phi = if acc { prop } else { phi };
    state.params.phi = phi;

    let target_sr = |sigma: f64, rho: f64| -> f64 {
        if !(sigma > 0.0 && rho.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        ln_sigma_prior(sigma, prior)
            + sigma.ln()
            + ln_rho_prior(rho, prior)
            + (1.0 - rho * rho).ln()
            + ln_h_given_eps(&state.h, &eps, mu, phi, sigma, rho)
    };
    let sc = tune.sigma_rho.scale();
    let s_prop = sigma * (sc * draw_standard_normal(rng)).exp();
    let r_prop = (atanh(rho) + sc * draw_standard_normal(rng)).tanh();
    let log_ratio = target_sr(s_prop, r_prop) - target_sr(sigma, rho);
    let acc = s_prop > 0.0 && r_prop.abs() < 1.0 && mh_accept(log_ratio, rng);
    tune.sigma_rho.record(log_ratio, acc, adapt);
    if acc {
        state.params.sigma = s_prop;
        state.params.rho = r_prop;
    }
    state.refresh();
}

/// Joint move shifting `mu` and the whole path by a common amount.
pub fn sample_level_shift<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut SvSeriesState,
    prior: &PriorSet,
    tune: &mut SeriesTuning,
    adapt: Option<usize>,
    rng: &mut R,
) {
    let delta = tune.level.scale() * draw_standard_normal(rng);
    let mut p_new = state.params;
    p_new.mu += delta;
    let h_new: Vec<f64> = state.h.iter().map(|h| h + delta).collect();
    let log_ratio = log_lik_core(y, &h_new, &state.z, &p_new) - log_lik_core(y, &state.h, &state.z, &state.params)
        + ln_normal(p_new.mu, prior.mu_mean, prior.mu_var)
        - ln_normal(state.params.mu, prior.mu_mean, prior.mu_var);
    let acc = mh_accept(log_ratio, rng);
    tune.level.record(log_ratio, acc, adapt);
    if acc {
        state.h = h_new;
        state.params = p_new;
        state.refresh();
    }
}

/// Joint move rescaling `sigma` and the path deviations `h - mu` by a common
/// factor, with the Jacobian of the path map in the ratio.
pub fn sample_spread<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut SvSeriesState,
    prior: &PriorSet,
    tune: &mut SeriesTuning,
    adapt: Option<usize>,
    rng: &mut R,
) {
    let step = tune.spread.scale() * draw_standard_normal(rng);
    let factor = step.exp();
    let mut p_new = state.params;
    p_new.sigma *= factor;
    let mu = state.params.mu;
    let h_new: Vec<f64> = state.h.iter().map(|h| mu + (h - mu) * factor).collect();
    let n = state.t_len() as f64;
    let log_ratio = log_lik_core(y, &h_new, &state.z, &p_new) - log_lik_core(y, &state.h, &state.z, &state.params)
        + ln_sigma_prior(p_new.sigma, prior)
        - ln_sigma_prior(state.params.sigma, prior)
        + (n + 1.0) * step;
    let acc = mh_accept(log_ratio, rng);
    tune.spread.record(log_ratio, acc, adapt);
    if acc {
        state.h = h_new;
        state.params = p_new;
        state.refresh();
    }
}

/// MH update of `nu` by a random walk on `log(nu - 4)`.
pub fn sample_nu<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut SvSeriesState,
    prior: &PriorSet,
    tune: &mut SeriesTuning,
    adapt: Option<usize>,
    rng: &mut R,
) {
    let n = state.t_len() as f64;
    let sum_ln_z: f64 = state.z.iter().map(|z| z.ln()).sum();
    let sum_inv_z: f64 = state.z.iter().map(|z| 1.0 / z).sum();
    let ig_lik = |nu: f64| -> f64 {
        let a = 0.5 * nu;
        n * (a * a.ln() - libm::lgamma(a)) - (a + 1.0) * sum_ln_z - a * sum_inv_z
    };
    let skewed = state.params.beta != 0.0;
    let target = |nu: f64, lik: f64| -> f64 { ln_nu_prior(nu, prior) + ig_lik(nu) + lik + (nu - 4.0).ln() };
    let cur = state.params.nu;
    let prop = 4.0 + ((cur - 4.0).ln() + tune.nu.scale() * draw_standard_normal(rng)).exp();
    if !(prop > 4.0) || !prop.is_finite() {
        tune.nu.record(f64::NEG_INFINITY, false, adapt);
        return;
    }
    let mut p_new = state.params;
    p_new.set_nu(prop);
    let (lik_new, lik_cur) = if skewed {
        (
            log_lik_core(y, &state.h, &state.z, &p_new),
            log_lik_core(y, &state.h, &state.z, &state.params),
        )
    } else {
        (0.0, 0.0)
    };
    let log_ratio = target(prop, lik_new) - target(cur, lik_cur);
    let acc = mh_accept(log_ratio, rng);
    tune.nu.record(log_ratio, acc, adapt);
    if acc {
        state.params = p_new;
        state.refresh();
    }
}

/// Parameters `(beta_hat, tau_hat_sq)` of the normal conditional of `beta`
/// under a `N(0, tau0_sq)` prior.
pub fn beta_posterior_stats(y: &[f64], state: &SvSeriesState, tau0_sq: f64) -> (f64, f64) {
    let n = state.t_len();
    let p = &state.params;
    let mut prec = 1.0 / tau0_sq;
    let mut num = 0.0;
    for t in 0..n {
        let e = (0.5 * state.h[t]).exp();
        let x = (state.z[t] - p.c()) * e;
        let mut r = y[t];
        if t + 1 < n {
            r -= state.z[t].sqrt() * p.rho * state.eta_hat[t] / p.sigma * e;
        }
        let w = 1.0 / state.sigma_hat_sq[t];
        prec += x * x * w;
        num += x * r * w;
    }
    let tau_hat_sq = 1.0 / prec;
    (tau_hat_sq * num, tau_hat_sq)
}

/// Posterior inclusion probability `kappa_hat` of the slab component.
pub fn inclusion_probability(beta_hat: f64, tau_hat_sq: f64, kappa: f64, tau0_sq: f64) -> f64 {
    if kappa >= 1.0 {
        return 1.0;
    }
    if kappa <= 0.0 {
        return 0.0;
    }
    let ln_gamma = 0.5 * beta_hat * beta_hat / tau_hat_sq + 0.5 * (tau_hat_sq / tau0_sq).ln();
    let x = (1.0 - kappa).ln() - kappa.ln() - ln_gamma;
    1.0 / (1.0 + x.exp())
}

/// Spike-and-slab draw: `N(beta_hat, tau_hat_sq)` with probability `kappa_hat`,
/// zero otherwise. Returns `(beta, included)`.
pub fn sample_beta_spike_slab<R: Rng + ?Sized>(
    beta_hat: f64,
    tau_hat_sq: f64,
    kappa: f64,
    tau0_sq: f64,
    rng: &mut R,
) -> (f64, bool) {
    let k_hat = inclusion_probability(beta_hat, tau_hat_sq, kappa, tau0_sq);
    if k_hat >= 1.0 || rng.random::<f64>() < k_hat {
        (beta_hat + tau_hat_sq.sqrt() * draw_standard_normal(rng), true)
    } else {
        (0.0, false)
    }
}

/// Static settings for one per-series update.
#[derive(Debug, Clone, Copy)]
pub struct SeriesContext<'a> {
    pub priors: &'a PriorSet,
    pub tau0_sq: f64,
    pub beta_free: bool,
    pub kappa: f64,
    pub block_size: usize,
    /// Burn-in iteration index while proposal scales adapt.
    pub adapt: Option<usize>,
}

/// One full pass over the series: h, z, mu, level shift, phi, (sigma, rho),
/// spread, nu, beta. Returns whether `beta` is included (non-zero).
pub fn update_series<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut SvSeriesState,
    tune: &mut SeriesTuning,
    ctx: &SeriesContext<'_>,
    rng: &mut R,
) -> bool {
    tune.h_shrinks += sample_h_path(y, state, ctx.block_size, rng);
    tune.h_blocks += 1;
    tune.z_accepted += sample_z_path(y, state, rng);
    tune.z_proposed += state.t_len() as u64;
    sample_mu(y, state, ctx.priors, rng);
    sample_level_shift(y, state, ctx.priors, tune, ctx.adapt, rng);
    sample_phi_sigma_rho(y, state, ctx.priors, tune, ctx.adapt, rng);
    sample_spread(y, state, ctx.priors, tune, ctx.adapt, rng);
    sample_nu(y, state, ctx.priors, tune, ctx.adapt, rng);
    if ctx.beta_free {
        let (b_hat, t_hat) = beta_posterior_stats(y, state, ctx.tau0_sq);
        let (beta, inc) = sample_beta_spike_slab(b_hat, t_hat, ctx.kappa, ctx.tau0_sq, rng);
        state.params.beta = beta;
        state.refresh();
        inc
    } else {
        state.params.beta = 0.0;
        false
    }
}
