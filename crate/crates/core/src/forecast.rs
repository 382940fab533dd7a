//! Predictive mixtures, density scoring, portfolio weights, VaR and the
//! Kupiec coverage test.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::{self, draw_standard_normal, log_sum_exp, normal_cdf};
use crate::engine::{DrawStore, Executor};
use crate::error::{Error, Result};
use crate::model::{LoadingMatrix, SeriesParams};
use crate::rng::{stream, Purpose};

#[allow(unused_imports)]
use num_traits::Float;

/// Simulated future log-variances and mixing values, each `q x H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPaths {
    pub h: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

/// Simulates `H` steps of `(h, z)` for every series from the last log-variance.
/// Volatility innovations use their marginal `N(0, sigma^2)`.
pub fn simulate_forward<R: Rng + ?Sized>(
    params: &[SeriesParams],
    h_last: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Result<ForwardPaths> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("forecast horizon must be >= 1".into()));
    }
    if params.len() != h_last.len() {
        return Err(Error::DimensionMismatch("one terminal log-variance per series".into()));
    }
    let mut hs = Vec::with_capacity(params.len());
    let mut zs = Vec::with_capacity(params.len());
    for (p, &h0) in params.iter().zip(h_last) {
        let mut h = Vec::with_capacity(horizon);
        let mut z = Vec::with_capacity(horizon);
        let mut prev = h0;
        for _ in 0..horizon {
            prev = p.mu + p.phi * (prev - p.mu) + p.sigma * draw_standard_normal(rng);
            h.push(prev);
            z.push(dist::inverse_gamma_unchecked(0.5 * p.nu, 0.5 * p.nu, rng));
        }
        hs.push(h);
        zs.push(z);
    }
    Ok(ForwardPaths { h: hs, z: zs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Equally weighted normal mixture approximating the predictive of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMixture {
    pub components: Vec<MixtureComponent>,
}

/// Mixture component of one draw at one step given simulated `(h, z)` values
/// for all `q` series at that step.
pub fn component(params: &[SeriesParams], b: &LoadingMatrix, h: &[f64], z: &[f64]) -> MixtureComponent {
    let (k, p) = (b.k(), b.p());
    let bm = b.to_matrix();
    let offset = |i: usize| params[i].beta * (z[i] - params[i].c()) * (0.5 * h[i]).exp();
    let f_mean = DVector::from_iterator(p, (0..p).map(|j| offset(k + j)));
    let mut mean = &bm * f_mean;
    for i in 0..k {
        mean[i] += offset(i);
    }
    let vf = DVector::from_iterator(p, (0..p).map(|j| z[k + j] * h[k + j].exp()));
    let mut cov = &bm * DMatrix::from_diagonal(&vf) * bm.transpose();
    for i in 0..k {
        cov[(i, i)] += z[i] * h[i].exp();
    }
    MixtureComponent { mean, cov }
}

impl ForecastMixture {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Predictive mean and covariance (law of total variance).
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.components.len() as f64;
        let k = self.components[0].mean.len();
        let mut m = DVector::zeros(k);
        for c in &self.components {
            m += &c.mean;
        }
        m /= n;
        let mut d = DMatrix::zeros(k, k);
        for c in &self.components {
            let dev = &c.mean - &m;
            d += &c.cov + &dev * dev.transpose();
        }
        d /= n;
        (m, d)
    }

    /// Mean and variance of the portfolio return `w'y` under each component.
    pub fn portfolio_components(&self, w: &[f64]) -> Vec<(f64, f64)> {
        let w = DVector::from_column_slice(w);
        self.components.iter().map(|c| (w.dot(&c.mean), (w.transpose() * &c.cov * &w)[(0, 0)])).collect()
    }

    /// Builds one mixture per horizon `1..=H` from every retained draw.
    /// Draw `m` simulates on the stream keyed by `(seed, origin, m)`.
    pub fn from_draws<E: Executor>(store: &DrawStore, horizon: usize, seed: u64, origin: u64, exec: &E) -> Result<Vec<Self>> {
        if store.is_empty() {
            return Err(Error::InsufficientData("no retained draws".into()));
        }
        let per_draw: Vec<Result<Vec<MixtureComponent>>> = exec.map(store.len(), |m| {
            let rec = &store.records[m];
            let b = store.loading_matrix(m);
            let mut rng = stream(seed, Purpose::Forecast, origin, m as u64);
            let paths = simulate_forward(&rec.params, &rec.h_last, horizon, &mut rng)?;
            Ok((0..horizon)
                .map(|s| {
                    let h: Vec<f64> = paths.h.iter().map(|x| x[s]).collect();
                    let z: Vec<f64> = paths.z.iter().map(|x| x[s]).collect();
                    component(&rec.params, &b, &h, &z)
                })
                .collect())
        });
        let mut out = vec![Vec::with_capacity(store.len()); horizon];
        for comps in per_draw {
            for (s, c) in comps?.into_iter().enumerate() {
                out[s].push(c);
            }
        }
        Ok(out.into_iter().map(|components| Self { components }).collect())
    }
}

/// Log of the mixture density at `y`. Components whose covariance is not
/// positive definite are skipped; the count skipped is returned alongside.
pub fn predictive_log_density_checked(y: &[f64], mix: &ForecastMixture) -> Result<(f64, usize)> {
    let x = DVector::from_column_slice(y);
    let mut logs = Vec::with_capacity(mix.len());
    let mut skipped = 0;
    for c in &mix.components {
        if c.mean.len() != y.len() {
            return Err(Error::DimensionMismatch("observation and mixture dimensions differ".into()));
        }
        match dist::ln_multivariate_normal(&x, &c.mean, &c.cov) {
            Ok(v) if v.is_finite() => logs.push(v),
            _ => skipped += 1,
        }
    }
    if logs.is_empty() {
        return Err(Error::NotPositiveDefinite("every mixture component is singular".into()));
    }
    // Skipped components drop out of the average.
    Ok((log_sum_exp(&logs) - (logs.len() as f64).ln(), skipped))
}

pub fn predictive_log_density(y: &[f64], mix: &ForecastMixture) -> Result<f64> {
    predictive_log_density_checked(y, mix).map(|(v, _)| v)
}

/// Minimum-variance weights subject to `w'1 = 1` and, with a target, `w'm = target`.
pub fn optimize_portfolio(m: &DVector<f64>, d: &DMatrix<f64>, target: Option<f64>) -> Result<Vec<f64>> {
    let k = m.len();
    if d.nrows() != k || d.ncols() != k {
        return Err(Error::DimensionMismatch("covariance must be k x k".into()));
    }
    let chol = d
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("forecast covariance".into()))?;
    let ones = DVector::from_element(k, 1.0);
    let x1 = chol.solve(&ones);
    let a = ones.dot(&x1);
    let Some(target) = target else {
        return Ok((x1 / a).iter().copied().collect());
    };
    let xm = chol.solve(m);
    let b = ones.dot(&xm);
    let c = m.dot(&xm);
    let det = a * c - b * b;
    if !(det > 1e-12 * a * c.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::Infeasible("forecast mean is proportional to the unit vector".into()));
    }
    let l1 = (c - b * target) / det;
    let l2 = (a * target - b) / det;
    Ok((x1 * l1 + xm * l2).iter().copied().collect())
}

/// The closed-form weights `K (1'Kq m - m'Kq 1)` with `q = (1 target - m)/d`,
/// `d = (1'K1)(m'Km) - (1'Km)^2`, `K = D^{-1}`.
pub fn closed_form_weights(m: &DVector<f64>, d: &DMatrix<f64>, target: f64) -> Result<Vec<f64>> {
    let k = m.len();
    let kinv = d
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("forecast covariance".into()))?;
    let ones = DVector::from_element(k, 1.0);
    let dd = ones.dot(&(&kinv * &ones)) * m.dot(&(&kinv * m)) - ones.dot(&(&kinv * m)).powi(2);
    if dd == 0.0 {
        return Err(Error::Infeasible("forecast mean is proportional to the unit vector".into()));
    }
    let q = (&ones * target - m) / dd;
    let kq = &kinv * &q;
    let s1 = ones.dot(&kq);
    let s2 = m.dot(&kq);
    Ok((&kinv * (m * s1 - &ones * s2)).iter().copied().collect())
}

fn mixture_cdf(comps: &[(f64, f64)], x: f64) -> f64 {
    comps.iter().map(|(m, v)| normal_cdf((x - m) / v.sqrt())).sum::<f64>() / comps.len() as f64
}

/// `alpha`-quantile of `w'y` under the normal mixture, by bisection.
pub fn var_quantile(w: &[f64], mix: &ForecastMixture, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    if mix.is_empty() {
        return Err(Error::InsufficientData("empty mixture".into()));
    }
    let comps = mix.portfolio_components(w);
    quantile_of_normal_mixture(&comps, alpha)
}

/// `alpha`-quantile of an equally weighted mixture of `N(mean, var)`.
pub fn quantile_of_normal_mixture(comps: &[(f64, f64)], alpha: f64) -> Result<f64> {
    if comps.iter().any(|(m, v)| !(m.is_finite() && *v > 0.0 && v.is_finite())) {
        return Err(Error::Degenerate("mixture component with invalid moments".into()));
    }
    let mut lo = comps.iter().map(|(m, v)| m - 40.0 * v.sqrt()).fold(f64::INFINITY, f64::min);
    let mut hi = comps.iter().map(|(m, v)| m + 40.0 * v.sqrt()).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mixture_cdf(comps, mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Kupiec unconditional coverage statistic and its chi-square(1) p-value.
pub fn kupiec_lr(n: usize, days: usize, alpha: f64) -> Result<(f64, f64)> {
    if n > days {
        return Err(Error::InvalidArgument("violations exceed forecast days".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    if days == 0 {
        return Ok((0.0, 1.0));
    }
    let (nf, tf) = (n as f64, days as f64);
    let rate = nf / tf;
    let lr = 2.0 * (xlogy(nf, rate) + xlogy(tf - nf, 1.0 - rate)) - 2.0 * (xlogy(nf, alpha) + xlogy(tf - nf, 1.0 - alpha));
    let lr = lr.max(0.0);
    Ok((lr, dist::chi2_1_sf(lr)))
}
