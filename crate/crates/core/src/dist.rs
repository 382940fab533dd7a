//! Random variate generation and log densities.
//!
//! The GH skew-t is generated through its normal variance-mean mixture with an
//! inverse-gamma mixing variable. Gamma, beta and normal variates come from
//! `rand_distr`; everything built on top of them lives here.

#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use crate::error::{invalid, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Retries before the truncated gamma sampler switches to inverse-CDF.
const TRUNC_REJECTION_CAP: usize = 64;

#[inline]
pub fn draw_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn draw_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    mean + sd * draw_standard_normal(rng)
}

/// Gamma(shape, rate) variate.
pub fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(invalid("gamma shape and rate must be positive"));
    }
    Ok(gamma_unchecked(shape, rate, rng))
}

#[inline]
pub(crate) fn gamma_unchecked<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    // Gamma::new only fails for non-positive parameters, ruled out by callers.
    Gamma::new(shape, 1.0 / rate).map(|g| g.sample(rng)).unwrap_or(f64::NAN)
}

/// Inverse-gamma variate with density proportional to `x^(-shape-1) exp(-scale/x)`.
pub fn draw_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0) || !shape.is_finite() || !scale.is_finite() {
        return Err(invalid("inverse gamma shape and scale must be positive"));
    }
    Ok(inverse_gamma_unchecked(shape, scale, rng))
}

#[inline]
pub(crate) fn inverse_gamma_unchecked<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    scale / gamma_unchecked(shape, 1.0, rng)
}

pub fn draw_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(invalid("beta parameters must be positive"));
    }
    Beta::new(a, b)
        .map(|d| d.sample(rng))
        .map_err(|_| invalid("beta parameters must be finite"))
}

/// Gamma(shape, rate) truncated to `(lower, inf)`.
///
/// Rejection from the untruncated law, falling back to inverse-CDF on the
/// truncated region when the tail mass is too small for rejection to be quick.
pub fn draw_truncated_gamma<R: Rng + ?Sized>(
    shape: f64,
    rate: f64,
    lower: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) || !(lower >= 0.0) {
        return Err(invalid("truncated gamma needs shape, rate > 0 and lower >= 0"));
    }
    for _ in 0..TRUNC_REJECTION_CAP {
        let x = gamma_unchecked(shape, rate, rng);
        if x > lower {
            return Ok(x);
        }
    }
    let p_lo = regularized_gamma_p(shape, rate * lower);
    let u: f64 = rng.random();
    let target = p_lo + u * (1.0 - p_lo);
    Ok(inverse_regularized_gamma_p(shape, target).max(rate * lower) / rate)
}

/// One GH skew-t draw `w = beta (z - c) + sqrt(z) eps`, `z ~ IG(nu/2, nu/2)`,
/// `c = nu / (nu - 2)`, so that `E(w) = 0`.
pub fn draw_gh_skew_t<R: Rng + ?Sized>(beta: f64, nu: f64, rng: &mut R) -> Result<f64> {
    if !(nu > 4.0) || !beta.is_finite() {
        return Err(invalid("GH skew-t requires nu > 4 and finite beta"));
    }
    let z = inverse_gamma_unchecked(0.5 * nu, 0.5 * nu, rng);
    let c = nu / (nu - 2.0);
    Ok(beta * (z - c) + z.sqrt() * draw_standard_normal(rng))
}

/// Draw from `N(mean, cov)` through the Cholesky factor of `cov`.
pub fn draw_multivariate_normal<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = mean.len();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch("covariance must be n x n".into()));
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("multivariate normal covariance".into()))?;
    let e = DVector::from_iterator(n, (0..n).map(|_| draw_standard_normal(rng)));
    Ok(mean + chol.l() * e)
}

/// Draw from `N(P^{-1} b, P^{-1})` given a precision matrix `P` and `b`.
pub fn draw_normal_from_precision<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    b: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = b.len();
    let chol = precision
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("posterior precision".into()))?;
    let mean = chol.solve(b);
    let e = DVector::from_iterator(n, (0..n).map(|_| draw_standard_normal(rng)));
    // L L' = P, so L'^{-1} e has covariance P^{-1}.
    let dev = chol
        .l()
        .transpose()
        .solve_upper_triangular(&e)
        .ok_or_else(|| Error::NotPositiveDefinite("posterior precision".into()))?;
    Ok(mean + dev)
}

// ---------------------------------------------------------------------------
// log densities

#[inline]
pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - libm::lgamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn ln_inverse_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - libm::lgamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta_fn(a, b)
}

pub fn ln_beta_fn(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Normalized log density of Gamma(shape, rate) truncated to `(lower, inf)`.
pub fn ln_truncated_gamma_pdf(x: f64, shape: f64, rate: f64, lower: f64) -> f64 {
    if x <= lower {
        return f64::NEG_INFINITY;
    }
    ln_gamma_pdf(x, shape, rate) - regularized_gamma_q(shape, rate * lower).ln()
}

/// Log density of `N(mean, cov)`.
pub fn ln_multivariate_normal(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let n = x.len();
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("multivariate normal covariance".into()))?;
    let d = x - mean;
    let w = chol
        .l()
        .solve_lower_triangular(&d)
        .ok_or_else(|| Error::NotPositiveDefinite("multivariate normal covariance".into()))?;
    let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * (n as f64 * LN_2PI + log_det + w.norm_squared()))
}

/// Log density of `(eps, eta)` jointly normal with unit `eps` variance,
/// `sigma^2` `eta` variance and correlation `rho`.
pub fn log_density_bivariate_leverage(eps: f64, eta: f64, sigma: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(invalid("leverage correlation must satisfy |rho| < 1"));
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    let one_m = 1.0 - rho * rho;
    let e = eta / sigma;
    let quad = (eps * eps - 2.0 * rho * eps * e + e * e) / one_m;
    Ok(-(2.0 * PI).ln() - sigma.ln() - 0.5 * one_m.ln() - 0.5 * quad)
}

// ---------------------------------------------------------------------------
// special functions

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Upper tail probability of a chi-square variable with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    libm::erfc((0.5 * x).sqrt())
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = sum;
    let mut ap = a;
    for _ in 0..1000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - libm::lgamma(a)).exp()
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - libm::lgamma(a)).exp() * h
}

/// Solves `P(a, x) = p` for `x` by safeguarded Newton iterations.
pub fn inverse_regularized_gamma_p(a: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0_f64, a.max(1.0));
    while regularized_gamma_p(a, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = regularized_gamma_p(a, x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let ln_pdf = (a - 1.0) * x.ln() - x - libm::lgamma(a);
        let step = f / ln_pdf.exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// Log-sum-exp of a slice; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Moments of `IG(shape, scale)` when they exist: `(mean, variance)`.
pub fn inverse_gamma_moments(shape: f64, scale: f64) -> (f64, f64) {
    let mean = if shape > 1.0 { scale / (shape - 1.0) } else { f64::INFINITY };
    let var = if shape > 2.0 {
        scale * scale / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0))
    } else {
        f64::INFINITY
    };
    (mean, var)
}

/// Variance of the GH skew-t mixture: `beta^2 Var(z) + E(z)`.
pub fn gh_skew_t_variance(beta: f64, nu: f64) -> f64 {
    let (ez, vz) = inverse_gamma_moments(0.5 * nu, 0.5 * nu);
    beta * beta * vz + ez
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use crate::rng::{stream, Purpose};
    use core::f64::consts::LN_2;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn inverse_gamma_rejects_bad_args() {
        let mut rng = stream(1, Purpose::Misc, 0, 0);
        assert!(draw_inverse_gamma(0.0, 4.0, &mut rng).is_err());
        assert!(draw_inverse_gamma(4.0, -1.0, &mut rng).is_err());
        assert!(draw_gamma(1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn gh_skew_t_needs_nu_above_four() {
        let mut rng = stream(1, Purpose::Misc, 0, 0);
        assert!(draw_gh_skew_t(0.0, 4.0, &mut rng).is_err());
        assert!(draw_gh_skew_t(0.0, 4.1, &mut rng).is_ok());
    }

    #[test]
    fn bivariate_leverage_splits_when_uncorrelated() {
        let (eps, eta, s) = (0.7, -0.03, 0.05);
        let joint = log_density_bivariate_leverage(eps, eta, s, 0.0).unwrap();
        let split = ln_normal(eps, 0.0, 1.0) + ln_normal(eta, 0.0, s * s);
        assert!((joint - split).abs() < 1e-12);
        let origin = log_density_bivariate_leverage(0.0, 0.0, 1.0, 0.0).unwrap();
        assert!((origin + (2.0 * PI).ln()).abs() < 1e-14);
        assert!(log_density_bivariate_leverage(0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn bivariate_leverage_matches_conditional_factorization() {
        // eps ~ N(0,1), eta | eps ~ N(rho sigma eps, sigma^2 (1 - rho^2)).
        let (eps, eta, s, r) = (1.0, 0.1, 0.05, -0.5);
        let joint = log_density_bivariate_leverage(eps, eta, s, r).unwrap();
        let fact = ln_normal(eps, 0.0, 1.0) + ln_normal(eta, r * s * eps, s * s * (1.0 - r * r));
        assert!((joint - fact).abs() < 1e-12 * joint.abs().max(1.0));
    }

    #[test]
    fn inverse_gamma_moments_match_closed_form() {
        let mut rng = stream(11, Purpose::Misc, 0, 0);
        let xs: Vec<f64> = (0..200_000)
            .map(|_| draw_inverse_gamma(6.0, 5.0, &mut rng).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        let (em, ev) = inverse_gamma_moments(6.0, 5.0);
        assert!((m - em).abs() < 4.0 * (ev / xs.len() as f64).sqrt());
        assert!((v - ev).abs() / ev < 0.1);
    }

    #[test]
    fn truncated_gamma_respects_bound() {
        let mut rng = stream(3, Purpose::Misc, 0, 0);
        for _ in 0..1000 {
            assert!(draw_truncated_gamma(24.0, 0.8, 4.0, &mut rng).unwrap() > 4.0);
        }
        // Far tail: forces the inverse-CDF branch.
        for _ in 0..200 {
            let x = draw_truncated_gamma(2.0, 1.0, 30.0, &mut rng).unwrap();
            assert!(x > 30.0 && x < 80.0, "{x}");
        }
    }

    #[test]
    fn incomplete_gamma_inverse_round_trips() {
        for &a in &[0.5, 2.0, 12.0, 24.0] {
            for &p in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.999] {
                let x = inverse_regularized_gamma_p(a, p);
                assert!((regularized_gamma_p(a, x) - p).abs() < 1e-10, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn chi2_tail() {
        assert!((chi2_1_sf(3.841_458_820_694_124) - 0.05).abs() < 1e-12);
        assert_eq!(chi2_1_sf(0.0), 1.0);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn precision_draw_is_consistent_with_mean() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DVector::from_vec(alloc::vec![1.0, -1.0]);
        let mut rng = stream(5, Purpose::Misc, 0, 0);
        let n = 20_000;
        let mut acc = DVector::zeros(2);
        for _ in 0..n {
            acc += draw_normal_from_precision(p.clone(), &b, &mut rng).unwrap();
        }
        acc /= n as f64;
        let mean = p.clone().cholesky().unwrap().solve(&b);
        assert!((acc - mean).amax() < 0.03);
    }
}
