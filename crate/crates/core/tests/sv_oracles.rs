//! Per-series kernels against independent numerical oracles.

use skewfsv_core::dist::{draw_inverse_gamma, draw_standard_normal, ln_normal};
use skewfsv_core::diagnostics::effective_sample_size;
use skewfsv_core::model::{PriorSet, SeriesParams};
use skewfsv_core::rng::{stream, Purpose};
use skewfsv_core::sv::{
    beta_posterior_stats, inclusion_probability, mu_conditional, sample_h_path, sample_z_path, series_log_likelihood,
    SvSeriesState,
};

fn params() -> SeriesParams {
    SeriesParams::new(-0.3, 0.9, 0.4, -0.5, 8.0, 0.6).unwrap()
}

fn state(t_len: usize, p: SeriesParams, seed: u64) -> (Vec<f64>, SvSeriesState) {
    let mut rng = stream(seed, Purpose::Misc, 0, 0);
    let h: Vec<f64> = (0..t_len).map(|_| p.mu + 0.5 * draw_standard_normal(&mut rng)).collect();
    let z: Vec<f64> = (0..t_len).map(|_| draw_inverse_gamma(4.0, 4.0, &mut rng).unwrap()).collect();
    let y: Vec<f64> = (0..t_len).map(|_| 0.8 * draw_standard_normal(&mut rng)).collect();
    (y, SvSeriesState::new(h, z, p).unwrap())
}

/// Mean and variance of a Gaussian log density from three evaluations.
fn quadratic_fit(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let (lm, l0, lp) = (f(-1.0), f(0.0), f(1.0));
    let a = 0.5 * (lp + lm - 2.0 * l0);
    let b = 0.5 * (lp - lm);
    (-b / (2.0 * a), -1.0 / (2.0 * a))
}

#[test]
fn beta_conditional_matches_quadratic_log_density() {
    let (y, st) = state(40, params(), 3);
    let tau0 = 10.0;
    let (bh, th) = beta_posterior_stats(&y, &st, tau0);
    let (m, v) = quadratic_fit(|b| {
        let mut p = st.params;
        p.beta = b;
        series_log_likelihood(&y, &st.h, &st.z, &p) + ln_normal(b, 0.0, tau0)
    });
    assert!((bh - m).abs() < 1e-8 * (1.0 + m.abs()), "{bh} vs {m}");
    assert!((th - v).abs() < 1e-8 * v, "{th} vs {v}");
}

#[test]
fn mu_conditional_matches_quadratic_log_density() {
    let (y, st) = state(25, params(), 4);
    let prior = PriorSet { mu_mean: 0.5, mu_var: 2.0, ..PriorSet::default() };
    let (m, v) = mu_conditional(&y, &st, &prior);
    let (mo, vo) = quadratic_fit(|mu| {
        let mut p = st.params;
        p.mu = mu;
        series_log_likelihood(&y, &st.h, &st.z, &p) + ln_normal(mu, prior.mu_mean, prior.mu_var)
    });
    assert!((m - mo).abs() < 1e-8 * (1.0 + mo.abs()), "{m} vs {mo}");
    assert!((v - vo).abs() < 1e-8 * vo, "{v} vs {vo}");
}

#[test]
fn inclusion_probability_matches_numerical_marginal() {
    let (y, st) = state(30, params(), 5);
    let (tau0, kappa) = (10.0, 0.3);
    let (bh, th) = beta_posterior_stats(&y, &st, tau0);
    let at = |b: f64| {
        let mut p = st.params;
        p.beta = b;
        series_log_likelihood(&y, &st.h, &st.z, &p)
    };
    let l0 = at(0.0);
    // Trapezoid rule for the slab marginal relative to the spike.
    let (lo, hi, n) = (bh - 12.0 * th.sqrt(), bh + 12.0 * th.sqrt(), 20_000);
    let dx = (hi - lo) / n as f64;
    let mut ratio = 0.0;
    for i in 0..=n {
        let b = lo + i as f64 * dx;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        ratio += w * (at(b) - l0 + ln_normal(b, 0.0, tau0)).exp() * dx;
    }
    let oracle = kappa * ratio / (kappa * ratio + 1.0 - kappa);
    let got = inclusion_probability(bh, th, kappa, tau0);
    assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
}

/// Posterior means of `(h, z)` by self-normalized importance sampling from
/// the prior, against long runs of the path samplers.
#[test]
fn latent_paths_match_importance_sampling_at_t4() {
    let p = params();
    let y = [0.9, -1.4, 0.2, 2.1];
    let n = y.len();
    let mut rng = stream(11, Purpose::Misc, 1, 0);
    let draws = 400_000;
    let mut wsum = 0.0;
    let mut hm = [0.0; 4];
    let mut zm = [0.0; 4];
    let mut logw = Vec::with_capacity(draws);
    let mut paths = Vec::with_capacity(draws);
    for _ in 0..draws {
        // h prior, z prior; the weight is the conditional density of y.
        let mut h = [0.0; 4];
        let mut eta = [0.0; 3];
        h[0] = p.mu + (p.stationary_var()).sqrt() * draw_standard_normal(&mut rng);
        for t in 1..n {
            eta[t - 1] = p.sigma * draw_standard_normal(&mut rng);
            h[t] = p.mu + p.phi * (h[t - 1] - p.mu) + eta[t - 1];
        }
        let z: Vec<f64> = (0..n).map(|_| draw_inverse_gamma(0.5 * p.nu, 0.5 * p.nu, &mut rng).unwrap()).collect();
        let mut lw = 0.0;
        for t in 0..n {
            let s = (0.5 * h[t]).exp();
            let (mean_eps, var_eps) = if t + 1 < n { (p.rho * eta[t] / p.sigma, 1.0 - p.rho * p.rho) } else { (0.0, 1.0) };
            let mean = s * (p.beta * (z[t] - p.c()) + z[t].sqrt() * mean_eps);
            lw += ln_normal(y[t], mean, s * s * z[t] * var_eps);
        }
        logw.push(lw);
        paths.push((h, z));
    }
    let mx = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (lw, (h, z)) in logw.iter().zip(&paths) {
        let w = (lw - mx).exp();
        wsum += w;
        for t in 0..n {
            hm[t] += w * h[t];
            zm[t] += w * z[t];
        }
    }
    for t in 0..n {
        hm[t] /= wsum;
        zm[t] /= wsum;
    }

    let mut st = SvSeriesState::new(vec![p.mu; n], vec![1.0; n], p).unwrap();
    let iters = 200_000;
    let mut hc = vec![Vec::with_capacity(iters); n];
    let mut zc = vec![Vec::with_capacity(iters); n];
    let mut rng = stream(12, Purpose::Misc, 2, 0);
    for _ in 0..iters {
        sample_h_path(&y, &mut st, 2, &mut rng);
        sample_z_path(&y, &mut st, &mut rng);
        for t in 0..n {
            hc[t].push(st.h[t]);
            zc[t].push(st.z[t]);
        }
    }
    for t in 0..n {
        for (name, chain, oracle) in [("h", &hc[t], hm[t]), ("z", &zc[t], zm[t])] {
            let m = chain.iter().sum::<f64>() / iters as f64;
            let v = chain.iter().map(|x| (x - m).powi(2)).sum::<f64>() / iters as f64;
            let se = (v / effective_sample_size(chain).unwrap()).sqrt();
            // Importance-sampling error is small next to the chain's at these sizes.
            assert!((m - oracle).abs() < 4.0 * se + 0.01, "{name}[{t}]: chain {m}, oracle {oracle}, se {se}");
        }
    }
}

/// Kolmogorov-Smirnov check of the single-site `h` draw against a numerically
/// integrated posterior CDF.
#[test]
fn single_site_h_matches_numerical_cdf() {
    let p = params();
    let y = [-1.3];
    let z = [1.7];
    let log_post = |h: f64| {
        ln_normal(h, p.mu, p.stationary_var())
            + ln_normal(y[0], (0.5 * h).exp() * p.beta * (z[0] - p.c()), h.exp() * z[0])
    };
    let (lo, hi, n) = (-8.0, 6.0, 40_000);
    let dx = (hi - lo) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * dx).collect();
    let dens: Vec<f64> = grid.iter().map(|&h| log_post(h).exp()).collect();
    let mut cdf = vec![0.0; n + 1];
    for i in 1..=n {
        cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * dx;
    }
    let total = cdf[n];
    let cdf_at = |h: f64| {
        let pos = ((h - lo) / dx).clamp(0.0, n as f64 - 1e-9);
        let i = pos as usize;
        (cdf[i] + (pos - i as f64) * (cdf[i + 1] - cdf[i])) / total
    };

    let mut st = SvSeriesState::new(vec![p.mu], z.to_vec(), p).unwrap();
    let mut rng = stream(21, Purpose::Misc, 0, 0);
    let mut xs = Vec::new();
    for it in 0..60_000 {
        sample_h_path(&y, &mut st, 1, &mut rng);
        if it % 20 == 0 {
            xs.push(st.h[0]);
        }
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf_at(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic.
    assert!(d < 1.63 / m.sqrt(), "KS distance {d} with {m} draws");
}
