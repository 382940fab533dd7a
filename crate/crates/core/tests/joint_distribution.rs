//! Successive-conditional simulation: alternating fresh data given the
//! latents with one sampler pass must leave the prior invariant, so chain
//! moments of the parameters match prior moments computed by direct draws.

use rand::Rng;
use skewfsv_core::diagnostics::effective_sample_size;
use skewfsv_core::dist::{draw_beta, draw_gamma, draw_standard_normal, draw_truncated_gamma};
use skewfsv_core::model::{PriorSet, SeriesParams};
use skewfsv_core::rng::{stream, Purpose};
use skewfsv_core::sv::{update_series, SeriesContext, SeriesTuning, SvSeriesState};

fn resample_y<R: Rng>(st: &SvSeriesState, rng: &mut R) -> Vec<f64> {
    let p = st.params;
    let n = st.h.len();
    (0..n)
        .map(|t| {
            let eps = if t + 1 < n {
                p.rho * st.eta_hat[t] / p.sigma + (1.0 - p.rho * p.rho).sqrt() * draw_standard_normal(rng)
            } else {
                draw_standard_normal(rng)
            };
            (0.5 * st.h[t]).exp() * (p.beta * (st.z[t] - p.c()) + st.z[t].sqrt() * eps)
        })
        .collect()
}

#[test]
fn series_update_leaves_prior_invariant() {
    let prior = PriorSet {
        mu_mean: 0.0,
        mu_var: 1.0,
        phi_beta_a: 5.0,
        phi_beta_b: 1.5,
        sigma_inv2_shape: 10.0,
        sigma_inv2_rate: 0.4,
        nu_shape: 10.0,
        nu_rate: 1.0,
        ..PriorSet::default()
    };
    let tau0 = 1.0;
    let n = 20;
    let mut rng = stream(7, Purpose::Misc, 0, 0);
    let p0 = SeriesParams::new(0.0, 0.5, 0.2, 0.0, 10.0, 0.3).unwrap();
    let mut h = vec![0.0; n];
    for t in 1..n {
        h[t] = 0.5 * h[t - 1] + 0.2 * draw_standard_normal(&mut rng);
    }
    let mut st = SvSeriesState::new(h, vec![1.0; n], p0).unwrap();
    let mut tune = SeriesTuning::default();
    let ctx = SeriesContext { priors: &prior, tau0_sq: tau0, beta_free: true, kappa: 1.0, block_size: 7, adapt: None };
    let iters = 150_000;
    let mut rec: Vec<[f64; 6]> = Vec::with_capacity(iters);
    for _ in 0..iters {
        let y = resample_y(&st, &mut rng);
        update_series(&y, &mut st, &mut tune, &ctx, &mut rng);
        let p = st.params;
        rec.push([p.mu, p.phi, p.sigma, p.rho, p.nu, p.beta]);
    }

    let mut pr: Vec<[f64; 6]> = Vec::new();
    for _ in 0..200_000 {
        let mu = draw_standard_normal(&mut rng);
        let phi = 2.0 * draw_beta(5.0, 1.5, &mut rng).unwrap() - 1.0;
        let sigma = 1.0 / draw_gamma(10.0, 0.4, &mut rng).unwrap().sqrt();
        let rho = 2.0 * rng.random::<f64>() - 1.0;
        let nu = draw_truncated_gamma(10.0, 1.0, 4.0, &mut rng).unwrap();
        let beta = tau0.sqrt() * draw_standard_normal(&mut rng);
        pr.push([mu, phi, sigma, rho, nu, beta]);
    }
    let mut worst = 0.0f64;
    for (j, name) in ["mu", "phi", "sigma", "rho", "nu", "beta"].iter().enumerate() {
        for pow in [1, 2] {
            let c: Vec<f64> = rec.iter().map(|r| r[j].powi(pow)).collect();
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / c.len() as f64;
            let ess = effective_sample_size(&c).unwrap();
            let pc: Vec<f64> = pr.iter().map(|r| r[j].powi(pow)).collect();
            let pm = pc.iter().sum::<f64>() / pc.len() as f64;
            let pv = pc.iter().map(|x| (x - pm) * (x - pm)).sum::<f64>() / pc.len() as f64;
            let z = (m - pm) / (v / ess + pv / pc.len() as f64).sqrt();
            println!("{name:6}^{pow} chain {m:9.5} prior {pm:9.5} z {z:6.2} ess {ess:.0}");
            worst = worst.max(z.abs());
        }
    }
    // Twelve correlated z-scores; a broken kernel drifts far beyond this.
    assert!(worst < 4.0, "largest |z| = {worst}");
}
