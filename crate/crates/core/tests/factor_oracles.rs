//! Conjugate factor-block conditionals against the covariance (Kalman) form
//! of Gaussian conditioning, which shares no code with the precision form
//! used by the samplers.

use nalgebra::{DMatrix, DVector};
use skewfsv_core::dist::draw_standard_normal;
use skewfsv_core::factor::{factor_posterior, loading_row_posterior, sample_kappa, OffsetDecomposition};
use skewfsv_core::model::LoadingMatrix;
use skewfsv_core::rng::{stream, Purpose};

fn offsets(q: usize, t_len: usize, seed: u64) -> OffsetDecomposition {
    let mut rng = stream(seed, Purpose::Misc, 0, 0);
    let alpha = (0..q).map(|_| (0..t_len).map(|_| 0.3 * draw_standard_normal(&mut rng)).collect()).collect();
    let sigma_hat_sq = (0..q)
        .map(|_| (0..t_len).map(|_| 0.2 + draw_standard_normal(&mut rng).powi(2)).collect())
        .collect();
    OffsetDecomposition { alpha, sigma_hat_sq }
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).abs().max() < tol * (1.0 + b.abs().max())
}

#[test]
fn factor_conditional_matches_covariance_form() {
    let (k, p, t_len) = (5, 2, 3);
    for seed in 0..20 {
        let mut rng = stream(seed, Purpose::Misc, 1, 0);
        let mut b = LoadingMatrix::identified(k, p);
        let free: Vec<_> = b.free_indices().collect();
        for (i, j) in free {
            b.set_free(i, j, draw_standard_normal(&mut rng)).unwrap();
        }
        let off = offsets(k + p, t_len, seed);
        let y: Vec<f64> = (0..k).map(|_| draw_standard_normal(&mut rng)).collect();
        for t in 0..t_len {
            let (mean, cov) = factor_posterior(t, &y, &b, &off).unwrap();
            let bm = b.to_matrix();
            let psi = DMatrix::from_diagonal(&DVector::from_iterator(p, (0..p).map(|j| off.sigma_hat_sq[k + j][t])));
            let af = DVector::from_iterator(p, (0..p).map(|j| off.alpha[k + j][t]));
            let ay = DVector::from_iterator(k, (0..k).map(|i| off.alpha[i][t]));
            let sy = DMatrix::from_diagonal(&DVector::from_iterator(k, (0..k).map(|i| off.sigma_hat_sq[i][t])));
            let s = &bm * &psi * bm.transpose() + sy;
            let gain = &psi * bm.transpose() * s.try_inverse().unwrap();
            let resid = DVector::from_column_slice(&y) - &bm * &af - ay;
            let m_or = &af + &gain * resid;
            let c_or = &psi - &gain * &bm * &psi;
            assert!(close(&DMatrix::from_column_slice(p, 1, mean.as_slice()), &DMatrix::from_column_slice(p, 1, m_or.as_slice()), 1e-10));
            assert!(close(&cov, &c_or, 1e-10));
        }
    }
}

#[test]
fn loading_row_conditional_matches_covariance_form() {
    let (k, p, t_len) = (4, 2, 7);
    for seed in 0..20 {
        let mut rng = stream(seed, Purpose::Misc, 2, 0);
        let off = offsets(k + p, t_len, seed + 100);
        let f: Vec<Vec<f64>> = (0..p).map(|_| (0..t_len).map(|_| draw_standard_normal(&mut rng)).collect()).collect();
        for i in 1..k {
            let r = i.min(p);
            let y_i: Vec<f64> = (0..t_len).map(|_| draw_standard_normal(&mut rng)).collect();
            let b0: Vec<f64> = (0..r).map(|a| 0.1 * a as f64 - 0.2).collect();
            let w0 = DMatrix::from_fn(r, r, |a, c| if a == c { 1.5 } else { 0.3 });
            let (mean, cov) = loading_row_posterior(i, &y_i, &f, &off, p, &b0, &w0).unwrap();
            let x = DMatrix::from_fn(t_len, r, |t, a| f[a][t]);
            let target = DVector::from_iterator(
                t_len,
                (0..t_len).map(|t| y_i[t] - off.alpha[i][t] - if i < p { f[i][t] } else { 0.0 }),
            );
            let noise = DMatrix::from_diagonal(&DVector::from_column_slice(&off.sigma_hat_sq[i]));
            let b0v = DVector::from_column_slice(&b0);
            let s = &x * &w0 * x.transpose() + noise;
            let gain = &w0 * x.transpose() * s.try_inverse().unwrap();
            let m_or = &b0v + &gain * (target - &x * &b0v);
            let c_or = &w0 - &gain * &x * &w0;
            assert!(close(&DMatrix::from_column_slice(r, 1, mean.as_slice()), &DMatrix::from_column_slice(r, 1, m_or.as_slice()), 1e-9));
            assert!(close(&cov, &c_or, 1e-9));
        }
    }
}

#[test]
fn kappa_draws_have_beta_moments() {
    let mut rng = stream(3, Purpose::Kappa, 0, 0);
    let n = 200_000;
    let draws: Vec<f64> = (0..n).map(|_| sample_kappa(3, 8, 2.0, 2.0, &mut rng).unwrap()).collect();
    // Beta(5, 7).
    let (a, b) = (5.0, 7.0);
    let mean = a / (a + b);
    let var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
    let m = draws.iter().sum::<f64>() / n as f64;
    let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    assert!((m - mean).abs() < 4.0 * (var / n as f64).sqrt());
    assert!((v - var).abs() < 0.02 * var);
}
