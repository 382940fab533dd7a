use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use skewfsv_core::forecast::{
    closed_form_weights, kupiec_lr, optimize_portfolio, predictive_log_density, simulate_forward, var_quantile,
    ForecastMixture, MixtureComponent,
};
use skewfsv_core::model::{rank_by_correlation, Dataset, LoadingMatrix, SeriesParams};
use skewfsv_core::rng::{stream, Purpose};

fn spd(k: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_iterator(k, k, entries.iter().copied().take(k * k));
    &a * a.transpose() + DMatrix::identity(k, k) * 0.1
}

fn mixture(k: usize, vals: &[f64], n: usize) -> ForecastMixture {
    let components = (0..n)
        .map(|c| {
            let off = c * (k + k * k);
            MixtureComponent {
                mean: DVector::from_iterator(k, vals[off..off + k].iter().map(|v| 0.3 * v)),
                cov: spd(k, &vals[off + k..off + k + k * k]),
            }
        })
        .collect();
    ForecastMixture { components }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn identification_survives_free_updates(k in 1usize..7, p in 1usize..4, vals in prop::collection::vec(-3.0f64..3.0, 30)) {
        prop_assume!(p <= k);
        let mut b = LoadingMatrix::identified(k, p);
        let free: Vec<_> = b.free_indices().collect();
        for ((i, j), v) in free.iter().zip(&vals) {
            b.set_free(*i, *j, *v).unwrap();
        }
        prop_assert!(b.validate().is_ok());
        let m = b.to_matrix();
        for i in 0..p {
            prop_assert_eq!(m[(i, i)], 1.0);
            for j in i + 1..p {
                prop_assert_eq!(m[(i, j)], 0.0);
            }
            prop_assert!(b.set_free(i, i, 2.0).is_err());
        }
        for i in 0..k {
            prop_assert_eq!(b.free_in_row(i), i.min(p));
        }
    }

    #[test]
    fn mixing_mean_tracks_nu(nu in 4.0001f64..200.0, nu2 in 4.0001f64..200.0) {
        let mut p = SeriesParams::new(0.0, 0.9, 0.1, 0.0, nu, 0.0).unwrap();
        prop_assert!((p.c() - nu / (nu - 2.0)).abs() < 1e-14);
        p.set_nu(nu2);
        prop_assert!((p.c() - nu2 / (nu2 - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn portfolio_meets_constraints(k in 2usize..7, vals in prop::collection::vec(-1.0f64..1.0, 56), target in -0.5f64..0.5) {
        let m = DVector::from_iterator(k, vals[..k].iter().copied());
        let spread = m.max() - m.min();
        prop_assume!(spread > 1e-3);
        let d = spd(k, &vals[k..]);
        let w = optimize_portfolio(&m, &d, Some(target)).unwrap();
        let w = DVector::from_vec(w);
        let scale = w.amax().max(1.0);
        prop_assert!((w.sum() - 1.0).abs() < 1e-10 * scale);
        prop_assert!((w.dot(&m) - target).abs() < 1e-10 * scale);
        let cf = DVector::from_vec(closed_form_weights(&m, &d, target).unwrap());
        prop_assert!((&cf - &w).amax() < 1e-8 * scale);
        let mv = DVector::from_vec(optimize_portfolio(&m, &d, None).unwrap());
        prop_assert!((mv.sum() - 1.0).abs() < 1e-10 * mv.amax().max(1.0));
        // Minimum variance is never beaten by the constrained solution.
        prop_assert!((mv.transpose() * &d * &mv)[(0, 0)] <= (w.transpose() * &d * &w)[(0, 0)] * (1.0 + 1e-10));
    }

    #[test]
    fn kupiec_is_a_likelihood_ratio(days in 1usize..2000, frac in 0.0f64..1.0, alpha in 0.001f64..0.3) {
        let n = ((days as f64) * frac).floor() as usize;
        let (lr, p) = kupiec_lr(n, days, alpha).unwrap();
        prop_assert!(lr >= 0.0);
        prop_assert!((0.0..=1.0).contains(&p));
        let exact = (alpha * days as f64 - n as f64).abs() < 1e-12;
        if !exact {
            prop_assert!(lr > 0.0);
        }
    }

    #[test]
    fn var_is_monotone_in_alpha(vals in prop::collection::vec(-1.0f64..1.0, 60), a1 in 0.001f64..0.5, a2 in 0.001f64..0.5) {
        let mix = mixture(2, &vals, 10);
        let w = [0.6, 0.4];
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(var_quantile(&w, &mix, lo).unwrap() <= var_quantile(&w, &mix, hi).unwrap() + 1e-12);
    }

    #[test]
    fn predictive_density_ignores_order_and_duplication(vals in prop::collection::vec(-1.0f64..1.0, 72), y in prop::collection::vec(-1.0f64..1.0, 2), shift in 1usize..6) {
        let mix = mixture(2, &vals, 6);
        let base = predictive_log_density(&y, &mix).unwrap();
        let mut rotated = mix.clone();
        rotated.components.rotate_left(shift);
        let mut doubled = mix.clone();
        doubled.components.extend(mix.components.iter().cloned());
        prop_assert!((predictive_log_density(&y, &rotated).unwrap() - base).abs() < 1e-12);
        prop_assert!((predictive_log_density(&y, &doubled).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn reorder_then_invert_is_identity(perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(), vals in prop::collection::vec(-1.0f64..1.0, 40)) {
        let cols: Vec<Vec<f64>> = (0..4).map(|i| vals[i * 10..(i + 1) * 10].to_vec()).collect();
        let d = Dataset::from_columns(&cols).unwrap();
        let r = d.reorder(&perm).unwrap();
        let mut inv = vec![0; 4];
        for (pos, &i) in perm.iter().enumerate() {
            inv[i] = pos;
        }
        prop_assert_eq!(r.reorder(&inv).unwrap(), d.clone());
        let mut rank = rank_by_correlation(&d);
        rank.sort_unstable();
        prop_assert_eq!(rank, vec![0, 1, 2, 3]);
    }
}

#[test]
fn kupiec_zero_at_nominal_rate() {
    assert_eq!(kupiec_lr(5, 500, 0.01).unwrap().0, 0.0);
    assert_eq!(kupiec_lr(25, 500, 0.05).unwrap().0, 0.0);
    assert!(kupiec_lr(0, 500, 0.01).unwrap().0 > 0.0);
}

#[test]
fn forward_log_variance_has_ar1_moments() {
    let p = SeriesParams::new(-10.0, 0.95, 0.2, -0.5, 10.0, 0.0).unwrap();
    let (h0, horizon, n) = (-8.0, 5, 100_000);
    let mut rng = stream(9, Purpose::Forecast, 0, 0);
    let mut hs = vec![Vec::with_capacity(n); horizon];
    let mut zsum = 0.0;
    for _ in 0..n {
        let fp = simulate_forward(&[p], &[h0], horizon, &mut rng).unwrap();
        for (j, v) in fp.h[0].iter().enumerate() {
            hs[j].push(*v);
        }
        zsum += fp.z[0][0];
    }
    for (j, xs) in hs.iter().enumerate() {
        let s = (j + 1) as i32;
        let mean = p.mu + p.phi.powi(s) * (h0 - p.mu);
        let var = p.sigma * p.sigma * (1.0 - p.phi.powi(2 * s)) / (1.0 - p.phi * p.phi);
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        assert!((m - mean).abs() < 4.0 * (var / n as f64).sqrt(), "step {s}: {m} vs {mean}");
        assert!((v / var - 1.0).abs() < 0.03, "step {s}: {v} vs {var}");
    }
    // E(z) = c.
    assert!((zsum / n as f64 - p.c()).abs() < 0.01);
}
