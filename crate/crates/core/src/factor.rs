//! Conditional samplers for the loading rows, the factor paths and `kappa`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::{draw_beta, draw_normal_from_precision};
use crate::error::{Error, Result};
use crate::model::LoadingMatrix;
use crate::sv::SvSeriesState;

/// Conditional means `alpha` and variances `sigma_hat_sq` of every series'
/// shocks given `(h, z, theta)`, each `q x T` (idiosyncratic series first).
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetDecomposition {
    pub alpha: Vec<Vec<f64>>,
    pub sigma_hat_sq: Vec<Vec<f64>>,
}

impl OffsetDecomposition {
    pub fn from_states(states: &[SvSeriesState]) -> Self {
        Self {
            alpha: states.iter().map(SvSeriesState::offsets).collect(),
            sigma_hat_sq: states.iter().map(|s| s.sigma_hat_sq.clone()).collect(),
        }
    }

    pub fn q(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.sigma_hat_sq.len() {
            return Err(Error::DimensionMismatch("alpha and sigma_hat_sq differ in series count".into()));
        }
        for (a, s) in self.alpha.iter().zip(&self.sigma_hat_sq) {
            if a.len() != s.len() {
                return Err(Error::DimensionMismatch("alpha and sigma_hat_sq differ in length".into()));
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::NotPositiveDefinite("conditional variance must be positive".into()));
            }
        }
        Ok(())
    }
}

fn invert_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{what} is not positive definite")))
}

/// Posterior precision and linear term of the free loadings of row `i`.
fn loading_row_system(
    i: usize,
    y_i: &[f64],
    f: &[Vec<f64>],
    offsets: &OffsetDecomposition,
    p: usize,
    b0: &[f64],
    w0: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let r = i.min(p);
    if b0.len() != r || w0.nrows() != r || w0.ncols() != r {
        return Err(Error::DimensionMismatch(format!("row {} prior must have {r} entries", i + 1)));
    }
    let w0_inv = invert_spd(w0, "loading prior covariance")?;
    let mut prec = w0_inv.clone();
    let mut lin = &w0_inv * DVector::from_column_slice(b0);
    let alpha = &offsets.alpha[i];
    let s2 = &offsets.sigma_hat_sq[i];
    if alpha.len() != y_i.len() || f.iter().take(p.min(i + 1)).any(|c| c.len() != y_i.len()) {
        return Err(Error::DimensionMismatch("row data and factor lengths differ".into()));
    }
    for t in 0..y_i.len() {
        let w = 1.0 / s2[t];
        let d = if i < p { f[i][t] } else { 0.0 };
        let resid = y_i[t] - alpha[t] - d;
        for a in 0..r {
            let ga = f[a][t];
            lin[a] += resid * ga * w;
            for b in 0..=a {
                let v = ga * f[b][t] * w;
                prec[(a, b)] += v;
                if a != b {
                    prec[(b, a)] += v;
                }
            }
        }
    }
    Ok((prec, lin))
}

/// Mean and covariance of the normal conditional of row `i`'s free loadings.
pub fn loading_row_posterior(
    i: usize,
    y_i: &[f64],
    f: &[Vec<f64>],
    offsets: &OffsetDecomposition,
    p: usize,
    b0: &[f64],
    w0: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (prec, lin) = loading_row_system(i, y_i, f, offsets, p, b0, w0)?;
    let cov = invert_spd(&prec, "loading posterior precision")?;
    let mean = &cov * lin;
    Ok((mean, cov))
}

/// Gibbs draw of the `min(i, p)` free loadings of row `i` (zero-based).
pub fn sample_loading_row<R: Rng + ?Sized>(
    i: usize,
    y_i: &[f64],
    f: &[Vec<f64>],
    offsets: &OffsetDecomposition,
    p: usize,
    b0: &[f64],
    w0: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if i.min(p) == 0 {
        return Ok(Vec::new());
    }
    let (prec, lin) = loading_row_system(i, y_i, f, offsets, p, b0, w0)?;
    Ok(draw_normal_from_precision(prec, &lin, rng)?.iter().copied().collect())
}

fn factor_system(
    t: usize,
    y_t: &[f64],
    b: &LoadingMatrix,
    offsets: &OffsetDecomposition,
) -> (DMatrix<f64>, DVector<f64>) {
    let (k, p) = (b.k(), b.p());
    let mut prec = DMatrix::zeros(p, p);
    let mut lin = DVector::zeros(p);
    for j in 0..p {
        let psi = offsets.sigma_hat_sq[k + j][t];
        prec[(j, j)] += 1.0 / psi;
        lin[j] += offsets.alpha[k + j][t] / psi;
    }
    for i in 0..k {
        let w = 1.0 / offsets.sigma_hat_sq[i][t];
        let resid = y_t[i] - offsets.alpha[i][t];
        let row = b.row(i);
        for a in 0..p {
            lin[a] += row[a] * resid * w;
            for c in 0..p {
                prec[(a, c)] += row[a] * row[c] * w;
            }
        }
    }
    (prec, lin)
}

/// Mean and covariance `(a_hat_t, V_hat_t)` of the conditional of `f_t`.
pub fn factor_posterior(
    t: usize,
    y_t: &[f64],
    b: &LoadingMatrix,
    offsets: &OffsetDecomposition,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (prec, lin) = factor_system(t, y_t, b, offsets);
    let cov = invert_spd(&prec, "factor posterior precision")?;
    let mean = &cov * lin;
    Ok((mean, cov))
}

/// Gibbs draw of the factor vector at time `t`.
pub fn sample_factor<R: Rng + ?Sized>(
    t: usize,
    y_t: &[f64],
    b: &LoadingMatrix,
    offsets: &OffsetDecomposition,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if y_t.len() != b.k() || offsets.q() != b.k() + b.p() {
        return Err(Error::DimensionMismatch("factor update dimensions".into()));
    }
    let (prec, lin) = factor_system(t, y_t, b, offsets);
    Ok(draw_normal_from_precision(prec, &lin, rng)?.iter().copied().collect())
}

/// Conjugate draw `kappa ~ Beta(a + n_nonzero, b + q_free - n_nonzero)`.
pub fn sample_kappa<R: Rng + ?Sized>(n_nonzero: usize, q_free: usize, a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if n_nonzero > q_free {
        return Err(Error::InvalidArgument(format!("{n_nonzero} non-zero skewness terms exceed {q_free} free ones")));
    }
    draw_beta(a + n_nonzero as f64, b + (q_free - n_nonzero) as f64, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn flat(q: usize, t: usize) -> OffsetDecomposition {
        OffsetDecomposition { alpha: vec![vec![0.0; t]; q], sigma_hat_sq: vec![vec![1.0; t]; q] }
    }

    #[test]
    fn one_dimensional_factor_example() {
        let b = LoadingMatrix::from_rows(2, 1, vec![1.0, 1.0]).unwrap();
        let (m, v) = factor_posterior(0, &[1.0, 1.0], &b, &flat(3, 1)).unwrap();
        assert!((m[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((v[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_loadings_give_factor_prior() {
        // Row 0 has the fixed unit loading, so use p = 1 with a zero second row
        // and an enormous idiosyncratic variance on the first.
        let b = LoadingMatrix::from_rows(2, 1, vec![1.0, 0.0]).unwrap();
        let mut off = flat(3, 1);
        off.sigma_hat_sq[0][0] = 1e300;
        off.alpha[2][0] = 0.7;
        off.sigma_hat_sq[2][0] = 2.5;
        let (m, v) = factor_posterior(0, &[3.0, -1.0], &b, &off).unwrap();
        assert!((m[0] - 0.7).abs() < 1e-12 && (v[(0, 0)] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_gives_loading_prior() {
        let w0 = DMatrix::from_element(1, 1, 2.0);
        let (m, v) = loading_row_posterior(1, &[], &[vec![]], &flat(3, 0), 1, &[0.4], &w0).unwrap();
        assert!((m[0] - 0.4).abs() < 1e-14 && (v[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_prior_is_reported() {
        let w0 = DMatrix::zeros(1, 1);
        let r = loading_row_posterior(1, &[0.2], &[vec![0.5]], &flat(3, 1), 1, &[0.0], &w0);
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn kappa_rejects_excess_count() {
        let mut rng = crate::rng::stream(1, crate::rng::Purpose::Kappa, 0, 0);
        assert!(sample_kappa(7, 6, 2.0, 2.0, &mut rng).is_err());
        assert!(sample_kappa(6, 6, 2.0, 2.0, &mut rng).is_ok());
    }
}
