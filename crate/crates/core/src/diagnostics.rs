//! Single-chain convergence diagnostics.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[allow(unused_imports)]
use num_traits::Float;

pub const MIN_DRAWS: usize = 100;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Lag-0 autocovariance and integrated autocorrelation time
/// `1 + 2 sum rho_k`, truncated by Geyer's initial monotone positive sequence
/// of pair sums `rho_{2m} + rho_{2m+1}`.
fn iact(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let acov = |lag: usize| -> f64 { d[..n - lag].iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 };
    let g0 = acov(0);
    if g0 <= 0.0 {
        return (0.0, 1.0);
    }
    let mut pairs = 1.0 + acov(1) / g0;
    let mut prev = pairs;
    let mut lag = 2;
    while lag + 1 < n {
        let pair = (acov(lag) + acov(lag + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        pairs += pair;
        prev = pair;
        lag += 2;
    }
    (g0, (2.0 * pairs - 1.0).max(1e-12))
}

/// Effective sample size `N / (1 + 2 sum rho_k)`, at most `N`.
pub fn effective_sample_size(draws: &[f64]) -> Result<f64> {
    let n = draws.len();
    if n < MIN_DRAWS {
        return Err(Error::ChainTooShort { len: n, min: MIN_DRAWS });
    }
    let (g0, tau) = iact(draws);
    if g0 == 0.0 {
        return Ok(n as f64);
    }
    Ok((n as f64 / tau).min(n as f64))
}

/// Spectral density at frequency zero, divided by the segment length.
fn spectral_var_of_mean(x: &[f64]) -> f64 {
    let (g0, tau) = iact(x);
    g0 * tau / x.len() as f64
}

/// Geweke z-score comparing the first 10% with the last 50% of a chain.
pub fn geweke_z(draws: &[f64]) -> Result<f64> {
    let n = draws.len();
    if n < MIN_DRAWS {
        return Err(Error::ChainTooShort { len: n, min: MIN_DRAWS });
    }
    let a = &draws[..n / 10];
    let b = &draws[n - n / 2..];
    let var = spectral_var_of_mean(a) + spectral_var_of_mean(b);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::Degenerate("chain segments have zero variance".into()));
    }
    Ok((mean(a) - mean(b)) / var.sqrt())
}

/// Whether the Geweke test does not reject convergence at the 5% level.
pub fn geweke_passes(z: f64) -> bool {
    z.abs() < 1.96
}
