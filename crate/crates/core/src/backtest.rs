//! Recursive refit-and-forecast exercise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::RngCore;

use crate::engine::{run_mcmc_from, ChainState, Executor};
use crate::error::{Error, Result};
use crate::forecast::{kupiec_lr, optimize_portfolio, predictive_log_density, var_quantile, ForecastMixture};
use crate::model::{Dataset, ModelConfig, Variant};
use crate::rng::{stream, Purpose};

/// Schedule and scoring rules of a backtest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BacktestConfig {
    /// Observations in the first estimation window.
    pub first_window: usize,
    /// Number of forecast origins.
    pub n_refits: usize,
    /// Days between consecutive origins.
    pub stride: usize,
    /// Forecast horizons `1..=horizons` scored at each origin.
    pub horizons: usize,
    pub var_levels: Vec<f64>,
    /// Daily target returns; a target-free rule is always added.
    pub targets: Vec<f64>,
    /// Day `j` of a cycle uses the `j`-step forecast; otherwise the 1-step one.
    pub matching_horizon: bool,
    /// Start each refit from the previous origin's final state.
    pub warm_start: bool,
    /// Burn-in of warm-started refits; `None` keeps the configured burn-in.
    pub refit_burn_in: Option<usize>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            first_window: 2519,
            n_refits: 100,
            stride: 5,
            horizons: 5,
            var_levels: vec![0.005, 0.01, 0.05],
            targets: vec![0.00005, 0.0001, 0.0002],
            matching_horizon: true,
            warm_start: true,
            refit_burn_in: None,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self, data_len: usize) -> Result<()> {
        if self.stride == 0 || self.horizons == 0 || self.n_refits == 0 {
            return Err(Error::InvalidArgument("stride, horizons and n_refits must be >= 1".into()));
        }
        if self.first_window < 2 || data_len <= self.first_window {
            return Err(Error::InsufficientData(format!(
                "{data_len} observations do not extend past the first window of {}",
                self.first_window
            )));
        }
        if self.var_levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidArgument("VaR levels must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Rules in output order: the targets, then target-free.
    pub fn rules(&self) -> Vec<PortfolioRule> {
        let mut r: Vec<PortfolioRule> = self.targets.iter().map(|t| PortfolioRule::Target(*t)).collect();
        r.push(PortfolioRule::TargetFree);
        r
    }

    /// End (exclusive) of each estimation window that has a day to score.
    pub fn origins(&self, data_len: usize) -> Vec<usize> {
        (0..self.n_refits)
            .map(|j| self.first_window + j * self.stride)
            .filter(|&end| end < data_len)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PortfolioRule {
    Target(f64),
    TargetFree,
}

impl PortfolioRule {
    pub fn label(&self) -> alloc::string::String {
        match self {
            PortfolioRule::Target(t) => format!("target={t}"),
            PortfolioRule::TargetFree => "target-free".into(),
        }
    }

    fn target(&self) -> Option<f64> {
        match self {
            PortfolioRule::Target(t) => Some(*t),
            PortfolioRule::TargetFree => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarRecord {
    pub rule: PortfolioRule,
    pub alpha: f64,
    pub violations: usize,
    pub days: usize,
    pub lr: f64,
    pub p_value: f64,
    /// Rejected at the 10% level.
    pub reject_10: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PortfolioPath {
    pub rule: PortfolioRule,
    /// Zero-based data indices of the allocation days.
    pub days: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub returns: Vec<f64>,
    pub cumulative: f64,
    /// Days where the target was infeasible and minimum-variance weights were used.
    pub fallback: Vec<bool>,
    pub fallback_days: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelResult {
    pub variant: Variant,
    /// `lpd[h-1]` lists the log predictive densities of every scored `h`-step forecast.
    pub lpd: Vec<Vec<f64>>,
    pub var: Vec<VarRecord>,
    pub portfolio: Vec<PortfolioPath>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LpdrRow {
    pub variant: Variant,
    pub per_horizon: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BacktestReport {
    pub base: Variant,
    /// Zero-based data indices of the allocation days.
    pub days: Vec<usize>,
    pub models: Vec<ModelResult>,
    pub lpdr: Vec<LpdrRow>,
}

impl BacktestReport {
    pub fn model(&self, v: Variant) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.variant == v)
    }

    pub fn lpdr_of(&self, v: Variant) -> Option<&LpdrRow> {
        self.lpdr.iter().find(|r| r.variant == v)
    }
}

struct DayOutcome {
    weights: Vec<Vec<f64>>,
    returns: Vec<f64>,
    fallback: Vec<bool>,
    violations: Vec<Vec<bool>>,
}

fn score_day(y: &[f64], mix: &ForecastMixture, rules: &[PortfolioRule], levels: &[f64]) -> Result<DayOutcome> {
    let (m, d) = mix.moments();
    let mut out = DayOutcome { weights: Vec::new(), returns: Vec::new(), fallback: Vec::new(), violations: Vec::new() };
    let y = DVector::from_column_slice(y);
    for rule in rules {
        let (w, fell_back) = match optimize_portfolio(&m, &d, rule.target()) {
            Ok(w) => (w, false),
            Err(Error::Infeasible(_)) => (optimize_portfolio(&m, &d, None)?, true),
            Err(e) => return Err(e),
        };
        let r = DVector::from_column_slice(&w).dot(&y);
        let mut v = Vec::with_capacity(levels.len());
        for &a in levels {
            v.push(r < var_quantile(&w, mix, a)?);
        }
        out.weights.push(w);
        out.returns.push(r);
        out.fallback.push(fell_back);
        out.violations.push(v);
    }
    Ok(out)
}

/// Refits every model on expanding windows and scores its forecasts.
/// `models[0]` is the base of the log predictive density ratios.
pub fn recursive_backtest<E: Executor>(
    data: &Dataset,
    cfg: &ModelConfig,
    models: &[Variant],
    bt: &BacktestConfig,
    exec: &E,
) -> Result<BacktestReport> {
    let n = data.t_len();
    bt.validate(n)?;
    let &base = models.first().ok_or_else(|| Error::InvalidArgument("at least one model is required".into()))?;
    let origins = bt.origins(n);
    let rules = bt.rules();
    let cycle = bt.stride.min(bt.horizons);
    let days: Vec<usize> = origins
        .iter()
        .flat_map(|&end| (0..cycle).map(move |d| end + d))
        .filter(|&t| t < n)
        .collect();
    let mut results = Vec::with_capacity(models.len());
    for (mi, &variant) in models.iter().enumerate() {
        let mut mcfg = cfg.clone();
        mcfg.variant = variant;
        let mut state: Option<ChainState> = None;
        let mut lpd = vec![Vec::new(); bt.horizons];
        let mut paths: Vec<PortfolioPath> = rules
            .iter()
            .map(|r| PortfolioPath { rule: *r, days: Vec::new(), weights: Vec::new(), returns: Vec::new(), cumulative: 0.0, fallback: Vec::new(), fallback_days: 0 })
            .collect();
        let mut viol = vec![vec![0usize; bt.var_levels.len()]; rules.len()];
        for (j, &end) in origins.iter().enumerate() {
            let window = data.head(end)?;
            let mut run_cfg = mcfg.clone();
            run_cfg.mcmc.seed = stream(cfg.mcmc.seed, Purpose::Misc, j as u64, mi as u64).next_u64();
            let init = if bt.warm_start { state.take() } else { None };
            if init.is_some() {
                if let Some(b) = bt.refit_burn_in {
                    run_cfg.mcmc.burn_in = b;
                }
            }
            let (store, last) = run_mcmc_from(&run_cfg, &window, init, exec)?;
            state = Some(last);
            let mixes = ForecastMixture::from_draws(&store, bt.horizons, run_cfg.mcmc.seed, j as u64, exec)?;
            for (h, mix) in mixes.iter().enumerate() {
                let t = end + h;
                if t < n {
                    lpd[h].push(predictive_log_density(data.row(t), mix)?);
                }
            }
            for d in 0..cycle {
                let t = end + d;
                if t >= n {
                    break;
                }
                let mix = if bt.matching_horizon { &mixes[d] } else { &mixes[0] };
                let o = score_day(data.row(t), mix, &rules, &bt.var_levels)?;
                for (ri, path) in paths.iter_mut().enumerate() {
                    path.days.push(t);
                    path.weights.push(o.weights[ri].clone());
                    path.returns.push(o.returns[ri]);
                    path.cumulative += o.returns[ri];
                    path.fallback.push(o.fallback[ri]);
                    if o.fallback[ri] {
                        path.fallback_days += 1;
                    }
                    for (ai, v) in o.violations[ri].iter().enumerate() {
                        viol[ri][ai] += usize::from(*v);
                    }
                }
            }
        }
        let mut var = Vec::new();
        for (ri, rule) in rules.iter().enumerate() {
            for (ai, &alpha) in bt.var_levels.iter().enumerate() {
                let (lr, p) = kupiec_lr(viol[ri][ai], days.len(), alpha)?;
                var.push(VarRecord { rule: *rule, alpha, violations: viol[ri][ai], days: days.len(), lr, p_value: p, reject_10: p < 0.10 });
            }
        }
        results.push(ModelResult { variant, lpd, var, portfolio: paths });
    }
    let base_lpd = results[0].lpd.clone();
    let lpdr = results
        .iter()
        .map(|r| {
            let per_horizon: Vec<f64> = r
                .lpd
                .iter()
                .zip(&base_lpd)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).sum())
                .collect();
            let total = per_horizon.iter().sum();
            LpdrRow { variant: r.variant, per_horizon, total }
        })
        .collect();
    Ok(BacktestReport { base, days, models: results, lpdr })
}
