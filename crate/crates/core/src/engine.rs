//! The full MCMC sweep, draw retention and execution strategy.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factor::{sample_factor, sample_kappa, sample_loading_row, OffsetDecomposition};
use crate::model::{validate_config, CheckedConfig, Dataset, LoadingMatrix, ModelConfig, SeriesParams, Variant};
use crate::rng::{stream, Purpose};
use crate::sv::{update_series, SeriesContext, SeriesTuning, SvSeriesState};

#[allow(unused_imports)]
use num_traits::Float;

/// Runs index-keyed work items. Implementations may run items concurrently
/// but must return results in index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        for (i, x) in items.iter_mut().enumerate() {
            f(i, x);
        }
    }
}

/// Complete sampler state between sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub series: Vec<SvSeriesState>,
    pub loadings: LoadingMatrix,
    /// Factor paths, `p x T`.
    pub f: Vec<Vec<f64>>,
    pub kappa: f64,
    pub included: Vec<bool>,
    pub tuning: Vec<SeriesTuning>,
}

impl ChainState {
    /// Assembles a state from explicit values (e.g. a simulated truth).
    pub fn from_parts(
        params: Vec<SeriesParams>,
        loadings: LoadingMatrix,
        h: Vec<Vec<f64>>,
        z: Vec<Vec<f64>>,
        f: Vec<Vec<f64>>,
        kappa: f64,
    ) -> Result<Self> {
        if params.len() != h.len() || h.len() != z.len() || f.len() != loadings.p() {
            return Err(Error::DimensionMismatch("state component counts differ".into()));
        }
        let included = params.iter().map(|p| p.beta != 0.0).collect();
        let series = params
            .into_iter()
            .zip(h)
            .zip(z)
            .map(|((p, h), z)| SvSeriesState::new(h, z, p))
            .collect::<Result<Vec<_>>>()?;
        let q = series.len();
        Ok(Self { series, loadings, f, kappa, included, tuning: vec![SeriesTuning::default(); q] })
    }

    pub fn t_len(&self) -> usize {
        self.f.first().map_or(0, Vec::len)
    }

    /// Data-driven starting point.
    pub fn initial(checked: &CheckedConfig, data: &Dataset) -> Result<Self> {
        let cfg = &checked.cfg;
        let (k, p, n) = (cfg.k, cfg.p, data.t_len());
        let priors = &cfg.priors;
        let var = |c: &[f64]| -> f64 {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            (c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / c.len() as f64).max(1e-300)
        };
        let cols = data.columns();
        let avg_var = cols.iter().map(|c| var(c)).sum::<f64>() / k as f64;
        let sigma0 = (priors.sigma_inv2_rate_eff() / priors.sigma_inv2_shape).sqrt().clamp(1e-3, 1.0);
        let nu0 = (priors.nu_shape / priors.nu_rate_eff()).max(4.5);
        let mut params = Vec::with_capacity(k + p);
        let mut h = Vec::with_capacity(k + p);
        for i in 0..k + p {
            let level = if i < k { (0.5 * var(&cols[i])).ln() } else { (0.5 * avg_var).ln() };
            params.push(SeriesParams::new(level, 0.95, sigma0, 0.0, nu0, 0.0)?);
            h.push(vec![level; n]);
        }
        let z = vec![vec![1.0; n]; k + p];
        let kappa = if cfg.variant.samples_kappa() { 0.5 } else { 1.0 };
        let mut state =
            Self::from_parts(params, LoadingMatrix::identified(k, p), h, z, vec![vec![0.0; n]; p], kappa)?;
        let offsets = OffsetDecomposition::from_states(&state.series);
        for t in 0..n {
            let mut rng = stream(cfg.mcmc.seed, Purpose::Init, 0, t as u64);
            let ft = sample_factor(t, data.row(t), &state.loadings, &offsets, &mut rng)?;
            for j in 0..p {
                state.f[j][t] = ft[j];
            }
        }
        Ok(state)
    }

    /// Extends every path to `t_len` by the AR(1) mean recursion (h), unit
    /// mixing values (z) and zero factors, for warm starts on longer data.
    pub fn extend_to(&mut self, t_len: usize) {
        for s in &mut self.series {
            let p = s.params;
            while s.h.len() < t_len {
                let last = *s.h.last().unwrap_or(&p.mu);
                s.h.push(p.mu + p.phi * (last - p.mu));
                s.z.push(1.0);
            }
            s.refresh();
        }
        for fj in &mut self.f {
            fj.resize(t_len, 0.0);
        }
    }
}

/// Post-burn-in acceptance rates of one series' MH steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcceptanceRates {
    pub phi: f64,
    pub sigma_rho: f64,
    pub nu: f64,
    pub level: f64,
    pub spread: f64,
    pub z: f64,
    /// Mean elliptical-slice shrink steps per path update.
    pub h_shrinks: f64,
}

impl AcceptanceRates {
    fn from_tuning(t: &SeriesTuning) -> Self {
        Self {
            phi: t.phi.rate(),
            sigma_rho: t.sigma_rho.rate(),
            nu: t.nu.rate(),
            level: t.level.rate(),
            spread: t.spread.rate(),
            z: t.z_rate(),
            h_shrinks: if t.h_blocks == 0 { 0.0 } else { t.h_shrinks as f64 / t.h_blocks as f64 },
        }
    }
}

/// One retained draw.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrawRecord {
    pub sweep: usize,
    pub params: Vec<SeriesParams>,
    /// Free loadings in row-major order of the free entries.
    pub loadings: Vec<f64>,
    pub kappa: f64,
    pub included: Vec<bool>,
    /// Log-variances at the last time point, for forecasting.
    pub h_last: Vec<f64>,
}

/// Stored `h` and `f` paths of one retained draw.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathSnapshot {
    pub draw: usize,
    pub h: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrawStore {
    pub k: usize,
    pub p: usize,
    pub variant: Variant,
    pub t_len: usize,
    pub records: Vec<DrawRecord>,
    /// Running posterior means of the paths.
    pub h_mean: Vec<Vec<f64>>,
    pub z_mean: Vec<Vec<f64>>,
    pub f_mean: Vec<Vec<f64>>,
    pub snapshots: Vec<PathSnapshot>,
    pub acceptance: Vec<AcceptanceRates>,
}

impl DrawStore {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn q(&self) -> usize {
        self.k + self.p
    }

    /// Loading matrix of draw `m`.
    pub fn loading_matrix(&self, m: usize) -> LoadingMatrix {
        let mut b = LoadingMatrix::identified(self.k, self.p);
        let idx: Vec<(usize, usize)> = b.free_indices().collect();
        for ((i, j), v) in idx.into_iter().zip(&self.records[m].loadings) {
            b.set_free(i, j, *v).expect("free index");
        }
        b
    }

    /// Column names of the flat draw table.
    pub fn column_names(&self) -> Vec<String> {
        let q = self.q();
        let mut names = Vec::new();
        for prefix in ["mu", "phi", "sigma", "rho", "nu", "beta", "incl"] {
            names.extend((1..=q).map(|i| format!("{prefix}[{i}]")));
        }
        let b = LoadingMatrix::identified(self.k, self.p);
        names.extend(b.free_indices().map(|(i, j)| format!("B[{},{}]", i + 1, j + 1)));
        names.push("kappa".into());
        names
    }

    /// Flat row of draw `m`, aligned with [`column_names`](Self::column_names).
    pub fn row(&self, m: usize) -> Vec<f64> {
        let r = &self.records[m];
        let mut row = Vec::with_capacity(7 * r.params.len() + r.loadings.len() + 1);
        row.extend(r.params.iter().map(|p| p.mu));
        row.extend(r.params.iter().map(|p| p.phi));
        row.extend(r.params.iter().map(|p| p.sigma));
        row.extend(r.params.iter().map(|p| p.rho));
        row.extend(r.params.iter().map(|p| p.nu));
        row.extend(r.params.iter().map(|p| p.beta));
        row.extend(r.included.iter().map(|b| if *b { 1.0 } else { 0.0 }));
        row.extend_from_slice(&r.loadings);
        row.push(r.kappa);
        row
    }

    /// Chain of one named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_names().iter().position(|n| n == name)?;
        Some((0..self.len()).map(|m| self.row(m)[idx]).collect())
    }

    /// All columns as chains, in column order.
    pub fn chains(&self) -> Vec<Vec<f64>> {
        let names = self.column_names();
        let mut chains = vec![Vec::with_capacity(self.len()); names.len()];
        for m in 0..self.len() {
            for (c, v) in chains.iter_mut().zip(self.row(m)) {
                c.push(v);
            }
        }
        chains
    }
}

fn check_finite_series(s: &SvSeriesState) -> bool {
    let p = &s.params;
    [p.mu, p.phi, p.sigma, p.rho, p.nu, p.beta].iter().all(|v| v.is_finite())
        && s.h.iter().all(|v| v.is_finite())
        && s.z.iter().all(|v| v.is_finite() && *v > 0.0)
}

/// Pseudo-observations of every series: `y_i - B_(i) f` for `i < k`, `f_j` after.
fn pseudo_observations(cols: &[Vec<f64>], b: &LoadingMatrix, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (k, p) = (b.k(), b.p());
    let mut out = Vec::with_capacity(k + p);
    for (i, col) in cols.iter().enumerate() {
        let row = b.row(i);
        out.push(
            col.iter()
                .enumerate()
                .map(|(t, y)| y - row.iter().zip(f).map(|(bij, fj)| bij * fj[t]).sum::<f64>())
                .collect(),
        );
    }
    out.extend(f.iter().cloned());
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Series,
    Loadings,
    Factors,
    Kappa,
}

/// One full sweep: (a) series updates, (b) loading rows, (c) factors, (d) kappa.
/// Returns the state after the sweep.
pub fn sweep<E: Executor>(
    checked: &CheckedConfig,
    cols: &[Vec<f64>],
    rows: &[Vec<f64>],
    state: &mut ChainState,
    index: usize,
    adapt: Option<usize>,
    exec: &E,
) -> Result<()> {
    let cfg = &checked.cfg;
    let (k, p) = (cfg.k, cfg.p);
    let seed = cfg.mcmc.seed;
    let sweep_id = index as u64;
    let mut phase = Phase::Series;

    // (a) per-series updates.
    let pseudo = pseudo_observations(cols, &state.loadings, &state.f);
    let kappa = state.kappa;
    let mut work: Vec<(SvSeriesState, SeriesTuning, bool)> = state
        .series
        .drain(..)
        .zip(state.tuning.drain(..))
        .map(|(s, t)| (s, t, false))
        .collect();
    exec.for_each_mut(&mut work, |i, (s, tune, inc)| {
        let ctx = SeriesContext {
            priors: &cfg.priors,
            tau0_sq: cfg.tau0_sq,
            beta_free: checked.beta_free[i],
            kappa,
            block_size: cfg.mcmc.sv_block_size,
            adapt,
        };
        let mut rng = stream(seed, Purpose::Series, sweep_id, i as u64);
        *inc = update_series(&pseudo[i], s, tune, &ctx, &mut rng);
    });
    for (i, (s, t, inc)) in work.into_iter().enumerate() {
        if !check_finite_series(&s) {
            return Err(Error::NonFinite { sweep: index, component: format!("series {}", i + 1) });
        }
        state.series.push(s);
        state.tuning.push(t);
        state.included[i] = inc;
    }

    // (b) loading rows.
    debug_assert!(phase < Phase::Loadings);
    phase = Phase::Loadings;
    let offsets = OffsetDecomposition::from_states(&state.series);
    let rows_free: Vec<Result<Vec<f64>>> = exec.map(k, |i| {
        let r = i.min(p);
        if r == 0 {
            return Ok(Vec::new());
        }
        let (b0, w0): (Vec<f64>, DMatrix<f64>) = cfg.priors.loading_prior(r);
        let mut rng = stream(seed, Purpose::Loading, sweep_id, i as u64);
        sample_loading_row(i, &cols[i], &state.f, &offsets, p, &b0, &w0, &mut rng)
    });
    for (i, row) in rows_free.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { sweep: index, component: format!("B[{},{}]", i + 1, j + 1) });
            }
            state.loadings.set_free(i, j, v)?;
        }
    }

    // (c) factors.
    debug_assert!(phase < Phase::Factors);
    phase = Phase::Factors;
    let n = rows.len();
    let loadings = &state.loadings;
    let draws: Vec<Result<Vec<f64>>> = exec.map(n, |t| {
        let mut rng = stream(seed, Purpose::Factor, sweep_id, t as u64);
        sample_factor(t, &rows[t], loadings, &offsets, &mut rng)
    });
    for (t, ft) in draws.into_iter().enumerate() {
        let ft = ft?;
        for j in 0..p {
            if !ft[j].is_finite() {
                return Err(Error::NonFinite { sweep: index, component: format!("f[{},{}]", j + 1, t + 1) });
            }
            state.f[j][t] = ft[j];
        }
    }

    // (d) kappa.
    debug_assert!(phase < Phase::Kappa);
    if cfg.variant.samples_kappa() {
        let n_nonzero = state.included.iter().zip(&checked.beta_free).filter(|(inc, free)| **inc && **free).count();
        let mut rng = stream(seed, Purpose::Kappa, sweep_id, 0);
        state.kappa =
            sample_kappa(n_nonzero, checked.q_free(), cfg.priors.kappa_beta_a, cfg.priors.kappa_beta_b, &mut rng)?;
    }
    Ok(())
}

/// Runs burn-in plus retained sweeps from a data-driven start.
pub fn run_mcmc<E: Executor>(cfg: &ModelConfig, data: &Dataset, exec: &E) -> Result<DrawStore> {
    run_mcmc_from(cfg, data, None, exec).map(|(s, _)| s)
}

/// Runs burn-in plus retained sweeps, optionally from a supplied state whose
/// paths are extended to the data length if shorter. Returns the draws and
/// the final state.
pub fn run_mcmc_from<E: Executor>(
    cfg: &ModelConfig,
    data: &Dataset,
    init: Option<ChainState>,
    exec: &E,
) -> Result<(DrawStore, ChainState)> {
    let checked = validate_config(cfg, data)?;
    let n = data.t_len();
    let mut state = match init {
        Some(mut s) => {
            if s.series.len() != cfg.q() || s.loadings.k() != cfg.k || s.loadings.p() != cfg.p {
                return Err(Error::DimensionMismatch("initial state does not match the configuration".into()));
            }
            if s.t_len() > n {
                return Err(Error::DimensionMismatch("initial state is longer than the data".into()));
            }
            s.extend_to(n);
            for (i, free) in checked.beta_free.iter().enumerate() {
                if !free {
                    s.series[i].params.beta = 0.0;
                    s.series[i].refresh();
                    s.included[i] = false;
                }
            }
            if !cfg.variant.samples_kappa() {
                s.kappa = 1.0;
            }
            s
        }
        None => ChainState::initial(&checked, data)?,
    };
    let cols = data.columns();
    let rows: Vec<Vec<f64>> = (0..n).map(|t| data.row(t).to_vec()).collect();
    let mc = &cfg.mcmc;
    let q = cfg.q();
    let mut store = DrawStore {
        k: cfg.k,
        p: cfg.p,
        variant: cfg.variant,
        t_len: n,
        records: Vec::with_capacity(mc.retained()),
        h_mean: vec![vec![0.0; n]; q],
        z_mean: vec![vec![0.0; n]; q],
        f_mean: vec![vec![0.0; n]; cfg.p],
        snapshots: Vec::new(),
        acceptance: Vec::new(),
    };
    for it in 0..mc.burn_in {
        sweep(&checked, &cols, &rows, &mut state, it, Some(it), exec)?;
    }
    for t in &mut state.tuning {
        t.reset_counts();
    }
    for it in 0..mc.n_draws {
        let index = mc.burn_in + it;
        sweep(&checked, &cols, &rows, &mut state, index, None, exec)?;
        if (it + 1) % mc.thin != 0 {
            continue;
        }
        let m = store.records.len();
        store.records.push(DrawRecord {
            sweep: index,
            params: state.series.iter().map(|s| s.params).collect(),
            loadings: state.loadings.free_indices().map(|(i, j)| state.loadings.get(i, j)).collect(),
            kappa: state.kappa,
            included: state.included.clone(),
            h_last: state.series.iter().map(|s| *s.h.last().unwrap_or(&s.params.mu)).collect(),
        });
        let w = 1.0 / (m + 1) as f64;
        for (i, s) in state.series.iter().enumerate() {
            for t in 0..n {
                store.h_mean[i][t] += (s.h[t] - store.h_mean[i][t]) * w;
                store.z_mean[i][t] += (s.z[t] - store.z_mean[i][t]) * w;
            }
        }
        for (j, fj) in state.f.iter().enumerate() {
            for t in 0..n {
                store.f_mean[j][t] += (fj[t] - store.f_mean[j][t]) * w;
            }
        }
        if mc.full_paths || (mc.snapshot_every > 0 && (m + 1) % mc.snapshot_every == 0) {
            store.snapshots.push(PathSnapshot {
                draw: m,
                h: state.series.iter().map(|s| s.h.clone()).collect(),
                f: state.f.clone(),
            });
        }
    }
    store.acceptance = state.tuning.iter().map(AcceptanceRates::from_tuning).collect();
    Ok((store, state))
}
