use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use skewfsv::config::{self, ModelDefaults};
use skewfsv::io::{self, Demean, InputMode, LoadOptions, Stamped};
use skewfsv::report;
use skewfsv::{Parallel, Provenance};
use skewfsv_core::backtest::{recursive_backtest, BacktestReport};
use skewfsv_core::engine::{run_mcmc, DrawStore};
use skewfsv_core::forecast::{optimize_portfolio, var_quantile, ForecastMixture};
use skewfsv_core::simulate::{draw_prior_params, skewness_cases, simulate, skewness_study, SkewnessCase, TrueParams};
use skewfsv_core::summary::PosteriorSummary;
use skewfsv_core::model::McmcSettings;
use skewfsv_core::{model, rng, Dataset, ModelConfig, Variant};

#[derive(Parser)]
#[command(name = "skewfsv", version, about = "Skew factor stochastic volatility: simulation, estimation and forecasting")]
struct Cli {
    /// Seed for every random draw; overrides `mcmc.seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to SKEWFSV_THREADS or the core count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate returns from the benchmark design or from the prior.
    Simulate(SimulateArgs),
    /// Sample skewness of simulated returns across skewness configurations.
    SkewnessStudy(SkewnessArgs),
    /// Run the MCMC sampler on a returns file.
    Fit(FitArgs),
    /// Predictive moments, portfolio weights and VaR from a fitted store.
    Forecast(ForecastArgs),
    /// Recursive out-of-sample comparison of model variants.
    Backtest(BacktestArgs),
    /// Render a JSON summary as Markdown.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV with header `date,<name1>,...` and ISO dates.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = InputMode::Prices)]
    mode: InputMode,
    /// `none`, `all`, or a row count; defaults to `all` for prices and `none` for returns.
    #[arg(long)]
    demean: Option<String>,
    /// Multiplier applied after differencing, e.g. 100 for percent.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Args)]
struct ModelArgs {
    /// Model configuration, JSON or TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    factors: Option<usize>,
    /// Reduced MCMC sizes (500 burn-in, 2000 draws, thin 2).
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long = "t", default_value_t = 1000)]
    t_len: usize,
    /// Comma-separated skewness per process (k idiosyncratic then p factors).
    /// Defaults to -1 on factors and 0 on the idiosyncratic series.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Option<Vec<f64>>,
    /// Draw parameters from the prior of this model configuration instead.
    #[arg(long)]
    from_prior: bool,
    #[command(flatten)]
    model: ModelArgs,
    /// Also write prices `100 * exp(cumsum)` for use with `--mode prices`.
    #[arg(long)]
    prices: bool,
    #[arg(long, default_value = "sim")]
    out: PathBuf,
}

#[derive(Args)]
struct SkewnessArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long = "t", default_value_t = 1000)]
    t_len: usize,
    #[arg(long, default_value = "skewness")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Series order by name, comma-separated; the first p become factor leaders.
    #[arg(long, value_delimiter = ',')]
    reorder: Option<Vec<String>>,
    /// Print the correlation ranking of the series and use it as the order.
    #[arg(long)]
    suggest_order: bool,
    #[arg(long, default_value = "fit")]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    /// `store.json` written by `fit`.
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value_t = 5)]
    horizons: usize,
    /// Daily target return; minimum-variance weights when absent.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.005, 0.01, 0.05])]
    alpha: Vec<f64>,
    #[arg(long, default_value = "forecast.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BacktestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Backtest schedule, JSON or TOML.
    #[arg(long)]
    backtest_config: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant, default_value = "S0")]
    base: Variant,
    #[arg(long, value_delimiter = ',', value_parser = parse_variant, default_value = "SF,SYF,SSYF")]
    models: Vec<Variant>,
    #[arg(long)]
    first_window: Option<usize>,
    #[arg(long)]
    n_refits: Option<usize>,
    #[arg(long, default_value = "backtest")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// `summary.json`, `backtest.json` or `skewness.json`.
    input: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).map_err(|e| e.to_string())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let exec = match cli.threads {
        Some(n) => Parallel::new(n)?,
        None => Parallel::from_env()?,
    };
    match cli.cmd {
        Command::Simulate(a) => cmd_simulate(a, cli.seed, &exec),
        Command::SkewnessStudy(a) => cmd_skewness(a, cli.seed.unwrap_or(1), &exec),
        Command::Fit(a) => cmd_fit(a, cli.seed, &exec),
        Command::Forecast(a) => cmd_forecast(a, cli.seed, &exec),
        Command::Backtest(a) => cmd_backtest(a, cli.seed, &exec),
        Command::Report(a) => cmd_report(a),
    }
}

fn load_data(a: &DataArgs, default_window: Option<usize>) -> anyhow::Result<Dataset> {
    let demean = match a.demean.as_deref() {
        None if a.mode == InputMode::Returns => Demean::None,
        None => default_window.map_or(Demean::Full, Demean::Window),
        Some("none") => Demean::None,
        Some("all") => Demean::Full,
        Some(n) => Demean::Window(n.parse().with_context(|| format!("--demean expects none, all or a row count, got `{n}`"))?),
    };
    let opts = LoadOptions { mode: a.mode, demean, scale: a.scale };
    io::load_returns(&a.data, &opts).with_context(|| format!("loading {}", a.data.display()))
}

fn model_config(a: &ModelArgs, k: usize, seed: Option<u64>) -> anyhow::Result<ModelConfig> {
    let value = a.config.as_deref().map(config::read_value).transpose()?;
    let defaults = ModelDefaults { k: Some(k), p: Some(a.factors.unwrap_or(1)), variant: Some(a.variant.unwrap_or(Variant::SSYF)) };
    let mut cfg = config::model_config(value, defaults)?;
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(p) = a.factors {
        cfg.p = p;
    }
    cfg.k = k;
    if a.desk {
        let d = McmcSettings::desk();
        cfg.mcmc.burn_in = d.burn_in;
        cfg.mcmc.n_draws = d.n_draws;
        cfg.mcmc.thin = d.thin;
    }
    if let Some(b) = a.burn_in {
        cfg.mcmc.burn_in = b;
    }
    if let Some(n) = a.draws {
        cfg.mcmc.n_draws = n;
    }
    if let Some(t) = a.thin {
        cfg.mcmc.thin = t;
    }
    if let Some(s) = seed {
        cfg.mcmc.seed = s;
    }
    Ok(cfg)
}

fn save_json<T: Serialize>(path: &Path, prov: &Provenance, value: T) -> anyhow::Result<()> {
    io::write_json(path, &Stamped::new(prov, value)).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Truth<'a> {
    params: &'a TrueParams,
    kappa: Option<f64>,
}

fn cmd_simulate(a: SimulateArgs, seed: Option<u64>, exec: &Parallel) -> anyhow::Result<()> {
    let _ = exec;
    let seed = seed.unwrap_or(1);
    let mut rng = rng::stream(seed, rng::Purpose::Simulate, u64::MAX, 0);
    let (truth, kappa, prov) = if a.from_prior {
        let mut cfg = model_config(&a.model, a.k, Some(seed))?;
        cfg.p = a.model.factors.unwrap_or(a.p);
        let checked = model::validate_config_shape(&cfg)?;
        let (t, kappa) = draw_prior_params(&checked, &mut rng)?;
        (t, Some(kappa), Provenance::new(seed, &cfg))
    } else {
        let beta = match a.beta {
            Some(b) => b,
            None => (0..a.k + a.p).map(|i| if i < a.k { 0.0 } else { -1.0 }).collect(),
        };
        let t = TrueParams::benchmark(a.k, a.p, &beta, &mut rng)?;
        let prov = Provenance::new(seed, &(a.k, a.p, a.t_len, &beta));
        (t, None, prov)
    };
    let (mut data, latent) = simulate(&truth, a.t_len, rand::RngCore::next_u64(&mut rng))?;
    data.dates = io::business_days(NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"), a.t_len);
    io::write_dataset(&a.out.join("returns.csv"), &data, &prov)?;
    if a.prices {
        let mut prices = Vec::with_capacity((a.t_len + 1) * data.k());
        let mut level = vec![100.0f64; data.k()];
        prices.extend_from_slice(&level);
        for t in 0..data.t_len() {
            for (l, r) in level.iter_mut().zip(data.row(t)) {
                *l *= r.exp();
            }
            prices.extend_from_slice(&level);
        }
        let dates = io::business_days(NaiveDate::from_ymd_opt(1999, 12, 31).expect("valid date"), a.t_len + 1);
        let pd = Dataset::new(data.names.clone(), dates, prices)?;
        io::write_dataset(&a.out.join("prices.csv"), &pd, &prov)?;
    }
    save_json(&a.out.join("truth.json"), &prov, Truth { params: &truth, kappa })?;
    save_json(&a.out.join("latent.json"), &prov, &latent)?;
    println!("wrote {} observations of {} series to {}", a.t_len, data.k(), a.out.display());
    Ok(())
}

fn cmd_skewness(a: SkewnessArgs, seed: u64, exec: &Parallel) -> anyhow::Result<()> {
    let cases = skewness_cases();
    let prov = Provenance::new(seed, &(a.k, a.reps, a.t_len, &cases));
    let out = skewness_study(a.k, &cases, a.reps, a.t_len, seed, exec)?;
    io::write_skewness(&a.out.join("skewness.csv"), &out, &prov)?;
    save_json(&a.out.join("skewness.json"), &prov, &out)?;
    print!("{}", report::skewness_markdown(&out));
    Ok(())
}

fn cmd_fit(a: FitArgs, seed: Option<u64>, exec: &Parallel) -> anyhow::Result<()> {
    let mut data = load_data(&a.data, None)?;
    if a.suggest_order {
        let order = model::rank_by_correlation(&data);
        let names: Vec<&str> = order.iter().map(|&i| data.names[i].as_str()).collect();
        println!("suggested order: {}", names.join(","));
        data = data.reorder(&order)?;
    } else if let Some(names) = &a.reorder {
        let order = names
            .iter()
            .map(|n| data.names.iter().position(|m| m == n).with_context(|| format!("unknown series `{n}`")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        data = data.reorder(&order)?;
    }
    let cfg = model_config(&a.model, data.k(), seed)?;
    let prov = Provenance::new(cfg.mcmc.seed, &cfg);
    let store = run_mcmc(&cfg, &data, exec)?;
    let summary = PosteriorSummary::from_store(&store);
    io::write_draws(&a.out.join("draws.csv"), &store, &prov)?;
    save_json(&a.out.join("summary.json"), &prov, &summary)?;
    save_json(&a.out.join("store.json"), &prov, &store)?;
    save_json(&a.out.join("config.json"), &prov, &cfg)?;
    let md = report::posterior_markdown(&summary);
    std::fs::write(a.out.join("summary.md"), &md)?;
    print!("{md}");
    Ok(())
}

fn cmd_forecast(a: ForecastArgs, seed: Option<u64>, exec: &Parallel) -> anyhow::Result<()> {
    let stamped: Stamped<DrawStore> = io::read_json(&a.store).with_context(|| format!("reading {}", a.store.display()))?;
    let store = stamped.data;
    let seed = seed.unwrap_or(stamped.seed);
    let prov = Provenance { seed, config_hash: stamped.config_hash, git_rev: skewfsv::provenance::GIT_REV.into() };
    let mixes = ForecastMixture::from_draws(&store, a.horizons, seed, 0, exec)?;
    let mut rows = Vec::new();
    for (h, mix) in mixes.iter().enumerate() {
        let h = h + 1;
        let (m, d) = mix.moments();
        for i in 0..m.len() {
            rows.push((h, format!("mean[{}]", i + 1), m[i]));
        }
        for i in 0..m.len() {
            for j in 0..=i {
                rows.push((h, format!("cov[{},{}]", i + 1, j + 1), d[(i, j)]));
            }
        }
        let w = optimize_portfolio(&m, &d, a.target)?;
        for (i, wi) in w.iter().enumerate() {
            rows.push((h, format!("w[{}]", i + 1), *wi));
        }
        for &alpha in &a.alpha {
            rows.push((h, format!("var[{alpha}]"), var_quantile(&w, mix, alpha)?));
        }
    }
    io::write_long(&a.out, &rows, &prov)?;
    println!("wrote {} horizons to {}", a.horizons, a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct BacktestRun<'a> {
    model: &'a ModelConfig,
    backtest: &'a skewfsv_core::backtest::BacktestConfig,
    models: &'a [Variant],
}

fn cmd_backtest(a: BacktestArgs, seed: Option<u64>, exec: &Parallel) -> anyhow::Result<()> {
    let mut bt = config::backtest_config(a.backtest_config.as_deref().map(config::read_value).transpose()?)?;
    if let Some(w) = a.first_window {
        bt.first_window = w;
    }
    if let Some(n) = a.n_refits {
        bt.n_refits = n;
    }
    let data = load_data(&a.data, Some(bt.first_window))?;
    let cfg = model_config(&a.model, data.k(), seed)?;
    let mut models = vec![a.base];
    models.extend(a.models.iter().copied().filter(|m| *m != a.base));
    let prov = Provenance::new(cfg.mcmc.seed, &BacktestRun { model: &cfg, backtest: &bt, models: &models });
    let rep = recursive_backtest(&data, &cfg, &models, &bt, exec)?;
    io::write_lpdr(&a.out.join("lpdr.csv"), &rep, &prov)?;
    io::write_var(&a.out.join("var.csv"), &rep, &prov)?;
    io::write_portfolio(&a.out.join("portfolio.csv"), &rep, &data.names, &data.dates, &prov)?;
    save_json(&a.out.join("backtest.json"), &prov, &rep)?;
    print!("{}", report::backtest_markdown(&rep));
    Ok(())
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    let stamped: Stamped<Value> = io::read_json(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let v = stamped.data;
    let md = if v.get("prob_beta_zero").is_some() {
        report::posterior_markdown(&serde_json::from_value::<PosteriorSummary>(v)?)
    } else if v.get("lpdr").is_some() {
        report::backtest_markdown(&serde_json::from_value::<BacktestReport>(v)?)
    } else if v.is_array() {
        report::skewness_markdown(&serde_json::from_value::<Vec<SkewnessCase>>(v)?)
    } else {
        bail!("{} is not a summary, backtest or skewness file", a.input.display());
    };
    println!("<!-- seed={} config_hash={} git_rev={} -->", stamped.seed, stamped.config_hash, stamped.git_rev);
    print!("{md}");
    Ok(())
}
