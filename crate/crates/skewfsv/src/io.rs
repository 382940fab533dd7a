//! Returns ingestion and result files.
//!
//! CSV outputs start with a provenance comment line and write floats in
//! `{:.16e}` form (17 significant digits), which round-trips exactly.
//! Readers skip lines starting with `#`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::de::DeserializeOwned;
use serde::Serialize;
use skewfsv_core::backtest::BacktestReport;
use skewfsv_core::engine::DrawStore;
use skewfsv_core::simulate::SkewnessCase;
use skewfsv_core::Dataset;

use crate::error::{file_err, IoError, Result};
use crate::provenance::Provenance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// Closing prices; converted to log differences.
    #[default]
    Prices,
    /// Returns used as given.
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Demean {
    None,
    /// Column means over all rows.
    Full,
    /// Column means over the first `n` rows, e.g. the first estimation window.
    Window(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub mode: InputMode,
    pub demean: Demean,
    /// Multiplier applied last, e.g. 100 for percent.
    pub scale: f64,
}

impl LoadOptions {
    pub fn prices() -> Self {
        Self { mode: InputMode::Prices, demean: Demean::Full, scale: 1.0 }
    }

    pub fn returns() -> Self {
        Self { mode: InputMode::Returns, demean: Demean::None, scale: 1.0 }
    }
}

pub fn load_returns(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let f = File::open(path).map_err(file_err(path))?;
    read_returns(f, opts)
}

/// Parses `date,<name1>,...,<namek>` with ISO dates.
pub fn read_returns<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(IoError::Format("header needs a date column and at least one series".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let k = names.len();
    let mut dates: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != k + 1 {
            return Err(IoError::Parse { line, msg: format!("expected {} fields, found {}", k + 1, rec.len()) });
        }
        let date = &rec[0];
        NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .map_err(|_| IoError::Parse { line, msg: format!("`{date}` is not an ISO date") })?;
        if !seen.insert(date.to_string()) {
            return Err(IoError::Parse { line, msg: format!("duplicate date {date}") });
        }
        dates.push(date.to_string());
        for (j, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                return Err(IoError::Parse { line, msg: format!("missing value for {}", names[j]) });
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| IoError::Parse { line, msg: format!("non-numeric value `{cell}` for {}", names[j]) })?;
            if !v.is_finite() {
                return Err(IoError::Parse { line, msg: format!("non-finite value for {}", names[j]) });
            }
            if opts.mode == InputMode::Prices && v <= 0.0 {
                return Err(IoError::Parse { line, msg: format!("price of {} must be positive", names[j]) });
            }
            values.push(v);
        }
    }
    let (dates, values) = match opts.mode {
        InputMode::Returns => (dates, values),
        InputMode::Prices => {
            let t = dates.len();
            let mut r = Vec::with_capacity(t.saturating_sub(1) * k);
            for s in 1..t {
                for j in 0..k {
                    r.push((values[s * k + j] / values[(s - 1) * k + j]).ln());
                }
            }
            (dates.into_iter().skip(1).collect(), r)
        }
    };
    let mut data = Dataset::new(names, dates, values)?;
    match opts.demean {
        Demean::None => {}
        Demean::Full => data.demean_with_window(data.t_len()),
        Demean::Window(n) => data.demean_with_window(n),
    }
    if opts.scale != 1.0 {
        data.scale(opts.scale);
    }
    Ok(data)
}

/// Consecutive business days (Monday to Friday) starting at `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d.format("%Y-%m-%d").to_string());
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(file_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(file_err(path))?))
}

/// Full-precision float text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write_to<W: Write>(&self, mut w: W, prov: &Provenance) -> Result<()> {
        writeln!(w, "{}", prov.header()).map_err(|e| IoError::Format(e.to_string()))?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(&self.header)?;
        for r in &self.rows {
            cw.write_record(r)?;
        }
        cw.flush().map_err(|e| IoError::Format(e.to_string()))?;
        Ok(())
    }

    fn save(&self, path: &Path, prov: &Provenance) -> Result<()> {
        self.write_to(create(path)?, prov)
    }
}

/// A CSV read back as text header plus raw cells, with its provenance line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub provenance: Option<Provenance>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cells of a column parsed as floats.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name).ok_or_else(|| IoError::Format(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[j].parse().map_err(|_| IoError::Parse { line: i + 3, msg: format!("`{}` is not a number", r[j]) }))
            .collect()
    }
}

pub fn read_csv_table(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    parse_csv_table(&text)
}

pub fn parse_csv_table(text: &str) -> Result<CsvTable> {
    let provenance = text.lines().next().and_then(Provenance::parse);
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(CsvTable { provenance, header, rows })
}

pub fn write_dataset(path: &Path, data: &Dataset, prov: &Provenance) -> Result<()> {
    dataset_table(data).save(path, prov)
}

fn dataset_table(data: &Dataset) -> Table {
    let mut t = Table::new(std::iter::once("date".to_string()).chain(data.names.iter().cloned()));
    for (s, date) in data.dates.iter().enumerate() {
        let mut row = vec![date.clone()];
        row.extend(data.row(s).iter().map(|v| fmt_f64(*v)));
        t.push(row);
    }
    t
}

/// One row per retained draw: `draw,sweep` then the store's parameter columns.
pub fn write_draws(path: &Path, store: &DrawStore, prov: &Provenance) -> Result<()> {
    draws_table(store).save(path, prov)
}

pub fn draws_to_string(store: &DrawStore, prov: &Provenance) -> Result<String> {
    let mut buf = Vec::new();
    draws_table(store).write_to(&mut buf, prov)?;
    String::from_utf8(buf).map_err(|e| IoError::Format(e.to_string()))
}

fn draws_table(store: &DrawStore) -> Table {
    let mut t = Table::new(["draw".to_string(), "sweep".to_string()].into_iter().chain(store.column_names()));
    for m in 0..store.len() {
        let mut row = vec![m.to_string(), store.records[m].sweep.to_string()];
        row.extend(store.row(m).into_iter().map(fmt_f64));
        t.push(row);
    }
    t
}

/// Parameter columns of a draws file, keyed by name.
pub fn read_draws(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let t = read_csv_table(path)?;
    let names: Vec<String> = t.header.iter().skip(2).cloned().collect();
    let cols = names.iter().map(|n| t.numeric_column(n)).collect::<Result<_>>()?;
    Ok((names, cols))
}

/// `case,beta,series,median,q05,q25,q75,q95`.
pub fn write_skewness(path: &Path, cases: &[SkewnessCase], prov: &Provenance) -> Result<()> {
    let mut t = Table::new(["case", "beta", "series", "median", "q05", "q25", "q75", "q95"]);
    for c in cases {
        let beta = c.beta.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
        for (i, b) in c.series.iter().enumerate() {
            t.push(vec![
                c.label.clone(),
                beta.clone(),
                format!("Y{}", i + 1),
                fmt_f64(b.median),
                fmt_f64(b.q05),
                fmt_f64(b.q25),
                fmt_f64(b.q75),
                fmt_f64(b.q95),
            ]);
        }
    }
    t.save(path, prov)
}

/// `lpdr.csv`: rows are horizons then `total`, columns are models.
pub fn write_lpdr(path: &Path, report: &BacktestReport, prov: &Provenance) -> Result<()> {
    let mut t = Table::new(std::iter::once("horizon".to_string()).chain(report.lpdr.iter().map(|r| r.variant.name().to_string())));
    let horizons = report.lpdr.first().map_or(0, |r| r.per_horizon.len());
    for h in 0..horizons {
        let mut row = vec![(h + 1).to_string()];
        row.extend(report.lpdr.iter().map(|r| fmt_f64(r.per_horizon[h])));
        t.push(row);
    }
    let mut row = vec!["total".to_string()];
    row.extend(report.lpdr.iter().map(|r| fmt_f64(r.total)));
    t.push(row);
    t.save(path, prov)
}

/// `var.csv`: one row per model, rule and level.
pub fn write_var(path: &Path, report: &BacktestReport, prov: &Provenance) -> Result<()> {
    let mut t = Table::new(["model", "rule", "alpha", "n", "N", "LR", "p", "reject_10"]);
    for m in &report.models {
        for v in &m.var {
            t.push(vec![
                m.variant.name().to_string(),
                v.rule.label(),
                fmt_f64(v.alpha),
                v.violations.to_string(),
                v.days.to_string(),
                fmt_f64(v.lr),
                fmt_f64(v.p_value),
                if v.reject_10 { "*".into() } else { String::new() },
            ]);
        }
    }
    t.save(path, prov)
}

/// `portfolio.csv`: daily weights, returns and cumulative returns.
pub fn write_portfolio(path: &Path, report: &BacktestReport, names: &[String], dates: &[String], prov: &Provenance) -> Result<()> {
    let header = ["model", "rule", "date", "fallback", "return", "cumulative"]
        .into_iter()
        .map(String::from)
        .chain(names.iter().map(|n| format!("w[{n}]")));
    let mut t = Table::new(header);
    for m in &report.models {
        for p in &m.portfolio {
            let mut cum = 0.0;
            for (d, (&day, r)) in p.days.iter().zip(&p.returns).enumerate() {
                cum += r;
                let mut row = vec![
                    m.variant.name().to_string(),
                    p.rule.label(),
                    dates.get(day).cloned().unwrap_or_else(|| day.to_string()),
                    u8::from(p.fallback[d]).to_string(),
                    fmt_f64(*r),
                    fmt_f64(cum),
                ];
                row.extend(p.weights[d].iter().map(|w| fmt_f64(*w)));
                t.push(row);
            }
        }
    }
    t.save(path, prov)
}

/// Long-format rows `horizon,quantity,value`.
pub fn write_long(path: &Path, rows: &[(usize, String, f64)], prov: &Provenance) -> Result<()> {
    let mut t = Table::new(["horizon", "quantity", "value"]);
    for (h, q, v) in rows {
        t.push(vec![h.to_string(), q.clone(), fmt_f64(*v)]);
    }
    t.save(path, prov)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(file_err(path))?;
    w.flush().map_err(file_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// JSON document wrapped with its provenance.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct Stamped<T> {
    pub seed: u64,
    pub config_hash: String,
    pub git_rev: String,
    pub data: T,
}

impl<T> Stamped<T> {
    pub fn new(prov: &Provenance, data: T) -> Self {
        Self { seed: prov.seed, config_hash: prov.config_hash.clone(), git_rev: prov.git_rev.clone(), data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_prices_give_zero_returns() {
        let csv = "date,a,b\n2020-01-01,5,7\n2020-01-02,5,7\n2020-01-03,5,7\n";
        let d = read_returns(csv.as_bytes(), &LoadOptions::prices()).unwrap();
        assert_eq!(d.t_len(), 2);
        assert!(d.columns().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn log_difference_before_demeaning() {
        let csv = "date,a\n2020-01-01,100\n2020-01-02,101\n2020-01-03,101\n";
        let opts = LoadOptions { demean: Demean::None, ..LoadOptions::prices() };
        let d = read_returns(csv.as_bytes(), &opts).unwrap();
        assert_eq!(d.get(0, 0), (1.01f64).ln());
        assert_eq!(d.dates[0], "2020-01-02");
    }

    #[test]
    fn rejects_bad_inputs() {
        let r = LoadOptions::returns();
        for bad in [
            "date,a\n2020-01-01,1\n2020-01-01,2\n",
            "date,a\n2020-01-01,1\n2020-01-02,\n",
            "date,a\n2020-01-01,1\n2020-01-02,x\n",
            "date,a\n01/02/2020,1\n2020-01-02,1\n",
            "date,a,b\n2020-01-01,1\n2020-01-02,1,2\n",
        ] {
            assert!(read_returns(bad.as_bytes(), &r).is_err(), "{bad}");
        }
    }

    #[test]
    fn business_days_skip_weekends() {
        let d = business_days(NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(), 3);
        assert_eq!(d, ["2021-01-01", "2021-01-04", "2021-01-05"]);
    }
}
