//! Posterior summaries and convergence reports of a draw store.

use alloc::string::String;
use alloc::vec::Vec;

use crate::diagnostics::{effective_sample_size, geweke_z};
use crate::engine::{AcceptanceRates, DrawStore};
use crate::model::Variant;
use crate::simulate::Bands;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    /// 50% interval.
    pub q25: f64,
    pub q75: f64,
    /// 90% interval.
    pub q05: f64,
    pub q95: f64,
    /// `None` for chains that are too short or constant.
    pub geweke_z: Option<f64>,
    pub ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagnosticsReport {
    pub draws: usize,
    pub geweke: Vec<(String, Option<f64>)>,
    pub ess: Vec<(String, Option<f64>)>,
    pub acceptance: Vec<AcceptanceRates>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorSummary {
    pub variant: Variant,
    pub k: usize,
    pub p: usize,
    pub draws: usize,
    pub parameters: Vec<ParameterSummary>,
    /// Posterior probability that `beta_i = 0`, per series.
    pub prob_beta_zero: Vec<f64>,
    pub acceptance: Vec<AcceptanceRates>,
}

impl PosteriorSummary {
    pub fn from_store(store: &DrawStore) -> Self {
        let names = store.column_names();
        let chains = store.chains();
        let parameters = names
            .iter()
            .zip(&chains)
            .filter(|(n, _)| !n.starts_with("incl["))
            .map(|(name, c)| {
                let b = Bands::from_values(c);
                ParameterSummary {
                    name: name.clone(),
                    mean: c.iter().sum::<f64>() / c.len().max(1) as f64,
                    median: b.median,
                    q25: b.q25,
                    q75: b.q75,
                    q05: b.q05,
                    q95: b.q95,
                    geweke_z: geweke_z(c).ok(),
                    ess: if c.iter().all(|v| *v == c[0]) { None } else { effective_sample_size(c).ok() },
                }
            })
            .collect();
        let m = store.len().max(1) as f64;
        let prob_beta_zero = (0..store.q())
            .map(|i| store.records.iter().filter(|r| !r.included[i]).count() as f64 / m)
            .collect();
        Self {
            variant: store.variant,
            k: store.k,
            p: store.p,
            draws: store.len(),
            parameters,
            prob_beta_zero,
            acceptance: store.acceptance.clone(),
        }
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn diagnostics(&self) -> DiagnosticsReport {
        DiagnosticsReport {
            draws: self.draws,
            geweke: self.parameters.iter().map(|p| (p.name.clone(), p.geweke_z)).collect(),
            ess: self.parameters.iter().map(|p| (p.name.clone(), p.ess)).collect(),
            acceptance: self.acceptance.clone(),
        }
    }
}
