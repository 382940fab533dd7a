//! Configuration files. A model file maps field-for-field onto
//! [`ModelConfig`]; `k`, `p` and `variant` may be left out and supplied by
//! the caller.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use skewfsv_core::backtest::BacktestConfig;
use skewfsv_core::{ModelConfig, Variant};

use crate::error::{file_err, IoError, Result};

/// Reads a JSON or TOML file (chosen by extension, JSON otherwise) as a
/// JSON value tree.
pub fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    parse_value(&text, is_toml(path))
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

pub fn parse_value(text: &str, toml_syntax: bool) -> Result<Value> {
    if toml_syntax {
        let v: toml::Value = toml::from_str(text)?;
        Ok(serde_json::to_value(v)?)
    } else {
        Ok(serde_json::from_str(text)?)
    }
}

/// Missing-field defaults applied before deserializing a model file.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelDefaults {
    pub k: Option<usize>,
    pub p: Option<usize>,
    pub variant: Option<Variant>,
}

/// Builds a [`ModelConfig`] from an optional file, filling `k`, `p` and
/// `variant` from `defaults` when the file omits them.
pub fn model_config(value: Option<Value>, defaults: ModelDefaults) -> Result<ModelConfig> {
    let mut map = match value {
        Some(Value::Object(m)) => m,
        Some(_) => return Err(IoError::Format("model configuration must be a table".into())),
        None => Map::new(),
    };
    fill(&mut map, "k", defaults.k.map(Value::from));
    fill(&mut map, "p", defaults.p.map(Value::from));
    fill(&mut map, "variant", defaults.variant.map(|v| Value::from(v.name())));
    for key in ["k", "p", "variant"] {
        if !map.contains_key(key) {
            return Err(IoError::Format(format!("model configuration is missing `{key}`")));
        }
    }
    from_value(Value::Object(map))
}

fn fill(map: &mut Map<String, Value>, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        map.entry(key).or_insert(v);
    }
}

pub fn backtest_config(value: Option<Value>) -> Result<BacktestConfig> {
    value.map_or_else(|| Ok(BacktestConfig::default()), from_value)
}

fn from_value<T: DeserializeOwned>(v: Value) -> Result<T> {
    Ok(serde_json::from_value(v)?)
}
