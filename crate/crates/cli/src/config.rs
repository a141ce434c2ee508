//! Run configuration: one flat JSON object holding the model parameters,
//! the infection scenario and the run plumbing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use trustnet_core::{ModelParams, ParamError, ScenarioSpec, ValidatedParams};

/// Every key a config document may contain.
pub const FIELDS: &[&str] = &[
    "N",
    "K",
    "v_alpha",
    "r_alpha",
    "v_A",
    "r_A",
    "variant",
    "p",
    "t_start",
    "duration",
    "steps",
    "seed",
    "snapshot_every",
    "outputs",
    "ensemble",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("unknown config field `{0}`")]
    UnknownField(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid value for `{field}`: {reason}")]
    Value { field: String, reason: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

fn default_ensemble() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub model: ModelParams,
    #[serde(flatten)]
    pub scenario: ScenarioSpec,
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshot_every: u64,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default = "default_ensemble")]
    pub ensemble: u64,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let map = match &value {
            Value::Object(map) => map,
            _ => return Err(ConfigError::NotAnObject),
        };
        check_keys(map)?;
        let cfg: RunConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Checks everything that does not touch the filesystem.
    pub fn validate(&self) -> Result<ValidatedParams, ConfigError> {
        let params = self.model.validate()?;
        self.scenario.validate()?;
        if self.steps < 1 {
            return Err(value_error("steps", "must be at least 1"));
        }
        if self.ensemble < 1 {
            return Err(value_error("ensemble", "must be at least 1"));
        }
        Ok(params)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Returns a copy with `field` replaced by `value`.
    pub fn with_field(&self, field: &str, value: Value) -> Result<Self, ConfigError> {
        if !FIELDS.contains(&field) {
            return Err(ConfigError::UnknownField(field.to_owned()));
        }
        let mut doc = self.to_value();
        doc.as_object_mut()
            .expect("config serializes to an object")
            .insert(field.to_owned(), value);
        Self::from_value(doc)
    }

    /// Seeds of the ensemble: `seed, seed + 1, ...`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.ensemble).map(|k| self.seed.wrapping_add(k)).collect()
    }
}

fn value_error(field: &str, reason: &str) -> ConfigError {
    ConfigError::Value {
        field: field.to_owned(),
        reason: reason.to_owned(),
    }
}

fn check_keys(map: &Map<String, Value>) -> Result<(), ConfigError> {
    match map.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        Some(k) => Err(ConfigError::UnknownField(k.clone())),
        None => Ok(()),
    }
}

/// Parses a command-line value for `field`: integers stay integers, numbers
/// become floats, anything else is a string.
pub fn parse_field_value(text: &str) -> Value {
    let text = text.trim();
    if let Ok(i) = text.parse::<u64>() {
        return Value::from(i);
    }
    if let Ok(f) = text.parse::<f64>() {
        return Value::from(f);
    }
    Value::from(text)
}
