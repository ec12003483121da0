//! TOML run configuration: a preset name plus overrides, merged key by key.
//!
//! ```toml
//! scenario = "jet"
//! seed = 7
//!
//! [plan]
//! return_speed = 1.5
//!
//! [field]
//! reference_speed = 5.0
//! ```

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Value;

use super::presets::{preset, PRESETS};
use crate::mission::{sha256_hex, Scenario};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown scenario preset `{0}` (available: {list})", list = PRESETS.join(", "))]
    UnknownPreset(String),
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("configuration does not match the schema: {0}")]
    Schema(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Contents of a run configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RunConfig {
    /// Preset the remaining keys are merged over.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// Output directory; command-line flags take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub body: Scenario,
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self, ConfigError> {
        let body = preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        Ok(Self { scenario: Some(name.to_string()), output: None, body })
    }

    /// Parses a configuration, resolving the preset and rejecting unknown keys.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: Value = text.parse::<toml::Table>()?.into();
        Self::from_value(value)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let Value::Table(mut table) = value else {
            return Err(ConfigError::Schema("top level must be a table".into()));
        };
        let scenario = match table.remove("scenario") {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(other) => return Err(ConfigError::Schema(format!("`scenario` must be a string, got {}", other.type_str()))),
        };
        let output = match table.remove("output") {
            None => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => return Err(ConfigError::Schema(format!("`output` must be a string, got {}", other.type_str()))),
        };
        let base = match &scenario {
            Some(name) => preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?,
            None => Scenario::default(),
        };
        let mut merged = to_value(&base);
        merge(&mut merged, Value::Table(table));
        let body = deserialize_strict(merged)?;
        body.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Self { scenario, output, body })
    }

    /// Applies `path = value` with a dotted key path, e.g. `plan.return_speed`.
    pub fn set(&self, path: &str, raw: &str) -> Result<Self, ConfigError> {
        let mut value = to_value(&self.body);
        set_path(&mut value, path, parse_scalar(raw))?;
        let body = deserialize_strict(value)?;
        body.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Self { body, ..self.clone() })
    }

    /// Fully resolved configuration; loading it reproduces `body` exactly.
    pub fn echo(&self) -> String {
        toml::to_string(&to_value(&self.body)).expect("scenario serializes to TOML")
    }

    /// SHA-256 of [`RunConfig::echo`].
    pub fn hash(&self) -> String {
        sha256_hex(self.echo().as_bytes())
    }
}

fn to_value(sc: &Scenario) -> Value {
    Value::try_from(sc).expect("scenario serializes to TOML")
}

fn deserialize_strict(value: Value) -> Result<Scenario, ConfigError> {
    let mut unknown = Vec::new();
    let body: Scenario =
        serde_ignored::deserialize(value, |path| unknown.push(path.to_string())).map_err(|e| ConfigError::Schema(e.to_string()))?;
    if !unknown.is_empty() {
        unknown.sort();
        return Err(ConfigError::UnknownKeys(unknown));
    }
    Ok(body)
}

/// Overlays `over` onto `base`. Tables merge recursively, anything else is
/// replaced; a wind field whose `type` changes is replaced as a whole.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            let retyped = matches!((b.get("type"), o.get("type")), (Some(x), Some(y)) if x != y);
            if retyped {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Table(table) = node else {
            return Err(ConfigError::Schema(format!("`{}` is not a table", parts[..i].join("."))));
        };
        if i + 1 == parts.len() {
            if !table.contains_key(*part) {
                return Err(ConfigError::UnknownKeys(vec![path.to_string()]));
            }
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table.get_mut(*part).ok_or_else(|| ConfigError::UnknownKeys(vec![path.to_string()]))?;
    }
    unreachable!("split yields at least one part")
}

/// Reads a command-line value as TOML, falling back to a bare string.
pub fn parse_scalar(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// JSON schema of the configuration file.
pub fn schema_json() -> String {
    serde_json::to_string_pretty(&schemars::schema_for!(RunConfig)).expect("schema serializes") + "\n"
}
