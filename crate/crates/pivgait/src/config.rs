//! Scenario files: TOML text with every field optional.
//!
//! Missing fields take their documented defaults; unknown keys are errors.
//! Overrides are applied to the parsed table before the scenario is built,
//! so they are checked by the same rules as the file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use pivgait_core::sim::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("bad override `{text}`: {reason}")]
    Override { text: String, reason: String },
    #[error("invalid scenario {origin}:{}", .problems.iter().map(|p| format!("\n  - {p}")).collect::<String>())]
    Validation { origin: String, problems: Vec<String> },
}

/// `key.path=value`. The value is read as a TOML literal (`5`, `0.1`,
/// `true`, `[1, 2]`, `"text"`); anything that is not one is taken as a bare
/// string. Numeric path segments index arrays (`events.0.mass=1.0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: toml::Value,
    text: String,
}

/// Short names accepted in override paths.
const ALIASES: &[(&str, &str)] = &[("mpc.n_p", "mpc.horizon"), ("mpc.T", "mpc.period")];

impl Override {
    pub fn new(key: &str, value: toml::Value) -> Self {
        let key = ALIASES
            .iter()
            .find(|(a, _)| *a == key)
            .map_or(key, |(_, k)| *k);
        Self {
            path: key.split('.').map(str::to_owned).collect(),
            text: format!("{key}={value}"),
            value,
        }
    }

    fn error(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::Override {
            text: self.text.clone(),
            reason: reason.into(),
        }
    }

    fn apply(&self, root: &mut toml::Table) -> Result<(), ConfigError> {
        let (last, parents) = self.path.split_last().ok_or_else(|| self.error("empty key"))?;
        let mut node = root;
        let mut walked = Vec::new();
        let mut iter = parents.iter().peekable();
        while let Some(seg) = iter.next() {
            walked.push(seg.as_str());
            let next_is_index = iter.peek().map_or(last.parse::<usize>().is_ok(), |s| s.parse::<usize>().is_ok());
            let entry = node
                .entry(seg.clone())
                .or_insert_with(|| if next_is_index { toml::Value::Array(Vec::new()) } else { toml::Value::Table(toml::Table::new()) });
            node = match entry {
                toml::Value::Table(t) => t,
                toml::Value::Array(items) => {
                    let idx_seg = iter.next().map_or(last.as_str(), |s| s.as_str());
                    let idx: usize = idx_seg.parse().map_err(|_| self.error(format!("`{}` is a list; index it by number", walked.join("."))))?;
                    let len = items.len();
                    let item = items
                        .get_mut(idx)
                        .ok_or_else(|| self.error(format!("`{}` has {len} entries", walked.join("."))))?;
                    if iter.peek().is_none() && idx_seg == last.as_str() {
                        *item = self.value.clone();
                        return Ok(());
                    }
                    walked.push(idx_seg);
                    match item {
                        toml::Value::Table(t) => t,
                        _ => return Err(self.error(format!("`{}` is not a table", walked.join(".")))),
                    }
                }
                _ => return Err(self.error(format!("`{}` is not a table", walked.join(".")))),
            };
        }
        node.insert(last.clone(), self.value.clone());
        Ok(())
    }
}

impl FromStr for Override {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| ConfigError::Override {
            text: s.to_owned(),
            reason: reason.to_owned(),
        };
        let (key, raw) = s.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(bad("empty key segment"));
        }
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
        Ok(Override::new(key, value))
    }
}

impl fmt::Display for Override {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Parses and validates scenario text. `origin` names the source in
/// diagnostics and is the default scenario name.
pub fn parse_scenario(text: &str, origin: &str, overrides: &[Override]) -> Result<Scenario, ConfigError> {
    let parse_err = |message: String| ConfigError::Parse {
        origin: origin.to_owned(),
        message,
    };
    let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    if !table.contains_key("name") {
        table.insert("name".into(), toml::Value::String(origin.to_owned()));
    }
    for o in overrides {
        o.apply(&mut table)?;
    }
    let scenario: Scenario = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
    let problems = scenario.problems();
    if !problems.is_empty() {
        return Err(ConfigError::Validation {
            origin: origin.to_owned(),
            problems,
        });
    }
    Ok(scenario)
}

/// Reads a scenario file; the file stem is the default name.
pub fn load_scenario(path: &Path, overrides: &[Override]) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let origin = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    parse_scenario(&text, &origin, overrides)
}

/// Every field of the scenario, defaults included, as scenario text.
/// Parsing it back gives the same scenario.
pub fn effective_config(scenario: &Scenario) -> String {
    toml::to_string(scenario).expect("scenario serializes to TOML")
}
