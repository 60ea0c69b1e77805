//! Layered key-value configuration.
//!
//! Files are TOML with one section per subsystem (`[reward]`, `[rollout]`,
//! `[cache]`, `[engine]`, ...). Environment variables of the form
//! `EVR1_<SECTION>__<KEY>` override individual keys after the file is read;
//! values are parsed as TOML scalars and fall back to plain strings.

use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

pub const ENV_PREFIX: &str = "EVR1_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid value in section [{section}]: {message}")]
    Invalid { section: String, message: String },
}

/// A parsed configuration document.
#[derive(Debug, Clone, Default)]
pub struct ConfigDoc {
    table: Table,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Ok(Self { table })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies `EVR1_SECTION__KEY=value` overrides from the given variables.
    pub fn apply_env_overrides<I>(&mut self, vars: I)
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, raw) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let Some((section, key)) = rest.split_once("__") else {
                continue;
            };
            if section.is_empty() || key.is_empty() {
                continue;
            }
            let section = section.to_ascii_lowercase();
            let key = key.to_ascii_lowercase();
            let entry = self
                .table
                .entry(section)
                .or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(t) = entry {
                t.insert(key, parse_scalar(&raw));
            }
        }
    }

    /// Applies overrides from the process environment.
    pub fn apply_process_env(&mut self) {
        self.apply_env_overrides(std::env::vars());
    }

    /// Deserializes one section, using the type's defaults when the section is absent.
    pub fn section<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T, ConfigError> {
        match self.table.get(name) {
            None => Ok(T::default()),
            Some(value) => value
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::Invalid {
                    section: name.to_string(),
                    message: e.to_string(),
                }),
        }
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.table.contains_key(name)
    }

    pub fn table(&self) -> &Table {
        &self.table
    }
}

fn parse_scalar(raw: &str) -> Value {
    let probe = format!("v = {raw}");
    match probe.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}
