//! Flat `key = value` configuration files.
//!
//! Values from a file sit below command-line flags and `HYPERDIFF_*`
//! environment variables, and above the built-in defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every key a configuration file may set. Dashes and underscores are
/// interchangeable.
pub const KEYS: &[&str] = &[
    "case",
    "nx",
    "ny",
    "ratio",
    "theta",
    "alpha_s",
    "dt",
    "tol",
    "max_steps",
    "scheme",
    "out",
    "emit",
    "alphas",
    "cs",
    "h",
    "form",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        text.parse()
            .with_context(|| format!("in config {}", path.display()))
    }

    /// Parsed value of `key`, if the file sets it.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        debug_assert!(KEYS.contains(&key), "unregistered key {key}");
        self.values
            .get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| anyhow!("config key '{key}': cannot parse '{raw}': {e}"))
            })
            .transpose()
    }

    /// Comma-separated list under `key`.
    pub fn get_list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.values.get(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| anyhow!("config key '{key}': cannot parse '{s}': {e}"))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

impl FromStr for FileConfig {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected 'key = value'", n + 1))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key '{key}'", n + 1);
            }
            if values
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                bail!("line {}: duplicate key '{key}'", n + 1);
            }
        }
        Ok(Self { values })
    }
}
