//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys must come from
//! [`KNOWN_KEYS`] and may appear once. Command-line flags take precedence
//! over values read here.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    // gen-data
    "n",
    "noise_sd",
    "coefficients",
    // train
    "hidden",
    "learning_rate",
    "epochs",
    "train_fraction",
    // control
    "strategy",
    "gss_tol",
    "gss_max_iter",
    "sa_t0",
    "sa_alpha",
    "sa_steps_per_temp",
    "sa_t_min",
    "sa_restarts",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {lineno}: unknown key `{key}`")));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {lineno}: `{key}` given twice")));
            }
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key}");
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`"))))
            .transpose()
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }

    /// `flag`, else the configured value, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// The seed from the flag or the file; stochastic commands refuse to run
    /// without one.
    pub fn require_seed(&self, flag: Option<u64>, command: &str) -> Result<u64> {
        match flag {
            Some(s) => Ok(s),
            None => self
                .get("seed")?
                .ok_or_else(|| Error::Config(format!("{command} needs an explicit seed (--seed or `seed =` in the config)"))),
        }
    }
}

pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<T>().map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`")))
        })
        .collect()
}
