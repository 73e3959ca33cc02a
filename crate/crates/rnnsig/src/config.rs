//! `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment. Lists are comma separated.
//! Values given on the command line override values from a file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(i + 1, "expected key = value"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(i + 1, "empty key"));
            }
            cfg.values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies a single `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Config(format!("`{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
        raw.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{raw}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            Some(raw) => Self::parse_value(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.values.get(key) {
            Some(raw) => raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Self::parse_value(key, s))
                .collect(),
            None => Ok(default),
        }
    }

    /// A float that must be strictly positive.
    pub fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }

    /// A float that must be finite and non-negative.
    pub fn non_negative(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default)?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("{key} must be non-negative, got {v}")));
        }
        Ok(v)
    }

    /// An integer that must be at least `min`.
    pub fn at_least(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        let v = self.get(key, default)?;
        if v < min {
            return Err(Error::Config(format!("{key} must be at least {min}, got {v}")));
        }
        Ok(v)
    }
}
