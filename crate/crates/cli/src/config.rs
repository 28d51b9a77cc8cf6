//! Flat `key = value` configuration with flag overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Bad invocation: unknown key, unparsable value, grid out of range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Given values plus the resolved value of every key read so far.
#[derive(Clone, Debug, Default)]
pub struct Config {
    given: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(usage(format!("config line {}: empty key", i + 1)));
            }
            cfg.set(k, v.trim());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.given.insert(key.to_string(), value.to_string());
    }

    fn raw(&mut self, key: &str, default: String) -> String {
        let v = self.given.get(key).cloned().unwrap_or(default);
        self.resolved.insert(key.to_string(), v.clone());
        v
    }

    pub fn value<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T, UsageError> {
        let v = self.raw(key, default.to_string());
        v.parse().map_err(|_| usage(format!("{key}: cannot parse {v:?}")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + ToString>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>, UsageError> {
        let d = default.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let v = self.raw(key, d);
        let items: Result<Vec<T>, _> = v.split(',').map(|s| s.trim().parse()).collect();
        match items {
            Ok(xs) if !xs.is_empty() => Ok(xs),
            _ => Err(usage(format!("{key}: bad list {v:?}"))),
        }
    }

    pub fn optional(&mut self, key: &str) -> Option<String> {
        let v = self.given.get(key).cloned()?;
        self.resolved.insert(key.to_string(), v.clone());
        Some(v)
    }

    /// Every key given but never read is an error.
    pub fn check_unused(&self) -> Result<(), UsageError> {
        match self.given.keys().find(|k| !self.resolved.contains_key(*k)) {
            Some(k) => Err(usage(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }

    /// The configuration actually used, defaults included.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}
