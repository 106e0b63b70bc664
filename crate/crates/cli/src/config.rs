//! Flat key/value configuration with documented precedence:
//! CLI flags > config-file keys > built-in defaults.
//!
//! Each subcommand declares the keys it reads through typed getters; after
//! the last getter, [`Resolver::finish`] rejects any file key that no getter
//! consumed (typo protection) and returns the fully resolved map — every key
//! with its effective value — which goes into the run manifest so a run can
//! be reproduced from the manifest alone.

use crate::errors::CliError;
use glocad_core::analytic::Lambda;
use glocad_core::estimators::MmdVariant;
use glocad_core::train::OptimizerKind;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use toml::Value;

pub type ResolvedConfig = BTreeMap<String, Value>;

/// File keys plus typed-getter bookkeeping.
pub struct Resolver {
    file: BTreeMap<String, Value>,
    consumed: BTreeSet<String>,
    resolved: ResolvedConfig,
}

fn flatten_into(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten_into(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

impl Resolver {
    /// Reads the config file (absent path = defaults only). Nested tables
    /// are flattened to dotted keys, so `[section] k = v` and `section.k = v`
    /// are interchangeable.
    pub fn from_file(path: Option<&Path>) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
            let table: toml::Table = text
                .parse()
                .map_err(|e| CliError::config(format!("cannot parse config {}: {e}", p.display())))?;
            flatten_into("", &table, &mut file);
        }
        Ok(Resolver { file, consumed: BTreeSet::new(), resolved: BTreeMap::new() })
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        let v = self.file.get(key).cloned();
        if v.is_some() {
            self.consumed.insert(key.to_string());
        }
        v
    }

    fn type_err(key: &str, expected: &str, got: &Value) -> CliError {
        CliError::config(format!("key '{key}' must be {expected}, got `{got}`"))
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let val = match self.take(key) {
            Some(Value::Float(f)) => f,
            Some(Value::Integer(i)) => i as f64,
            Some(other) => return Err(Self::type_err(key, "a number", &other)),
            None => default,
        };
        if !val.is_finite() {
            return Err(CliError::config(format!("key '{key}' must be finite, got {val}")));
        }
        self.resolved.insert(key.to_string(), Value::Float(val));
        Ok(val)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        let val = match self.take(key) {
            Some(Value::Integer(i)) if i >= 0 => i as usize,
            Some(other) => return Err(Self::type_err(key, "a non-negative integer", &other)),
            None => default,
        };
        self.resolved.insert(key.to_string(), Value::Integer(val as i64));
        Ok(val)
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        let val = match self.take(key) {
            Some(Value::Boolean(b)) => b,
            Some(other) => return Err(Self::type_err(key, "true or false", &other)),
            None => default,
        };
        self.resolved.insert(key.to_string(), Value::Boolean(val));
        Ok(val)
    }

    pub fn string(&mut self, key: &str, default: &str) -> Result<String, CliError> {
        let val = match self.take(key) {
            Some(Value::String(s)) => s,
            Some(other) => return Err(Self::type_err(key, "a string", &other)),
            None => default.to_string(),
        };
        self.resolved.insert(key.to_string(), Value::String(val.clone()));
        Ok(val)
    }

    /// Finite weight as a number, or the string "inf" for the
    /// drop-the-global-term mode.
    pub fn lambda(&mut self, key: &str, default: Lambda) -> Result<Lambda, CliError> {
        let val = match self.take(key) {
            Some(Value::Float(f)) => Lambda::finite(f).map_err(|e| CliError::config(e.to_string()))?,
            Some(Value::Integer(i)) => {
                Lambda::finite(i as f64).map_err(|e| CliError::config(e.to_string()))?
            }
            Some(Value::String(s)) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => {
                Lambda::Infinite
            }
            Some(other) => return Err(Self::type_err(key, "a number >= 0 or \"inf\"", &other)),
            None => default,
        };
        let record = match val {
            Lambda::Finite(f) => Value::Float(f),
            Lambda::Infinite => Value::String("inf".to_string()),
        };
        self.resolved.insert(key.to_string(), record);
        Ok(val)
    }

    pub fn f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let val = match self.take(key) {
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for it in &items {
                    match it {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(i) => out.push(*i as f64),
                        other => return Err(Self::type_err(key, "an array of numbers", other)),
                    }
                }
                out
            }
            Some(other) => return Err(Self::type_err(key, "an array of numbers", &other)),
            None => default.to_vec(),
        };
        self.resolved.insert(
            key.to_string(),
            Value::Array(val.iter().map(|&f| Value::Float(f)).collect()),
        );
        Ok(val)
    }

    pub fn usize_list(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        let val = match self.take(key) {
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for it in &items {
                    match it {
                        Value::Integer(i) if *i >= 0 => out.push(*i as usize),
                        other => {
                            return Err(Self::type_err(key, "an array of non-negative integers", other))
                        }
                    }
                }
                out
            }
            Some(other) => return Err(Self::type_err(key, "an array of non-negative integers", &other)),
            None => default.to_vec(),
        };
        self.resolved.insert(
            key.to_string(),
            Value::Array(val.iter().map(|&u| Value::Integer(u as i64)).collect()),
        );
        Ok(val)
    }

    /// Optional threshold: present → Some, absent → None (and the key is
    /// omitted from the resolved map, which reproduces the same behavior).
    pub fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.take(key) {
            Some(Value::Float(f)) => {
                self.resolved.insert(key.to_string(), Value::Float(f));
                Ok(Some(f))
            }
            Some(Value::Integer(i)) => {
                self.resolved.insert(key.to_string(), Value::Float(i as f64));
                Ok(Some(i as f64))
            }
            Some(other) => Err(Self::type_err(key, "a number", &other)),
            None => Ok(None),
        }
    }

    /// The run seed: `--seed` flag > `seed` file key; neither is an error —
    /// no run may be silently nondeterministic.
    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64, CliError> {
        let val = match flag {
            Some(s) => {
                // the flag shadows (and consumes) any file value
                let _ = self.take("seed");
                s
            }
            None => match self.take("seed") {
                Some(Value::Integer(i)) if i >= 0 => i as u64,
                Some(other) => return Err(Self::type_err("seed", "a non-negative integer", &other)),
                None => {
                    return Err(CliError::config(
                        "no seed given: pass --seed N or set `seed = N` in the config file",
                    ))
                }
            },
        };
        self.resolved.insert("seed".to_string(), Value::Integer(val as i64));
        Ok(val)
    }

    pub fn optimizer(&mut self, key: &str, default: OptimizerKind) -> Result<OptimizerKind, CliError> {
        let s = self.string(key, match default {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })?;
        match s.as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(CliError::config(format!(
                "key '{key}' must be \"adam\" or \"sgd\", got \"{other}\""
            ))),
        }
    }

    pub fn mmd_variant(&mut self, key: &str, default: MmdVariant) -> Result<MmdVariant, CliError> {
        let s = self.string(key, match default {
            MmdVariant::Biased => "biased",
            MmdVariant::Unbiased => "unbiased",
        })?;
        match s.as_str() {
            "biased" => Ok(MmdVariant::Biased),
            "unbiased" => Ok(MmdVariant::Unbiased),
            other => Err(CliError::config(format!(
                "key '{key}' must be \"biased\" or \"unbiased\", got \"{other}\""
            ))),
        }
    }

    /// Rejects unconsumed file keys and hands back the resolved map.
    pub fn finish(self) -> Result<ResolvedConfig, CliError> {
        let unknown: Vec<&String> =
            self.file.keys().filter(|k| !self.consumed.contains(*k)).collect();
        if !unknown.is_empty() {
            let list = unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ");
            return Err(CliError::config(format!(
                "unknown config key(s) for this subcommand: {list}"
            )));
        }
        Ok(self.resolved)
    }
}

/// The resolved map rendered back as a TOML document — what the manifest
/// stores, and what reproduces the run.
pub fn to_toml_string(resolved: &ResolvedConfig) -> Result<String, CliError> {
    let mut table = toml::Table::new();
    for (k, v) in resolved {
        table.insert(k.clone(), v.clone());
    }
    toml::to_string(&table).map_err(|e| CliError::Other(format!("toml serialization: {e}")))
}
