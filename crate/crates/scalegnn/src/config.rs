//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Precedence, lowest first:
//! method defaults, the config file, command-line overrides. Keys that are
//! neither run settings nor hyperparameters of the method are rejected, and
//! values on a search axis must be one of its candidates unless
//! `allow_off_grid = true`.

use std::fmt::Write as _;
use std::path::PathBuf;

use scalegnn_core::harness::HpConfig;

use crate::error::{Error, Result};
use crate::methods::Method;

const RUN_KEYS: [&str; 6] = ["method", "bundle", "seed", "repeats", "out", "allow_off_grid"];

/// Parses `key = value` lines.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub bundle: Option<PathBuf>,
    pub seed: u64,
    pub repeats: usize,
    pub out: Option<PathBuf>,
    pub allow_off_grid: bool,
    /// Every hyperparameter of the method, defaults filled in.
    pub params: HpConfig,
}

impl RunConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            bundle: None,
            seed: 0,
            repeats: 1,
            out: None,
            allow_off_grid: false,
            params: method.defaults(),
        }
    }

    /// Applies `pairs` in order. `method` is read first so the key set is
    /// known; `fallback` is used when no pair names a method.
    pub fn from_pairs(pairs: &[(String, String)], fallback: Option<Method>) -> Result<Self> {
        let method = match pairs.iter().rev().find(|(k, _)| k == "method") {
            Some((_, v)) => Method::parse(v).ok_or_else(|| Error::Config(format!("unknown method {v}")))?,
            None => fallback.ok_or_else(|| Error::Config("no method given".into()))?,
        };
        let mut c = Self::new(method);
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.check_grid()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key} = {value}: {what}"));
        match key {
            "method" => {
                if Method::parse(value) != Some(self.method) {
                    return Err(bad("method cannot change after other keys"));
                }
            }
            "bundle" => self.bundle = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = value.parse().map_err(|_| bad("not an unsigned integer"))?,
            "repeats" => {
                self.repeats = value.parse().map_err(|_| bad("not an unsigned integer"))?;
                if self.repeats == 0 {
                    return Err(bad("must be at least 1"));
                }
            }
            "allow_off_grid" => self.allow_off_grid = value.parse().map_err(|_| bad("not true or false"))?,
            _ => {
                let current = self
                    .params
                    .get(key)
                    .ok_or_else(|| Error::Config(format!("unknown key {key} for method {}", self.method.name())))?;
                let parsed = current.parse_like(value).ok_or_else(|| bad("wrong value type"))?;
                self.params.insert(key.to_string(), parsed);
            }
        }
        Ok(())
    }

    /// Rejects axis values outside the candidate lists.
    pub fn check_grid(&self) -> Result<()> {
        if self.allow_off_grid {
            return Ok(());
        }
        for axis in self.method.space().axes() {
            let v = &self.params[&axis.name];
            if !axis.candidates.contains(v) {
                return Err(Error::Config(format!(
                    "{} = {v} is not a candidate ({}); set allow_off_grid = true to override",
                    axis.name,
                    axis.candidates.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Every setting in the file format, defaults included.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method = {}", self.method.name());
        if let Some(b) = &self.bundle {
            let _ = writeln!(s, "bundle = {}", b.display());
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "repeats = {}", self.repeats);
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {}", o.display());
        }
        let _ = writeln!(s, "allow_off_grid = {}", self.allow_off_grid);
        for (k, v) in &self.params {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn is_run_key(key: &str) -> bool {
        RUN_KEYS.contains(&key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use scalegnn_core::harness::HpValue;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_pairs(text).unwrap()
    }

    #[test]
    fn file_round_trip() {
        let c = RunConfig::from_pairs(&pairs("method = sgc\n# comment\nlr = 0.001\nseed = 7\n"), None).unwrap();
        assert_eq!(c.params["lr"], HpValue::Float(1e-3));
        assert_eq!(c.seed, 7);
        let again = RunConfig::from_pairs(&pairs(&c.to_text()), None).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejections() {
        assert!(RunConfig::from_pairs(&pairs("method = sgc\nfanout = 3"), None).is_err());
        assert!(RunConfig::from_pairs(&pairs("method = nope"), None).is_err());
        assert!(RunConfig::from_pairs(&pairs("lr = 0.5"), Some(Method::Sgc)).is_err());
        assert!(RunConfig::from_pairs(&pairs("lr = 0.5\nallow_off_grid = true"), Some(Method::Sgc)).is_ok());
        assert!(RunConfig::from_pairs(&pairs("epochs = x"), Some(Method::Sgc)).is_err());
        assert!(parse_pairs("no equals sign").is_err());
    }
}
