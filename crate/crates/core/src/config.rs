//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated; matrices separate rows with `;`. Every key must be consumed
//! by the reader (see [`KeyValueConfig::finish`]) so typos are reported
//! instead of silently ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            // `#` starts a comment anywhere on the line.
            let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(key.to_owned(), value.trim().to_owned()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { entries, used: RefCell::default() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Overrides (or adds) one key, e.g. for parameter sweeps.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_owned(), value.into());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_owned());
        Some(v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }

    pub fn get_matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        self.raw(key)
            .map(|v| v.split(';').map(|row| parse_list(key, row)).collect())
            .transpose()
    }

    /// Errors if any key was never read.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown key(s): {}", unknown.join(", "))))
        }
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("key `{key}`: `{s}` is not a number")))
        })
        .collect()
}

/// A `key=lo:hi:step` sweep over one numeric key.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("sweep `{s}` must look like key=lo:hi:step"));
        let (key, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let &[lo, hi, step] = parts.as_slice() else {
            return Err(bad());
        };
        if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(Error::Config(format!("sweep `{s}` needs lo <= hi and step > 0")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        // Round to suppress accumulated floating noise (0.30000000000000004).
        let values = (0..count)
            .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Ok(Sweep { key: key.trim().to_owned(), values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_lists_and_matrices() {
        let cfg = KeyValueConfig::parse("# comment\nK = 2   # arms\np = 0.4, 0.3,0.3\n\nL = 1,0;0,1\n").unwrap();
        assert_eq!(cfg.require::<usize>("K").unwrap(), 2);
        assert_eq!(cfg.get_list("p").unwrap().unwrap(), vec![0.4, 0.3, 0.3]);
        assert_eq!(cfg.get_matrix("L").unwrap().unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(cfg.get_or("eta", 0.05).unwrap(), 0.05);
        cfg.finish().unwrap();
    }

    #[test]
    fn reports_unknown_duplicate_and_malformed() {
        let cfg = KeyValueConfig::parse("K = 2\ntypo = 1\n").unwrap();
        cfg.require::<usize>("K").unwrap();
        assert!(cfg.finish().unwrap_err().to_string().contains("typo"));
        assert!(KeyValueConfig::parse("K = 1\nK = 2").is_err());
        assert!(KeyValueConfig::parse("novalue").is_err());
        let cfg = KeyValueConfig::parse("K = two").unwrap();
        assert!(cfg.require::<usize>("K").is_err());
        assert!(cfg.require::<usize>("T").is_err());
    }

    #[test]
    fn sweep_grid() {
        let s: Sweep = "AA=0.3:1.0:0.1".parse().unwrap();
        assert_eq!(s.key, "AA");
        assert_eq!(s.values.len(), 8);
        assert_eq!(s.values[0], 0.3);
        assert_eq!(s.values[7], 1.0);
        assert!("AA=1:0:0.1".parse::<Sweep>().is_err());
        assert!("AA=0:1".parse::<Sweep>().is_err());
    }
}
