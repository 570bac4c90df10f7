//! `key = value` configuration files.
//!
//! Keys mirror command-line flag names with dashes replaced by underscores
//! (`--dilation-r` becomes `dilation_r`). `#` starts a comment. Command-line
//! flags take precedence over file values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Every key accepted in a configuration file.
pub const KNOWN_KEYS: &[&str] = &[
    "corpus",
    "out",
    "t_bg",
    "t_sal",
    "low_saliency",
    "dilation_r",
    "jobs",
    "thresholds",
    "count",
    "mix",
    "seed",
    "size",
    "classes",
    "cam_peak",
    "cam_offsite",
    "noise",
    "features",
    "feature_stride",
    "epochs",
    "lr",
    "momentum",
    "nodes",
    "suffix",
    "toy",
    "params",
    "prev",
    "current",
    "labels",
    "gt",
    "pred",
    "label",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parameter(format!("config line {}: expected `key = value`", i + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Parameter(format!(
                    "config line {}: unknown key {key:?}",
                    i + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Parameter(format!("config key {key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    /// `flag`, else the file value, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Like [`resolve`](Self::resolve) with no default.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let c = ConfigFile::parse("# defaults\nt_bg = 0.25\ndilation-r=12 # ring\n\n").unwrap();
        assert_eq!(c.get::<f32>("t_bg").unwrap(), Some(0.25));
        assert_eq!(c.resolve(None, "dilation_r", 30usize).unwrap(), 12);
        assert_eq!(c.resolve(Some(5usize), "dilation_r", 30).unwrap(), 5);
        assert_eq!(c.resolve(None, "jobs", 3usize).unwrap(), 3);
    }

    #[test]
    fn errors() {
        assert!(ConfigFile::parse("bogus = 1").is_err());
        assert!(ConfigFile::parse("t_bg 0.3").is_err());
        let c = ConfigFile::parse("t_bg = x").unwrap();
        assert!(c.get::<f32>("t_bg").is_err());
    }
}
