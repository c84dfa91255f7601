//! Flat `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Every key must be consumed
//! by a typed getter; [`KvConfig::finish`] rejects leftovers by name.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
    consumed: std::collections::BTreeSet<String>,
}

impl KvConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KvConfig {
            entries,
            consumed: Default::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Typed value for `key`, or `default` when absent.
    pub fn get<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.consumed.insert(key.to_string());
        match self.entries.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|e: T::Err| Error::Config {
                key: key.to_string(),
                message: format!("cannot parse `{raw}`: {e}"),
            }),
        }
    }

    pub fn get_list<T>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.consumed.insert(key.to_string());
        match self.entries.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|e: T::Err| Error::Config {
                        key: key.to_string(),
                        message: format!("cannot parse `{s}`: {e}"),
                    })
                })
                .collect(),
        }
    }

    /// Keys present in the file but never read.
    pub fn finish(&self) -> Result<()> {
        match self.entries.keys().find(|k| !self.consumed.contains(*k)) {
            Some(k) => Err(Error::Config {
                key: k.clone(),
                message: "unknown key".into(),
            }),
            None => Ok(()),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typed_values_and_defaults() {
        let mut c = KvConfig::parse("a = 3\n# note\nb=0.5 # trailing\nlist = 1, 2,3\n", "t").unwrap();
        assert_eq!(c.get("a", 0usize).unwrap(), 3);
        assert_eq!(c.get("b", 0.0f64).unwrap(), 0.5);
        assert_eq!(c.get("missing", 7u32).unwrap(), 7);
        assert_eq!(c.get_list("list", Vec::<u32>::new()).unwrap(), vec![1, 2, 3]);
        c.finish().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let mut c = KvConfig::parse("a = 1\nbogus = 2\n", "t").unwrap();
        let _ = c.get("a", 0u8).unwrap();
        match c.finish().unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "bogus"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_value_is_named() {
        let mut c = KvConfig::parse("a = x\n", "t").unwrap();
        assert!(matches!(c.get("a", 0u8), Err(Error::Config { .. })));
        assert!(KvConfig::parse("novalue\n", "t").is_err());
    }
}
