//! Flat `key = value` configuration files with `[section]` headers.
//!
//! ```text
//! # Table I, DRIM-A row
//! [experiment]
//! schemes = drim-a
//! models = uom, hom, nom
//! fp = af, bf, sgf, cf, random, drl
//! runs = 20
//!
//! [paths]
//! dataset = data/urv_standin.edges
//! ```
//!
//! Blank lines and lines starting with `#` or `;` are ignored. Keys before
//! the first header belong to the `experiment` section.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<(String, String), Entry>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = "experiment".to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') || content.starts_with(';') {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                    line,
                    reason: format!("unterminated section header {content:?}"),
                })?;
                section = name.trim().to_ascii_lowercase();
                if section.is_empty() {
                    return Err(Error::Config {
                        line,
                        reason: "empty section name".into(),
                    });
                }
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected key = value, got {content:?}"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Config {
                    line,
                    reason: "empty key".into(),
                });
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert((section.clone(), key.clone()), entry) {
                return Err(Error::Config {
                    line,
                    reason: format!("[{section}] {key} already set on line {}", prev.line),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    /// Parses a single value.
    pub fn value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)
            .map(|e| {
                e.value.parse().map_err(|err: T::Err| Error::Config {
                    line: e.line,
                    reason: format!("[{section}] {key}: {err}"),
                })
            })
            .transpose()
    }

    /// Parses a comma-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)
            .map(|e| parse_list(&e.value).map_err(|reason| Error::Config { line: e.line, reason }))
            .transpose()
    }

    /// Fails on the first key that is not in `known`.
    pub fn check_known(&self, known: &[(&str, &str)]) -> Result<()> {
        for ((section, key), entry) in &self.entries {
            if !known.iter().any(|(s, k)| s == section && k == key) {
                return Err(Error::Config {
                    line: entry.line,
                    reason: format!("unknown key [{section}] {key}"),
                });
            }
        }
        Ok(())
    }
}

pub fn parse_list<T: FromStr>(text: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e: T::Err| format!("{s:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_lists() {
        let cfg = ConfigFile::parse("runs = 3\n# note\n[sweep]\naxis = ip\nvalues = 1, 2,3\n").unwrap();
        assert_eq!(cfg.value::<usize>("experiment", "runs").unwrap(), Some(3));
        assert_eq!(cfg.list::<f64>("sweep", "values").unwrap(), Some(vec![1.0, 2.0, 3.0]));
        assert_eq!(cfg.value::<String>("sweep", "axis").unwrap().as_deref(), Some("ip"));
        assert_eq!(cfg.value::<usize>("sweep", "missing").unwrap(), None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ConfigFile::parse("runs = 1\nbogus line\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = ConfigFile::parse("runs = 1\nruns = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let cfg = ConfigFile::parse("\n\nruns = x\n").unwrap();
        assert!(matches!(cfg.value::<usize>("experiment", "runs"), Err(Error::Config { line: 3, .. })));
        assert!(matches!(cfg.check_known(&[]), Err(Error::Config { line: 3, .. })));
        assert!(ConfigFile::parse("[open\n").is_err());
    }
}
