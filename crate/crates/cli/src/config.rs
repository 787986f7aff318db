//! Flat `key=value` configuration files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug)]
pub struct Config {
    values: BTreeMap<String, String>,
    used: BTreeSet<String>,
    /// Relative paths resolve against this directory.
    base: PathBuf,
    /// Resolved values, written to the manifest.
    resolved: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!("line {}: expected key=value, got '{}'", i + 1, raw.trim())));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::config(format!("line {}: empty key", i + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::config(format!("key '{key}' given twice")));
            }
        }
        Ok(Self {
            values,
            used: BTreeSet::new(),
            base: base.to_path_buf(),
            resolved: BTreeMap::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.values.get(key).cloned()
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get_or<T>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match self.raw(key) {
            Some(s) => s
                .parse()
                .map_err(|e| CliError::config(format!("key '{key}': cannot parse '{s}': {e}")))?,
            None => default,
        };
        self.record(key, &value);
        Ok(value)
    }

    pub fn optional<T>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.raw(key) {
            Some(s) => {
                let v: T = s
                    .parse()
                    .map_err(|e| CliError::config(format!("key '{key}': cannot parse '{s}': {e}")))?;
                self.record(key, &v);
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        let value = match self.raw(key).as_deref() {
            None => default,
            Some("true" | "yes" | "on" | "1") => true,
            Some("false" | "no" | "off" | "0") => false,
            Some(other) => return Err(CliError::config(format!("key '{key}': expected a boolean, got '{other}'"))),
        };
        self.record(key, value);
        Ok(value)
    }

    /// Comma-separated list.
    pub fn list_or<T>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let values = match self.raw(key) {
            Some(s) => {
                let items = s
                    .split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse()
                            .map_err(|e| CliError::config(format!("key '{key}': cannot parse '{t}': {e}")))
                    })
                    .collect::<Result<Vec<T>, _>>()?;
                if items.is_empty() {
                    return Err(CliError::config(format!("key '{key}': empty list")));
                }
                items
            }
            None => default.to_vec(),
        };
        let text: Vec<String> = values.iter().map(ToString::to_string).collect();
        self.record(key, text.join(","));
        Ok(values)
    }

    /// A path resolved against the config directory.
    pub fn path_or(&mut self, key: &str, default: &str) -> PathBuf {
        let raw = self.raw(key).unwrap_or_else(|| default.to_string());
        let path = self.resolve(&raw);
        self.record(key, path.display());
        path
    }

    pub fn optional_path(&mut self, key: &str) -> Option<PathBuf> {
        let raw = self.raw(key)?;
        let path = self.resolve(&raw);
        self.record(key, path.display());
        Some(path)
    }

    /// A string value recorded verbatim.
    pub fn string_or(&mut self, key: &str, default: &str) -> String {
        let value = self.raw(key).unwrap_or_else(|| default.to_string());
        self.record(key, &value);
        value
    }

    pub fn resolve(&self, raw: &str) -> PathBuf {
        let p = Path::new(raw);
        let joined = if p.is_absolute() { p.to_path_buf() } else { self.base.join(p) };
        std::path::absolute(&joined).unwrap_or(joined)
    }

    /// Fails on the first key that no command option consumed.
    pub fn finish(&self) -> Result<(), CliError> {
        match self.values.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(CliError::config(format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let mut c = Config::parse("# header\n\nrows = 8 # trailing\nname=x\n", Path::new("/tmp")).unwrap();
        assert_eq!(c.get_or("rows", 1usize).unwrap(), 8);
        assert_eq!(c.string_or("name", "y"), "x");
        assert_eq!(c.get_or("absent", 2.5f64).unwrap(), 2.5);
        assert!(c.finish().is_ok());
        assert_eq!(c.resolved()["absent"], "2.5");
    }

    #[test]
    fn rejects_malformed_lines_and_duplicates() {
        assert!(Config::parse("novalue\n", Path::new(".")).is_err());
        assert!(Config::parse("a=1\na=2\n", Path::new(".")).is_err());
        assert!(Config::parse("=1\n", Path::new(".")).is_err());
    }

    #[test]
    fn unknown_keys_are_named() {
        let mut c = Config::parse("rows=1\ntypo=2\n", Path::new(".")).unwrap();
        c.get_or("rows", 0usize).unwrap();
        let err = c.finish().unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("typo"));
    }

    #[test]
    fn lists_and_bools() {
        let mut c = Config::parse("seeds=1, 2,3\nflag=off\n", Path::new(".")).unwrap();
        assert_eq!(c.list_or("seeds", &[0u64]).unwrap(), vec![1, 2, 3]);
        assert_eq!(c.list_or("other", &[0.5f64]).unwrap(), vec![0.5]);
        assert!(!c.bool_or("flag", true).unwrap());
        let mut c = Config::parse("flag=maybe\n", Path::new(".")).unwrap();
        assert!(c.bool_or("flag", true).unwrap_err().message.contains("flag"));
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut c = Config::parse("rows=eight\n", Path::new(".")).unwrap();
        let err = c.get_or("rows", 0usize).unwrap_err();
        assert!(err.message.contains("rows"));
    }

    #[test]
    fn paths_resolve_against_base() {
        let mut c = Config::parse("out=res\n", Path::new("/data/run")).unwrap();
        assert_eq!(c.path_or("out", "x"), PathBuf::from("/data/run/res"));
        assert_eq!(c.path_or("img", "/abs.pgm"), PathBuf::from("/abs.pgm"));
    }
}
