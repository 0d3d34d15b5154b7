//! Flat `key = value` text documents.
//!
//! Used for phantom headers, field-export headers and run configurations.
//! Blank lines and `#` comments are ignored, keys may contain dots, and a
//! key may appear only once.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDocument {
    entries: Vec<KvEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl KvDocument {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut doc = KvDocument::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::parse(format!("{origin}:{line}"), "expected `key = value`")
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::parse(
                    format!("{origin}:{line}"),
                    format!("malformed key `{key}`"),
                ));
            }
            if doc.get(key).is_some() {
                return Err(Error::parse(
                    format!("{origin}:{line}"),
                    format!("duplicate key `{key}`"),
                ));
            }
            doc.entries.push(KvEntry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(doc)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        let line = self.entries.len() + 1;
        self.entries.push(KvEntry {
            key: key.into(),
            value: value.to_string(),
            line,
        });
    }

    pub fn entries(&self) -> &[KvEntry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::parse(key, "required key is missing"))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::parse(key, format!("cannot parse `{v}`"))),
        }
    }

    /// Comma-separated list value.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|_| Error::parse(key, format!("cannot parse `{s}`")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Entries whose key starts with `prefix`, with the prefix stripped.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.entries.iter().filter_map(move |e| {
            e.key
                .strip_prefix(prefix)
                .map(|rest| (rest, e.value.as_str()))
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{} = {}", e.key, e.value);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dotted_keys() {
        let doc = KvDocument::parse("# header\nscenario.site = torso1 # trailing\n\nsolver.spacing_mm=2\n", "t")
            .unwrap();
        assert_eq!(doc.get("scenario.site"), Some("torso1"));
        assert_eq!(doc.parse_value::<f64>("solver.spacing_mm").unwrap(), Some(2.0));
        assert_eq!(doc.entries()[1].line, 4);
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(KvDocument::parse("a = 1\na = 2\n", "t").is_err());
        assert!(KvDocument::parse("just words\n", "t").is_err());
        assert!(KvDocument::parse("two words = 1\n", "t").is_err());
    }

    #[test]
    fn lists() {
        let doc = KvDocument::parse("f = 2e9, 2.45e9 ,3e9\n", "t").unwrap();
        assert_eq!(doc.parse_list::<f64>("f").unwrap().unwrap(), vec![2e9, 2.45e9, 3e9]);
    }

    #[test]
    fn render_round_trips() {
        let mut doc = KvDocument::new();
        doc.push("dims", "4, 4, 4");
        doc.push("spacing_mm", 2.0);
        let again = KvDocument::parse(&doc.render(), "t").unwrap();
        assert_eq!(again.get("dims"), Some("4, 4, 4"));
        assert_eq!(again.get("spacing_mm"), Some("2"));
    }
}
