//! The line-oriented `key = value` text format shared by config files,
//! user scripts and recording metadata.
//!
//! Blank lines and lines starting with `#` are skipped. A `#` after a value
//! starts a trailing comment. Keys may repeat; callers decide whether that
//! is an error.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    /// 1-based line number.
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: expected {expected}")]
    BadValue { line: usize, key: String, value: String, expected: String },
    #[error("missing required key `{0}`")]
    Missing(String),
}

pub fn parse(text: &str) -> Result<Vec<Entry>, KvError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = match raw.find('#') {
            Some(at) => &raw[..at],
            None => raw,
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(KvError::Syntax { line, text: raw.trim().to_string() });
        };
        let key = k.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(KvError::Syntax { line, text: raw.trim().to_string() });
        }
        out.push(Entry { line, key: key.to_string(), value: v.trim().to_string() });
    }
    Ok(out)
}

/// Reject a second occurrence of any key.
pub fn no_duplicates(entries: &[Entry]) -> Result<(), KvError> {
    let mut seen = std::collections::HashSet::new();
    for e in entries {
        if !seen.insert(e.key.as_str()) {
            return Err(KvError::Duplicate { line: e.line, key: e.key.clone() });
        }
    }
    Ok(())
}

impl Entry {
    pub fn bad(&self, expected: impl Into<String>) -> KvError {
        KvError::BadValue { line: self.line, key: self.key.clone(), value: self.value.clone(), expected: expected.into() }
    }

    pub fn unknown(&self) -> KvError {
        KvError::UnknownKey { line: self.line, key: self.key.clone() }
    }

    pub fn parse<T: FromStr>(&self, expected: &str) -> Result<T, KvError> {
        self.value.parse().map_err(|_| self.bad(expected))
    }

    /// A finite or infinite number; `inf` is accepted.
    pub fn number(&self) -> Result<f64, KvError> {
        let v: f64 = self.parse("a number")?;
        if v.is_nan() {
            return Err(self.bad("a number"));
        }
        Ok(v)
    }

    pub fn finite(&self) -> Result<f64, KvError> {
        let v = self.number()?;
        if v.is_finite() { Ok(v) } else { Err(self.bad("a finite number")) }
    }

    pub fn flag(&self) -> Result<bool, KvError> {
        match self.value.as_str() {
            "true" | "on" | "yes" => Ok(true),
            "false" | "off" | "no" => Ok(false),
            _ => Err(self.bad("true or false")),
        }
    }

    /// Comma-separated list of finite numbers.
    pub fn numbers(&self) -> Result<Vec<f64>, KvError> {
        self.value
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.bad("comma-separated numbers"))
    }
}

/// Writes `key = value` lines.
#[derive(Default)]
pub struct Writer {
    out: String,
}

impl Writer {
    pub fn comment(&mut self, text: &str) {
        self.out.push_str("# ");
        self.out.push_str(text);
        self.out.push('\n');
    }

    pub fn blank(&mut self) {
        self.out.push('\n');
    }

    pub fn put(&mut self, key: &str, value: impl fmt::Display) {
        self.out.push_str(&format!("{key} = {value}\n"));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_repeats() {
        let e = parse("# header\n\na = 1\n b=two # note\na = 3\n").unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!((e[1].line, e[1].key.as_str(), e[1].value.as_str()), (4, "b", "two"));
        assert_eq!(no_duplicates(&e), Err(KvError::Duplicate { line: 5, key: "a".into() }));
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert_eq!(parse("x\n"), Err(KvError::Syntax { line: 1, text: "x".into() }));
        assert!(parse("a b = 1").is_err());
    }

    #[test]
    fn value_helpers() {
        let e = &parse("a = 1.5, 2,3\nb = inf\nc = nan\nd = off").unwrap();
        assert_eq!(e[0].numbers().unwrap(), vec![1.5, 2.0, 3.0]);
        assert_eq!(e[1].number().unwrap(), f64::INFINITY);
        assert!(e[1].finite().is_err());
        assert!(e[2].number().is_err());
        assert!(!e[3].flag().unwrap());
    }
}
