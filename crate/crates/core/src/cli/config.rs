//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! [grid]
//! n = 32
//! [scales]
//! r_perp = 1/6
//! ```
//!
//! Values are kept as text together with the line they came from, so that
//! a value that fails to parse later is still reported with its line.
//! Numbers may be written as decimals or as fractions `p/q`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::expr::parse_rational;
use crate::ledger::NoiseMode;

#[derive(Clone, Debug, PartialEq, Serialize)]
struct Entry {
    value: String,
    /// Line in the file the value came from; 0 for defaults and flags.
    #[serde(skip)]
    line: usize,
}

/// Sections of `key = value` entries, ordered by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

/// A config error at `line`; values from defaults and flags (line 0) are
/// reported as invalid arguments instead.
fn err(line: usize, msg: impl Into<String>) -> Error {
    if line == 0 {
        Error::InvalidArgument(msg.into())
    } else {
        Error::Config { line, msg: msg.into() }
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Config {
    /// Empty configuration.
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse configuration text. Keys must appear inside a section and at
    /// most once per section.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err(line, "unterminated section header"))?.trim();
                if !valid_name(name) {
                    return Err(err(line, format!("bad section name '{name}'")));
                }
                cfg.sections.entry(name.to_string()).or_default();
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| err(line, format!("expected 'key = value', got '{s}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if !valid_name(k) {
                return Err(err(line, format!("bad key '{k}'")));
            }
            let sec = section.as_ref().ok_or_else(|| err(line, format!("key '{k}' outside any [section]")))?;
            let map = cfg.sections.get_mut(sec).expect("section exists");
            if map.contains_key(k) {
                return Err(err(line, format!("duplicate key '{k}' in [{sec}]")));
            }
            map.insert(k.to_string(), Entry { value: v.to_string(), line });
        }
        Ok(cfg)
    }

    /// Set a value (line 0).
    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), Entry { value: value.to_string(), line: 0 });
    }

    /// Set a value when `value` is present.
    pub fn set_opt<T: ToString>(&mut self, section: &str, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(section, key, v);
        }
    }

    /// Overlay `other` on `self`. With `strict`, every key of `other` must
    /// already exist in `self`.
    pub fn merge(&mut self, other: &Config, strict: bool) -> Result<()> {
        for (sec, map) in &other.sections {
            if strict && !self.sections.contains_key(sec) {
                let line = map.values().map(|e| e.line).min().unwrap_or(0);
                return Err(err(line, format!("unknown section [{sec}]")));
            }
            for (k, e) in map {
                let target = self.sections.entry(sec.clone()).or_default();
                if strict && !target.contains_key(k) {
                    return Err(err(e.line, format!("unknown key '{k}' in [{sec}]")));
                }
                target.insert(k.clone(), e.clone());
            }
        }
        Ok(())
    }

    fn entry(&self, section: &str, key: &str) -> Result<&Entry> {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .ok_or_else(|| err(0, format!("missing [{section}] {key}")))
    }

    /// Raw text of a value, if set.
    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|m| m.get(key)).map(|e| e.value.as_str())
    }

    /// A non-empty string value.
    pub fn string(&self, section: &str, key: &str) -> Result<String> {
        let e = self.entry(section, key)?;
        if e.value.is_empty() {
            return Err(err(e.line, format!("[{section}] {key} needs a value")));
        }
        Ok(e.value.clone())
    }

    fn typed<T>(&self, section: &str, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<T> {
        let e = self.entry(section, key)?;
        if e.value.is_empty() {
            return Err(err(e.line, format!("[{section}] {key} needs a value")));
        }
        f(&e.value).ok_or_else(|| err(e.line, format!("[{section}] {key}: expected {what}, got '{}'", e.value)))
    }

    /// A real number, written as a decimal or a fraction.
    pub fn f64(&self, section: &str, key: &str) -> Result<f64> {
        self.typed(section, key, "a number", parse_real)
    }

    /// A non-negative integer.
    pub fn usize(&self, section: &str, key: &str) -> Result<usize> {
        self.typed(section, key, "a non-negative integer", |s| s.parse().ok())
    }

    /// A 64-bit unsigned integer.
    pub fn u64(&self, section: &str, key: &str) -> Result<u64> {
        self.typed(section, key, "a non-negative integer", |s| s.parse().ok())
    }

    /// `true` or `false`.
    pub fn bool(&self, section: &str, key: &str) -> Result<bool> {
        self.typed(section, key, "true or false", |s| match s {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
    }

    /// An exact rational.
    pub fn rational(&self, section: &str, key: &str) -> Result<BigRational> {
        self.typed(section, key, "a rational number", |s| parse_rational(s).ok())
    }

    /// `additive` or `multiplicative`.
    pub fn mode(&self, section: &str, key: &str) -> Result<NoiseMode> {
        self.typed(section, key, "additive or multiplicative", |s| s.parse().ok())
    }

    /// Comma-separated non-negative integers.
    pub fn usize_list(&self, section: &str, key: &str) -> Result<Vec<usize>> {
        self.typed(section, key, "a comma-separated list of integers", |s| {
            s.split(',').map(|x| x.trim().parse().ok()).collect()
        })
    }

    /// Canonical text: sections and keys in sorted order.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (sec, map) in &self.sections {
            if !s.is_empty() {
                s.push('\n');
            }
            let _ = writeln!(s, "[{sec}]");
            for (k, e) in map {
                let _ = writeln!(s, "{k} = {}", e.value);
            }
        }
        s
    }

    /// Sections as nested maps of strings.
    pub fn to_map(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.sections
            .iter()
            .map(|(s, m)| (s.clone(), m.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()))
            .collect()
    }
}

/// Decimal or `p/q`.
pub fn parse_real(s: &str) -> Option<f64> {
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().ok()?;
        let q: f64 = q.trim().parse().ok()?;
        (q != 0.0).then(|| p / q).filter(|v| v.is_finite())
    } else {
        s.parse().ok().filter(|v: &f64| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_fractions() {
        let c = Config::parse("# top\n[grid]\nn = 32  # inline\n\n[scales]\nr_perp = 1/6\n").unwrap();
        assert_eq!(c.usize("grid", "n").unwrap(), 32);
        assert!((c.f64("scales", "r_perp").unwrap() - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("[a]\nx = 1\nbroken\n", 3),
            ("x = 1\n", 1),
            ("[a]\nx = 1\nx = 2\n", 3),
            ("[a\n", 1),
        ] {
            match Config::parse(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        let c = Config::parse("[a]\n\nx = abc\n").unwrap();
        match c.f64("a", "x") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_merge_rejects_unknown_keys() {
        let mut base = Config::new();
        base.set("grid", "n", 16);
        let file = Config::parse("[grid]\nm = 3\n").unwrap();
        match base.clone().merge(&file, true) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let file = Config::parse("[grid]\nn = 24\n").unwrap();
        base.merge(&file, true).unwrap();
        assert_eq!(base.usize("grid", "n").unwrap(), 24);
    }

    #[test]
    fn render_round_trips() {
        let mut c = Config::new();
        c.set("b", "y", "1/3");
        c.set("a", "x", 0.1);
        let again = Config::parse(&c.render()).unwrap();
        assert_eq!(again.to_map(), c.to_map());
    }
}
