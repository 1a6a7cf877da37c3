//! Run reports: the envelope shared by every command, its three
//! renderings and atomic artifact output.
//!
//! Reports contain no timestamps, host names or timings, so identical
//! inputs give byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::config::Config;
use crate::error::Result;
use crate::geometry::{format_qvec, DirectionSet};

/// Output format of the report on stdout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Human-readable text.
    Text,
    /// Pretty-printed JSON.
    Json,
    /// Flattened `key=value` lines.
    Kv,
}

/// A file written next to the report.
#[derive(Clone, Debug)]
pub struct Artifact {
    /// File name inside the output directory.
    pub name: String,
    /// Contents.
    pub bytes: Vec<u8>,
}

/// What a command produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    /// Every check under the run's tolerance policy passed.
    pub pass: bool,
    /// Human-readable body.
    pub text: String,
    /// Machine-readable result.
    pub result: Value,
    /// Extra files (written only with `--out`).
    pub artifacts: Vec<Artifact>,
}

/// Identity of the direction set every report is tied to.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryStamp {
    /// One-line fingerprint.
    pub fingerprint: String,
    /// Λ.
    pub directions: Vec<String>,
    /// n*.
    pub n_star: i64,
    /// Positivity radius r*.
    pub positivity_radius: f64,
}

impl GeometryStamp {
    /// Stamp of a direction set.
    pub fn of(set: &DirectionSet) -> Self {
        Self {
            fingerprint: set.fingerprint(),
            directions: set.directions.iter().map(|d| format_qvec(&d.xi)).collect(),
            n_star: set.n_star,
            positivity_radius: set.positivity_radius,
        }
    }
}

/// The report of one run.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope {
    /// Program name.
    pub tool: &'static str,
    /// Program version.
    pub version: &'static str,
    /// Subcommand, e.g. "stage run".
    pub command: String,
    /// Fully resolved configuration.
    pub config: BTreeMap<String, BTreeMap<String, String>>,
    /// Direction set.
    pub geometry: GeometryStamp,
    /// Verdict.
    pub pass: bool,
    /// Command-specific result.
    pub result: Value,
}

impl Envelope {
    /// Assemble the envelope.
    pub fn new(command: &str, config: &Config, geometry: GeometryStamp, outcome: &Outcome) -> Self {
        Self {
            tool: "wildflow",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.to_map(),
            geometry,
            pass: outcome.pass,
            result: outcome.result.clone(),
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// `key=value` lines, nested keys joined by dots.
    pub fn kv(&self) -> String {
        let v = serde_json::to_value(self).expect("reports serialize");
        let mut out = String::new();
        flatten("", &v, &mut out);
        out
    }

    /// Text rendering around the command's own body.
    pub fn text(&self, body: &str, config: &Config) -> String {
        let mut s = format!("{} {}: {}\n", self.tool, self.version, self.command);
        let _ = writeln!(s, "geometry: {}", self.geometry.fingerprint);
        s.push('\n');
        s.push_str(body);
        if !body.ends_with('\n') {
            s.push('\n');
        }
        s.push_str("\nresolved configuration:\n");
        for line in config.render().lines() {
            if line.is_empty() {
                s.push('\n');
            } else {
                let _ = writeln!(s, "  {line}");
            }
        }
        let _ = writeln!(s, "\nverdict: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::String(s) => {
            let _ = writeln!(out, "{prefix}={s}");
        }
        other => {
            let _ = writeln!(out, "{prefix}={other}");
        }
    }
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write report.json, report.txt, config.cfg and the artifacts into `dir`.
pub fn write_outputs(dir: &Path, env: &Envelope, text: &str, config: &Config, artifacts: &[Artifact]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for a in artifacts {
        write_atomic(&dir.join(&a.name), &a.bytes)?;
    }
    write_atomic(&dir.join("config.cfg"), config.render().as_bytes())?;
    write_atomic(&dir.join("report.txt"), text.as_bytes())?;
    // The JSON report goes last: its presence marks a complete run.
    write_atomic(&dir.join("report.json"), env.json().as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_flattens_nested_values() {
        let mut out = String::new();
        flatten("", &serde_json::json!({"a": {"b": [1, "x"]}, "c": true}), &mut out);
        assert_eq!(out, "a.b.0=1\na.b.1=x\nc=true\n");
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_atomic(&p, b"hello").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"hello");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
