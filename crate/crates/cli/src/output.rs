//! Run directory writer: CSV tables, JSON documents, binary family files
//! and the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const CONFIG_ECHO: &str = "config.resolved.toml";
pub const MANIFEST: &str = "manifest.json";
pub const VERDICTS: &str = "verdicts.json";

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// A CSV cell.
pub enum Cell {
    F(f64),
    U(usize),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

fn render(c: &Cell) -> String {
    match c {
        Cell::F(v) => format!("{v}"),
        Cell::U(v) => v.to_string(),
        Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::S(s) => s.clone(),
    }
}

pub struct RunOutput {
    dir: PathBuf,
    csv: bool,
    bin: bool,
    files: Vec<String>,
}

impl RunOutput {
    /// Creates `<root>/<command>-<hash prefix>` and writes the config echo.
    pub fn create(
        root: &Path,
        command: &str,
        cfg: &ExperimentConfig,
        json_only: bool,
    ) -> Result<(Self, String), CliError> {
        let text = cfg.to_text();
        let hash = config_hash(&format!("{command}\n{text}"));
        let dir = root.join(format!("{command}-{}", &hash[..12]));
        fs::create_dir_all(&dir)?;
        let mut out = Self { dir, csv: !json_only && cfg.wants("csv"), bin: !json_only && cfg.wants("bin"), files: vec![] };
        out.write(CONFIG_ECHO, text.as_bytes())?;
        Ok((out, hash))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn binary_enabled(&self) -> bool {
        self.bin
    }

    pub fn csv_enabled(&self) -> bool {
        self.csv
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> Result<(), CliError> {
        if !self.csv {
            return Ok(());
        }
        let mut s = header.join(",");
        s.push('\n');
        for row in rows {
            s.push_str(&row.iter().map(render).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        self.write(name, s.as_bytes())
    }

    /// CSV data produced by a core writer.
    pub fn csv_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if self.csv {
            self.write(name, bytes)?;
        }
        Ok(())
    }

    pub fn binary(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if self.bin {
            self.write(name, bytes)?;
        }
        Ok(())
    }

    pub fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("json serializes");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// Named pass/fail checks plus free-form numeric details.
#[derive(Default)]
pub struct Verdicts {
    pub checks: Vec<(String, bool)>,
    pub details: Map<String, Value>,
}

impl Verdicts {
    pub fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.push((name.into(), ok));
    }

    pub fn detail(&mut self, name: &str, v: impl Into<Value>) {
        self.details.insert(name.to_string(), v.into());
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }

    pub fn to_json(&self, command: &str) -> Value {
        let checks: Map<String, Value> = self.checks.iter().map(|(k, v)| (k.clone(), Value::Bool(*v))).collect();
        json!({ "command": command, "verdicts": checks, "details": self.details })
    }
}

pub struct ManifestInput<'a> {
    pub command: &'a str,
    pub config_hash: &'a str,
    pub seed: u64,
    pub scenarios: usize,
    pub wall_time_s: f64,
}

pub fn manifest(m: &ManifestInput, files: &[String], verdicts: &Verdicts) -> Value {
    let checks: Map<String, Value> = verdicts.checks.iter().map(|(k, v)| (k.clone(), Value::Bool(*v))).collect();
    json!({
        "command": m.command,
        "config_hash": m.config_hash,
        "seed": m.seed,
        "scenarios": m.scenarios,
        "wall_time_s": m.wall_time_s,
        "outputs": files,
        "checks": checks,
        "passed": verdicts.all_pass(),
    })
}
