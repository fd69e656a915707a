use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const TOOL: &str = "cvmdi";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Rows for the CSV form of a result.
#[derive(Debug, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip form, so output bytes depend only on the value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A finished command: the resolved configuration plus its result in both forms.
pub struct Output {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub table: Table,
}

#[derive(Serialize)]
struct Document<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a Value,
    result: &'a Value,
}

impl Output {
    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let doc = Document {
                    tool: TOOL,
                    version: VERSION,
                    command: self.command,
                    config: &self.config,
                    result: &self.result,
                };
                let mut bytes = serde_json::to_vec_pretty(&doc)?;
                bytes.push(b'\n');
                Ok(bytes)
            }
            Format::Csv => {
                let mut bytes = Vec::new();
                writeln!(bytes, "# tool: {TOOL} {VERSION}")?;
                writeln!(bytes, "# command: {}", self.command)?;
                writeln!(bytes, "# config: {}", serde_json::to_string(&self.config)?)?;
                let mut w = csv::Writer::from_writer(&mut bytes);
                w.write_record(&self.table.headers)?;
                for row in &self.table.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
                drop(w);
                Ok(bytes)
            }
        }
    }
}

/// `--output` wins; otherwise a file named after the command in `dir`; otherwise stdout.
pub fn destination(output: Option<&Path>, dir: Option<&Path>, command: &str, format: Format) -> Option<PathBuf> {
    output
        .map(Path::to_path_buf)
        .or_else(|| dir.map(|d| d.join(format!("{command}.{}", format.extension()))))
}

pub fn write(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}
