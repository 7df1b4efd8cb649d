//! Run artifacts: CSV and JSON data files plus a checksummed manifest.
//!
//! Every byte written here is produced by fixed-width formatting of values
//! that are themselves deterministic, so rerunning a scenario reproduces the
//! data files exactly. The manifest's `created` timestamp is the single
//! field that differs between reruns.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::SecondsFormat;
use serde::Serialize;
use sha2::{Digest, Sha256};
use wicklab_core::{ComplexField, Grid1D, RealField};

use crate::CliError;

/// One entry in a CSV or JSON table.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(u64),
    Num(f64),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:.16e}"),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => serde_json::Value::from(*v),
            Cell::Num(v) => serde_json::Value::from(*v),
        }
    }
}

/// Name, size, and SHA-256 of a written data file.
#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Serialize)]
struct GridInfo {
    n_points: usize,
    length: f64,
}

impl From<Grid1D> for GridInfo {
    fn from(grid: Grid1D) -> Self {
        Self { n_points: grid.n_points(), length: grid.length() }
    }
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
    parallel: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    created: String,
    tool: ToolInfo,
    status: &'a str,
    summary: &'a serde_json::Value,
    files: &'a [FileRecord],
    scenario: &'a str,
}

/// Collects the data files of one run and finishes with the manifest.
pub struct OutputSink {
    dir: PathBuf,
    csv: bool,
    json: bool,
    quiet: bool,
    files: Vec<FileRecord>,
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), source }
}

impl OutputSink {
    pub fn new(dir: &Path, csv: bool, json: bool, quiet: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), csv, json, quiet, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|e| io_err(&path, e))?;
        let digest = Sha256::digest(&bytes);
        let sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.files.push(FileRecord { name: name.to_string(), bytes: bytes.len() as u64, sha256 });
        if !self.quiet {
            println!("wrote {}", path.display());
        }
        Ok(())
    }

    /// Write `<stem>.csv` / `<stem>.json` holding one real field, with the
    /// value column named `column`.
    pub fn real_field(&mut self, stem: &str, column: &str, field: &RealField) -> Result<(), CliError> {
        let grid = field.grid();
        if self.csv {
            let mut text = format!("r,{column}\n");
            for (i, v) in field.values().iter().enumerate() {
                text.push_str(&format!("{:.16e},{:.16e}\n", grid.coordinate(i), v));
            }
            self.put(&format!("{stem}.csv"), text.into_bytes())?;
        }
        if self.json {
            let r: Vec<f64> = (0..grid.n_points()).map(|i| grid.coordinate(i)).collect();
            let body = serde_json::json!({
                "grid": GridInfo::from(grid),
                "r": r,
                column: field.values(),
            });
            self.put(&format!("{stem}.json"), render_json(&body))?;
        }
        Ok(())
    }

    /// Write `<stem>.csv` / `<stem>.json` holding a complex field as columns
    /// `re` and `im`.
    pub fn complex_field(&mut self, stem: &str, field: &ComplexField) -> Result<(), CliError> {
        let grid = field.grid();
        if self.csv {
            let mut text = String::from("r,re,im\n");
            for (i, v) in field.values().iter().enumerate() {
                text.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", grid.coordinate(i), v.re, v.im));
            }
            self.put(&format!("{stem}.csv"), text.into_bytes())?;
        }
        if self.json {
            let r: Vec<f64> = (0..grid.n_points()).map(|i| grid.coordinate(i)).collect();
            let re: Vec<f64> = field.values().iter().map(|v| v.re).collect();
            let im: Vec<f64> = field.values().iter().map(|v| v.im).collect();
            let body = serde_json::json!({
                "grid": GridInfo::from(grid),
                "r": r,
                "re": re,
                "im": im,
            });
            self.put(&format!("{stem}.json"), render_json(&body))?;
        }
        Ok(())
    }

    /// Write a small table (convergence history, spectra, observables).
    pub fn table(&mut self, stem: &str, columns: &[&str], rows: &[Vec<Cell>]) -> Result<(), CliError> {
        if self.csv {
            let mut text = columns.join(",");
            text.push('\n');
            for row in rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            self.put(&format!("{stem}.csv"), text.into_bytes())?;
        }
        if self.json {
            let rows_json: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| serde_json::Value::from(row.iter().map(Cell::json).collect::<Vec<_>>()))
                .collect();
            let body = serde_json::json!({
                "columns": columns,
                "rows": rows_json,
            });
            self.put(&format!("{stem}.json"), render_json(&body))?;
        }
        Ok(())
    }

    /// Write a free-form JSON report regardless of the format selection.
    pub fn report(&mut self, stem: &str, body: &serde_json::Value) -> Result<(), CliError> {
        self.put(&format!("{stem}.json"), render_json(body))
    }

    /// Write `manifest.json` atomically: serialize to a temporary file in the
    /// same directory, then rename over the final name. The manifest lists
    /// every data file with its SHA-256, echoes the scenario in canonical
    /// form, and records the run status.
    pub fn manifest(&mut self, scenario: &str, status: &str, summary: &serde_json::Value) -> Result<(), CliError> {
        let manifest = Manifest {
            created: chrono::Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true),
            tool: ToolInfo {
                name: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                parallel: cfg!(feature = "parallel"),
            },
            status,
            summary,
            files: &self.files,
            scenario,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialization cannot fail");
        bytes.push(b'\n');
        let tmp = self.dir.join("manifest.json.tmp");
        let path = self.dir.join("manifest.json");
        fs::write(&tmp, &bytes).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        if !self.quiet {
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

fn render_json(body: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(body).expect("JSON serialization cannot fail");
    bytes.push(b'\n');
    bytes
}
