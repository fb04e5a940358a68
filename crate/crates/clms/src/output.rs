//! Artifact writers. CSV files are comma-separated with a header row, LF line
//! endings and 17 significant digits; every file ends with the run metadata.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Metadata {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Metadata {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            version: VERSION.to_string(),
        }
    }
}

/// `v` with 17 significant digits, round-trippable.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// A CSV cell: integers verbatim, floats through [`fmt_f64`].
#[derive(Clone, Copy, Debug)]
pub enum Cell {
    Int(usize),
    Float(f64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<Cell>], meta: &Metadata) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Int(v) => v.to_string(),
                Cell::Float(v) => fmt_f64(*v),
            })
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    let _ = writeln!(s, "# config_sha256={}", meta.config_sha256);
    let _ = writeln!(s, "# seed={}", meta.seed);
    let _ = writeln!(s, "# version={}", meta.version);
    s
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Pipeline(format!("{}: {e}", path.display()))
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<Cell>],
    meta: &Metadata,
) -> Result<(), CliError> {
    fs::write(path, csv_string(header, rows, meta)).map_err(|e| io_error(path, e))
}

/// Pretty JSON with a trailing newline. `value` carries its own metadata field.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Pipeline(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| io_error(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(204.4769), "2.0447690000000000e2");
        for v in [0.1, 1.0 / 3.0, 315.523370520165, -2.5e-300] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_ends_with_metadata() {
        let meta = Metadata {
            config_sha256: "ab".into(),
            seed: 4,
            version: "0.1.0".into(),
        };
        let s = csv_string(&["k", "x"], &[vec![Cell::Int(0), Cell::Float(3.0)]], &meta);
        assert_eq!(
            s,
            "k,x\n0,3.0000000000000000e0\n# config_sha256=ab\n# seed=4\n# version=0.1.0\n"
        );
    }
}
