//! CSV and JSON trace files.
//!
//! Both formats carry the same rows. Floats are written in their shortest
//! round-trip form, so a trace re-read from either file is bit-identical to
//! the solver output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sabap::{SolverRun, TraceRow};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub variant: String,
    pub steering: String,
    pub dim: usize,
    pub max_iter: u64,
    pub record_every: u64,
    pub epsilon: Option<f64>,
    pub tail_mass: Option<f64>,
    pub truncated_terms: Option<usize>,
    pub stopped_at: Option<u64>,
    pub oracle: Option<Vec<f64>>,
    /// SHA-256 of the normalized config, hex encoded.
    pub config_sha256: String,
    /// Set when the run ended in a solver error; rows are then partial.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: u64,
    pub lambda: f64,
    pub step_norm: f64,
    pub oracle_dist: Option<f64>,
    pub x: Vec<f64>,
}

impl From<&TraceRow> for TraceRecord {
    fn from(row: &TraceRow) -> Self {
        Self {
            k: row.k,
            lambda: row.lambda,
            step_norm: row.step_norm,
            oracle_dist: row.oracle_dist,
            x: row.x.coords().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub meta: Option<TraceMeta>,
    pub rows: Vec<TraceRecord>,
}

impl Trace {
    pub fn from_run(run: &SolverRun, meta: TraceMeta) -> Self {
        Self {
            meta: Some(meta),
            rows: run.trace.iter().map(TraceRecord::from).collect(),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.rows.first().map(|r| r.x.len())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut out = Vec::new();
        self.write_csv_to(&mut out)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(path, &out)
    }

    pub fn write_csv_to(&self, out: impl Write) -> csv::Result<()> {
        let dim = self.dim().unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "k".to_string(),
            "lambda".into(),
            "step_norm".into(),
            "oracle_dist".into(),
        ];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.k.to_string(),
                fmt_f64(row.lambda),
                fmt_f64(row.step_norm),
                row.oracle_dist.map(fmt_f64).unwrap_or_default(),
            ];
            rec.extend(row.x.iter().copied().map(fmt_f64));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_vec_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(path, &text)
    }

    /// Reads a trace, choosing the format from the extension (`.json` or CSV).
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
        } else {
            Self::parse_csv(&text).map_err(bad)
        }
    }

    pub fn parse_csv(text: &str) -> Result<Self, String> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| e.to_string())?.clone();
        let fixed = ["k", "lambda", "step_norm", "oracle_dist"];
        if header.len() < fixed.len() + 1 || fixed.iter().zip(header.iter()).any(|(a, b)| *a != b) {
            return Err(format!(
                "expected header k,lambda,step_norm,oracle_dist,x1,..., found {}",
                header.iter().collect::<Vec<_>>().join(",")
            ));
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let num = |i: usize| -> Result<f64, String> {
                rec[i]
                    .parse()
                    .map_err(|_| format!("row {}: column {} is not a number", line + 1, &header[i]))
            };
            let k = rec[0]
                .parse()
                .map_err(|_| format!("row {}: k is not an integer", line + 1))?;
            let oracle_dist = if rec[3].is_empty() {
                None
            } else {
                Some(num(3)?)
            };
            rows.push(TraceRecord {
                k,
                lambda: num(1)?,
                step_norm: num(2)?,
                oracle_dist,
                x: (4..rec.len()).map(num).collect::<Result<_, _>>()?,
            });
        }
        Ok(Self { meta: None, rows })
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// `trace.csv` → (`trace.csv`, `trace.json`); other names get both extensions.
pub fn output_paths(out: &Path) -> (PathBuf, PathBuf) {
    if out.extension().is_some_and(|e| e == "csv") {
        (out.to_path_buf(), out.with_extension("json"))
    } else {
        let mut csv = out.as_os_str().to_owned();
        csv.push(".csv");
        let mut json = out.as_os_str().to_owned();
        json.push(".json");
        (csv.into(), json.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [
            0.1,
            1.0 / 3.0,
            1e-300,
            5e-324,
            1.0036517329101,
            -0.0,
            2.5e17,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let trace = Trace {
            meta: None,
            rows: vec![
                TraceRecord {
                    k: 0,
                    lambda: 1.0,
                    step_norm: 0.0,
                    oracle_dist: None,
                    x: vec![2.0, 1.0 / 3.0],
                },
                TraceRecord {
                    k: 10,
                    lambda: 1.0 / 11.0,
                    step_norm: 1e-17,
                    oracle_dist: Some(0.25),
                    x: vec![0.1, -3e-9],
                },
            ],
        };
        let mut buf = Vec::new();
        trace.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,lambda,step_norm,oracle_dist,x1,x2\n"));
        assert_eq!(Trace::parse_csv(&text).unwrap(), trace);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(Trace::parse_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn output_path_pairs() {
        let (c, j) = output_paths(Path::new("out/run.csv"));
        assert_eq!(
            (c.as_path(), j.as_path()),
            (Path::new("out/run.csv"), Path::new("out/run.json"))
        );
        let (c, j) = output_paths(Path::new("out/run"));
        assert_eq!(
            (c.as_path(), j.as_path()),
            (Path::new("out/run.csv"), Path::new("out/run.json"))
        );
    }
}
