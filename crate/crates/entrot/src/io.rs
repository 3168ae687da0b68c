//! Artifact input/output: measures and cost matrices from JSON or CSV,
//! numeric series to CSV, reports to JSON.
//!
//! Every write lands in a temporary file in the destination directory and
//! is renamed into place, so readers never observe half-written artifacts
//! and reruns replace files atomically. Floats are emitted in shortest
//! round-trip form, which keeps identical inputs producing byte-identical
//! files.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::annealing::{AnnealedTrace, CurvePoint};
use crate::diagnostics::ContractionStep;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::sinkhorn::{SinkhornTrace, TraceRow};

/// A struct that serializes to one CSV record, with a fixed header.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

/// Create the directory (and parents) if missing.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write bytes through a temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

/// Header line followed by one record per row, atomically written.
pub fn write_csv_rows<T: CsvRow>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    wtr.write_record(T::HEADER)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Config {
            reason: format!("csv buffer: {e}"),
        })?;
    write_atomic(path, &bytes)
}

impl CsvRow for TraceRow {
    const HEADER: &'static [&'static str] =
        &["t", "lambda", "E", "delta", "kl", "var_gap", "osc"];
}

impl CsvRow for CurvePoint {
    const HEADER: &'static [&'static str] = &["lambda", "h", "kl"];
}

impl CsvRow for ContractionStep {
    const HEADER: &'static [&'static str] = &[
        "t",
        "delta_t",
        "delta_next",
        "ratio",
        "bound",
        "eligible",
        "pass",
    ];
}

/// Scalar view of an annealed row (the potential stays in JSON artifacts).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnnealedCsvRow {
    pub t: usize,
    pub lambda: f64,
    pub e_reg: f64,
    pub e_unreg: f64,
    pub eta: f64,
}

impl CsvRow for AnnealedCsvRow {
    const HEADER: &'static [&'static str] = &["t", "lambda", "E_reg", "E_unreg", "eta"];
}

/// One row of the analytic closed-form series.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianSeriesRow {
    pub t: usize,
    pub alpha: f64,
    pub e: f64,
    pub delta: f64,
    /// Analytic lower bound on `delta`; absent outside the certificate
    /// regime.
    pub lower_bound: Option<f64>,
    /// `delta_{t+1} / delta_t`; absent on the last row.
    pub ratio: Option<f64>,
}

impl CsvRow for GaussianSeriesRow {
    const HEADER: &'static [&'static str] =
        &["t", "alpha", "E", "delta", "lower_bound", "ratio"];
}

/// One replication's empirical variance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReplicationCsvRow {
    pub rep: usize,
    pub variance: f64,
}

impl CsvRow for ReplicationCsvRow {
    const HEADER: &'static [&'static str] = &["rep", "variance"];
}

pub fn write_trace_csv(path: &Path, trace: &SinkhornTrace) -> Result<()> {
    write_csv_rows(path, &trace.rows)
}

pub fn write_annealed_csv(path: &Path, trace: &AnnealedTrace) -> Result<()> {
    let rows: Vec<AnnealedCsvRow> = trace
        .rows
        .iter()
        .map(|r| AnnealedCsvRow {
            t: r.t,
            lambda: r.lambda,
            e_reg: r.e_reg,
            e_unreg: r.e_unreg,
            eta: r.eta,
        })
        .collect();
    write_csv_rows(path, &rows)
}

pub fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    write_csv_rows(path, points)
}

pub fn write_replication_csv(path: &Path, variances: &[f64]) -> Result<()> {
    let rows: Vec<ReplicationCsvRow> = variances
        .iter()
        .enumerate()
        .map(|(rep, &variance)| ReplicationCsvRow { rep, variance })
        .collect();
    write_csv_rows(path, &rows)
}

pub fn write_measure_json(path: &Path, m: &DiscreteMeasure) -> Result<()> {
    write_json(path, m)
}

pub fn read_measure_json(path: &Path) -> Result<DiscreteMeasure> {
    read_json(path)
}

/// CSV rows of `d` coordinates followed by one weight column, no header.
pub fn write_measure_csv(path: &Path, m: &DiscreteMeasure) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for i in 0..m.len() {
        let mut row: Vec<f64> = m.point(i).to_vec();
        row.push(m.weights()[i]);
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Config {
        reason: format!("csv buffer: {e}"),
    })?;
    write_atomic(path, &bytes)
}

fn numeric_records(path: &Path, min_width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                Error::io(path, std::io::Error::other(e.to_string()))
            }
            _ => Error::Csv(e),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(idx + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let parsed = match parsed {
            Ok(v) => v,
            // A single non-numeric leading row is accepted as a header.
            Err(_) if rows.is_empty() && idx == 0 => continue,
            Err(e) => return Err(Error::parse(path, line, format!("bad number: {e}"))),
        };
        if parsed.len() < min_width {
            return Err(Error::parse(
                path,
                line,
                format!("need at least {min_width} columns, got {}", parsed.len()),
            ));
        }
        if let Some(w) = width {
            if parsed.len() != w {
                return Err(Error::parse(
                    path,
                    line,
                    format!("ragged row: expected {w} columns, got {}", parsed.len()),
                ));
            }
        } else {
            width = Some(parsed.len());
        }
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "no data rows"));
    }
    Ok(rows)
}

/// Read a measure from CSV: coordinate columns then a final weight column.
pub fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let rows = numeric_records(path, 2)?;
    let width = rows[0].len();
    let mut points = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for row in rows {
        points.push(row[..width - 1].to_vec());
        weights.push(row[width - 1]);
    }
    DiscreteMeasure::new(points, weights)
}

/// Read a row-major cost matrix: returns `(entries, n_rows, n_cols)`.
pub fn read_cost_csv(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let rows = numeric_records(path, 1)?;
    let n_x = rows.len();
    let n_y = rows[0].len();
    let mut entries = Vec::with_capacity(n_x * n_y);
    for row in rows {
        entries.extend_from_slice(&row);
    }
    Ok((entries, n_x, n_y))
}

/// Row-major matrix, one CSV line per row, no header.
pub fn write_cost_csv(path: &Path, entries: &[f64], n_x: usize, n_y: usize) -> Result<()> {
    if entries.len() != n_x * n_y {
        return Err(Error::LengthMismatch {
            what: "cost entries",
            expected: n_x * n_y,
            got: entries.len(),
        });
    }
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for i in 0..n_x {
        wtr.serialize(&entries[i * n_y..(i + 1) * n_y])?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Config {
        reason: format!("csv buffer: {e}"),
    })?;
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn measures_round_trip_through_json_and_csv() {
        let dir = tmpdir();
        let m = DiscreteMeasure::new(
            vec![
                vec![0.0, -1.5],
                vec![0.25, 2.0],
                vec![1e-7, 3.5],
                vec![-4.0, 0.125],
            ],
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let j = dir.path().join("m.json");
        write_measure_json(&j, &m).unwrap();
        assert_eq!(read_measure_json(&j).unwrap(), m);
        let c = dir.path().join("m.csv");
        write_measure_csv(&c, &m).unwrap();
        assert_eq!(read_measure_csv(&c).unwrap(), m);
    }

    #[test]
    fn measure_csv_accepts_an_optional_header_row() {
        let dir = tmpdir();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "x,w\n0.0,0.25\n1.0,0.75\n").unwrap();
        let m = read_measure_csv(&path).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.25, 0.75]);
        assert_eq!(m.point(1), &[1.0]);
    }

    #[test]
    fn csv_parse_errors_carry_file_and_line() {
        let dir = tmpdir();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "0.0,0.5\noops,0.5\n").unwrap();
        match read_measure_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "0.0,1.0,0.5\n1.0,0.5\n").unwrap();
        assert!(matches!(
            read_measure_csv(&ragged),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn cost_matrices_round_trip_and_validate_shape() {
        let dir = tmpdir();
        let path = dir.path().join("c.csv");
        let mut rng = synthetic::rng(9);
        let entries = synthetic::random_cost_entries(&mut rng, 4, 3, 2.0);
        write_cost_csv(&path, &entries, 4, 3).unwrap();
        let (back, n_x, n_y) = read_cost_csv(&path).unwrap();
        assert_eq!((n_x, n_y), (4, 3));
        assert_eq!(back, entries);
        assert!(write_cost_csv(&path, &entries, 4, 4).is_err());
    }

    #[test]
    fn series_writers_emit_exact_headers_and_rows() {
        let dir = tmpdir();
        let p = synthetic::random_problem(11, 4, 4, 0.7, 1.0);
        let psi0 = crate::sinkhorn::Potential::zeros(crate::sinkhorn::Side::OnY, 4);
        let trace = p.solve(&psi0, 5, 0.0).unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&path, &trace).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,lambda,E,delta,kl,var_gap,osc");
        assert_eq!(lines.count(), trace.rows.len());

        let gpath = dir.path().join("g.csv");
        let rows = [GaussianSeriesRow {
            t: 0,
            alpha: 0.0,
            e: -0.5,
            delta: 0.25,
            lower_bound: None,
            ratio: Some(0.5),
        }];
        write_csv_rows(&gpath, &rows).unwrap();
        let text = std::fs::read_to_string(&gpath).unwrap();
        assert_eq!(
            text,
            "t,alpha,E,delta,lower_bound,ratio\n0,0.0,-0.5,0.25,,0.5\n"
        );

        // Empty series still produce the header line.
        let epath = dir.path().join("empty.csv");
        write_csv_rows::<GaussianSeriesRow>(&epath, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&epath).unwrap(),
            "t,alpha,E,delta,lower_bound,ratio\n"
        );
    }

    #[test]
    fn identical_inputs_write_identical_bytes() {
        let dir = tmpdir();
        let m = synthetic::random_measure(21, 9);
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        write_measure_json(&a, &m).unwrap();
        write_measure_json(&b, &m).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
