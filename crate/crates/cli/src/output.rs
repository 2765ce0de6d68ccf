//! On-disk formats: per-run JSON records and versioned CSV tables.
//!
//! Every CSV starts with a header row and carries its schema tag in a leading `schema`
//! column, so readers can reject files written by an incompatible version.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use pint_core::diagnostics::{self, FillDistanceReport};
use pint_core::metrics::{score_knots, Scores};
use pint_core::RunRecord;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

pub const METRICS_SCHEMA: &str = "pint-prob.metrics.v1";
pub const SUMMARY_SCHEMA: &str = "pint-prob.summary.v1";
pub const FILL_SCHEMA: &str = "pint-prob.fill-distance.v1";
pub const STDDEV_SCHEMA: &str = "pint-prob.stddev.v1";

pub const METRICS_HEADER: [&str; 15] = [
    "schema", "run_id", "system", "algorithm", "k", "i", "ES", "VS", "MAD", "MSE", "Bias",
    "stddev_max", "L", "wall_ms", "termination",
];

/// One `(k, i)` row of `metrics_<id>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub schema: String,
    pub run_id: String,
    pub system: String,
    pub algorithm: String,
    pub k: usize,
    pub i: usize,
    #[serde(rename = "ES")]
    pub es: f64,
    #[serde(rename = "VS")]
    pub vs: f64,
    #[serde(rename = "MAD")]
    pub mad: f64,
    #[serde(rename = "MSE")]
    pub mse: f64,
    #[serde(rename = "Bias")]
    pub bias: f64,
    pub stddev_max: f64,
    #[serde(rename = "L")]
    pub converged: usize,
    /// Elapsed run time at the end of iteration `k`.
    pub wall_ms: f64,
    pub termination: String,
}

impl MetricsRow {
    pub fn scores(&self) -> Scores {
        Scores {
            es: self.es,
            vs: self.vs,
            mad: self.mad,
            mse: self.mse,
            bias: self.bias,
        }
    }
}

/// Score every knot of every iteration against the sequential fine trajectory.
/// The record must still hold all ensembles.
pub fn metrics_rows(run_id: &str, record: &RunRecord, timing: bool) -> Result<Vec<MetricsRow>> {
    let truth = record.config.system_spec()?.fine_trajectory()?;
    let mut rows = Vec::new();
    let mut elapsed = 0.0;
    for it in &record.iterations {
        let Some(ensembles) = it.ensembles.as_deref() else {
            bail!("iteration {} of run {run_id} has no ensembles to score", it.k);
        };
        elapsed += it.timings.total_ms;
        for (i, s) in (1..).zip(score_knots(ensembles, &truth)) {
            rows.push(MetricsRow {
                schema: METRICS_SCHEMA.into(),
                run_id: run_id.into(),
                system: record.system.name().into(),
                algorithm: record.algorithm.name().into(),
                k: it.k,
                i,
                es: s.es,
                vs: s.vs,
                mad: s.mad,
                mse: s.mse,
                bias: s.bias,
                stddev_max: it.stddev_max(i),
                converged: it.converged,
                wall_ms: if timing { elapsed } else { 0.0 },
                termination: record.termination.name().into(),
            });
        }
    }
    Ok(rows)
}

/// Write `rows` under an explicit header, so an empty table still names its columns.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a CSV table and check every row's schema tag.
pub fn read_csv<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    if header.get(0) != Some("schema") {
        bail!("{}: first column must be `schema`", path.display());
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.get(0) != Some(schema) {
            bail!(
                "{}: row {} has schema {:?}, expected {schema}",
                path.display(),
                line + 2,
                rec.get(0).unwrap_or("")
            );
        }
        out.push(rec.deserialize(Some(&header))?);
    }
    Ok(out)
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_csv(path, &METRICS_HEADER, rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(path, METRICS_SCHEMA)
}

/// Persist a record, thinned unless `full`, with timings zeroed unless `timing`.
pub fn write_record(path: &Path, record: &RunRecord, full: bool, timing: bool) -> Result<()> {
    let mut r = if full { record.clone() } else { record.thinned() };
    if !timing {
        r = r.without_timings();
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &r)?;
    w.flush()?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub const FILL_HEADER: [&str; 6] = ["schema", "run_id", "k", "alpha", "fill_distance", "rho"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRow {
    pub schema: String,
    pub run_id: String,
    pub k: usize,
    pub alpha: f64,
    pub fill_distance: f64,
    pub rho: f64,
}

pub fn fill_rows(run_id: &str, report: &FillDistanceReport) -> Vec<FillRow> {
    report
        .rows
        .iter()
        .map(|r| FillRow {
            schema: FILL_SCHEMA.into(),
            run_id: run_id.into(),
            k: r.k,
            alpha: r.alpha,
            fill_distance: r.fill_distance,
            rho: r.rho,
        })
        .collect()
}

pub const STDDEV_HEADER: [&str; 8] = ["schema", "run_id", "k", "i", "t", "lyapunov_t", "coord", "stddev"];

/// Per-coordinate ensemble spread; `lyapunov_t` is empty for non-chaotic systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StddevCsvRow {
    pub schema: String,
    pub run_id: String,
    pub k: usize,
    pub i: usize,
    pub t: f64,
    pub lyapunov_t: Option<f64>,
    pub coord: usize,
    pub stddev: f64,
}

pub fn stddev_rows(run_id: &str, record: &RunRecord) -> Result<Vec<StddevCsvRow>> {
    let spec = record.config.system_spec()?;
    let mesh = spec.mesh();
    let lyap = diagnostics::lyapunov_axis(&spec);
    Ok(diagnostics::stddev_evolution(record)
        .into_iter()
        .map(|r| StddevCsvRow {
            schema: STDDEV_SCHEMA.into(),
            run_id: run_id.into(),
            k: r.k,
            i: r.i,
            t: mesh.knot(r.i),
            lyapunov_t: lyap.as_ref().map(|l| l[r.i]),
            coord: r.coord,
            stddev: r.stddev,
        })
        .collect())
}
