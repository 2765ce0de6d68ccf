//! Per-run and per-group digests of metrics tables.
//!
//! A run's group is its id with the trailing `-s<seed>` removed, so repeats of one plan
//! entry share a group.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use pint_core::metrics::{time_average, Scores};
use serde::{Deserialize, Serialize};

use crate::output::{read_metrics, write_csv, MetricsRow};

pub const SUMMARY_HEADER: [&str; 13] = [
    "schema", "row", "id", "system", "algorithm", "runs", "K_end", "ES", "VS", "MAD", "MSE", "Bias",
    "termination",
];

/// `row` is `run` for one run, or `mean` / `std` (sample, n - 1) over a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub schema: String,
    pub row: String,
    pub id: String,
    pub system: String,
    pub algorithm: String,
    pub runs: usize,
    #[serde(rename = "K_end")]
    pub k_end: f64,
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
    pub termination: String,
}

pub fn group_of(run_id: &str) -> &str {
    match run_id.rfind("-s") {
        Some(p) if p + 2 < run_id.len() && run_id[p + 2..].bytes().all(|b| b.is_ascii_digit()) => {
            &run_id[..p]
        }
        _ => run_id,
    }
}

/// Final-iteration time averages of each run, then mean and std per group.
pub fn summarize_rows(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut runs: BTreeMap<&str, Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        runs.entry(&r.run_id).or_default().push(r);
    }
    let mut out = Vec::new();
    let mut groups: BTreeMap<&str, Vec<SummaryRow>> = BTreeMap::new();
    for (id, rs) in &runs {
        let k_end = rs.iter().map(|r| r.k).max().unwrap_or(0);
        let last: Vec<Scores> = rs.iter().filter(|r| r.k == k_end).map(|r| r.scores()).collect();
        let s = time_average(&last);
        let row = SummaryRow {
            schema: crate::output::SUMMARY_SCHEMA.into(),
            row: "run".into(),
            id: id.to_string(),
            system: rs[0].system.clone(),
            algorithm: rs[0].algorithm.clone(),
            runs: 1,
            k_end: k_end as f64,
            es: s.es,
            vs: s.vs,
            mad: s.mad,
            mse: s.mse,
            bias: s.bias,
            termination: rs[0].termination.clone(),
        };
        groups.entry(group_of(id)).or_default().push(row.clone());
        out.push(row);
    }
    for (group, members) in groups {
        let stat = |f: fn(&SummaryRow) -> f64| mean_std(&members.iter().map(f).collect::<Vec<_>>());
        let cols = [
            stat(|r| r.k_end),
            stat(|r| r.es),
            stat(|r| r.vs),
            stat(|r| r.mad),
            stat(|r| r.mse),
            stat(|r| r.bias),
        ];
        for (kind, pick) in [("mean", 0usize), ("std", 1)] {
            let v = |c: usize| if pick == 0 { cols[c].0 } else { cols[c].1 };
            out.push(SummaryRow {
                schema: crate::output::SUMMARY_SCHEMA.into(),
                row: kind.into(),
                id: group.to_string(),
                system: members[0].system.clone(),
                algorithm: members[0].algorithm.clone(),
                runs: members.len(),
                k_end: v(0),
                es: v(1),
                vs: v(2),
                mad: v(3),
                mse: v(4),
                bias: v(5),
                termination: String::new(),
            });
        }
    }
    out
}

/// Mean and sample standard deviation; the std of a single value is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize_files(inputs: &[impl AsRef<Path>], out: &Path) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(read_metrics(p.as_ref())?);
    }
    let summary = summarize_rows(&rows);
    write_csv(out, &SUMMARY_HEADER, &summary)?;
    Ok(summary)
}
