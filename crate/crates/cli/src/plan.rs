//! Experiment plans: batches of runs with repeats and parameter sweeps.
//!
//! ```toml
//! output = "results/fhn-batch"
//! emit = ["records", "metrics", "summary"]
//!
//! [[run]]
//! system = "fhn"
//! algorithm = "prob-gparareal"
//! seed = 1            # required; repeat r uses seed + r
//! repeats = 3
//! n_samples = 500
//!
//! [run.sweep]         # optional, cartesian product
//! epsilon = [1e-5, 1e-7]
//! sigma_init = [0.0, 1e-3]
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pint_core::{run, RunConfig, RunRecord};
use rayon::prelude::*;
use serde::Deserialize;

use crate::output::{metrics_rows, write_metrics, write_record, MetricsRow};
use crate::summary::{summarize_rows, SUMMARY_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub records: bool,
    pub metrics: bool,
    pub summary: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Emit {
            records: true,
            metrics: true,
            summary: true,
        }
    }
}

/// How records and tables are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    /// Keep every iteration's ensembles in `record_<id>.json`.
    pub dump_ensembles: bool,
    /// Record wall-clock times; off gives byte-reproducible outputs.
    pub timing: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            dump_ensembles: false,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub label: String,
    pub config: RunConfig,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub output: PathBuf,
    pub emit: Emit,
    pub runs: Vec<PlannedRun>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Sweep {
    #[serde(default)]
    epsilon: Vec<f64>,
    #[serde(default)]
    n_samples: Vec<usize>,
    #[serde(default)]
    sigma_init: Vec<f64>,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        let output = match table.remove("output") {
            Some(v) => PathBuf::from(v.as_str().ok_or_else(|| anyhow!("`output` must be a string"))?),
            None => PathBuf::from("."),
        };
        let emit = match table.remove("emit") {
            Some(v) => {
                let names: Vec<String> = v.try_into()?;
                let mut e = Emit {
                    records: false,
                    metrics: false,
                    summary: false,
                };
                for n in names {
                    match n.as_str() {
                        "records" => e.records = true,
                        "metrics" => e.metrics = true,
                        "summary" => e.summary = true,
                        other => bail!("unknown emit target `{other}`"),
                    }
                }
                e
            }
            None => Emit::default(),
        };
        let entries = match table.remove("run") {
            Some(toml::Value::Array(a)) => a,
            Some(_) => bail!("`run` must be an array of tables"),
            None => Vec::new(),
        };
        if let Some(key) = table.keys().next() {
            bail!("unknown plan key `{key}`");
        }
        let mut runs = Vec::new();
        for (n, entry) in entries.into_iter().enumerate() {
            let toml::Value::Table(mut t) = entry else {
                bail!("run {n} is not a table");
            };
            let repeats = match t.remove("repeats") {
                Some(v) => usize::try_from(v.as_integer().ok_or_else(|| anyhow!("run {n}: `repeats` must be an integer"))?)?,
                None => 1,
            };
            let label = t.remove("label").and_then(|v| v.as_str().map(str::to_string));
            let sweep: Sweep = match t.remove("sweep") {
                Some(v) => v.try_into().with_context(|| format!("run {n}: bad sweep"))?,
                None => Sweep::default(),
            };
            let base: RunConfig = toml::Value::Table(t)
                .try_into()
                .with_context(|| format!("run {n}"))?;
            base.validate().with_context(|| format!("run {n}"))?;
            let base_label = label.unwrap_or_else(|| format!("{}-{}", base.system, base.algorithm));
            for (suffix, config) in sweep_points(&base, &sweep) {
                config.validate().with_context(|| format!("run {n}{suffix}"))?;
                runs.push(PlannedRun {
                    label: format!("{n:02}-{base_label}{suffix}"),
                    config,
                    repeats,
                });
            }
        }
        Ok(ExperimentPlan { output, emit, runs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `(run_id, config)` for every repeat of every entry, in plan order.
    pub fn expand(&self) -> Vec<(String, RunConfig)> {
        let mut out = Vec::new();
        for p in &self.runs {
            for r in 0..p.repeats {
                let mut c = p.config.clone();
                c.seed = p.config.seed + r as u64;
                out.push((format!("{}-s{}", p.label, c.seed), c));
            }
        }
        out
    }
}

fn sweep_points(base: &RunConfig, sweep: &Sweep) -> Vec<(String, RunConfig)> {
    let mut points = vec![(String::new(), base.clone())];
    if !sweep.epsilon.is_empty() {
        points = points
            .into_iter()
            .flat_map(|(s, c)| {
                sweep.epsilon.iter().map(move |&e| {
                    let mut c = c.clone();
                    c.epsilon = Some(e);
                    (format!("{s}-eps{e:e}"), c)
                })
            })
            .collect();
    }
    if !sweep.n_samples.is_empty() {
        points = points
            .into_iter()
            .flat_map(|(s, c)| {
                sweep.n_samples.iter().map(move |&n| {
                    let mut c = c.clone();
                    c.n_samples = n;
                    (format!("{s}-n{n}"), c)
                })
            })
            .collect();
    }
    if !sweep.sigma_init.is_empty() {
        points = points
            .into_iter()
            .flat_map(|(s, c)| {
                sweep.sigma_init.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.sigma_init = v;
                    (format!("{s}-sig{v:e}"), c)
                })
            })
            .collect();
    }
    points
}

/// Files written for one finished run.
#[derive(Debug)]
pub struct RunOutput {
    pub run_id: String,
    pub record: RunRecord,
    pub metrics: Vec<MetricsRow>,
}

/// Run one config and write its record and metrics into `dir`.
pub fn execute_run(
    run_id: &str,
    config: &RunConfig,
    dir: &Path,
    emit: Emit,
    opts: OutputOptions,
) -> Result<RunOutput> {
    let record = run(config).with_context(|| format!("run {run_id}"))?;
    let metrics = if emit.metrics || emit.summary {
        metrics_rows(run_id, &record, opts.timing)?
    } else {
        Vec::new()
    };
    if emit.records {
        write_record(&dir.join(format!("record_{run_id}.json")), &record, opts.dump_ensembles, opts.timing)?;
    }
    if emit.metrics {
        write_metrics(&dir.join(format!("metrics_{run_id}.csv")), &metrics)?;
    }
    Ok(RunOutput {
        run_id: run_id.to_string(),
        record,
        metrics,
    })
}

#[derive(Debug)]
pub struct PlanOutcome {
    pub succeeded: Vec<String>,
    /// `(run_id, error)` of every failed run.
    pub failed: Vec<(String, String)>,
}

impl PlanOutcome {
    pub fn ok(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Execute every run, in parallel, then write `summary.csv` and `MANIFEST` in plan order.
/// Failed runs are listed in the manifest; the others still write their outputs.
pub fn run_plan(plan: &ExperimentPlan, opts: OutputOptions) -> Result<PlanOutcome> {
    fs::create_dir_all(&plan.output).with_context(|| format!("creating {}", plan.output.display()))?;
    let jobs = plan.expand();
    let results: Vec<Result<RunOutput>> = jobs
        .par_iter()
        .map(|(id, c)| execute_run(id, c, &plan.output, plan.emit, opts))
        .collect();

    let mut all_metrics = Vec::new();
    let mut outcome = PlanOutcome {
        succeeded: Vec::new(),
        failed: Vec::new(),
    };
    let mut manifest = Vec::new();
    for ((id, _), res) in jobs.iter().zip(results) {
        match res {
            Ok(out) => {
                writeln!(manifest, "{id}\tok\t{}\tK_end={}", out.record.termination, out.record.k_end)?;
                all_metrics.extend(out.metrics);
                outcome.succeeded.push(id.clone());
            }
            Err(e) => {
                let msg = format!("{e:#}").replace(['\t', '\n'], " ");
                writeln!(manifest, "{id}\tfailed\t{msg}")?;
                outcome.failed.push((id.clone(), msg));
            }
        }
    }
    if plan.emit.summary {
        crate::output::write_csv(&plan.output.join("summary.csv"), &SUMMARY_HEADER, &summarize_rows(&all_metrics))?;
    }
    fs::write(plan.output.join("MANIFEST"), manifest)?;
    Ok(outcome)
}
