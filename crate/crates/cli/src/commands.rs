use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pint_core::diagnostics::fill_distance_sweep;
use pint_core::{Algorithm, KernelFamily, RunConfig, SystemSpec};

use crate::output::{self, FILL_HEADER, STDDEV_HEADER};
use crate::plan::{execute_run, run_plan, Emit, ExperimentPlan, OutputOptions};
use crate::summary::{summarize_files, summarize_rows, SUMMARY_HEADER};

#[derive(Debug, Parser)]
#[command(name = "pint-prob", version, about = "Parareal-family solvers with probabilistic GP corrections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classic Parareal.
    Parareal(RunArgs),
    /// Parareal with a GP model of the fine-coarse discrepancy.
    Gparareal(RunArgs),
    /// GParareal with per-interval nearest-neighbour GPs.
    Nngparareal(RunArgs),
    /// Ensemble solver sampling the GP posterior.
    ProbGparareal(RunArgs),
    /// Ensemble solver with nearest-neighbour GPs.
    ProbNngparareal(RunArgs),
    /// Execute every run of a plan file.
    Plan {
        plan: PathBuf,
        /// Overrides the plan's `output` directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rebuild summary.csv from metrics files.
    Summarize {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, default_value = "summary.csv")]
        out: PathBuf,
    },
    /// Post-process a saved record.
    #[command(subcommand)]
    Diagnose(Diagnose),
    /// Recompute a system's normalisation bounds from a coarse sequential run.
    Bounds {
        #[arg(long)]
        system: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum Diagnose {
    /// Local fill distance at HDR representatives (needs a record saved with --dump-ensembles).
    FillDistance {
        record: PathBuf,
        #[arg(long = "alpha", default_values_t = [0.5, 0.9])]
        alphas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-coordinate ensemble stddev at every knot and iteration.
    Stddev {
        record: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Keep the ensembles of every iteration in the record.
    #[arg(long)]
    pub dump_ensembles: bool,
    /// Write zero timings so outputs depend only on the config and seed.
    #[arg(long)]
    pub no_timing: bool,
}

impl OutputArgs {
    fn options(&self) -> OutputOptions {
        OutputOptions {
            dump_ensembles: self.dump_ensembles,
            timing: !self.no_timing,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub system: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Convergence tolerance (default per system).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Ensemble size.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_init: f64,
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Iteration budget (default per system).
    #[arg(long)]
    pub kstop: Option<usize>,
    /// Stop once an unconverged knot's stddev exceeds this.
    #[arg(long)]
    pub variance_cap: Option<f64>,
    /// Stop after this many iterations without stddev decrease.
    #[arg(long)]
    pub plateau_window: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub plateau_rel_tol: f64,
    #[arg(long, default_value = "gaussian", value_parser = parse_kernel)]
    pub kernel: KernelFamily,
    #[arg(long)]
    pub intervals: Option<usize>,
    #[arg(long)]
    pub coarse_steps: Option<usize>,
    #[arg(long)]
    pub fine_steps: Option<usize>,
    #[arg(long)]
    pub no_warm_start: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_kernel(s: &str) -> std::result::Result<KernelFamily, String> {
    KernelFamily::parse(s).map_err(|e| e.to_string())
}

impl RunArgs {
    pub fn config(&self, algorithm: Algorithm) -> RunConfig {
        let mut c = RunConfig::new(&self.system, algorithm, self.seed);
        if let Some(n) = self.samples {
            c.n_samples = n;
        } else if !algorithm.is_probabilistic() && self.sigma_init == 0.0 {
            c.n_samples = 1;
        }
        c.epsilon = self.epsilon;
        c.sigma_init = self.sigma_init;
        c.neighbors = self.neighbors;
        c.max_iterations = self.kstop;
        c.variance_cap = self.variance_cap;
        c.plateau_window = self.plateau_window;
        c.plateau_rel_tol = self.plateau_rel_tol;
        c.kernel = self.kernel;
        c.intervals = self.intervals;
        c.coarse_steps = self.coarse_steps;
        c.fine_steps = self.fine_steps;
        c.warm_start = !self.no_warm_start;
        c
    }
}

fn single_run(algorithm: Algorithm, args: &RunArgs) -> Result<ExitCode> {
    let config = args.config(algorithm);
    config.validate()?;
    fs::create_dir_all(&args.out)?;
    let id = format!("{}-{}-s{}", config.system, algorithm, config.seed);
    let out = execute_run(&id, &config, &args.out, Emit::default(), args.output.options())?;
    output::write_csv(&args.out.join("summary.csv"), &SUMMARY_HEADER, &summarize_rows(&out.metrics))?;
    let r = &out.record;
    println!(
        "{id}: {} after {} iterations ({:.0} ms)",
        r.termination, r.k_end, r.wall_ms
    );
    Ok(ExitCode::SUCCESS)
}

fn stem(path: &std::path::Path) -> String {
    let s = path.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
    s.strip_prefix("record_").unwrap_or(s).to_string()
}

pub fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Parareal(a) => single_run(Algorithm::Parareal, &a),
        Command::Gparareal(a) => single_run(Algorithm::Gparareal, &a),
        Command::Nngparareal(a) => single_run(Algorithm::Nngparareal, &a),
        Command::ProbGparareal(a) => single_run(Algorithm::ProbGparareal, &a),
        Command::ProbNngparareal(a) => single_run(Algorithm::ProbNngparareal, &a),
        Command::Plan { plan, out, output } => {
            let mut plan = ExperimentPlan::load(&plan)?;
            if let Some(dir) = out {
                plan.output = dir;
            }
            let outcome = run_plan(&plan, output.options())?;
            for (id, e) in &outcome.failed {
                eprintln!("{id}: {e}");
            }
            println!(
                "{} runs ok, {} failed; see {}",
                outcome.succeeded.len(),
                outcome.failed.len(),
                plan.output.join("MANIFEST").display()
            );
            Ok(if outcome.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Summarize { metrics, out } => {
            let rows = summarize_files(&metrics, &out)?;
            println!("{} summary rows -> {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Diagnose(Diagnose::FillDistance { record, alphas, out }) => {
            let rec = output::read_record(&record)?;
            let report = fill_distance_sweep(&rec, &alphas)
                .context("fill distance needs every iteration's ensembles (run with --dump-ensembles)")?;
            let id = stem(&record);
            let out = out.unwrap_or_else(|| record.with_file_name(format!("fill_{id}.csv")));
            output::write_csv(&out, &FILL_HEADER, &output::fill_rows(&id, &report))?;
            println!("{} rows -> {}", report.rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Diagnose(Diagnose::Stddev { record, out }) => {
            let rec = output::read_record(&record)?;
            let id = stem(&record);
            let rows = output::stddev_rows(&id, &rec)?;
            let out = out.unwrap_or_else(|| record.with_file_name(format!("stddev_{id}.csv")));
            output::write_csv(&out, &STDDEV_HEADER, &rows)?;
            println!("{} rows -> {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds { system } => {
            let spec = SystemSpec::parse(&system)?;
            let (lo, hi) = spec.observed_bounds()?;
            println!("coord,lo,hi");
            for (s, (l, h)) in lo.iter().zip(&hi).enumerate() {
                println!("{s},{l},{h}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
