//! Per-run output: every iteration's ensembles, the convergence front and timings.

use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, RunConfig};
use crate::gp::GpHyperparams;
use crate::state::{CorrectionDataset, Ensemble, StateVector};
use crate::systems::SystemId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    Budget,
    VariancePlateau,
    VarianceCap,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Budget => "budget",
            Termination::VariancePlateau => "variance-plateau",
            Termination::VarianceCap => "variance-cap",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Wall-clock milliseconds spent in each phase of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub fine_ms: f64,
    pub coarse_ms: f64,
    pub gp_ms: f64,
    pub sampling_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Convergence front `L` after this iteration.
    pub converged: usize,
    /// Ensemble means and unbiased stddevs at knots `0..=N`.
    pub means: Vec<StateVector>,
    pub stddevs: Vec<Vec<f64>>,
    /// Full ensembles at knots `0..=N`; dropped for intermediate iterations when thinned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensembles: Option<Vec<Ensemble>>,
    /// Convergence statistic per knot (`None` where not tested this iteration).
    pub distances: Vec<Option<f64>>,
    pub dataset_size: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hyperparams: Vec<GpHyperparams>,
    pub timings: PhaseTimings,
}

impl IterationRecord {
    pub fn new(
        k: usize,
        converged: usize,
        ensembles: Vec<Ensemble>,
        distances: Vec<Option<f64>>,
        dataset_size: usize,
    ) -> Self {
        let means = ensembles.iter().map(|e| e.mean()).collect();
        let stddevs = ensembles.iter().map(|e| e.stddev()).collect();
        IterationRecord {
            k,
            converged,
            means,
            stddevs,
            ensembles: Some(ensembles),
            distances,
            dataset_size,
            hyperparams: Vec::new(),
            timings: PhaseTimings::default(),
        }
    }

    pub fn ensembles(&self) -> &[Ensemble] {
        self.ensembles
            .as_deref()
            .expect("ensembles were thinned out of this record")
    }

    /// Largest coordinate stddev at knot `i`.
    pub fn stddev_max(&self, i: usize) -> f64 {
        self.stddevs[i].iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub system: SystemId,
    pub algorithm: Algorithm,
    pub intervals: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// `iterations[k]` for `k = 0..=k_end`; entry 0 is the initial coarse sweep.
    pub iterations: Vec<IterationRecord>,
    pub k_end: usize,
    pub k_conv: Option<usize>,
    pub termination: Termination,
    pub dataset: CorrectionDataset,
    pub wall_ms: f64,
}

impl RunRecord {
    pub fn last(&self) -> &IterationRecord {
        self.iterations.last().expect("record has the initial iteration")
    }

    pub fn final_ensembles(&self) -> &[Ensemble] {
        self.last().ensembles()
    }

    /// Copy keeping full ensembles only at `k = 0` and `k = k_end`.
    pub fn thinned(&self) -> RunRecord {
        let mut r = self.clone();
        let last = r.iterations.len() - 1;
        for (k, it) in r.iterations.iter_mut().enumerate() {
            if k != 0 && k != last {
                it.ensembles = None;
            }
        }
        r
    }

    /// Zero every timing field so serialised output depends only on (config, seed).
    pub fn without_timings(&self) -> RunRecord {
        let mut r = self.clone();
        r.wall_ms = 0.0;
        for it in &mut r.iterations {
            it.timings = PhaseTimings::default();
        }
        r
    }
}
