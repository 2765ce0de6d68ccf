//! Run configuration and its key-value file form.
//!
//! ```toml
//! system = "fhn"
//! algorithm = "prob-gparareal"
//! seed = 7
//! n_samples = 500
//! epsilon = 1e-7          # optional, per-system default
//! max_iterations = 9      # optional, per-system K_stop (deterministic solvers: N)
//! kernel = "gaussian"
//! neighbors = 15          # nn variants only
//! sigma_init = 0.0
//! variance_cap = 1.0      # optional early exit
//! plateau_window = 3      # optional early exit
//! plateau_rel_tol = 0.05
//! warm_start = true
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::KernelFamily;
use crate::systems::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Parareal,
    Gparareal,
    Nngparareal,
    ProbGparareal,
    ProbNngparareal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Parareal,
        Algorithm::Gparareal,
        Algorithm::Nngparareal,
        Algorithm::ProbGparareal,
        Algorithm::ProbNngparareal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Parareal => "parareal",
            Algorithm::Gparareal => "gparareal",
            Algorithm::Nngparareal => "nngparareal",
            Algorithm::ProbGparareal => "prob-gparareal",
            Algorithm::ProbNngparareal => "prob-nngparareal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }

    pub fn is_probabilistic(self) -> bool {
        matches!(self, Algorithm::ProbGparareal | Algorithm::ProbNngparareal)
    }

    pub fn uses_neighbors(self) -> bool {
        matches!(self, Algorithm::Nngparareal | Algorithm::ProbNngparareal)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_NEIGHBORS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default = "default_kernel")]
    pub kernel: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<usize>,
    #[serde(default)]
    pub sigma_init: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_window: Option<usize>,
    #[serde(default = "default_rel_tol")]
    pub plateau_rel_tol: f64,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    /// Force every posterior variance to zero (deterministic-limit checks).
    #[serde(default, skip_serializing_if = "is_false")]
    pub zero_variance: bool,
    /// Overrides of the system's mesh and whole-horizon step totals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_steps: Option<usize>,
}

fn default_samples() -> usize {
    5000
}

fn default_kernel() -> KernelFamily {
    KernelFamily::Gaussian
}

fn default_rel_tol() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl RunConfig {
    pub fn new(system: &str, algorithm: Algorithm, seed: u64) -> Self {
        RunConfig {
            system: system.to_string(),
            algorithm,
            seed,
            n_samples: default_samples(),
            epsilon: None,
            max_iterations: None,
            kernel: default_kernel(),
            neighbors: None,
            sigma_init: 0.0,
            variance_cap: None,
            plateau_window: None,
            plateau_rel_tol: default_rel_tol(),
            warm_start: true,
            zero_variance: false,
            intervals: None,
            coarse_steps: None,
            fine_steps: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.system_spec()?;
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {e}")));
            }
        }
        if !(self.sigma_init >= 0.0) {
            return Err(Error::InvalidConfig("sigma_init must be >= 0".into()));
        }
        if (self.algorithm.is_probabilistic() || self.sigma_init > 0.0) && self.n_samples < 2 {
            return Err(Error::InvalidConfig(
                "probabilistic runs need at least 2 samples".into(),
            ));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        if self.algorithm.uses_neighbors() && self.neighbor_count() < 1 {
            return Err(Error::InvalidConfig("neighbors must be >= 1".into()));
        }
        if spec.intervals < 2 {
            return Err(Error::InvalidConfig("need at least 2 intervals".into()));
        }
        if !(0.0..1.0).contains(&self.plateau_rel_tol) {
            return Err(Error::InvalidConfig("plateau_rel_tol must be in [0, 1)".into()));
        }
        spec.solver_pair_checked()?;
        Ok(())
    }

    /// The registered system with any mesh/step overrides applied.
    pub fn system_spec(&self) -> Result<SystemSpec> {
        let mut spec = SystemSpec::parse(&self.system)?;
        if let Some(n) = self.intervals {
            spec = spec.with_intervals(n);
        }
        let coarse = self.coarse_steps.unwrap_or(spec.coarse.total_steps);
        let fine = self.fine_steps.unwrap_or(spec.fine.total_steps);
        Ok(spec.with_step_totals(coarse, fine))
    }

    pub fn epsilon_for(&self, spec: &SystemSpec) -> f64 {
        self.epsilon.unwrap_or(if self.algorithm.is_probabilistic() {
            spec.epsilon_prob
        } else {
            spec.epsilon_det
        })
    }

    pub fn max_iterations_for(&self, spec: &SystemSpec) -> usize {
        self.max_iterations.unwrap_or(if self.algorithm.is_probabilistic() {
            spec.k_stop
        } else {
            spec.intervals
        })
    }

    pub fn neighbor_count(&self) -> usize {
        self.neighbors.unwrap_or(DEFAULT_NEIGHBORS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::new("lorenz", Algorithm::ProbNngparareal, 11);
        c.n_samples = 500;
        c.epsilon = Some(1e-9);
        c.neighbors = Some(15);
        c.sigma_init = 1e-4;
        c.plateau_window = Some(3);
        let text = c.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = RunConfig::from_toml("system = \"fhn\"\nalgorithm = \"parareal\"\nseed = 1\n").unwrap();
        let spec = c.system_spec().unwrap();
        assert_eq!(c.epsilon_for(&spec), 5e-6);
        assert_eq!(c.max_iterations_for(&spec), 40);
        let p = RunConfig::new("lorenz", Algorithm::ProbGparareal, 1);
        let spec = p.system_spec().unwrap();
        assert_eq!(p.epsilon_for(&spec), 1e-9);
        assert_eq!(p.max_iterations_for(&spec), 16);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("system = \"fhn\"\nalgorithm = \"parareal\"\nseed = 1\nepsilon = 0.0\n").is_err());
        assert!(RunConfig::from_toml("system = \"nope\"\nalgorithm = \"parareal\"\nseed = 1\n").is_err());
        assert!(RunConfig::from_toml(
            "system = \"fhn\"\nalgorithm = \"prob-gparareal\"\nseed = 1\nn_samples = 1\n"
        )
        .is_err());
        assert!(RunConfig::from_toml("system = \"fhn\"\nalgorithm = \"parareal\"\nseed = 1\ntypo = 3\n").is_err());
    }
}
