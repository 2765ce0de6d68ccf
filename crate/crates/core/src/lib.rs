//! Parallel-in-time ODE solvers: Parareal, GParareal, nnGParareal and their probabilistic
//! variants, which carry Gaussian-process uncertainty over the correction through time by
//! ancestral sampling.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod gp;
pub mod integrators;
pub mod metrics;
pub mod nngp;
pub mod pint;
pub mod probpint;
pub mod record;
pub mod rng;
pub mod state;
pub mod systems;

pub use config::{Algorithm, RunConfig};
pub use error::{Error, Result};
pub use gp::{GpHyperparams, GpModel, KernelFamily};
pub use integrators::{integrate, RkScheme, Solver, SolverPair, VectorField};
pub use pint::{gparareal_run, parareal_run, run};
pub use probpint::{prob_run, w2_exact, w2_gaussian, GaussianSummary};
pub use record::{IterationRecord, RunRecord, Termination};
pub use rng::{make_rng_stream, RngStream};
pub use state::{CorrectionDataset, Ensemble, StateVector, TimeMesh};
pub use systems::{SystemId, SystemSpec};
