//! Deterministic parallel-in-time drivers: Parareal, GParareal and nnGParareal.
//!
//! Parareal corrects with the previous iterate,
//! `u_{i,k} = G(u_{i-1,k}) + F(u_{i-1,k-1}) - G(u_{i-1,k-1})`,
//! while the GP variants learn `F - G` and evaluate it at the current iterate,
//! `u_{i,k} = G(u_{i-1,k}) + mu_k(u_{i-1,k})`.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::{Algorithm, RunConfig};
use crate::error::{Error, Result};
use crate::gp::{self, FitOptions, GpHyperparams, GpModel};
use crate::integrators::SolverPair;
use crate::nngp::{self, NeighborIndex};
use crate::record::{IterationRecord, RunRecord, Termination};
use crate::state::{CorrectionDataset, Ensemble, StateVector, TimeMesh};
use crate::systems::{SystemField, SystemSpec};

/// Immutable per-run context shared by all drivers.
pub(crate) struct Context {
    pub config: RunConfig,
    pub spec: SystemSpec,
    pub field: SystemField,
    pub mesh: TimeMesh,
    pub pair: SolverPair,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub fit_options: FitOptions,
}

impl Context {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.system_spec()?;
        Ok(Context {
            field: spec.field(),
            mesh: spec.mesh(),
            pair: spec.solver_pair_checked()?,
            epsilon: config.epsilon_for(&spec),
            max_iterations: config.max_iterations_for(&spec),
            fit_options: FitOptions::default(),
            config: config.clone(),
            spec,
        })
    }

    pub fn intervals(&self) -> usize {
        self.spec.intervals
    }

    /// `G` from knot `i - 1` to knot `i`.
    pub fn coarse(&self, u: &[f64], i: usize, k: usize) -> Result<StateVector> {
        self.pair
            .coarse_propagate(&self.field, &self.mesh, u, i - 1)
            .map_err(|e| e.at(i, k, None))
    }

    /// `F` from knot `i - 1` to knot `i`.
    pub fn fine(&self, u: &[f64], i: usize, k: usize) -> Result<StateVector> {
        self.pair
            .fine_propagate(&self.field, &self.mesh, u, i - 1)
            .map_err(|e| e.at(i, k, None))
    }

    /// `(F(x_i), G(x_i))` for every `(i, x_i)` pair, in parallel, in input order.
    pub fn fine_and_coarse(
        &self,
        jobs: &[(usize, &[f64])],
        k: usize,
    ) -> Result<(Vec<StateVector>, Vec<StateVector>, f64, f64)> {
        let t = Instant::now();
        let fine: Vec<StateVector> = jobs
            .par_iter()
            .map(|&(i, x)| self.fine(x, i, k))
            .collect::<Result<_>>()?;
        let fine_ms = ms(t);
        let t = Instant::now();
        let coarse: Vec<StateVector> = jobs
            .par_iter()
            .map(|&(i, x)| self.coarse(x, i, k))
            .collect::<Result<_>>()?;
        Ok((fine, coarse, fine_ms, ms(t)))
    }

    pub fn record(
        &self,
        iterations: Vec<IterationRecord>,
        termination: Termination,
        dataset: CorrectionDataset,
        start: Instant,
    ) -> RunRecord {
        let k_end = iterations.len() - 1;
        RunRecord {
            config: self.config.clone(),
            system: self.spec.id,
            algorithm: self.config.algorithm,
            intervals: self.intervals(),
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            iterations,
            k_end,
            k_conv: (termination == Termination::Converged).then_some(k_end),
            termination,
            dataset,
            wall_ms: ms(start),
        }
    }
}

pub(crate) fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Move the front `L` forward through the contiguous run of knots whose distance is `< eps`.
pub fn advance_front(converged: usize, distances: &[Option<f64>], epsilon: f64) -> usize {
    let mut l = converged;
    while l + 1 < distances.len() {
        match distances[l + 1] {
            Some(d) if d < epsilon => l += 1,
            _ => break,
        }
    }
    l
}

fn singletons(states: &[StateVector], k: usize) -> Vec<Ensemble> {
    states
        .iter()
        .enumerate()
        .map(|(i, u)| Ensemble::replicate(u, 1, i, k))
        .collect()
}

fn initial_sweep(ctx: &Context) -> Result<Vec<StateVector>> {
    let mut u = Vec::with_capacity(ctx.intervals() + 1);
    u.push(ctx.spec.initial_state());
    for i in 1..=ctx.intervals() {
        let next = ctx.coarse(&u[i - 1], i, 0)?;
        u.push(next);
    }
    Ok(u)
}

fn sup_distances(next: &[StateVector], prev: &[StateVector], from: usize) -> Vec<Option<f64>> {
    (0..next.len())
        .map(|i| (i >= from).then(|| next[i].max_abs_diff(&prev[i])))
        .collect()
}

/// Classic Parareal.
pub fn parareal_run(config: &RunConfig) -> Result<RunRecord> {
    parareal_with(Context::new(config)?)
}

pub(crate) fn parareal_with(ctx: Context) -> Result<RunRecord> {
    let start = Instant::now();
    let n = ctx.intervals();
    let t = Instant::now();
    let mut u = initial_sweep(&ctx)?;
    // g_prev[i] = G(u_{i-1,k-1})
    let mut g_prev = u.clone();
    let mut first = IterationRecord::new(0, 0, singletons(&u, 0), vec![None; n + 1], 0);
    first.timings.coarse_ms = ms(t);
    first.timings.total_ms = first.timings.coarse_ms;
    let mut iterations = vec![first];
    let mut front = 0;
    let mut termination = Termination::Budget;

    for k in 1..=ctx.max_iterations {
        let t_iter = Instant::now();
        let t = Instant::now();
        let fine: Vec<StateVector> = (front + 1..=n)
            .into_par_iter()
            .map(|i| ctx.fine(&u[i - 1], i, k))
            .collect::<Result<_>>()?;
        let fine_ms = ms(t);

        let t = Instant::now();
        let mut next = u.clone();
        for i in front + 1..=n {
            let g = ctx.coarse(&next[i - 1], i, k)?;
            let f = &fine[i - front - 1];
            next[i] = g
                .iter()
                .zip(f.iter().zip(g_prev[i].iter()))
                .map(|(g, (f, gp))| g + f - gp)
                .collect::<Vec<_>>()
                .into();
            g_prev[i] = g;
        }
        let coarse_ms = ms(t);

        let distances = sup_distances(&next, &u, front + 1);
        front = advance_front(front, &distances, ctx.epsilon);
        u = next;
        let mut rec = IterationRecord::new(k, front, singletons(&u, k), distances, 0);
        rec.timings.fine_ms = fine_ms;
        rec.timings.coarse_ms = coarse_ms;
        rec.timings.total_ms = ms(t_iter);
        iterations.push(rec);
        if front == n {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(ctx.record(iterations, termination, CorrectionDataset::new(), start))
}

/// GParareal (full GP) or nnGParareal (`config.algorithm == Nngparareal`).
pub fn gparareal_run(config: &RunConfig) -> Result<RunRecord> {
    gparareal_with(Context::new(config)?)
}

pub(crate) fn gparareal_with(ctx: Context) -> Result<RunRecord> {
    let config = &ctx.config.clone();
    let nn = config.algorithm.uses_neighbors();
    let m = config.neighbor_count();
    let start = Instant::now();
    let n = ctx.intervals();
    let t = Instant::now();
    let mut u = initial_sweep(&ctx)?;
    let mut first = IterationRecord::new(0, 0, singletons(&u, 0), vec![None; n + 1], 0);
    first.timings.coarse_ms = ms(t);
    first.timings.total_ms = first.timings.coarse_ms;
    let mut iterations = vec![first];
    let mut dataset = CorrectionDataset::new();
    let mut warm: Option<Vec<GpHyperparams>> = None;
    let mut front = 0;
    let mut termination = Termination::Budget;

    for k in 1..=ctx.max_iterations {
        let t_iter = Instant::now();
        let jobs: Vec<(usize, &[f64])> = (front + 1..=n).map(|i| (i, &u[i - 1][..])).collect();
        let (fine, coarse, fine_ms, mut coarse_ms) = ctx.fine_and_coarse(&jobs, k)?;
        for ((&(_, x), f), g) in jobs.iter().zip(&fine).zip(&coarse) {
            dataset.push(x.into(), difference(f, g), k);
        }

        let t = Instant::now();
        let model = if nn {
            None
        } else {
            let warm_ref = if config.warm_start { warm.as_deref() } else { None };
            let model = gp::fit(&dataset, config.kernel, &ctx.fit_options, warm_ref)?;
            warm = Some(model.hyperparams());
            Some(model)
        };
        let index = if nn {
            Some(NeighborIndex::build(&dataset)?)
        } else {
            None
        };
        let mut gp_ms = ms(t);

        let mut next = u.clone();
        for i in front + 1..=n {
            let x = next[i - 1].clone();
            let t = Instant::now();
            let mu = match (&model, &index) {
                (Some(model), _) => model.mean(&x),
                (None, Some(index)) => nngp::fit_local(
                    &dataset,
                    index,
                    &x,
                    m,
                    config.kernel,
                    &ctx.fit_options,
                    None,
                )?
                .mean(&x),
                (None, None) => unreachable!(),
            };
            gp_ms += ms(t);
            let t = Instant::now();
            let g = ctx.coarse(&x, i, k)?;
            coarse_ms += ms(t);
            let v: StateVector = g.iter().zip(mu.iter()).map(|(a, b)| a + b).collect::<Vec<_>>().into();
            if !v.is_finite() {
                return Err(Error::non_finite().at(i, k, None));
            }
            next[i] = v;
        }

        let distances = sup_distances(&next, &u, front + 1);
        front = advance_front(front, &distances, ctx.epsilon);
        u = next;
        let mut rec = IterationRecord::new(k, front, singletons(&u, k), distances, dataset.len());
        if let Some(w) = &warm {
            rec.hyperparams = w.clone();
        }
        rec.timings.fine_ms = fine_ms;
        rec.timings.coarse_ms = coarse_ms;
        rec.timings.gp_ms = gp_ms;
        rec.timings.total_ms = ms(t_iter);
        iterations.push(rec);
        if front == n {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(ctx.record(iterations, termination, dataset, start))
}

pub(crate) fn difference(f: &[f64], g: &[f64]) -> StateVector {
    f.iter().zip(g).map(|(a, b)| a - b).collect::<Vec<_>>().into()
}

/// Used by probabilistic drivers and tests that need the shared GP fit path.
pub(crate) fn fit_full(
    ctx: &Context,
    dataset: &CorrectionDataset,
    warm: Option<&[GpHyperparams]>,
) -> Result<GpModel> {
    gp::fit(dataset, ctx.config.kernel, &ctx.fit_options, warm)
}

/// Dispatch on `config.algorithm`.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    match config.algorithm {
        Algorithm::Parareal => parareal_run(config),
        Algorithm::Gparareal | Algorithm::Nngparareal => gparareal_run(config),
        Algorithm::ProbGparareal | Algorithm::ProbNngparareal => crate::probpint::prob_run(config),
    }
}
