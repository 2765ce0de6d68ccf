//! Probabilistic GParareal: ensembles of `n` samples per knot are pushed through `G` plus a
//! draw from the GP posterior over `F - G` (ancestral sampling), and an interval converges
//! when the squared Wasserstein-2 distance between diagonal-Gaussian fits of consecutive
//! iterations falls below `epsilon`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gp::{GpHyperparams, GpModel};
use crate::nngp::{self, NeighborIndex};
use crate::pint::{advance_front, difference, fit_full, ms, Context};
use crate::record::{IterationRecord, RunRecord, Termination};
use crate::rng::make_rng_stream;
use crate::state::{squared_distance, CorrectionDataset, Ensemble, StateVector};

/// Law of the initial ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialDistribution {
    Dirac(StateVector),
    /// Isotropic Gaussian around `mean`.
    Gaussian { mean: StateVector, sigma: f64 },
}

impl InitialDistribution {
    pub fn new(mean: StateVector, sigma: f64) -> Self {
        if sigma > 0.0 {
            InitialDistribution::Gaussian { mean, sigma }
        } else {
            InitialDistribution::Dirac(mean)
        }
    }

    /// `n` draws; sample `j` uses the stream keyed `(seed, 0, 0, j)`.
    pub fn sample(&self, n: usize, seed: u64) -> Ensemble {
        match self {
            InitialDistribution::Dirac(u) => Ensemble::replicate(u, n, 0, 0),
            InitialDistribution::Gaussian { mean, sigma } => {
                let mut data = Vec::with_capacity(n * mean.dim());
                for j in 0..n {
                    let mut rng = make_rng_stream(seed, 0, 0, j);
                    data.extend(mean.iter().map(|m| m + sigma * rng.standard_normal()));
                }
                Ensemble::from_flat(mean.dim(), data, 0, 0)
            }
        }
    }
}

/// Diagonal-Gaussian fit of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    pub mean: StateVector,
    pub stddev: Vec<f64>,
}

impl GaussianSummary {
    pub fn of(ensemble: &Ensemble) -> Self {
        GaussianSummary {
            mean: ensemble.mean(),
            stddev: ensemble.stddev(),
        }
    }
}

/// Squared W2 distance between two diagonal Gaussians.
pub fn w2_gaussian(a: &GaussianSummary, b: &GaussianSummary) -> f64 {
    debug_assert_eq!(a.mean.dim(), b.mean.dim());
    squared_distance(&a.mean, &b.mean) + squared_distance(&a.stddev, &b.stddev)
}

/// Exact empirical `W_p^p` between equal-size ensembles by optimal assignment.
pub fn w2_exact(a: &Ensemble, b: &Ensemble, p: i32) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    let cost: Vec<f64> = a
        .samples()
        .flat_map(|x| b.samples().map(move |y| squared_distance(x, y).sqrt().powi(p)))
        .collect();
    let assignment = hungarian(&cost, n);
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[r * n + c])
        .sum::<f64>()
        / n as f64)
}

/// Minimum-cost perfect assignment on a dense `n x n` cost matrix; returns the column of
/// each row. Shortest augmenting paths with potentials, `O(n^3)`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    // 1-based arrays, column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExitCondition {
    IterationBudget(usize),
    /// Stop once an unconverged knot has a coordinate stddev above the cap.
    VarianceCap(f64),
    /// Stop once the stddev at the first unconverged knot has failed to shrink by
    /// `rel_tol` for `window` consecutive iterations.
    VariancePlateau { window: usize, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitDecision {
    Continue,
    Stop(Termination),
}

/// Early-termination test on the iterations recorded so far.
pub fn check_exit(iterations: &[IterationRecord], conditions: &[ExitCondition]) -> ExitDecision {
    let Some(last) = iterations.last() else {
        return ExitDecision::Continue;
    };
    let knots = last.stddevs.len();
    for c in conditions {
        match *c {
            ExitCondition::IterationBudget(k_stop) => {
                if last.k >= k_stop {
                    return ExitDecision::Stop(Termination::Budget);
                }
            }
            ExitCondition::VarianceCap(cap) => {
                if (last.converged + 1..knots).any(|i| last.stddev_max(i) > cap) {
                    return ExitDecision::Stop(Termination::VarianceCap);
                }
            }
            ExitCondition::VariancePlateau { window, rel_tol } => {
                let series: Vec<f64> = iterations
                    .iter()
                    .filter(|it| it.k >= 1)
                    .map(|it| it.stddev_max((it.converged + 1).min(knots - 1)))
                    .collect();
                let flat = series
                    .windows(2)
                    .rev()
                    .take_while(|w| w[1] > (1.0 - rel_tol) * w[0])
                    .count();
                if window > 0 && flat >= window {
                    return ExitDecision::Stop(Termination::VariancePlateau);
                }
            }
        }
    }
    ExitDecision::Continue
}

/// Push every sample of the ensemble at knot `i - 1` to knot `i`:
/// `u_j <- G(u_j) + z_j`, `z_j ~ N(mu(u_j), diag var(u_j))`, with `z_j` drawn from the
/// stream keyed `(seed, i, k, j)`. With `zero_variance` the draw is replaced by `mu(u_j)`.
/// Returns the new ensemble and the time spent in `coarse`, in milliseconds.
pub fn ancestral_step<G>(
    input: &Ensemble,
    model: &GpModel,
    coarse: G,
    seed: u64,
    (i, k): (usize, usize),
    zero_variance: bool,
) -> Result<(Ensemble, f64)>
where
    G: Fn(&[f64]) -> Result<StateVector> + Sync,
{
    let d = input.dim();
    let coarse_ns = AtomicU64::new(0);
    let rows: Vec<Vec<f64>> = (0..input.len())
        .into_par_iter()
        .map(|j| {
            let x = input.sample(j);
            let t = Instant::now();
            let g = coarse(x).map_err(|e| e.at(i, k, Some(j)))?;
            coarse_ns.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);
            let z = if zero_variance {
                model.mean(x)
            } else {
                let mut rng = make_rng_stream(seed, i, k, j);
                model.sample_correction(x, &mut rng)?
            };
            let out: Vec<f64> = g.iter().zip(z.iter()).map(|(a, b)| a + b).collect();
            if !out.iter().all(|v| v.is_finite()) {
                return Err(Error::non_finite().at(i, k, Some(j)));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(rows.len() * d);
    for r in rows {
        data.extend(r);
    }
    let coarse_ms = coarse_ns.into_inner() as f64 * 1e-6;
    Ok((Ensemble::from_flat(d, data, i, k), coarse_ms))
}

fn exit_conditions(ctx: &Context) -> Vec<ExitCondition> {
    let mut c = vec![ExitCondition::IterationBudget(ctx.max_iterations)];
    if let Some(cap) = ctx.config.variance_cap {
        c.push(ExitCondition::VarianceCap(cap));
    }
    if let Some(window) = ctx.config.plateau_window {
        c.push(ExitCondition::VariancePlateau {
            window,
            rel_tol: ctx.config.plateau_rel_tol,
        });
    }
    c
}

/// Prob-GParareal, or Prob-nnGParareal when `config.algorithm` selects neighbours.
pub fn prob_run(config: &RunConfig) -> Result<RunRecord> {
    prob_with(Context::new(config)?)
}

pub(crate) fn prob_with(ctx: Context) -> Result<RunRecord> {
    let config = &ctx.config.clone();
    let nn = config.algorithm.uses_neighbors();
    let m = config.neighbor_count();
    let start = Instant::now();
    let n = ctx.intervals();
    let samples = config.n_samples;
    let conditions = exit_conditions(&ctx);

    // initial ensembles: draw, then propagate each sample through G alone
    let t = Instant::now();
    let init = InitialDistribution::new(ctx.spec.initial_state(), config.sigma_init);
    let mut ens = vec![init.sample(samples, config.seed)];
    for i in 1..=n {
        let prev = &ens[i - 1];
        let rows: Vec<StateVector> = (0..samples)
            .into_par_iter()
            .map(|j| ctx.coarse(prev.sample(j), i, 0).map_err(|e| e.at(i, 0, Some(j))))
            .collect::<Result<_>>()?;
        ens.push(Ensemble::from_samples(&rows, i, 0)?);
    }
    let mut first = IterationRecord::new(0, 0, ens.clone(), vec![None; n + 1], 0);
    first.timings.coarse_ms = ms(t);
    first.timings.total_ms = first.timings.coarse_ms;
    let mut iterations = vec![first];
    let mut dataset = CorrectionDataset::new();
    let mut warm: Option<Vec<GpHyperparams>> = None;
    let mut front = 0;

    let termination = loop {
        if let ExitDecision::Stop(cause) = check_exit(&iterations, &conditions) {
            break cause;
        }
        let k = iterations.len();
        let t_iter = Instant::now();

        // F and G at the ensemble means of knots L..N-1
        let means: Vec<StateVector> = (front..n).map(|i| ens[i].mean()).collect();
        let jobs: Vec<(usize, &[f64])> = means
            .iter()
            .enumerate()
            .map(|(r, x)| (front + r + 1, &x[..]))
            .collect();
        let (fine, coarse, fine_ms, mut coarse_ms) = ctx.fine_and_coarse(&jobs, k)?;
        for ((x, f), g) in means.iter().zip(&fine).zip(&coarse) {
            dataset.push(x.clone(), difference(f, g), k);
        }

        let t = Instant::now();
        let full = if nn {
            None
        } else {
            let warm_ref = if config.warm_start { warm.as_deref() } else { None };
            let model = fit_full(&ctx, &dataset, warm_ref)?;
            warm = Some(model.hyperparams());
            Some(model)
        };
        let index = if nn {
            Some(NeighborIndex::build(&dataset)?)
        } else {
            None
        };
        let mut gp_ms = ms(t);

        let mut sampling_ms = 0.0;
        let mut next = ens.clone();
        for i in front + 1..=n {
            let input = &next[i - 1];
            let local;
            let model = match (&full, &index) {
                (Some(model), _) => model,
                (None, Some(index)) => {
                    let t = Instant::now();
                    local = nngp::fit_local(
                        &dataset,
                        index,
                        &input.mean(),
                        m,
                        config.kernel,
                        &ctx.fit_options,
                        None,
                    )?;
                    gp_ms += ms(t);
                    &local
                }
                (None, None) => unreachable!(),
            };
            let t = Instant::now();
            let (out, g_ms) = ancestral_step(
                input,
                model,
                |x| ctx.coarse(x, i, k),
                config.seed,
                (i, k),
                config.zero_variance,
            )?;
            sampling_ms += ms(t);
            coarse_ms += g_ms;
            next[i] = out;
        }

        let distances: Vec<Option<f64>> = (0..=n)
            .map(|i| {
                (i > front)
                    .then(|| w2_gaussian(&GaussianSummary::of(&next[i]), &GaussianSummary::of(&ens[i])))
            })
            .collect();
        front = advance_front(front, &distances, ctx.epsilon);
        for (i, e) in next.iter_mut().enumerate() {
            e.interval = i;
            e.iteration = k;
        }
        ens = next;
        let mut rec = IterationRecord::new(k, front, ens.clone(), distances, dataset.len());
        if let Some(w) = &warm {
            rec.hyperparams = w.clone();
        }
        rec.timings.fine_ms = fine_ms;
        rec.timings.coarse_ms = coarse_ms;
        rec.timings.gp_ms = gp_ms;
        rec.timings.sampling_ms = sampling_ms;
        rec.timings.total_ms = ms(t_iter);
        iterations.push(rec);
        if front == n {
            break Termination::Converged;
        }
    };
    Ok(ctx.record(iterations, termination, dataset, start))
}
