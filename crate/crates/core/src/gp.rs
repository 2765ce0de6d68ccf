//! Scalar Gaussian-process regression, one independent GP per output coordinate.
//!
//! Covariance `K + s_reg^2 I` is written as `s_o^2 (R + lambda I)` with `R` the unit-amplitude
//! correlation matrix. For fixed `(s_i^2, lambda)` the likelihood-maximising `s_o^2` is
//! `y^T (R + lambda I)^{-1} y / D`, so the search only runs over two parameters and one
//! factorisation of `R + lambda I` serves every coordinate sharing a length scale.
//!
//! By default `lambda` is pinned to the jitter floor and only raised when the factorisation
//! fails. Letting the likelihood pick larger nuggets inflates the posterior variance at the
//! training inputs, which the ancestral sampler then amplifies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::{squared_distance, CorrectionDataset, StateVector};

/// Smallest relative nugget `lambda = s_reg^2 / s_o^2`.
pub const JITTER_FLOOR: f64 = 1e-10;
/// Largest nugget tried when a factorisation fails.
pub const JITTER_CEILING: f64 = 1e-4;
/// Pre-clamp posterior variance below `-VARIANCE_ALARM * s_o^2` is treated as breakdown.
pub const VARIANCE_ALARM: f64 = 1e-8;
const SIGNAL_FLOOR: f64 = 1e-300;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Gaussian,
    Matern12,
    Matern32,
    Matern52,
}

impl KernelFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "rbf" => Ok(KernelFamily::Gaussian),
            "matern12" | "matern-1/2" => Ok(KernelFamily::Matern12),
            "matern32" | "matern-3/2" => Ok(KernelFamily::Matern32),
            "matern52" | "matern-5/2" => Ok(KernelFamily::Matern52),
            other => Err(Error::InvalidConfig(format!("unknown kernel `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern12 => "matern12",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
        }
    }

    /// Unit-amplitude correlation at squared distance `r2`.
    #[inline]
    pub fn correlation(self, r2: f64, length_sq: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-r2 / length_sq).exp(),
            KernelFamily::Matern12 => (-(r2 / length_sq).sqrt()).exp(),
            KernelFamily::Matern32 => {
                let a = (3.0 * r2 / length_sq).sqrt();
                (1.0 + a) * (-a).exp()
            }
            KernelFamily::Matern52 => {
                let a = (5.0 * r2 / length_sq).sqrt();
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        }
    }
}

/// A fully specified kernel: `s_o^2 * correlation(|u - v|^2; s_i^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub signal_var: f64,
    pub length_sq: f64,
}

pub fn kernel_eval(kernel: &Kernel, u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    kernel.signal_var
        * kernel
            .family
            .correlation(squared_distance(u, v), kernel.length_sq)
}

/// `(s_i^2, s_o^2, s_reg^2)` of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub length_sq: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyperparams {
    pub fn lambda(&self) -> f64 {
        self.noise_var / self.signal_var
    }
}

/// Hyperparameter search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub length_sq_grid: Vec<f64>,
    /// Relative nuggets tried on the grid; the whole range moves up x10 on failure.
    pub lambda_grid: Vec<f64>,
    /// Initial coordinate-descent step in log10 units; halved `refine_levels` times.
    pub refine_step: f64,
    pub refine_levels: usize,
    /// Cap on likelihood evaluations per coordinate during refinement.
    pub max_refine_evals: usize,
    pub length_sq_bounds: (f64, f64),
    pub lambda_bounds: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            length_sq_grid: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
            lambda_grid: vec![1e-10],
            refine_step: 0.5,
            refine_levels: 3,
            max_refine_evals: 24,
            length_sq_bounds: (1e-4, 1e4),
            lambda_bounds: (JITTER_FLOOR, JITTER_FLOOR),
        }
    }
}

/// Trained GP for one output coordinate.
#[derive(Debug, Clone)]
struct CoordModel {
    hyper: GpHyperparams,
    lambda: f64,
    /// Lower Cholesky factor of `R + lambda I`, row-major.
    chol: Vec<f64>,
    /// `(R + lambda I)^{-1} y`.
    alpha: Vec<f64>,
    log_likelihood: f64,
}

/// `d` independent scalar GPs over a shared training input set.
#[derive(Debug, Clone)]
pub struct GpModel {
    family: KernelFamily,
    dim: usize,
    /// Training inputs, `D x dim` row-major.
    inputs: Vec<f64>,
    coords: Vec<CoordModel>,
}

/// Posterior mean and (clamped) variance per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: StateVector,
    pub var: Vec<f64>,
}

impl GpModel {
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.dim
    }

    pub fn output_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn hyperparams(&self) -> Vec<GpHyperparams> {
        self.coords.iter().map(|c| c.hyper).collect()
    }

    pub fn log_likelihood(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.log_likelihood).collect()
    }

    fn sq_dists_to(&self, u: &[f64]) -> Vec<f64> {
        self.inputs
            .chunks_exact(self.dim)
            .map(|x| squared_distance(x, u))
            .collect()
    }

    /// Posterior mean only (no triangular solves).
    pub fn mean(&self, u: &[f64]) -> StateVector {
        let r2 = self.sq_dists_to(u);
        self.coords
            .iter()
            .map(|c| {
                r2.iter()
                    .zip(&c.alpha)
                    .map(|(&r, a)| self.family.correlation(r, c.hyper.length_sq) * a)
                    .sum()
            })
            .collect::<Vec<f64>>()
            .into()
    }

    pub fn posterior(&self, u: &[f64]) -> Result<Posterior> {
        let r2 = self.sq_dists_to(u);
        let n = self.len();
        let mut mean = Vec::with_capacity(self.coords.len());
        let mut var = Vec::with_capacity(self.coords.len());
        let mut k = vec![0.0; n];
        for c in &self.coords {
            for (kr, &r) in k.iter_mut().zip(&r2) {
                *kr = self.family.correlation(r, c.hyper.length_sq);
            }
            mean.push(dot(&k, &c.alpha));
            forward_solve(&c.chol, n, &mut k);
            let raw = c.hyper.signal_var * (1.0 - dot(&k, &k));
            if raw < -VARIANCE_ALARM * c.hyper.signal_var {
                return Err(Error::IllConditioned { jitter: c.lambda });
            }
            var.push(raw.max(0.0));
        }
        Ok(Posterior {
            mean: mean.into(),
            var,
        })
    }

    /// One draw from `N(mean(u), diag var(u))`, coordinates drawn in order from `rng`.
    pub fn sample_correction(&self, u: &[f64], rng: &mut RngStream) -> Result<StateVector> {
        let p = self.posterior(u)?;
        let mut out = p.mean;
        for (x, v) in out.iter_mut().zip(&p.var) {
            *x += v.sqrt() * rng.standard_normal();
        }
        Ok(out)
    }
}

/// Train one GP per output coordinate by maximising the log marginal likelihood.
///
/// `warm_start` (one entry per coordinate) adds a second refinement start; the better of the
/// cold and warm optima is kept, so warm fits are never worse than cold ones.
pub fn fit(
    dataset: &CorrectionDataset,
    family: KernelFamily,
    options: &FitOptions,
    warm_start: Option<&[GpHyperparams]>,
) -> Result<GpModel> {
    let (dim, n, inputs, columns) = unpack(dataset)?;
    let sqd = pairwise_sq_dists(&inputs, dim, n);
    let ys: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    // if no nugget in range factorises, shift the whole range up x10 until the ceiling
    let mut options = options.clone();
    loop {
        match search(&sqd, n, family, &ys, &options, warm_start) {
            Some(chosen) => {
                let coords = chosen
                    .into_iter()
                    .zip(&ys)
                    .map(|((ll, lg, _), y)| {
                        build_coord(&sqd, n, family, 10f64.powf(ll), 10f64.powf(lg), None, y)
                    })
                    .collect::<Result<Vec<_>>>()?;
                return Ok(GpModel {
                    family,
                    dim,
                    inputs,
                    coords,
                });
            }
            None if options.lambda_bounds.1 * 10.0 > JITTER_CEILING * (1.0 + 1e-9) => {
                return Err(Error::IllConditioned {
                    jitter: options.lambda_bounds.1,
                });
            }
            None => {
                options.lambda_grid.iter_mut().for_each(|g| *g *= 10.0);
                options.lambda_bounds.0 *= 10.0;
                options.lambda_bounds.1 *= 10.0;
            }
        }
    }
}

/// Best `(log10 s_i^2, log10 lambda, log-likelihood)` per coordinate, or `None` when no grid
/// point factorises.
fn search(
    sqd: &[f64],
    n: usize,
    family: KernelFamily,
    ys: &[&[f64]],
    options: &FitOptions,
    warm_start: Option<&[GpHyperparams]>,
) -> Option<Vec<(f64, f64, f64)>> {
    let ncoord = ys.len();

    // grid: one factorisation per (length, lambda) pair, shared by all coordinates
    let grid: Vec<(f64, f64)> = options
        .length_sq_grid
        .iter()
        .flat_map(|&l| options.lambda_grid.iter().map(move |&g| (l.log10(), g.log10())))
        .collect();
    let scores: Vec<Option<Vec<f64>>> = grid
        .par_iter()
        .map(|&(ll, lg)| score(sqd, n, family, 10f64.powf(ll), 10f64.powf(lg), ys))
        .collect();

    let chosen: Vec<Option<(f64, f64, f64)>> = (0..ncoord)
        .into_par_iter()
        .map(|s| {
            let mut best: Option<(f64, f64, f64)> = None;
            for (g, sc) in grid.iter().zip(&scores) {
                if let Some(sc) = sc {
                    if best.is_none_or(|b| sc[s] > b.2) {
                        best = Some((g.0, g.1, sc[s]));
                    }
                }
            }
            let cold = best.map(|b| refine(sqd, n, family, ys[s], options, b));
            let warm = warm_start.and_then(|w| w.get(s)).and_then(|h| {
                let start = clamp_log(options, h.length_sq.log10(), h.lambda().log10());
                let ll = score(
                    sqd,
                    n,
                    family,
                    10f64.powf(start.0),
                    10f64.powf(start.1),
                    &[ys[s]],
                )?[0];
                Some(refine(sqd, n, family, ys[s], options, (start.0, start.1, ll)))
            });
            match (cold, warm) {
                (Some(c), Some(w)) if w.2 > c.2 => Some(w),
                (None, w) => w,
                (c, _) => c,
            }
        })
        .collect();
    chosen.into_iter().collect()
}

/// Train with fixed hyperparameters, one set per output coordinate (or one set for all).
/// The nugget is raised to [`JITTER_FLOOR`] and escalated x10 up to [`JITTER_CEILING`] if
/// the factorisation fails.
pub fn fit_fixed(
    dataset: &CorrectionDataset,
    family: KernelFamily,
    hypers: &[GpHyperparams],
) -> Result<GpModel> {
    let (dim, n, inputs, columns) = unpack(dataset)?;
    if hypers.len() != 1 && hypers.len() != columns.len() {
        return Err(Error::SizeMismatch {
            expected: columns.len(),
            actual: hypers.len(),
        });
    }
    let sqd = pairwise_sq_dists(&inputs, dim, n);
    let coords = columns
        .iter()
        .enumerate()
        .map(|(s, y)| {
            let h = hypers[if hypers.len() == 1 { 0 } else { s }];
            let mut lambda = h.lambda().max(JITTER_FLOOR);
            loop {
                match build_coord(&sqd, n, family, h.length_sq, lambda, Some(h.signal_var), y) {
                    Ok(c) => return Ok(c),
                    Err(e) if lambda * 10.0 > JITTER_CEILING * (1.0 + 1e-9) => return Err(e),
                    Err(_) => lambda *= 10.0,
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GpModel {
        family,
        dim,
        inputs,
        coords,
    })
}

type Unpacked = (usize, usize, Vec<f64>, Vec<Vec<f64>>);

fn unpack(dataset: &CorrectionDataset) -> Result<Unpacked> {
    let dim = dataset.dim().ok_or(Error::EmptyDataset)?;
    let n = dataset.len();
    let out_dim = dataset.outputs[0].dim();
    let mut inputs = Vec::with_capacity(n * dim);
    for x in &dataset.inputs {
        if x.dim() != dim {
            return Err(Error::SizeMismatch {
                expected: dim,
                actual: x.dim(),
            });
        }
        inputs.extend_from_slice(x);
    }
    let mut columns = vec![Vec::with_capacity(n); out_dim];
    for y in &dataset.outputs {
        if y.dim() != out_dim {
            return Err(Error::SizeMismatch {
                expected: out_dim,
                actual: y.dim(),
            });
        }
        for (c, v) in columns.iter_mut().zip(y.iter()) {
            c.push(*v);
        }
    }
    Ok((dim, n, inputs, columns))
}

fn pairwise_sq_dists(inputs: &[f64], dim: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let xi = &inputs[i * dim..(i + 1) * dim];
        for j in 0..i {
            let r = squared_distance(xi, &inputs[j * dim..(j + 1) * dim]);
            out[i * n + j] = r;
            out[j * n + i] = r;
        }
    }
    out
}

fn clamp_log(options: &FitOptions, ll: f64, lg: f64) -> (f64, f64) {
    let (l0, l1) = options.length_sq_bounds;
    let (g0, g1) = options.lambda_bounds;
    (
        ll.clamp(l0.log10(), l1.log10()),
        lg.clamp(g0.log10(), g1.log10()),
    )
}

/// Lower Cholesky factor of `R + lambda I` (lower triangle only is filled).
fn factor(sqd: &[f64], n: usize, family: KernelFamily, length_sq: f64, lambda: f64) -> Option<Vec<f64>> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            a[i * n + j] = family.correlation(sqd[i * n + j], length_sq);
        }
        a[i * n + i] = 1.0 + lambda;
    }
    cholesky_in_place(&mut a, n).then_some(a)
}

fn log_det(chol: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| chol[i * n + i].ln()).sum::<f64>()
}

/// Profiled log marginal likelihood of every column of `ys`, or `None` if `R + lambda I`
/// is not numerically positive definite.
fn score(
    sqd: &[f64],
    n: usize,
    family: KernelFamily,
    length_sq: f64,
    lambda: f64,
    ys: &[&[f64]],
) -> Option<Vec<f64>> {
    let chol = factor(sqd, n, family, length_sq, lambda)?;
    let ld = log_det(&chol, n);
    let mut z = vec![0.0; n];
    Some(
        ys.iter()
            .map(|y| {
                z.copy_from_slice(y);
                forward_solve(&chol, n, &mut z);
                profiled_ll(dot(&z, &z), ld, n)
            })
            .collect(),
    )
}

fn profiled_ll(q: f64, log_det_r: f64, n: usize) -> f64 {
    let nf = n as f64;
    let signal = (q / nf).max(SIGNAL_FLOOR);
    -0.5 * nf * (signal.ln() + 1.0 + LN_2PI) - 0.5 * log_det_r
}

/// Coordinate descent in `(log10 s_i^2, log10 lambda)` with halving steps.
fn refine(
    sqd: &[f64],
    n: usize,
    family: KernelFamily,
    y: &[f64],
    options: &FitOptions,
    start: (f64, f64, f64),
) -> (f64, f64, f64) {
    let mut best = start;
    let mut evals = 0;
    let mut step = options.refine_step;
    for _ in 0..options.refine_levels {
        let mut improved = true;
        while improved && evals < options.max_refine_evals {
            improved = false;
            for (dl, dg) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                if evals >= options.max_refine_evals {
                    break;
                }
                let cand = clamp_log(options, best.0 + dl, best.1 + dg);
                if cand == (best.0, best.1) {
                    continue;
                }
                evals += 1;
                let Some(sc) = score(sqd, n, family, 10f64.powf(cand.0), 10f64.powf(cand.1), &[y])
                else {
                    continue;
                };
                if sc[0] > best.2 {
                    best = (cand.0, cand.1, sc[0]);
                    improved = true;
                }
            }
        }
        step *= 0.5;
    }
    best
}

fn build_coord(
    sqd: &[f64],
    n: usize,
    family: KernelFamily,
    length_sq: f64,
    lambda: f64,
    signal_var: Option<f64>,
    y: &[f64],
) -> Result<CoordModel> {
    let chol =
        factor(sqd, n, family, length_sq, lambda).ok_or(Error::IllConditioned { jitter: lambda })?;
    let mut alpha = y.to_vec();
    forward_solve(&chol, n, &mut alpha);
    let q = dot(&alpha, &alpha);
    backward_solve(&chol, n, &mut alpha);
    let ld = log_det(&chol, n);
    let (signal_var, log_likelihood) = match signal_var {
        Some(s) => {
            let nf = n as f64;
            (s, -0.5 * q / s - 0.5 * (ld + nf * s.ln()) - 0.5 * nf * LN_2PI)
        }
        None => ((q / n as f64).max(SIGNAL_FLOOR), profiled_ll(q, ld, n)),
    };
    Ok(CoordModel {
        hyper: GpHyperparams {
            length_sq,
            signal_var,
            noise_var: lambda * signal_var,
        },
        lambda,
        chol,
        alpha,
        log_likelihood,
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

/// In-place lower Cholesky of a row-major symmetric matrix, reading only the lower
/// triangle. Returns false if a pivot is not positive.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let s = a[i * n + j] - dot(&a[i * n..i * n + j], &a[j * n..j * n + j]);
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return false;
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    true
}

/// Solve `L z = b` in place.
pub(crate) fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let s = dot(&l[i * n..i * n + i], &b[..i]);
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solve `L^T x = b` in place.
pub(crate) fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        b[i] /= l[i * n + i];
        let xi = b[i];
        let row = &l[i * n..i * n + i];
        for (bk, lk) in b[..i].iter_mut().zip(row) {
            *bk -= lk * xi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng_stream;

    fn dataset(points: &[(&[f64], &[f64])]) -> CorrectionDataset {
        let mut d = CorrectionDataset::new();
        for (x, y) in points {
            d.push(x.to_vec().into(), y.to_vec().into(), 1);
        }
        d
    }

    fn theta(l: f64, o: f64, r: f64) -> GpHyperparams {
        GpHyperparams {
            length_sq: l,
            signal_var: o,
            noise_var: r,
        }
    }

    #[test]
    fn gaussian_kernel_values() {
        let k = Kernel {
            family: KernelFamily::Gaussian,
            signal_var: 2.5,
            length_sq: 0.3,
        };
        assert_eq!(kernel_eval(&k, &[0.2, -0.4], &[0.2, -0.4]), 2.5);
        let k = Kernel {
            family: KernelFamily::Gaussian,
            signal_var: 1.0,
            length_sq: 1.0,
        };
        assert!((kernel_eval(&k, &[0.0], &[1.0]) - (-1f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn two_point_posterior_matches_hand_solve() {
        // K = [[1, e^-1], [e^-1, 1]] + 1e-8 I, y = (0, 1), k* = (e^-1/4, e^-1/4)
        let d = dataset(&[(&[0.0], &[0.0]), (&[1.0], &[1.0])]);
        let m = fit_fixed(&d, KernelFamily::Gaussian, &[theta(1.0, 1.0, 1e-8)]).unwrap();
        let e = (-1f64).exp();
        let a = 1.0 + 1e-8;
        let det = a * a - e * e;
        let inv = [[a / det, -e / det], [-e / det, a / det]];
        let ks = (-0.25f64).exp();
        let mean = ks * inv[0][1] * 0.0 + ks * (inv[0][1] + inv[1][1]) * 1.0;
        let var = 1.0 - ks * ks * (inv[0][0] + 2.0 * inv[0][1] + inv[1][1]);
        let p = m.posterior(&[0.5]).unwrap();
        assert!((p.mean[0] - mean).abs() < 1e-10);
        assert!((p.var[0] - var).abs() < 1e-10);
    }

    #[test]
    fn single_point_interpolates() {
        let d = dataset(&[(&[0.1, 0.2], &[0.7, -0.3])]);
        let m = fit(&d, KernelFamily::Gaussian, &FitOptions::default(), None).unwrap();
        let p = m.posterior(&[0.1, 0.2]).unwrap();
        assert!((p.mean[0] - 0.7).abs() < 1e-6);
        assert!((p.mean[1] + 0.3).abs() < 1e-6);
        for (v, h) in p.var.iter().zip(m.hyperparams()) {
            assert!(*v <= 2.0 * h.noise_var + 1e-15);
        }
    }

    #[test]
    fn far_away_reverts_to_prior() {
        let d = dataset(&[(&[0.0], &[1.0]), (&[0.5], &[0.3]), (&[1.0], &[-0.2])]);
        let m = fit_fixed(&d, KernelFamily::Gaussian, &[theta(0.2, 0.8, 1e-8)]).unwrap();
        let p = m.posterior(&[50.0]).unwrap();
        assert!((p.var[0] - 0.8).abs() < 1e-8);
        assert!(p.mean[0].abs() < 1e-8);
    }

    #[test]
    fn warm_start_is_not_worse() {
        let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..12)
            .map(|i| {
                let x = i as f64 / 11.0 * 2.0 - 1.0;
                (vec![x, 0.3 * x * x], vec![(3.0 * x).sin(), x.cos()])
            })
            .collect();
        let mut d = CorrectionDataset::new();
        for (x, y) in &pts {
            d.push(x.clone().into(), y.clone().into(), 1);
        }
        let opts = FitOptions::default();
        let cold = fit(&d, KernelFamily::Gaussian, &opts, None).unwrap();
        let odd = vec![theta(3.7, 1.0, 1e-6), theta(0.05, 1.0, 1e-9)];
        let warm = fit(&d, KernelFamily::Gaussian, &opts, Some(&odd)).unwrap();
        for (c, w) in cold.log_likelihood().iter().zip(warm.log_likelihood()) {
            assert!(w >= *c);
        }
        let again = fit(&d, KernelFamily::Gaussian, &opts, Some(&cold.hyperparams())).unwrap();
        for (c, w) in cold.log_likelihood().iter().zip(again.log_likelihood()) {
            assert!(w >= *c);
        }
    }

    #[test]
    fn zero_variance_sample_is_the_mean() {
        let d = dataset(&[(&[0.0], &[0.4])]);
        let m = fit_fixed(&d, KernelFamily::Gaussian, &[theta(1.0, 1.0, 1e-10)]).unwrap();
        let mut rng = make_rng_stream(1, 0, 0, 0);
        let mut twin = rng.clone();
        let p = m.posterior(&[0.0]).unwrap();
        let s = m.sample_correction(&[0.0], &mut rng).unwrap();
        assert_eq!(s[0], p.mean[0] + p.var[0].sqrt() * twin.standard_normal());
        // at the training input the spread is of nugget size only
        assert!(p.var[0] < 2e-10 && (s[0] - 0.4).abs() < 1e-3);
        let mut a = make_rng_stream(5, 1, 2, 3);
        let mut b = make_rng_stream(5, 1, 2, 3);
        assert_eq!(
            m.sample_correction(&[0.3], &mut a).unwrap(),
            m.sample_correction(&[0.3], &mut b).unwrap()
        );
    }

    #[test]
    fn nugget_is_floored() {
        let d = dataset(&[(&[0.0], &[1.0]), (&[0.5], &[0.2])]);
        let m = fit_fixed(&d, KernelFamily::Gaussian, &[theta(1.0, 1.0, 0.0)]).unwrap();
        assert_eq!(m.coords[0].lambda, JITTER_FLOOR);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let mut l = a;
        assert!(cholesky_in_place(&mut l, 3));
        for i in 0..3 {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((s - a[i * 3 + j]).abs() < 1e-14);
            }
        }
        let mut bad = [1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky_in_place(&mut bad, 2));
    }
}
