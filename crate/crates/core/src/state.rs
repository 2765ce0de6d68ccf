//! Domain containers shared by every solver.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in normalised state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        StateVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector(v)
    }
}

impl From<&[f64]> for StateVector {
    fn from(v: &[f64]) -> Self {
        StateVector(v.to_vec())
    }
}

impl AsRef<[f64]> for StateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// `n` samples of a `d`-dimensional state at one time knot, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    dim: usize,
    data: Vec<f64>,
    pub interval: usize,
    pub iteration: usize,
}

impl Ensemble {
    pub fn from_flat(dim: usize, data: Vec<f64>, interval: usize, iteration: usize) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "flat ensemble data must be n*d");
        Ensemble {
            dim,
            data,
            interval,
            iteration,
        }
    }

    pub fn from_samples<I, S>(samples: I, interval: usize, iteration: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[f64]>,
    {
        let mut data = Vec::new();
        let mut dim = None;
        for s in samples {
            let s = s.as_ref();
            match dim {
                None => dim = Some(s.len()),
                Some(d) if d != s.len() => {
                    return Err(Error::SizeMismatch {
                        expected: d,
                        actual: s.len(),
                    })
                }
                _ => {}
            }
            data.extend_from_slice(s);
        }
        let dim = dim.ok_or(Error::SizeMismatch {
            expected: 1,
            actual: 0,
        })?;
        Ok(Ensemble::from_flat(dim, data, interval, iteration))
    }

    /// `n` identical copies of `state`.
    pub fn replicate(state: &[f64], n: usize, interval: usize, iteration: usize) -> Self {
        let mut data = Vec::with_capacity(n * state.len());
        for _ in 0..n {
            data.extend_from_slice(state);
        }
        Ensemble::from_flat(state.len(), data, interval, iteration)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn with_labels(mut self, interval: usize, iteration: usize) -> Self {
        self.interval = interval;
        self.iteration = iteration;
        self
    }

    /// Sample mean, accumulated as offsets from the first sample so identical samples
    /// reproduce their common value exactly.
    pub fn mean(&self) -> StateVector {
        let (shift, sums) = self.shifted_sums();
        let n = self.len() as f64;
        shift
            .iter()
            .zip(&sums)
            .map(|(s, t)| s + t / n)
            .collect::<Vec<_>>()
            .into()
    }

    /// Per-coordinate standard deviation with the unbiased `n - 1` divisor (0 for `n = 1`).
    pub fn stddev(&self) -> Vec<f64> {
        let n = self.len();
        if n < 2 {
            return vec![0.0; self.dim];
        }
        let (shift, sums) = self.shifted_sums();
        let offset: Vec<f64> = sums.iter().map(|t| t / n as f64).collect();
        let mut v = vec![0.0; self.dim];
        for s in self.samples() {
            for (((acc, x), c), o) in v.iter_mut().zip(s).zip(shift).zip(&offset) {
                let dev = (x - c) - o;
                *acc += dev * dev;
            }
        }
        v.into_iter().map(|x| (x / (n - 1) as f64).sqrt()).collect()
    }

    fn shifted_sums(&self) -> (&[f64], Vec<f64>) {
        let shift = self.sample(0);
        let mut sums = vec![0.0; self.dim];
        for s in self.samples() {
            for ((acc, x), c) in sums.iter_mut().zip(s).zip(shift) {
                *acc += x - c;
            }
        }
        (shift, sums)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Uniform partition of `[t0, t_end]` into `intervals` pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeMesh {
    pub t0: f64,
    pub t_end: f64,
    pub intervals: usize,
}

impl TimeMesh {
    pub fn new(t0: f64, t_end: f64, intervals: usize) -> Result<Self> {
        if intervals < 1 || !(t_end > t0) {
            return Err(Error::InvalidConfig(format!(
                "time mesh needs t_end > t0 and at least one interval (got [{t0}, {t_end}], N={intervals})"
            )));
        }
        Ok(TimeMesh {
            t0,
            t_end,
            intervals,
        })
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.intervals as f64
    }

    /// Knot `i`, computed multiplicatively so no rounding accumulates.
    pub fn knot(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt()
    }
}

/// Accumulated `(input, F(input) - G(input))` pairs used to train the correction model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionDataset {
    pub inputs: Vec<StateVector>,
    pub outputs: Vec<StateVector>,
    pub iteration_added: Vec<usize>,
}

/// Inputs closer than this are treated as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

impl CorrectionDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(|x| x.dim())
    }

    /// Append a pair unless an existing input lies within [`DUPLICATE_TOLERANCE`].
    /// Returns whether the pair was stored.
    pub fn push(&mut self, input: StateVector, output: StateVector, iteration: usize) -> bool {
        debug_assert_eq!(input.dim(), output.dim());
        let tol2 = DUPLICATE_TOLERANCE * DUPLICATE_TOLERANCE;
        if self
            .inputs
            .iter()
            .any(|x| squared_distance(x, &input) < tol2)
        {
            return false;
        }
        self.inputs.push(input);
        self.outputs.push(output);
        self.iteration_added.push(iteration);
        true
    }

    pub fn subset(&self, rows: &[usize]) -> CorrectionDataset {
        CorrectionDataset {
            inputs: rows.iter().map(|&r| self.inputs[r].clone()).collect(),
            outputs: rows.iter().map(|&r| self.outputs[r].clone()).collect(),
            iteration_added: rows.iter().map(|&r| self.iteration_added[r]).collect(),
        }
    }

    /// The dataset as it stood after iteration `k`.
    pub fn up_to_iteration(&self, k: usize) -> CorrectionDataset {
        let rows: Vec<usize> = (0..self.len())
            .filter(|&r| self.iteration_added[r] <= k)
            .collect();
        self.subset(&rows)
    }
}
