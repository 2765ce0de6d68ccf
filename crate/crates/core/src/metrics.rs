//! Scores of an ensemble forecast against a reference state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::record::RunRecord;
use crate::state::{distance, squared_distance, Ensemble, StateVector};

/// Variogram-score exponent.
pub const VS_POWER: f64 = 0.5;
/// Central credible level used by [`mad_score`].
pub const MAD_LEVEL: f64 = 0.95;

/// `(1/n) sum_j |u_j - y| - (1/2n^2) sum_{j,l} |u_j - u_l|`.
pub fn energy_score(ensemble: &Ensemble, truth: &[f64]) -> f64 {
    let n = ensemble.len() as f64;
    let spread_to_truth: f64 = ensemble.samples().map(|u| distance(u, truth)).sum();
    let mut pair_sum = 0.0;
    for (j, a) in ensemble.samples().enumerate() {
        for b in ensemble.samples().take(j) {
            pair_sum += distance(a, b);
        }
    }
    // ordered pairs count each unordered pair twice
    spread_to_truth / n - pair_sum / (n * n)
}

/// `sum_{s1,s2} ((1/n) sum_j |u_j^s1 - u_j^s2|^p - |y^s1 - y^s2|^p)^2` over ordered pairs
/// with unit weights.
pub fn variogram_score(ensemble: &Ensemble, truth: &[f64], p: f64) -> f64 {
    let d = ensemble.dim();
    let n = ensemble.len() as f64;
    let mut total = 0.0;
    for s1 in 0..d {
        for s2 in 0..s1 {
            let forecast: f64 =
                ensemble.samples().map(|u| (u[s1] - u[s2]).abs().powf(p)).sum::<f64>() / n;
            let observed = (truth[s1] - truth[s2]).abs().powf(p);
            total += 2.0 * (forecast - observed).powi(2);
        }
    }
    total
}

/// Empirical quantile of sorted data, linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Distance of the truth outside the central `level` interval, averaged over coordinates.
pub fn mad_score(ensemble: &Ensemble, truth: &[f64], level: f64) -> f64 {
    let d = ensemble.dim();
    let tail = 0.5 * (1.0 - level);
    let mut total = 0.0;
    let mut column = Vec::with_capacity(ensemble.len());
    for s in 0..d {
        column.clear();
        column.extend(ensemble.samples().map(|u| u[s]));
        column.sort_by(f64::total_cmp);
        let a = quantile(&column, tail);
        let b = quantile(&column, 1.0 - tail);
        total += (truth[s] - b).max(0.0) + (a - truth[s]).max(0.0);
    }
    total / d as f64
}

/// `(mean squared distance to truth, distance of the ensemble mean to truth)`.
pub fn mse_bias(ensemble: &Ensemble, truth: &[f64]) -> (f64, f64) {
    let n = ensemble.len() as f64;
    let mse = ensemble.samples().map(|u| squared_distance(u, truth)).sum::<f64>() / n;
    (mse, distance(&ensemble.mean(), truth))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub es: f64,
    pub vs: f64,
    pub mad: f64,
    pub mse: f64,
    pub bias: f64,
}

pub fn score(ensemble: &Ensemble, truth: &[f64]) -> Scores {
    let (mse, bias) = mse_bias(ensemble, truth);
    Scores {
        es: energy_score(ensemble, truth),
        vs: variogram_score(ensemble, truth, VS_POWER),
        mad: mad_score(ensemble, truth, MAD_LEVEL),
        mse,
        bias,
    }
}

/// Scores at knots `1..=N` (index 0 of the result is knot 1).
pub fn score_knots(ensembles: &[Ensemble], truth: &[StateVector]) -> Vec<Scores> {
    (1..ensembles.len())
        .into_par_iter()
        .map(|i| score(&ensembles[i], &truth[i]))
        .collect()
}

/// Mean over knots.
pub fn time_average(scores: &[Scores]) -> Scores {
    let n = scores.len().max(1) as f64;
    let mut acc = Scores::default();
    for s in scores {
        acc.es += s.es;
        acc.vs += s.vs;
        acc.mad += s.mad;
        acc.mse += s.mse;
        acc.bias += s.bias;
    }
    Scores {
        es: acc.es / n,
        vs: acc.vs / n,
        mad: acc.mad / n,
        mse: acc.mse / n,
        bias: acc.bias / n,
    }
}

/// Per-iteration knot scores of a run whose ensembles are all present.
pub fn evaluate_record(record: &RunRecord, truth: &[StateVector]) -> Vec<Vec<Scores>> {
    record
        .iterations
        .iter()
        .map(|it| score_knots(it.ensembles(), truth))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ens(rows: &[&[f64]]) -> Ensemble {
        Ensemble::from_samples(rows.iter().copied(), 0, 0).unwrap()
    }

    #[test]
    fn energy_score_examples() {
        assert_eq!(energy_score(&ens(&[&[1.0, 2.0], &[1.0, 2.0]]), &[1.0, 2.0]), 0.0);
        assert_eq!(energy_score(&ens(&[&[3.0, 4.0]]), &[0.0, 0.0]), 5.0);
        // (1/2)(1 + 1) - (1/8)(0 + 2 + 2 + 0)
        assert_eq!(energy_score(&ens(&[&[0.0], &[2.0]]), &[1.0]), 0.5);
    }

    #[test]
    fn variogram_score_examples() {
        assert_eq!(variogram_score(&ens(&[&[0.3], &[0.9]]), &[0.1], 0.5), 0.0);
        assert_eq!(variogram_score(&ens(&[&[0.3, 0.1], &[0.3, 0.1]]), &[0.3, 0.1], 0.5), 0.0);
        // ordered pairs (1,2) and (2,1): (1 - 2)^2 each
        assert_eq!(variogram_score(&ens(&[&[0.0, 1.0]]), &[0.0, 4.0], 0.5), 2.0);
    }

    #[test]
    fn mad_examples() {
        let e = ens(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]);
        assert_eq!(mad_score(&e, &[1.0, 1.5], 0.95), 0.0);
        // upper quantile of {0,1,2} at 0.975 is 1.95; one coordinate above by delta
        let delta = 0.3;
        assert!((mad_score(&e, &[1.0, 1.95 + delta], 0.95) - delta / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mse_bias_examples() {
        assert_eq!(mse_bias(&ens(&[&[1.0, 1.0]]), &[1.0, 1.0]), (0.0, 0.0));
        let (mse, bias) = mse_bias(&ens(&[&[1.0, 0.5], &[-1.0, 0.5]]), &[0.0, 0.5]);
        assert_eq!((mse, bias), (1.0, 0.0));
        let (mse, bias) = mse_bias(&ens(&[&[2.0, 1.0], &[2.0, 1.0]]), &[0.0, 0.0]);
        assert!((mse - bias * bias).abs() < 1e-14);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&xs, 0.0), 0.0);
        assert_eq!(quantile(&xs, 1.0), 3.0);
        assert!((quantile(&xs, 0.5) - 1.5).abs() < 1e-15);
    }
}
