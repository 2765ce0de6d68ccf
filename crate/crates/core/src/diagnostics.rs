//! Post-processing of run records: local fill distance of the training set around
//! high-density representatives, stddev evolution, front history and Lyapunov-time axes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::nngp::NeighborIndex;
use crate::record::RunRecord;
use crate::state::{distance, CorrectionDataset, Ensemble, StateVector};
use crate::systems::SystemSpec;

/// Low-discrepancy probes per ball used by [`local_fill_distance`].
pub const DEFAULT_PROBES: usize = 64;

/// First `count` primes, used as Halton bases.
fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `count` Halton points spread through the ball `B(center, rho)`: `d` coordinates give a
/// direction through the normal quantile, one more gives the radius `rho u^{1/d}`.
/// The center itself is always the first probe.
pub fn ball_probes(center: &[f64], rho: f64, count: usize) -> Vec<StateVector> {
    let d = center.len();
    let bases = primes(d + 1);
    let normal = Normal::standard();
    let mut out = Vec::with_capacity(count + 1);
    out.push(StateVector::from(center.to_vec()));
    for p in 1..=count as u64 {
        let dir: Vec<f64> = bases[..d]
            .iter()
            .map(|&b| normal.inverse_cdf(radical_inverse(p, b).clamp(1e-12, 1.0 - 1e-12)))
            .collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let r = rho * radical_inverse(p, bases[d]).powf(1.0 / d as f64);
        out.push(
            center
                .iter()
                .zip(&dir)
                .map(|(c, v)| c + r * v / norm)
                .collect::<Vec<_>>()
                .into(),
        );
    }
    out
}

/// `max_p min_r |probe_p - x_r|` over a fixed probe set.
pub fn max_min_distance(index: &NeighborIndex, inputs: &[StateVector], probes: &[StateVector]) -> f64 {
    probes
        .iter()
        .map(|p| match index.nearest(p, 1).first() {
            Some(&r) => distance(p, &inputs[r]),
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Estimate of `sup_{v in B(u, rho)} min_r |v - x_r|` from `probes` low-discrepancy points,
/// the center, and the boundary point directly away from the nearest input.
pub fn local_fill_distance(
    dataset: &CorrectionDataset,
    u_eval: &[f64],
    rho: f64,
    probes: usize,
) -> Result<f64> {
    let index = NeighborIndex::build(dataset)?;
    Ok(fill_with_index(&index, &dataset.inputs, u_eval, rho, probes))
}

fn fill_with_index(
    index: &NeighborIndex,
    inputs: &[StateVector],
    u: &[f64],
    rho: f64,
    probes: usize,
) -> f64 {
    let mut set = ball_probes(u, rho, probes);
    if let Some(&r) = index.nearest(u, 1).first() {
        let away: Vec<f64> = u.iter().zip(inputs[r].iter()).map(|(a, b)| a - b).collect();
        let norm = away.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            set.push(
                u.iter()
                    .zip(&away)
                    .map(|(c, v)| c + rho * v / norm)
                    .collect::<Vec<_>>()
                    .into(),
            );
        }
    }
    max_min_distance(index, inputs, &set)
}

/// Two ensemble members nearest the boundary of the `alpha` highest-density region of the
/// diagonal Gaussian fitted to the ensemble: the outermost member inside the
/// `chi2_d(alpha)` Mahalanobis shell and the innermost one outside it, when both exist.
/// Coordinates with zero spread are left out of the Mahalanobis distance.
pub fn hdr_representatives(ensemble: &Ensemble, alpha: f64) -> Result<[StateVector; 2]> {
    let n = ensemble.len();
    if n < 2 {
        return Err(Error::SizeMismatch {
            expected: 2,
            actual: n,
        });
    }
    let mean = ensemble.mean();
    let sd = ensemble.stddev();
    let active: Vec<usize> = (0..sd.len()).filter(|&s| sd[s] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::DegenerateEnsemble);
    }
    let shell = if alpha >= 1.0 {
        f64::INFINITY
    } else {
        ChiSquared::new(active.len() as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(alpha.max(0.0))
    };
    let m2: Vec<f64> = ensemble
        .samples()
        .map(|u| active.iter().map(|&s| ((u[s] - mean[s]) / sd[s]).powi(2)).sum())
        .collect();
    let inside = (0..n)
        .filter(|&j| m2[j] <= shell)
        .max_by(|&a, &b| m2[a].total_cmp(&m2[b]).then(b.cmp(&a)));
    let outside = (0..n)
        .filter(|&j| m2[j] > shell)
        .min_by(|&a, &b| m2[a].total_cmp(&m2[b]).then(a.cmp(&b)));
    let (a, b) = match (inside, outside) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            // everything on one side: the two closest to the shell
            let gap = |j: usize| {
                if shell.is_infinite() {
                    -m2[j]
                } else {
                    (m2[j] - shell).abs()
                }
            };
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| gap(a).total_cmp(&gap(b)).then(a.cmp(&b)));
            (order[0], order[1])
        }
    };
    Ok([
        ensemble.sample(a).to_vec().into(),
        ensemble.sample(b).to_vec().into(),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillDistanceRow {
    pub k: usize,
    pub alpha: f64,
    /// Mean over knots and both representatives.
    pub fill_distance: f64,
    /// Mean ball radius (distance from each representative to its nearest input).
    pub rho: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FillDistanceReport {
    pub rows: Vec<FillDistanceRow>,
}

impl FillDistanceReport {
    /// Series for one `alpha`, in iteration order.
    pub fn series(&self, alpha: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.alpha == alpha)
            .map(|r| r.fill_distance)
            .collect()
    }
}

/// Fill distance of `D_k` around the HDR representatives of every knot ensemble
/// `U_{i,k}`, `i = 1..N`, for `k = 1..K_end`. Needs an unthinned record.
pub fn fill_distance_sweep(record: &RunRecord, alphas: &[f64]) -> Result<FillDistanceReport> {
    let mut rows = Vec::new();
    if alphas.is_empty() {
        return Ok(FillDistanceReport { rows });
    }
    for it in record.iterations.iter().filter(|it| it.k >= 1) {
        let ensembles = it.ensembles.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!("ensembles of iteration {} were not kept", it.k))
        })?;
        let data = record.dataset.up_to_iteration(it.k);
        let index = NeighborIndex::build(&data)?;
        for &alpha in alphas {
            let per_knot: Vec<(f64, f64)> = ensembles[1..]
                .par_iter()
                .map(|e| {
                    let reps = match hdr_representatives(e, alpha) {
                        Ok(r) => r,
                        Err(Error::DegenerateEnsemble) => [e.mean(), e.mean()],
                        Err(err) => return Err(err),
                    };
                    let mut fill = 0.0;
                    let mut rho_sum = 0.0;
                    for u in &reps {
                        let rho = index
                            .nearest(u, 1)
                            .first()
                            .map_or(0.0, |&r| distance(u, &data.inputs[r]));
                        rho_sum += rho;
                        if rho > 0.0 {
                            fill += fill_with_index(&index, &data.inputs, u, rho, DEFAULT_PROBES);
                        }
                    }
                    Ok((fill / 2.0, rho_sum / 2.0))
                })
                .collect::<Result<_>>()?;
            let m = per_knot.len().max(1) as f64;
            rows.push(FillDistanceRow {
                k: it.k,
                alpha,
                fill_distance: per_knot.iter().map(|p| p.0).sum::<f64>() / m,
                rho: per_knot.iter().map(|p| p.1).sum::<f64>() / m,
            });
        }
    }
    Ok(FillDistanceReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StddevRow {
    pub k: usize,
    pub i: usize,
    pub coord: usize,
    pub stddev: f64,
}

/// Coordinate-wise ensemble stddev at every knot and iteration.
pub fn stddev_evolution(record: &RunRecord) -> Vec<StddevRow> {
    record
        .iterations
        .iter()
        .flat_map(|it| {
            it.stddevs.iter().enumerate().flat_map(move |(i, sd)| {
                sd.iter().enumerate().map(move |(coord, &stddev)| StddevRow {
                    k: it.k,
                    i,
                    coord,
                    stddev,
                })
            })
        })
        .collect()
}

/// `(k, L)` after each iteration.
pub fn front_history(record: &RunRecord) -> Vec<(usize, usize)> {
    record.iterations.iter().map(|it| (it.k, it.converged)).collect()
}

/// Knot times in Lyapunov times, `(t_i - t_0) / T_lyap`, for chaotic systems.
pub fn lyapunov_axis(spec: &SystemSpec) -> Option<Vec<f64>> {
    let tl = spec.lyapunov_time?;
    let mesh = spec.mesh();
    Some((0..=spec.intervals).map(|i| (mesh.knot(i) - spec.t0) / tl).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(points: &[&[f64]]) -> CorrectionDataset {
        let mut d = CorrectionDataset::new();
        for p in points {
            d.push(p.to_vec().into(), vec![0.0; p.len()].into(), 1);
        }
        d
    }

    #[test]
    fn single_point_gives_distance_plus_radius() {
        let d = dataset(&[&[0.0, 0.0]]);
        for &(r, rho) in &[(1.0, 0.5), (0.3, 2.0), (2.0, 0.01)] {
            let u = [r * 0.6, r * 0.8];
            let h = local_fill_distance(&d, &u, rho, DEFAULT_PROBES).unwrap();
            assert!((h - (r + rho)).abs() < 1e-12, "{h} vs {}", r + rho);
        }
    }

    #[test]
    fn shrinking_ball_on_a_data_point() {
        let d = dataset(&[&[0.2, 0.1, -0.3], &[1.0, 1.0, 1.0]]);
        let mut last = f64::INFINITY;
        for rho in [1e-1, 1e-3, 1e-6, 1e-9] {
            let h = local_fill_distance(&d, &[0.2, 0.1, -0.3], rho, DEFAULT_PROBES).unwrap();
            assert!(h <= rho * (1.0 + 1e-12) && h <= last);
            last = h;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn probes_stay_in_ball() {
        let c = [0.5, -0.2, 0.1, 0.0];
        let probes = ball_probes(&c, 0.3, 64);
        assert_eq!(probes.len(), 65);
        assert!(probes.iter().all(|p| distance(p, &c) <= 0.3 * (1.0 + 1e-12)));
        assert_eq!(&probes[0][..], &c[..]);
    }

    #[test]
    fn dense_net_bounds_fill_distance() {
        // grid of spacing h covering [-1,1]^2: every point of the unit ball is within h/sqrt(2)
        let h = 0.05;
        let mut pts = Vec::new();
        let m = (2.0 / h) as i32;
        for a in 0..=m {
            for b in 0..=m {
                pts.push(vec![-1.0 + a as f64 * h, -1.0 + b as f64 * h]);
            }
        }
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let d = dataset(&refs);
        let f = local_fill_distance(&d, &[0.013, -0.021], 0.5, DEFAULT_PROBES).unwrap();
        assert!(f <= h / 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn hdr_with_two_samples_returns_both() {
        let e = Ensemble::from_samples([[0.0, 1.0], [2.0, 3.0]], 0, 0).unwrap();
        let [a, b] = hdr_representatives(&e, 0.5).unwrap();
        let mut got = vec![a.0, b.0];
        got.sort_by(|x, y| x[0].total_cmp(&y[0]));
        assert_eq!(got, vec![vec![0.0, 1.0], vec![2.0, 3.0]]);
    }

    #[test]
    fn hdr_brackets_chi_square_radius() {
        use crate::rng::make_rng_stream;
        let d = 3;
        let mut data = Vec::new();
        for j in 0..400 {
            let mut rng = make_rng_stream(9, 0, 0, j);
            data.extend((0..d).map(|_| rng.standard_normal()));
        }
        let e = Ensemble::from_flat(d, data, 0, 0);
        let mean = e.mean();
        let sd = e.stddev();
        let m2 = |u: &[f64]| (0..d).map(|s| ((u[s] - mean[s]) / sd[s]).powi(2)).sum::<f64>();
        let shell = ChiSquared::new(d as f64).unwrap().inverse_cdf(0.5);
        let [a, b] = hdr_representatives(&e, 0.5).unwrap();
        assert!(m2(&a) <= shell && m2(&b) > shell);
        // nothing else falls strictly between them
        assert!(e.samples().all(|u| m2(u) <= m2(&a) || m2(u) >= m2(&b)));
    }

    #[test]
    fn hdr_at_full_mass_takes_extremes() {
        let e = Ensemble::from_samples([[0.0], [0.1], [-0.1], [5.0], [-3.0]], 0, 0).unwrap();
        let [a, b] = hdr_representatives(&e, 1.0).unwrap();
        let mut got = [a[0], b[0]];
        got.sort_by(f64::total_cmp);
        assert_eq!(got, [-3.0, 5.0]);
    }

    #[test]
    fn hdr_rejects_degenerate() {
        let e = Ensemble::replicate(&[1.0, 2.0], 5, 0, 0);
        assert_eq!(hdr_representatives(&e, 0.5), Err(Error::DegenerateEnsemble));
    }

    #[test]
    fn lyapunov_axis_only_for_chaotic() {
        let r = SystemSpec::parse("rossler").unwrap();
        let axis = lyapunov_axis(&r).unwrap();
        assert!((axis[r.intervals] - 170.0 / 14.0).abs() < 1e-12);
        assert!(lyapunov_axis(&SystemSpec::parse("fhn").unwrap()).is_none());
    }
}
