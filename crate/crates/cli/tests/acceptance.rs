//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and always
//! exits 0, so unmet targets are visible without failing the workspace build.

use std::fs;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use pint_core::diagnostics::fill_distance_sweep;
use pint_core::gp::{self, kernel_eval, Kernel};
use pint_core::metrics::{score_knots, time_average, Scores};
use pint_core::{
    parareal_run, run, w2_exact, w2_gaussian, Algorithm, CorrectionDataset, Ensemble, GaussianSummary,
    GpHyperparams, KernelFamily, RunConfig, RunRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const BIN: &str = env!("CARGO_BIN_EXE_pint-prob");

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
}

/// Runs `check`; a time limit of `None` means the criterion has no runtime bound.
fn criterion(name: &'static str, limit: Option<f64>, check: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, mut detail) = check();
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| secs < l);
    if !in_time {
        detail.push_str(&format!("; over the {:.0} s limit", limit.unwrap()));
    }
    let outcome = Outcome {
        name,
        pass: ok && in_time,
        detail,
        secs,
    };
    report(&outcome);
    outcome
}

fn report(o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("{tag} {:<22} {:>7.1}s  {}", o.name, o.secs, o.detail);
}

fn within_order(x: f64, target: f64) -> bool {
    x.is_finite() && x >= target / 10.0 && x <= target * 10.0
}

fn final_scores(r: &RunRecord) -> Scores {
    let truth = r.config.system_spec().unwrap().fine_trajectory().unwrap();
    time_average(&score_knots(r.final_ensembles(), &truth))
}

fn parareal_exactness() -> (bool, String) {
    let mut c = RunConfig::new("fhn", Algorithm::Parareal, 1);
    c.intervals = Some(20);
    c.fine_steps = Some(160_000 / 10);
    c.epsilon = Some(1e-300);
    let truth = c.system_spec().unwrap().fine_trajectory().unwrap();
    let r = match parareal_run(&c) {
        Ok(r) => r,
        Err(e) => return (false, format!("run failed: {e}")),
    };
    let mut worst: f64 = 0.0;
    for it in &r.iterations {
        for i in 1..=it.k.min(20) {
            worst = worst.max(it.means[i].max_abs_diff(&truth[i]));
        }
    }
    (worst <= 1e-10, format!("max error on settled intervals {worst:.1e} over {} iterations", r.k_end))
}

fn gp_oracle() -> (bool, String) {
    let families = [KernelFamily::Gaussian, KernelFamily::Matern12, KernelFamily::Matern32, KernelFamily::Matern52];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n = rng.random_range(1..=20);
        let d = rng.random_range(1..=4);
        let mut ds = CorrectionDataset::new();
        while ds.len() < n {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = x.iter().map(|v| (2.0 * v).cos() + rng.random_range(-0.1..0.1)).collect();
            ds.push(x.into(), y.into(), 1);
        }
        let signal_var = 10f64.powf(rng.random_range(-2.0..1.0));
        let hyper = GpHyperparams {
            length_sq: 10f64.powf(rng.random_range(-1.0..1.0)),
            signal_var,
            noise_var: signal_var * 10f64.powf(rng.random_range(-4.0..-1.0)),
        };
        let family = families[case % families.len()];
        let model = gp::fit_fixed(&ds, family, &[hyper]).unwrap();
        let kernel = Kernel {
            family,
            signal_var: hyper.signal_var,
            length_sq: hyper.length_sq,
        };
        let gram = DMatrix::from_fn(n, n, |a, b| {
            kernel_eval(&kernel, &ds.inputs[a], &ds.inputs[b]) + if a == b { hyper.noise_var } else { 0.0 }
        });
        let inv = gram.try_inverse().unwrap();
        for _ in 0..5 {
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let post = model.posterior(&u).unwrap();
            let ks = DVector::from_fn(n, |a, _| kernel_eval(&kernel, &ds.inputs[a], &u));
            let var = (kernel.signal_var - (ks.transpose() * &inv * &ks)[0]).max(0.0);
            for s in 0..d {
                let y = DVector::from_fn(n, |a, _| ds.outputs[a][s]);
                let mean = (ks.transpose() * &inv * y)[0];
                let scale = ds.outputs.iter().map(|y| y[s].abs()).fold(1.0, f64::max);
                worst = worst.max((post.mean[s] - mean).abs() / scale);
                worst = worst.max((post.var[s] - var).abs() / signal_var);
            }
        }
    }
    (worst <= 1e-10, format!("max relative deviation {worst:.1e} on 50 datasets"))
}

fn gaussian_ensemble(rng: &mut ChaCha8Rng, mean: &[f64], sd: &[f64], n: usize) -> Ensemble {
    let d = mean.len();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for c in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            data.push(mean[c] + sd[c] * z);
        }
    }
    Ensemble::from_flat(d, data, 0, 0)
}

fn w2_consistency() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut misses = [0usize; 5];
    for p in 0..100 {
        let d = 1 + p % 4;
        let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..d).map(|_| rng.random_range(lo..hi)).collect() };
        let (ma, mb, sa, sb) = (draw(-2.0, 2.0), draw(-2.0, 2.0), draw(0.2, 2.0), draw(0.2, 2.0));
        let a = gaussian_ensemble(&mut rng, &ma, &sa, 200);
        let b = gaussian_ensemble(&mut rng, &mb, &sb, 200);
        let g = w2_gaussian(&GaussianSummary::of(&a), &GaussianSummary::of(&b));
        let e = w2_exact(&a, &b, 2).unwrap();
        let rel = (g - e).abs() / e;
        worst = worst.max(rel);
        if rel > 0.15 {
            misses[d] += 1;
        }
    }
    let total: usize = misses.iter().sum();
    (
        total == 0,
        format!(
            "{}/100 pairs within 15%, worst {:.1}%; misses by dimension 1-4: {:?}",
            100 - total,
            100.0 * worst,
            &misses[1..]
        ),
    )
}

struct SystemRuns {
    system: &'static str,
    target: f64,
    runs: Vec<(u64, Result<RunRecord, String>)>,
}

fn reference_runs() -> Vec<SystemRuns> {
    let systems = [("fhn", 5.0), ("hopf", 9.0), ("double-pendulum", 7.5), ("rossler", 6.0), ("lorenz", 13.6)];
    systems
        .into_iter()
        .map(|(system, target)| {
            let runs = (1..=3)
                .map(|seed| {
                    let mut c = RunConfig::new(system, Algorithm::ProbGparareal, seed);
                    c.n_samples = 500;
                    (seed, run(&c).map_err(|e| e.to_string()))
                })
                .collect();
            SystemRuns { system, target, runs }
        })
        .collect()
}

fn iteration_counts(table: &[SystemRuns]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for t in table {
        let ks: Vec<String> = t
            .runs
            .iter()
            .map(|(_, r)| match r {
                Ok(r) => match r.k_conv {
                    Some(k) => {
                        ok &= (k as f64 - t.target).abs() <= 1.0;
                        k.to_string()
                    }
                    None => {
                        ok = false;
                        format!("{}@{}", r.termination, r.k_end)
                    }
                },
                Err(_) => {
                    ok = false;
                    "error".into()
                }
            })
            .collect();
        parts.push(format!("{} [{}] vs {}", t.system, ks.join(","), t.target));
    }
    (ok, parts.join("; "))
}

fn converged(t: &SystemRuns) -> Vec<&RunRecord> {
    t.runs
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .filter(|r| r.k_conv.is_some())
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn score_calibration(table: &[SystemRuns]) -> (bool, String) {
    let fhn: Vec<Scores> = converged(&table[0]).into_iter().map(final_scores).collect();
    let ross: Vec<Scores> = converged(&table[3]).into_iter().map(final_scores).collect();
    let mad_zero = fhn.len() == 3 && fhn.iter().all(|s| s.mad == 0.0);
    let fhn_mse = mean(&fhn.iter().map(|s| s.mse).collect::<Vec<_>>());
    let ross_es = mean(&ross.iter().map(|s| s.es).collect::<Vec<_>>());
    let mse_ok = !fhn.is_empty() && within_order(fhn_mse, 2.1e-13);
    let es_ok = !ross.is_empty() && within_order(ross_es, 2.7e-5);
    (
        mad_zero && mse_ok && es_ok,
        format!(
            "FHN MAD zero {mad_zero}; FHN MSE {fhn_mse:.2e} vs 2.1e-13 ({}); Rössler ES {ross_es:.2e} over {} converged runs vs 2.7e-5 ({})",
            if mse_ok { "ok" } else { "off" },
            ross.len(),
            if es_ok { "ok" } else { "off" }
        ),
    )
}

fn sigma_init_floor() -> (bool, String) {
    let n = 2000;
    let mut records = Vec::new();
    for sigma in [1e-4, 1e-3] {
        let mut c = RunConfig::new("fhn", Algorithm::ProbGparareal, 1);
        c.n_samples = n;
        c.sigma_init = sigma;
        match run(&c) {
            Ok(r) => records.push((sigma, r)),
            Err(e) => return (false, format!("σ_init={sigma}: {e}")),
        }
    }
    let mut floor_ok = true;
    let mut worst_se: f64 = 0.0;
    for (sigma, r) in &records {
        let se = sigma / (2.0 * (n as f64 - 1.0)).sqrt();
        for sd in &r.last().stddevs[0] {
            let z = (sd - sigma).abs() / se;
            worst_se = worst_se.max(z);
            floor_ok &= z <= 3.0;
        }
    }
    // stratification is a property of the final solution; while the GP variance dominates
    // (early iterations) both runs share the same spread up to sampling noise
    let (lo, hi) = (&records[0].1, &records[1].1);
    let knots = 0..=lo.intervals;
    let final_inverted = knots.clone().filter(|&i| hi.last().stddev_max(i) <= lo.last().stddev_max(i)).count();
    let early_ties = (0..lo.k_end.min(hi.k_end))
        .flat_map(|k| knots.clone().map(move |i| (k, i)))
        .filter(|&(k, i)| hi.iterations[k].stddev_max(i) <= lo.iterations[k].stddev_max(i))
        .count();
    (
        floor_ok && final_inverted == 0,
        format!(
            "knot-0 stddev within {worst_se:.2} SE; final solution stratified at {}/{} knots; \
             {early_ties} ties in earlier iterations",
            lo.intervals + 1 - final_inverted,
            lo.intervals + 1
        ),
    )
}

fn burgers_small() -> (bool, String) {
    let para = RunConfig::new("burgers-small", Algorithm::Parareal, 1);
    let mut prob = RunConfig::new("burgers-small", Algorithm::ProbNngparareal, 1);
    prob.n_samples = 500;
    prob.neighbors = Some(15);
    let (pr, nr) = match (run(&para), run(&prob)) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return (false, format!("parareal {:?}, prob-nngparareal {:?}", a.err(), b.err())),
    };
    let truth = prob.system_spec().unwrap().fine_trajectory().unwrap();
    let means = &nr.last().means;
    let mse = mean(
        &(1..means.len())
            .map(|i| means[i].iter().zip(truth[i].iter()).map(|(m, t)| (m - t).powi(2)).sum::<f64>())
            .collect::<Vec<_>>(),
    );
    let (kp, kn) = (pr.k_conv, nr.k_conv);
    let faster = matches!((kp, kn), (Some(a), Some(b)) if b < a);
    (
        faster && mse < 1e-8,
        format!("K Parareal {kp:?}, Prob-nnGParareal {kn:?}; ensemble-mean MSE {mse:.1e}"),
    )
}

fn fill_distance_decay(table: &[SystemRuns]) -> (bool, String) {
    let Some(r) = converged(&table[0]).into_iter().next() else {
        return (false, "no converged FHN run".into());
    };
    let report = match fill_distance_sweep(r, &[0.5, 0.9]) {
        Ok(rep) => rep,
        Err(e) => return (false, e.to_string()),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 0.9] {
        let s = report.series(alpha);
        let monotone = s.windows(2).all(|w| w[1] <= w[0]);
        let drop = s[0] / s[s.len() - 1];
        ok &= monotone && drop >= 10.0;
        parts.push(format!("α={alpha}: nonincreasing {monotone}, decrease {drop:.0}x"));
    }
    (ok, parts.join("; "))
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 2] = [
        &["prob-gparareal", "--system", "fhn", "--samples", "500", "--sigma-init", "1e-3", "--seed", "5"],
        &["prob-nngparareal", "--system", "burgers-small", "--samples", "100", "--seed", "2"],
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (c, args) in cases.iter().enumerate() {
        let mut bytes = Vec::new();
        for workers in ["1", "8"] {
            let out = dir.path().join(format!("{c}-{workers}"));
            let status = Command::new(BIN)
                .args(*args)
                .arg("--no-timing")
                .arg("--out")
                .arg(&out)
                .env("PINT_PROB_WORKERS", workers)
                .output()
                .unwrap();
            if !status.status.success() {
                return (false, format!("{} failed: {}", args[0], String::from_utf8_lossy(&status.stderr)));
            }
            let metrics = fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("metrics_"))
                .unwrap();
            bytes.push(fs::read(metrics).unwrap());
        }
        let same = bytes[0] == bytes[1];
        ok &= same;
        parts.push(format!("{} {}: {}", args[0], args[2], if same { "identical" } else { "differs" }));
    }
    (ok, parts.join("; "))
}

fn main() {
    let mut outcomes = vec![
        criterion("parareal exactness", Some(30.0), parareal_exactness),
        criterion("gp oracle", Some(5.0), gp_oracle),
        criterion("w2 consistency", Some(60.0), w2_consistency),
    ];

    let mut table = Vec::new();
    outcomes.push(criterion("iteration counts", Some(20.0 * 60.0), || {
        table = reference_runs();
        iteration_counts(&table)
    }));
    outcomes.push(criterion("score calibration", None, || score_calibration(&table)));
    outcomes.push(criterion("sigma_init floor", None, sigma_init_floor));
    outcomes.push(criterion("burgers reduced scale", Some(600.0), burgers_small));
    outcomes.push(criterion("fill-distance decay", None, || fill_distance_decay(&table)));
    outcomes.push(criterion("determinism", None, determinism));

    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} acceptance criteria met", outcomes.len());
}
