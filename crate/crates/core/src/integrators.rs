//! Fixed-step explicit Runge-Kutta integrators used as the coarse and fine propagators.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{StateVector, TimeMesh};

/// Autonomous right-hand side `u' = h(u)`. Non-autonomous systems carry time as a state
/// coordinate with derivative one.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, u: &[f64], out: &mut [f64]);
}

impl<F> VectorField for (usize, F)
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        (self.1)(u, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RkScheme {
    /// Forward Euler.
    Rk1,
    /// Explicit midpoint rule.
    Rk2,
    /// Classical four-stage method.
    Rk4,
    /// Cooper-Verner eleven-stage eighth-order method.
    Rk8,
}

impl RkScheme {
    pub fn order(self) -> usize {
        match self {
            RkScheme::Rk1 => 1,
            RkScheme::Rk2 => 2,
            RkScheme::Rk4 => 4,
            RkScheme::Rk8 => 8,
        }
    }

    pub fn tableau(self) -> &'static Tableau {
        static RK1: OnceLock<Tableau> = OnceLock::new();
        static RK2: OnceLock<Tableau> = OnceLock::new();
        static RK4: OnceLock<Tableau> = OnceLock::new();
        static RK8: OnceLock<Tableau> = OnceLock::new();
        match self {
            RkScheme::Rk1 => RK1.get_or_init(|| Tableau::new(vec![vec![]], vec![1.0], vec![0.0])),
            RkScheme::Rk2 => RK2.get_or_init(|| {
                Tableau::new(vec![vec![], vec![0.5]], vec![0.0, 1.0], vec![0.0, 0.5])
            }),
            RkScheme::Rk4 => RK4.get_or_init(|| {
                Tableau::new(
                    vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
                    vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
                    vec![0.0, 0.5, 0.5, 1.0],
                )
            }),
            RkScheme::Rk8 => RK8.get_or_init(cooper_verner_8),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk1" | "euler" => Some(RkScheme::Rk1),
            "rk2" | "midpoint" => Some(RkScheme::Rk2),
            "rk4" => Some(RkScheme::Rk4),
            "rk8" => Some(RkScheme::Rk8),
            _ => None,
        }
    }
}

/// Butcher tableau of an explicit scheme; `a[s]` holds the `s` coefficients of stage `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Tableau {
    fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Self {
        assert_eq!(a.len(), b.len());
        assert_eq!(a.len(), c.len());
        for (s, row) in a.iter().enumerate() {
            assert_eq!(row.len(), s, "explicit tableau must be strictly lower triangular");
        }
        Tableau { a, b, c }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }
}

/// Cooper & Verner (1972), order 8 with 11 stages. Nodes sit at 0, 1/2 and (7 ± sqrt 21)/14.
fn cooper_verner_8() -> Tableau {
    let s = 21f64.sqrt();
    let a = vec![
        vec![],
        vec![1.0 / 2.0],
        vec![1.0 / 4.0, 1.0 / 4.0],
        vec![1.0 / 7.0, (-7.0 - 3.0 * s) / 98.0, (21.0 + 5.0 * s) / 49.0],
        vec![(11.0 + s) / 84.0, 0.0, (18.0 + 4.0 * s) / 63.0, (21.0 - s) / 252.0],
        vec![
            (5.0 + s) / 48.0,
            0.0,
            (9.0 + s) / 36.0,
            (-231.0 + 14.0 * s) / 360.0,
            (63.0 - 7.0 * s) / 80.0,
        ],
        vec![
            (10.0 - s) / 42.0,
            0.0,
            (-432.0 + 92.0 * s) / 315.0,
            (633.0 - 145.0 * s) / 90.0,
            (-504.0 + 115.0 * s) / 70.0,
            (63.0 - 13.0 * s) / 35.0,
        ],
        vec![
            1.0 / 14.0,
            0.0,
            0.0,
            0.0,
            (14.0 - 3.0 * s) / 126.0,
            (13.0 - 3.0 * s) / 63.0,
            1.0 / 9.0,
        ],
        vec![
            1.0 / 32.0,
            0.0,
            0.0,
            0.0,
            (91.0 - 21.0 * s) / 576.0,
            11.0 / 72.0,
            (-385.0 - 75.0 * s) / 1152.0,
            (63.0 + 13.0 * s) / 128.0,
        ],
        vec![
            1.0 / 14.0,
            0.0,
            0.0,
            0.0,
            1.0 / 9.0,
            (-733.0 - 147.0 * s) / 2205.0,
            (515.0 + 111.0 * s) / 504.0,
            (-51.0 - 11.0 * s) / 56.0,
            (132.0 + 28.0 * s) / 245.0,
        ],
        vec![
            0.0,
            0.0,
            0.0,
            0.0,
            (-42.0 + 7.0 * s) / 18.0,
            (-18.0 + 28.0 * s) / 45.0,
            (-273.0 - 53.0 * s) / 72.0,
            (301.0 + 53.0 * s) / 72.0,
            (28.0 - 28.0 * s) / 45.0,
            (49.0 - 7.0 * s) / 18.0,
        ],
    ];
    let b = vec![
        9.0 / 180.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        49.0 / 180.0,
        64.0 / 180.0,
        49.0 / 180.0,
        9.0 / 180.0,
    ];
    let c = vec![
        0.0,
        0.5,
        0.5,
        (7.0 + s) / 14.0,
        (7.0 + s) / 14.0,
        0.5,
        (7.0 - s) / 14.0,
        (7.0 - s) / 14.0,
        0.5,
        (7.0 + s) / 14.0,
        1.0,
    ];
    Tableau::new(a, b, c)
}

/// Advance `u0` by `steps` uniform steps of size `(t_end - t_start) / steps`.
pub fn integrate<F: VectorField + ?Sized>(
    scheme: RkScheme,
    field: &F,
    u0: &[f64],
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> Result<StateVector> {
    assert!(steps >= 1, "integrate needs at least one step");
    let d = u0.len();
    let h = (t_end - t_start) / steps as f64;
    let tab = scheme.tableau();
    let ns = tab.stages();
    let mut u = u0.to_vec();
    let mut k = vec![0.0; ns * d];
    let mut tmp = vec![0.0; d];
    for _ in 0..steps {
        for s in 0..ns {
            tmp.copy_from_slice(&u);
            for (l, &a) in tab.a[s].iter().enumerate() {
                if a != 0.0 {
                    let ha = h * a;
                    let kl = &k[l * d..(l + 1) * d];
                    for (t, x) in tmp.iter_mut().zip(kl) {
                        *t += ha * x;
                    }
                }
            }
            field.eval(&tmp, &mut k[s * d..(s + 1) * d]);
        }
        for (s, &b) in tab.b.iter().enumerate() {
            if b != 0.0 {
                let hb = h * b;
                let ks = &k[s * d..(s + 1) * d];
                for (x, y) in u.iter_mut().zip(ks) {
                    *x += hb * y;
                }
            }
        }
        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::non_finite());
        }
    }
    Ok(StateVector(u))
}

/// One integrator plus the number of steps it takes per mesh interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solver {
    pub scheme: RkScheme,
    pub steps_per_interval: usize,
}

/// The coarse (cheap) and fine (accurate) propagators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverPair {
    pub coarse: Solver,
    pub fine: Solver,
}

impl SolverPair {
    pub fn new(coarse: Solver, fine: Solver) -> Result<Self> {
        if coarse.steps_per_interval == 0 || fine.steps_per_interval < coarse.steps_per_interval {
            return Err(Error::InvalidConfig(format!(
                "fine steps ({}) must be >= coarse steps ({}) >= 1",
                fine.steps_per_interval, coarse.steps_per_interval
            )));
        }
        Ok(SolverPair { coarse, fine })
    }

    /// Per-interval step counts from whole-horizon totals, rounded up.
    pub fn from_totals(
        coarse: RkScheme,
        coarse_total: usize,
        fine: RkScheme,
        fine_total: usize,
        intervals: usize,
    ) -> Result<Self> {
        SolverPair::new(
            Solver {
                scheme: coarse,
                steps_per_interval: coarse_total.div_ceil(intervals),
            },
            Solver {
                scheme: fine,
                steps_per_interval: fine_total.div_ceil(intervals),
            },
        )
    }

    /// Coarse solve over `[t_i, t_{i+1}]`.
    pub fn coarse_propagate<F: VectorField + ?Sized>(
        &self,
        field: &F,
        mesh: &TimeMesh,
        u: &[f64],
        interval: usize,
    ) -> Result<StateVector> {
        propagate(&self.coarse, field, mesh, u, interval)
    }

    /// Fine solve over `[t_i, t_{i+1}]`.
    pub fn fine_propagate<F: VectorField + ?Sized>(
        &self,
        field: &F,
        mesh: &TimeMesh,
        u: &[f64],
        interval: usize,
    ) -> Result<StateVector> {
        propagate(&self.fine, field, mesh, u, interval)
    }
}

fn propagate<F: VectorField + ?Sized>(
    solver: &Solver,
    field: &F,
    mesh: &TimeMesh,
    u: &[f64],
    interval: usize,
) -> Result<StateVector> {
    integrate(
        solver.scheme,
        field,
        u,
        mesh.knot(interval),
        mesh.knot(interval + 1),
        solver.steps_per_interval,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [RkScheme; 4] = [RkScheme::Rk1, RkScheme::Rk2, RkScheme::Rk4, RkScheme::Rk8];

    fn growth() -> (usize, impl Fn(&[f64], &mut [f64]) + Sync) {
        (1, |u: &[f64], out: &mut [f64]| out[0] = u[0])
    }

    fn decay() -> (usize, impl Fn(&[f64], &mut [f64]) + Sync) {
        (1, |u: &[f64], out: &mut [f64]| out[0] = -u[0])
    }

    #[test]
    fn tableaux_are_consistent() {
        for scheme in ALL {
            let t = scheme.tableau();
            let bsum: f64 = t.b.iter().sum();
            assert!((bsum - 1.0).abs() < 1e-14, "{scheme:?} weights sum to {bsum}");
            for (s, row) in t.a.iter().enumerate() {
                let rsum: f64 = row.iter().sum();
                assert!(
                    (rsum - t.c[s]).abs() < 1e-14,
                    "{scheme:?} stage {s}: row sum {rsum} vs node {}",
                    t.c[s]
                );
            }
        }
    }

    #[test]
    fn rk8_satisfies_quadrature_conditions() {
        // sum b_i c_i^(q-1) = 1/q for q <= 8 is necessary for order 8.
        let t = RkScheme::Rk8.tableau();
        for q in 1..=8 {
            let lhs: f64 = t.b.iter().zip(&t.c).map(|(b, c)| b * c.powi(q - 1)).sum();
            assert!((lhs - 1.0 / q as f64).abs() < 1e-13, "q={q}: {lhs}");
        }
    }

    #[test]
    fn zero_field_is_identity() {
        let zero = (3, |_: &[f64], out: &mut [f64]| out.fill(0.0));
        for scheme in ALL {
            let u = integrate(scheme, &zero, &[1.0, -2.0, 0.5], 0.0, 3.0, 17).unwrap();
            assert_eq!(u.0, vec![1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn rk4_exponential() {
        let u = integrate(RkScheme::Rk4, &growth(), &[1.0], 0.0, 1.0, 10).unwrap();
        assert!((u[0] - std::f64::consts::E).abs() < 1e-5);
        // against a high step count reference
        let r = integrate(RkScheme::Rk4, &growth(), &[1.0], 0.0, 1.0, 10_000).unwrap();
        assert!((r[0] - std::f64::consts::E).abs() < 1e-14);
        assert!((u[0] - r[0]).abs() < 3e-6);
    }

    #[test]
    fn euler_is_exact_on_constant_field() {
        let c = (2, |_: &[f64], out: &mut [f64]| {
            out[0] = 0.25;
            out[1] = -1.5;
        });
        let u = integrate(RkScheme::Rk1, &c, &[1.0, 2.0], 0.0, 2.0, 8).unwrap();
        assert!((u[0] - 1.5).abs() < 1e-15);
        assert!((u[1] + 1.0).abs() < 1e-15);
    }

    fn observed_order(scheme: RkScheme, t_end: f64, base_steps: usize) -> f64 {
        let exact = (-t_end).exp();
        let mut logs = Vec::new();
        for level in 0..4 {
            let steps = base_steps << level;
            let u = integrate(scheme, &decay(), &[1.0], 0.0, t_end, steps).unwrap();
            let h = t_end / steps as f64;
            logs.push((h.ln(), (u[0] - exact).abs().ln()));
        }
        // least-squares slope of log error against log h
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn empirical_orders_match_nominal() {
        for (scheme, t_end, base) in [
            (RkScheme::Rk1, 1.0, 64),
            (RkScheme::Rk2, 1.0, 32),
            (RkScheme::Rk4, 1.0, 8),
            (RkScheme::Rk8, 8.0, 8),
        ] {
            let p = observed_order(scheme, t_end, base);
            let nominal = scheme.order() as f64;
            assert!(
                (p - nominal).abs() <= 0.15 * nominal,
                "{scheme:?}: observed order {p:.3}"
            );
        }
    }

    #[test]
    fn rk2_halving_quarters_error() {
        let exact = 1f64.exp();
        let e1 = (integrate(RkScheme::Rk2, &growth(), &[1.0], 0.0, 1.0, 50).unwrap()[0] - exact).abs();
        let e2 = (integrate(RkScheme::Rk2, &growth(), &[1.0], 0.0, 1.0, 100).unwrap()[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let quad = (1, |u: &[f64], out: &mut [f64]| out[0] = u[0] * u[0]);
        let err = integrate(RkScheme::Rk1, &quad, &[10.0], 0.0, 10.0, 100).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn degenerate_pair_is_bitwise_symmetric() {
        let s = Solver {
            scheme: RkScheme::Rk4,
            steps_per_interval: 7,
        };
        let pair = SolverPair::new(s, s).unwrap();
        let mesh = TimeMesh::new(0.0, 2.0, 4).unwrap();
        let f = decay();
        for i in 0..4 {
            let g = pair.coarse_propagate(&f, &mesh, &[0.3], i).unwrap();
            let fi = pair.fine_propagate(&f, &mesh, &[0.3], i).unwrap();
            assert_eq!(g.0[0].to_bits(), fi.0[0].to_bits());
        }
    }

    #[test]
    fn steps_from_totals_round_up() {
        let p = SolverPair::from_totals(RkScheme::Rk2, 160, RkScheme::Rk4, 160_000, 40).unwrap();
        assert_eq!(p.coarse.steps_per_interval, 4);
        assert_eq!(p.fine.steps_per_interval, 4000);
        let p = SolverPair::from_totals(RkScheme::Rk1, 3104, RkScheme::Rk8, 217_000, 32).unwrap();
        assert_eq!(p.coarse.steps_per_interval, 97);
        assert_eq!(p.fine.steps_per_interval, 6782);
    }
}
