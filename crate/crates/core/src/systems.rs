//! Benchmark dynamical systems and the coordinate normalisation shared by all solvers.
//!
//! Raw equations (state layout in brackets):
//!
//! * FitzHugh-Nagumo `[v, w]`: `v' = c (v - v^3/3 + w)`, `w' = -(v - a + b w) / c`.
//! * Rossler `[x, y, z]`: `x' = -y - z`, `y' = x + a y`, `z' = b + z (x - c)`.
//! * Hopf `[x, y, t]`: `x' = -y + x (t/T - x^2 - y^2)`, `y' = x + y (t/T - x^2 - y^2)`,
//!   `t' = 1` with `T = 100`; time is carried as a state coordinate.
//! * Double pendulum `[th1, th2, w1, w2]`, unit masses, lengths and gravity, `D = th1 - th2`:
//!   `w1' = (-3 sin th1 - sin(th1 - 2 th2) - 2 sin D (w2^2 + w1^2 cos D)) / (3 - cos 2D)`,
//!   `w2' = 2 sin D (2 w1^2 + 2 cos th1 + w2^2 cos D) / (3 - cos 2D)`.
//! * Lorenz `[x, y, z]`: `x' = g1 (y - x)`, `y' = x (g2 - z) - y`, `z' = x y - g3 z`.
//! * Viscous Burgers `u_t = nu u_xx - u u_x` on `[-L, L]`, method of lines with periodic
//!   second-order central differences.
//!
//! Solvers work in normalised coordinates `(u_raw - offset) / scale`; the vector field is
//! scaled by the chain rule so trajectories map one-to-one.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{integrate, RkScheme, SolverPair, VectorField};
use crate::state::{StateVector, TimeMesh};

/// Raw (unnormalised) dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dynamics {
    FitzHughNagumo { a: f64, b: f64, c: f64 },
    Rossler { a: f64, b: f64, c: f64 },
    Hopf { period: f64 },
    DoublePendulum,
    Lorenz { sigma: f64, rho: f64, beta: f64 },
    Burgers { dim: usize, nu: f64, half_width: f64 },
}

impl Dynamics {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::FitzHughNagumo { .. } => 2,
            Dynamics::Rossler { .. } | Dynamics::Hopf { .. } | Dynamics::Lorenz { .. } => 3,
            Dynamics::DoublePendulum => 4,
            Dynamics::Burgers { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, u: &[f64], out: &mut [f64]) {
        match *self {
            Dynamics::FitzHughNagumo { a, b, c } => {
                out[0] = c * (u[0] - u[0].powi(3) / 3.0 + u[1]);
                out[1] = -(u[0] - a + b * u[1]) / c;
            }
            Dynamics::Rossler { a, b, c } => {
                out[0] = -u[1] - u[2];
                out[1] = u[0] + a * u[1];
                out[2] = b + u[2] * (u[0] - c);
            }
            Dynamics::Hopf { period } => {
                let growth = u[2] / period - u[0] * u[0] - u[1] * u[1];
                out[0] = -u[1] + u[0] * growth;
                out[1] = u[0] + u[1] * growth;
                out[2] = 1.0;
            }
            Dynamics::DoublePendulum => {
                let (th1, th2, w1, w2) = (u[0], u[1], u[2], u[3]);
                let delta = th1 - th2;
                let (sd, cd) = delta.sin_cos();
                let den = 3.0 - (2.0 * delta).cos();
                out[0] = w1;
                out[1] = w2;
                out[2] = (-3.0 * th1.sin() - (th1 - 2.0 * th2).sin()
                    - 2.0 * sd * (w2 * w2 + w1 * w1 * cd))
                    / den;
                out[3] = 2.0 * sd * (2.0 * w1 * w1 + 2.0 * th1.cos() + w2 * w2 * cd) / den;
            }
            Dynamics::Lorenz { sigma, rho, beta } => {
                out[0] = sigma * (u[1] - u[0]);
                out[1] = u[0] * (rho - u[2]) - u[1];
                out[2] = u[0] * u[1] - beta * u[2];
            }
            Dynamics::Burgers {
                dim,
                nu,
                half_width,
            } => burgers_field_into(dim, nu, half_width, u, out),
        }
    }
}

/// Nodal time derivatives of the semi-discrete viscous Burgers equation.
///
/// Nodes are `x_l = -L + l dx`, `dx = 2L/d`, `l = 0..d`; the boundary pair
/// `u(-L) = u(L)`, `u_x(-L) = u_x(L)` is realised as a periodic stencil.
pub fn burgers_field(dim: usize, nu: f64, half_width: f64, u: &[f64]) -> StateVector {
    let mut out = vec![0.0; dim];
    burgers_field_into(dim, nu, half_width, u, &mut out);
    StateVector(out)
}

fn burgers_field_into(dim: usize, nu: f64, half_width: f64, u: &[f64], out: &mut [f64]) {
    debug_assert!(dim >= 4 && u.len() == dim);
    let dx = 2.0 * half_width / dim as f64;
    let inv_2dx = 0.5 / dx;
    let inv_dx2 = 1.0 / (dx * dx);
    for l in 0..dim {
        let left = u[if l == 0 { dim - 1 } else { l - 1 }];
        let right = u[if l + 1 == dim { 0 } else { l + 1 }];
        let ux = (right - left) * inv_2dx;
        let uxx = (right - 2.0 * u[l] + left) * inv_dx2;
        out[l] = nu * uxx - u[l] * ux;
    }
}

/// Affine map between raw and normalised coordinates: `norm = (raw - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization {
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
        }
    }

    /// Scale/offset covering `[lo, hi]` per coordinate, widened by `pad` of the half range.
    pub fn from_bounds(lo: &[f64], hi: &[f64], pad: f64) -> Self {
        let scale = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| {
                let half = 0.5 * (h - l) * (1.0 + pad);
                if half > 0.0 {
                    half
                } else {
                    1.0
                }
            })
            .collect();
        let offset = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
        Normalization { scale, offset }
    }

    pub fn normalize(&self, raw: &[f64]) -> StateVector {
        raw.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(x, (s, o))| (x - o) / s)
            .collect::<Vec<_>>()
            .into()
    }

    pub fn denormalize(&self, norm: &[f64]) -> StateVector {
        norm.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(x, (s, o))| x * s + o)
            .collect::<Vec<_>>()
            .into()
    }
}

/// Registered system identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemId {
    Fhn,
    Rossler,
    RosslerExt,
    Hopf,
    DoublePendulum,
    Lorenz,
    Burgers,
    BurgersSmall,
}

impl SystemId {
    pub const ALL: [SystemId; 8] = [
        SystemId::Fhn,
        SystemId::Rossler,
        SystemId::RosslerExt,
        SystemId::Hopf,
        SystemId::DoublePendulum,
        SystemId::Lorenz,
        SystemId::Burgers,
        SystemId::BurgersSmall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Fhn => "fhn",
            SystemId::Rossler => "rossler",
            SystemId::RosslerExt => "rossler-ext",
            SystemId::Hopf => "hopf",
            SystemId::DoublePendulum => "double-pendulum",
            SystemId::Lorenz => "lorenz",
            SystemId::Burgers => "burgers",
            SystemId::BurgersSmall => "burgers-small",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownSystem(s.to_string()))
    }
}

impl std::fmt::Display for SystemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Integrator and whole-horizon step count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBudget {
    pub scheme: RkScheme,
    pub total_steps: usize,
}

/// Everything needed to set up a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub id: SystemId,
    pub dynamics: Dynamics,
    pub t0: f64,
    pub t_end: f64,
    pub intervals: usize,
    pub initial_raw: Vec<f64>,
    pub normalization: Normalization,
    pub coarse: StepBudget,
    pub fine: StepBudget,
    pub k_stop: usize,
    /// Default tolerance of the probabilistic solvers (squared W2).
    pub epsilon_prob: f64,
    /// Default tolerance of the deterministic solvers (max-norm).
    pub epsilon_det: f64,
    pub lyapunov_time: Option<f64>,
}

// Frozen normalisation bounds: per-coordinate min/max of a coarse sequential run over the
// full horizon (recomputed by `observed_bounds`, padded by `BOUNDS_PAD`).
const FHN_LO: [f64; 2] = [-1.8205896372090289, -0.9431512201089116];
const FHN_HI: [f64; 2] = [1.903684701359245, 1.1144109174158503];
const ROSSLER_LO: [f64; 3] = [-9.142519846959072, -10.851386605263032, 0.013493270954904438];
const ROSSLER_HI: [f64; 3] = [11.503686307034092, 7.861134835847713, 23.53809985636485];
const ROSSLER_EXT_LO: [f64; 3] = [-9.175172459076936, -10.90727930598097, 0.013463050658576052];
const ROSSLER_EXT_HI: [f64; 3] = [11.570573594459919, 7.878248137713457, 24.2010351267791];
const HOPF_LO: [f64; 3] = [-2.5768614489226165, -2.558027785797525, -20.0];
const HOPF_HI: [f64; 3] = [2.5850924361106236, 2.59287221754779, 500.0];
const PENDULUM_LO: [f64; 4] = [-2.177194661014688, -7.384687596294655, -2.105698947554217, -2.838409220159314];
const PENDULUM_HI: [f64; 4] = [1.6892211769014143, 2.047842034792844, 2.102135971737716, 2.3713440537559562];
const LORENZ_LO: [f64; 3] = [-16.23550778333125, -21.752395689828727, 5.283064011173685];
const LORENZ_HI: [f64; 3] = [17.91476352098411, 23.44459747498066, 44.396895691620244];

/// Relative widening applied to observed coordinate ranges.
pub const BOUNDS_PAD: f64 = 0.1;

impl SystemSpec {
    pub fn by_id(id: SystemId) -> SystemSpec {
        match id {
            SystemId::Fhn => SystemSpec {
                id,
                dynamics: Dynamics::FitzHughNagumo {
                    a: 0.2,
                    b: 0.2,
                    c: 3.0,
                },
                t0: 0.0,
                t_end: 40.0,
                intervals: 40,
                initial_raw: vec![-1.0, 1.0],
                normalization: Normalization::from_bounds(&FHN_LO, &FHN_HI, BOUNDS_PAD),
                coarse: budget(RkScheme::Rk2, 160),
                fine: budget(RkScheme::Rk4, 160_000),
                k_stop: 9,
                epsilon_prob: 1e-7,
                epsilon_det: 5e-6,
                lyapunov_time: None,
            },
            SystemId::Rossler | SystemId::RosslerExt => {
                let ext = id == SystemId::RosslerExt;
                let (lo, hi) = if ext {
                    (ROSSLER_EXT_LO, ROSSLER_EXT_HI)
                } else {
                    (ROSSLER_LO, ROSSLER_HI)
                };
                SystemSpec {
                    id,
                    dynamics: Dynamics::Rossler {
                        a: 0.2,
                        b: 0.2,
                        c: 5.7,
                    },
                    t0: 0.0,
                    t_end: if ext { 340.0 } else { 170.0 },
                    intervals: 40,
                    initial_raw: vec![0.0, -6.78, 0.02],
                    normalization: Normalization::from_bounds(&lo, &hi, BOUNDS_PAD),
                    coarse: budget(RkScheme::Rk1, 90_000),
                    fine: budget(RkScheme::Rk4, 45_000_000),
                    k_stop: 14,
                    epsilon_prob: 1e-7,
                    epsilon_det: 5e-6,
                    lyapunov_time: Some(14.0),
                }
            }
            SystemId::Hopf => SystemSpec {
                id,
                dynamics: Dynamics::Hopf { period: 100.0 },
                t0: -20.0,
                t_end: 500.0,
                intervals: 32,
                initial_raw: vec![0.1, 0.1, -20.0],
                normalization: Normalization::from_bounds(&HOPF_LO, &HOPF_HI, BOUNDS_PAD),
                coarse: budget(RkScheme::Rk1, 2048),
                fine: budget(RkScheme::Rk8, 170_000),
                k_stop: 12,
                epsilon_prob: 1e-7,
                epsilon_det: 5e-6,
                lyapunov_time: None,
            },
            SystemId::DoublePendulum => SystemSpec {
                id,
                dynamics: Dynamics::DoublePendulum,
                t0: 0.0,
                t_end: 80.0,
                intervals: 32,
                initial_raw: vec![-0.5, 0.0, 0.0, 0.0],
                normalization: Normalization::from_bounds(&PENDULUM_LO, &PENDULUM_HI, BOUNDS_PAD),
                coarse: budget(RkScheme::Rk1, 3104),
                fine: budget(RkScheme::Rk8, 217_000),
                k_stop: 12,
                epsilon_prob: 1e-7,
                epsilon_det: 5e-6,
                lyapunov_time: None,
            },
            SystemId::Lorenz => SystemSpec {
                id,
                dynamics: Dynamics::Lorenz {
                    sigma: 10.0,
                    rho: 28.0,
                    beta: 8.0 / 3.0,
                },
                t0: 0.0,
                t_end: 18.0,
                intervals: 50,
                initial_raw: vec![-15.0, -15.0, 20.0],
                normalization: Normalization::from_bounds(&LORENZ_LO, &LORENZ_HI, BOUNDS_PAD),
                coarse: budget(RkScheme::Rk4, 300),
                fine: budget(RkScheme::Rk4, 22_500),
                k_stop: 16,
                epsilon_prob: 1e-9,
                epsilon_det: 5e-9,
                lyapunov_time: Some(1.1),
            },
            SystemId::Burgers => burgers(id, 128, 512, 5_120_000),
            // 4 coarse steps per interval as at full scale; 1 step per interval breaks the
            // advective CFL limit of explicit Euler
            SystemId::BurgersSmall => burgers(id, 32, 512 / 4, 5_120_000 / 16),
        }
    }

    pub fn parse(name: &str) -> Result<SystemSpec> {
        Ok(SystemSpec::by_id(SystemId::parse(name)?))
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn mesh(&self) -> TimeMesh {
        TimeMesh::new(self.t0, self.t_end, self.intervals).expect("registry meshes are valid")
    }

    pub fn solver_pair(&self) -> SolverPair {
        self.solver_pair_checked()
            .expect("registry step budgets are valid")
    }

    pub fn solver_pair_checked(&self) -> Result<SolverPair> {
        SolverPair::from_totals(
            self.coarse.scheme,
            self.coarse.total_steps,
            self.fine.scheme,
            self.fine.total_steps,
            self.intervals,
        )
    }

    /// Same system with a different number of intervals (step totals unchanged).
    pub fn with_intervals(mut self, intervals: usize) -> Self {
        self.intervals = intervals;
        self
    }

    pub fn with_step_totals(mut self, coarse_total: usize, fine_total: usize) -> Self {
        self.coarse.total_steps = coarse_total;
        self.fine.total_steps = fine_total;
        self
    }

    pub fn field(&self) -> SystemField {
        SystemField {
            dynamics: self.dynamics.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Initial condition in normalised coordinates.
    pub fn initial_state(&self) -> StateVector {
        self.normalization.normalize(&self.initial_raw)
    }

    pub fn normalize(&self, raw: &[f64]) -> StateVector {
        self.normalization.normalize(raw)
    }

    pub fn denormalize(&self, norm: &[f64]) -> StateVector {
        self.normalization.denormalize(norm)
    }

    /// Sequential fine solution at every knot `0..=N` (normalised coordinates).
    pub fn fine_trajectory(&self) -> Result<Vec<StateVector>> {
        let field = self.field();
        let mesh = self.mesh();
        let pair = self.solver_pair();
        let mut out = Vec::with_capacity(self.intervals + 1);
        out.push(self.initial_state());
        for i in 0..self.intervals {
            let next = pair
                .fine_propagate(&field, &mesh, &out[i], i)
                .map_err(|e| e.at(i + 1, 0, None))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Per-coordinate raw min/max along a sequential coarse run, sampled at every step.
    pub fn observed_bounds(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let raw = RawField(self.dynamics.clone());
        let steps = self.coarse.total_steps;
        let h = (self.t_end - self.t0) / steps as f64;
        let mut u = StateVector(self.initial_raw.clone());
        let mut lo = u.0.clone();
        let mut hi = u.0.clone();
        for _ in 0..steps {
            u = integrate(self.coarse.scheme, &raw, &u, 0.0, h, 1)?;
            for ((l, h), x) in lo.iter_mut().zip(hi.iter_mut()).zip(u.iter()) {
                *l = l.min(*x);
                *h = h.max(*x);
            }
        }
        Ok((lo, hi))
    }
}

fn budget(scheme: RkScheme, total_steps: usize) -> StepBudget {
    StepBudget {
        scheme,
        total_steps,
    }
}

fn burgers(id: SystemId, dim: usize, coarse_total: usize, fine_total: usize) -> SystemSpec {
    let half_width = 1.0;
    let dx = 2.0 * half_width / dim as f64;
    let initial_raw = (0..dim)
        .map(|l| {
            let x = -half_width + l as f64 * dx;
            0.5 * ((4.5 * PI * x).cos() + 1.0)
        })
        .collect();
    SystemSpec {
        id,
        dynamics: Dynamics::Burgers {
            dim,
            nu: 0.01,
            half_width,
        },
        t0: 0.0,
        t_end: 5.0,
        intervals: dim,
        initial_raw,
        normalization: Normalization::identity(dim),
        coarse: budget(RkScheme::Rk1, coarse_total),
        fine: budget(RkScheme::Rk8, fine_total),
        k_stop: dim,
        epsilon_prob: 1e-7,
        epsilon_det: 5e-6,
        lyapunov_time: None,
    }
}

struct RawField(Dynamics);

impl VectorField for RawField {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        self.0.eval(u, out)
    }
}

/// The vector field seen by the solvers, in normalised coordinates.
#[derive(Debug, Clone)]
pub struct SystemField {
    dynamics: Dynamics,
    normalization: Normalization,
}

impl VectorField for SystemField {
    fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let n = &self.normalization;
        let d = u.len();
        if d <= 8 {
            let mut raw = [0.0; 8];
            for s in 0..d {
                raw[s] = u[s] * n.scale[s] + n.offset[s];
            }
            self.dynamics.eval(&raw[..d], out);
        } else {
            let raw: Vec<f64> = (0..d).map(|s| u[s] * n.scale[s] + n.offset[s]).collect();
            self.dynamics.eval(&raw, out);
        }
        for (o, s) in out.iter_mut().zip(&n.scale) {
            *o /= s;
        }
    }
}

/// Evaluate the normalised field of `spec` at `u`.
pub fn vector_field(spec: &SystemSpec, u: &[f64]) -> StateVector {
    let mut out = vec![0.0; spec.dim()];
    spec.field().eval(u, &mut out);
    StateVector(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_origin_is_fixed() {
        let spec = SystemSpec::by_id(SystemId::Lorenz);
        let mut out = [1.0; 3];
        spec.dynamics.eval(&[0.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0, 0.0]);
        // and in normalised coordinates the field at the image of the origin vanishes too
        let origin = spec.normalize(&[0.0, 0.0, 0.0]);
        let f = vector_field(&spec, &origin);
        assert!(f.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn fhn_matches_hand_coded_field() {
        let spec = SystemSpec::by_id(SystemId::Fhn);
        let hand = |v: f64, w: f64| {
            let (a, b, c) = (0.2, 0.2, 3.0);
            [c * (v - v * v * v / 3.0 + w), -(v - a + b * w) / c]
        };
        let expected = hand(-1.0, 1.0);
        // v' = 3(-1 + 1/3 + 1) = 1, w' = -(-1 - 0.2 + 0.2)/3 = 1/3
        assert!((expected[0] - 1.0).abs() < 1e-15);
        assert!((expected[1] - 1.0 / 3.0).abs() < 1e-15);
        let mut raw = [0.0; 2];
        spec.dynamics.eval(&[-1.0, 1.0], &mut raw);
        assert_eq!(raw, expected);
        // normalised field is the raw field divided by the scale
        let f = vector_field(&spec, &spec.initial_state());
        for s in 0..2 {
            assert!((f[s] * spec.normalization.scale[s] - expected[s]).abs() < 1e-13);
        }
    }

    #[test]
    fn rossler_first_component() {
        let spec = SystemSpec::by_id(SystemId::Rossler);
        let mut out = [0.0; 3];
        spec.dynamics.eval(&[0.0, -6.78, 0.02], &mut out);
        assert!((out[0] - 6.76).abs() < 1e-12);
    }

    #[test]
    fn normalization_round_trip() {
        for id in SystemId::ALL {
            let spec = SystemSpec::by_id(id);
            let u = spec.initial_raw.clone();
            let back = spec.denormalize(&spec.normalize(&u));
            for (a, b) in u.iter().zip(back.iter()) {
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0), "{id}");
            }
            let u0 = spec.initial_state();
            assert!(u0.iter().all(|x| x.abs() <= 1.0), "{id} initial state outside [-1,1]");
        }
        let id = Normalization::identity(3);
        assert_eq!(id.normalize(&[1.0, -2.0, 3.0]).0, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn lorenz_initial_condition_in_unit_box() {
        let spec = SystemSpec::by_id(SystemId::Lorenz);
        let u0 = spec.normalize(&[-15.0, -15.0, 20.0]);
        assert!(u0.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn frozen_bounds_match_a_fresh_pre_run() {
        for id in [
            SystemId::Fhn,
            SystemId::Hopf,
            SystemId::DoublePendulum,
            SystemId::Lorenz,
        ] {
            let spec = SystemSpec::by_id(id);
            let (lo, hi) = spec.observed_bounds().unwrap();
            let fresh = Normalization::from_bounds(&lo, &hi, BOUNDS_PAD);
            for s in 0..spec.dim() {
                let a = fresh.scale[s];
                let b = spec.normalization.scale[s];
                assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{id} scale[{s}]: {a} vs {b}");
                let a = fresh.offset[s];
                let b = spec.normalization.offset[s];
                assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{id} offset[{s}]: {a} vs {b}");
            }
        }
    }

    #[test]
    fn burgers_constant_profile_is_stationary() {
        let f = burgers_field(16, 0.01, 1.0, &[0.7; 16]);
        assert!(f.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn burgers_diffusion_limit_decays_modes() {
        // Pure-diffusion oracle: drop the advection term and compare each node with the
        // discrete Laplacian eigenvalue of the mode.
        let d = 64;
        let nu = 0.3;
        let dx = 2.0 / d as f64;
        let k = 3.0 * PI; // three periods on [-1, 1]
        let eps = 1e-9; // small amplitude makes u u_x negligible
        let u: Vec<f64> = (0..d)
            .map(|l| eps * (k * (-1.0 + l as f64 * dx)).sin())
            .collect();
        let f = burgers_field(d, nu, 1.0, &u);
        let symbol = 4.0 / (dx * dx) * (0.5 * k * dx).sin().powi(2);
        for l in 0..d {
            let expected = -nu * symbol * u[l];
            assert!((f[l] - expected).abs() < 1e-7 * eps * nu * symbol, "node {l}");
        }
        // the discrete symbol approximates k^2 to second order
        assert!((symbol - k * k).abs() / (k * k) < 0.02);
    }

    #[test]
    fn burgers_stencil_exact_on_quadratics_at_interior_nodes() {
        let d = 20;
        let dx = 2.0 / d as f64;
        let u: Vec<f64> = (0..d)
            .map(|l| {
                let x = -1.0 + l as f64 * dx;
                0.3 * x * x - 0.2 * x + 0.1
            })
            .collect();
        let nu = 0.05;
        let f = burgers_field(d, nu, 1.0, &u);
        for l in 1..d - 1 {
            let x = -1.0 + l as f64 * dx;
            let ux = 0.6 * x - 0.2;
            let uxx = 0.6;
            let exact = nu * uxx - u[l] * ux;
            assert!((f[l] - exact).abs() < 1e-12, "node {l}");
        }
    }

    #[test]
    fn registry_parses_names() {
        for id in SystemId::ALL {
            assert_eq!(SystemId::parse(id.name()).unwrap(), id);
        }
        assert!(matches!(SystemId::parse("nope"), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn hopf_is_time_augmented() {
        let spec = SystemSpec::by_id(SystemId::Hopf);
        assert_eq!(spec.dim(), 3);
        let mut out = [0.0; 3];
        spec.dynamics.eval(&[0.1, 0.1, -20.0], &mut out);
        assert_eq!(out[2], 1.0);
    }
}
