//! Implicit proximal time stepping, trajectories and exact oracles.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{h_norm_sq, hstar_norm_sq, lp_of, signed_pow, Field};
use crate::operators::{green_matrix, ols_slope, spectrum, DiscreteOperator, GreenMatrix, SpectralData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DtPolicy {
    Fixed,
    Adaptive,
}

/// Time-stepping, Newton and extinction policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_policy: DtPolicy,
    /// Adaptive step `adapt_c · ‖u‖_∞^{1−m}`.
    pub adapt_c: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Adaptive steps never exceed `max(dt_init, time_frac · t)`.
    pub time_frac: f64,
    /// Newton stops once `‖F‖_∞ ≤ newton_tol · ‖u‖_∞`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub max_halvings: usize,
    /// Extinction threshold relative to `‖u_0‖_∞`.
    pub extinction_eps: f64,
    pub t_max: f64,
    /// First snapshot time; later ones grow geometrically by `probe_ratio`.
    pub probe_t_first: f64,
    pub probe_ratio: f64,
    /// Number of final steps kept as snapshots.
    pub tail_snapshots: usize,
    /// Keep a snapshot after every step.
    pub record_all: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_init: 1e-4,
            dt_policy: DtPolicy::Adaptive,
            adapt_c: 0.01,
            dt_min: 1e-14,
            dt_max: f64::INFINITY,
            time_frac: 0.05,
            newton_tol: 1e-12,
            newton_max_iter: 60,
            max_halvings: 20,
            extinction_eps: 1e-10,
            t_max: 1e6,
            probe_t_first: 1e-4,
            probe_ratio: 2.0,
            tail_snapshots: 30,
            record_all: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("newton_tol", self.newton_tol),
            ("extinction_eps", self.extinction_eps),
            ("t_max", self.t_max),
            ("probe_t_first", self.probe_t_first),
            ("time_frac", self.time_frac),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dt_policy == DtPolicy::Adaptive && !(self.adapt_c > 0.0) {
            return Err(Error::InvalidArgument("adapt_c must be positive".into()));
        }
        if self.newton_max_iter < 1 {
            return Err(Error::InvalidArgument("newton_max_iter must be ≥ 1".into()));
        }
        if !(self.probe_ratio > 1.0) {
            return Err(Error::InvalidArgument("probe_ratio must exceed 1".into()));
        }
        Ok(())
    }

    /// Fixed step `dt`, with extinction checked at every step.
    pub fn fixed(dt: f64) -> Self {
        SolverConfig {
            dt_init: dt,
            dt_policy: DtPolicy::Fixed,
            ..Default::default()
        }
    }
}

/// An operator together with its ground state and Green matrix.
#[derive(Debug, Clone)]
pub struct OperatorData {
    pub op: DiscreteOperator,
    pub spectral: SpectralData,
    pub green: GreenMatrix,
}

impl OperatorData {
    pub fn new(op: DiscreteOperator) -> Result<Self> {
        let spectral = spectrum(&op)?;
        let green = green_matrix(&op)?;
        Ok(OperatorData { op, spectral, green })
    }

    pub fn phi1(&self) -> &Field {
        &self.spectral.phi1
    }

    pub fn lambda1(&self) -> f64 {
        self.spectral.lambda1()
    }
}

/// Norms of `u(t)` recorded after every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    pub l1: f64,
    pub lp: Vec<f64>,
    /// Ground-state weighted norms for the same exponents as `lp`.
    pub lp_phi: Vec<f64>,
    pub linf: f64,
    pub l1phi: f64,
    pub l1pm: f64,
    pub hstar: f64,
    /// `‖u^m‖_H`.
    pub h_um: f64,
    /// NaN once the field vanishes.
    pub q: f64,
    pub qstar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionRecord {
    pub t_hat: f64,
    pub t_fit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionEstimate {
    pub t_hat: f64,
    pub t_fit: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub m: f64,
    pub data: Arc<OperatorData>,
    pub lp_exponents: Vec<f64>,
    /// One row per accepted step, starting with `t = 0`.
    pub norms: Vec<NormRow>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub extinction: Option<ExtinctionRecord>,
    pub extinction_threshold: f64,
    /// The datum had negative entries and was replaced by its absolute value.
    pub signed_input: bool,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.norms.iter().map(|r| r.t).collect()
    }

    pub fn initial(&self) -> &Field {
        &self.snapshots[0]
    }

    /// Snapshot at exactly time `t`, if one was recorded.
    pub fn snapshot_at(&self, t: f64) -> Option<&Field> {
        self.snapshot_times
            .iter()
            .position(|&s| s == t)
            .map(|k| &self.snapshots[k])
    }
}

/// `E(u) = ∫ |u|^{1+m}/(1+m)`.
pub fn energy(u: &Field, m: f64) -> f64 {
    lp_of(u.values(), u.grid().quad_weight(), 1.0 + m).powf(1.0 + m) / (1.0 + m)
}

/// Exact solution of the scalar ODE `u' = −a u^m`.
pub fn scalar_solution(t: f64, u0: f64, a: f64, m: f64) -> f64 {
    let y = u0.powf(1.0 - m) - (1.0 - m) * a * t;
    if y <= 0.0 {
        0.0
    } else {
        y.powf(1.0 / (1.0 - m))
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One backward-Euler step: solve `w + dt·A w^m = u`.
pub fn proximal_step(op: &DiscreteOperator, u: &Field, m: f64, dt: f64, cfg: &SolverConfig) -> Result<Field> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidArgument(format!("m must lie in (0,1), got {m}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let uinf = u.max_abs();
    if uinf == 0.0 {
        return Ok(Field::zeros(u.grid().clone()));
    }
    let clip = op.offdiag_nonpositive;
    let p = 1.0 / m;
    let uvals = u.values();
    let n = uvals.len();
    let dt_a = &op.matrix * dt;
    let tol = cfg.newton_tol * uinf;

    let residual = |v: &DVector<f64>| -> Vec<f64> {
        let av = &dt_a * v;
        (0..n).map(|i| signed_pow(v[i], p) + av[i] - uvals[i]).collect()
    };

    let mut v = DVector::from_iterator(n, uvals.iter().map(|&x| signed_pow(x, m)));
    if clip {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
    }
    let mut f = residual(&v);
    let mut fnorm = l2(&f);
    for _ in 0..cfg.newton_max_iter {
        if inf_norm(&f) <= tol {
            let w: Vec<f64> = v.iter().map(|&x| signed_pow(x, p)).collect();
            return Field::new(u.grid().clone(), w);
        }
        let mut jac = dt_a.clone();
        for i in 0..n {
            jac[(i, i)] += p * v[i].abs().powf(p - 1.0);
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|x| -x));
        let delta = match jac.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => jac.lu().solve(&rhs).ok_or(Error::Singular)?,
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = &v + &delta * alpha;
            if clip {
                trial.iter_mut().for_each(|x| *x = x.max(0.0));
            }
            let ft = residual(&trial);
            let tn = l2(&ft);
            if tn < fnorm || inf_norm(&ft) <= tol {
                v = trial;
                f = ft;
                fnorm = tn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if inf_norm(&f) <= tol {
        let w: Vec<f64> = v.iter().map(|&x| signed_pow(x, p)).collect();
        return Field::new(u.grid().clone(), w);
    }
    Err(Error::NewtonDivergence {
        iterations: cfg.newton_max_iter,
        residual: inf_norm(&f),
    })
}

fn weighted_lp(vals: &[f64], phi: &[f64], w: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return f64::NAN;
    }
    let sum: f64 = vals.iter().zip(phi).map(|(v, f)| v.abs().powf(p) * f).sum();
    (sum * w).powf(1.0 / p)
}

/// Norm row for `u` at time `t`.
pub fn norm_row(data: &OperatorData, u: &Field, m: f64, t: f64, lp_exponents: &[f64]) -> Result<NormRow> {
    let w = u.grid().quad_weight();
    let vals = u.values();
    let l1pm = lp_of(vals, w, 1.0 + m);
    let hstar = hstar_norm_sq(vals, &data.green)?.sqrt();
    let um: Vec<f64> = vals.iter().map(|&x| signed_pow(x, m)).collect();
    let h_um = h_norm_sq(&um, &data.op)?.sqrt();
    let zero = u.is_zero();
    let l1phi = vals
        .iter()
        .zip(data.phi1().values())
        .map(|(a, b)| a.abs() * b)
        .sum::<f64>()
        * w;
    Ok(NormRow {
        t,
        l1: lp_of(vals, w, 1.0),
        lp: lp_exponents.iter().map(|&p| lp_of(vals, w, p)).collect(),
        lp_phi: lp_exponents
            .iter()
            .map(|&p| weighted_lp(vals, data.phi1().values(), w, p))
            .collect(),
        linf: lp_of(vals, w, f64::INFINITY),
        l1phi,
        l1pm,
        hstar,
        h_um,
        q: if zero { f64::NAN } else { h_um * h_um / l1pm.powf(2.0 * m) },
        qstar: if zero {
            f64::NAN
        } else {
            l1pm.powf(1.0 + m) / hstar.powf(1.0 + m)
        },
    })
}

/// Geometric probe times `t_first · ratio^k` below `t_max`.
fn probe_times(cfg: &SolverConfig) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = cfg.probe_t_first;
    while t < cfg.t_max && out.len() < 10_000 {
        out.push(t);
        t *= cfg.probe_ratio;
    }
    out
}

pub fn run_flow(
    data: Arc<OperatorData>,
    u0: &Field,
    m: f64,
    cfg: &SolverConfig,
    lp_exponents: &[f64],
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidArgument(format!("m must lie in (0,1), got {m}")));
    }
    let signed_input = u0.values().iter().any(|&v| v < 0.0);
    let u0 = if signed_input { u0.map(f64::abs) } else { u0.clone() };
    let threshold = cfg.extinction_eps * u0.max_abs();
    let mut traj = Trajectory {
        m,
        data: data.clone(),
        lp_exponents: lp_exponents.to_vec(),
        norms: vec![norm_row(&data, &u0, m, 0.0, lp_exponents)?],
        snapshot_times: vec![0.0],
        snapshots: vec![u0.clone()],
        extinction: None,
        extinction_threshold: threshold,
        signed_input,
    };
    if u0.is_zero() {
        traj.extinction = Some(ExtinctionRecord { t_hat: 0.0, t_fit: None });
        return Ok(traj);
    }

    let probes = probe_times(cfg);
    let mut next_probe = 0usize;
    let mut tail: VecDeque<(f64, Field)> = VecDeque::with_capacity(cfg.tail_snapshots + 1);
    let mut u = u0;
    let mut t = 0.0;
    let mut extinct = false;

    while t < cfg.t_max {
        let mut dt = match cfg.dt_policy {
            DtPolicy::Fixed => cfg.dt_init,
            DtPolicy::Adaptive => {
                let raw = cfg.adapt_c * u.max_abs().powf(1.0 - m);
                let cap = cfg.dt_init.max(cfg.time_frac * t);
                raw.min(cap).clamp(cfg.dt_min, cfg.dt_max)
            }
        };
        let mut hit_probe = false;
        if next_probe < probes.len() && t + dt >= probes[next_probe] {
            dt = probes[next_probe] - t;
            hit_probe = true;
        }
        if t + dt > cfg.t_max {
            dt = cfg.t_max - t;
        }

        let mut halvings = 0;
        let w = loop {
            match proximal_step(&data.op, &u, m, dt, cfg) {
                Ok(w) => break w,
                Err(Error::NewtonDivergence { .. }) if halvings < cfg.max_halvings => {
                    dt *= 0.5;
                    hit_probe = false;
                    halvings += 1;
                }
                Err(e) => return Err(e),
            }
        };
        t = if hit_probe { probes[next_probe] } else { t + dt };
        if hit_probe {
            next_probe += 1;
        }
        while next_probe < probes.len() && probes[next_probe] <= t {
            next_probe += 1;
        }
        u = w;
        traj.norms.push(norm_row(&data, &u, m, t, lp_exponents)?);
        if hit_probe || cfg.record_all {
            traj.snapshot_times.push(t);
            traj.snapshots.push(u.clone());
        } else if cfg.tail_snapshots > 0 {
            tail.push_back((t, u.clone()));
            if tail.len() > cfg.tail_snapshots {
                tail.pop_front();
            }
        }
        if u.max_abs() < threshold {
            extinct = true;
            break;
        }
    }

    if !cfg.record_all {
        let mut merged: Vec<(f64, Field)> = traj
            .snapshot_times
            .drain(..)
            .zip(traj.snapshots.drain(..))
            .chain(tail)
            .collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        merged.dedup_by(|a, b| a.0 == b.0);
        for (s, f) in merged {
            traj.snapshot_times.push(s);
            traj.snapshots.push(f);
        }
    }

    if extinct {
        let t_fit = detect_extinction(&traj).ok().map(|e| e.t_fit);
        traj.extinction = Some(ExtinctionRecord { t_hat: t, t_fit });
    }
    Ok(traj)
}

/// Extinction time: first sub-threshold time and the zero of the linear law for `‖u‖_{1+m}^{1−m}`.
pub fn detect_extinction(traj: &Trajectory) -> Result<ExtinctionEstimate> {
    let k = traj
        .norms
        .iter()
        .position(|r| r.linf < traj.extinction_threshold)
        .ok_or_else(|| Error::InsufficientData("trajectory never reached the extinction threshold".into()))?;
    let t_hat = traj.norms[k].t;
    let (ts, ys): (Vec<f64>, Vec<f64>) = traj.norms[..=k]
        .iter()
        .filter(|r| r.t >= 0.9 * t_hat)
        .map(|r| (r.t, r.l1pm.powf(1.0 - traj.m)))
        .unzip();
    if ts.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} points in the fit window, need 8",
            ts.len()
        )));
    }
    let slope = ols_slope(&ts, &ys);
    let n = ts.len() as f64;
    let intercept = ys.iter().sum::<f64>() / n - slope * ts.iter().sum::<f64>() / n;
    if !(slope < 0.0) {
        return Err(Error::InsufficientData("norm law is not decreasing".into()));
    }
    Ok(ExtinctionEstimate {
        t_hat,
        t_fit: -intercept / slope,
    })
}

fn separable_residual(op: &DiscreteOperator, v: &[f64], m: f64) -> Vec<f64> {
    let av = op.apply(v);
    av.iter()
        .zip(v)
        .map(|(a, &x)| a - signed_pow(x, 1.0 / m) / (1.0 - m))
        .collect()
}

fn profile_ok(op: &DiscreteOperator, v: &[f64], m: f64) -> bool {
    let w: Vec<f64> = v.iter().map(|&x| signed_pow(x, 1.0 / m)).collect();
    let winf = inf_norm(&w);
    winf > 0.0 && inf_norm(&separable_residual(op, v, m)) <= 1e-10 * winf
}

fn newton_profile(op: &DiscreteOperator, mut v: Vec<f64>, m: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = v.len();
    let p = 1.0 / m;
    for _ in 0..max_iter {
        if profile_ok(op, &v, m) {
            return Some(v);
        }
        let f = separable_residual(op, &v, m);
        let mut jac: DMatrix<f64> = op.matrix.clone();
        for i in 0..n {
            jac[(i, i)] -= p * v[i].abs().powf(p - 1.0) / (1.0 - m);
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|x| -x));
        let delta = jac.lu().solve(&rhs)?;
        let f0 = l2(&f);
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(a, d)| a + alpha * d).collect();
            if l2(&separable_residual(op, &trial, m)) < f0 {
                v = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    profile_ok(op, &v, m).then_some(v)
}

/// Nonnegative solution of `A w^m = w/(1−m)` reached from the ground-state direction.
pub fn solve_separable_profile(data: &OperatorData, m: f64) -> Result<Field> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidArgument(format!("m must lie in (0,1), got {m}")));
    }
    let op = &data.op;
    let w = op.grid.quad_weight();
    let phi = data.phi1().values();
    let p = 1.0 / m;
    let proj: f64 = phi.iter().map(|&x| x.powf(p) * x).sum::<f64>() * w;
    let c = (data.lambda1() * (1.0 - m) / proj).powf(1.0 / (p - 1.0));
    let start: Vec<f64> = phi.iter().map(|x| c * x).collect();

    let v = newton_profile(op, start, m, 100).or_else(|| {
        // normalized superlinear power iteration, then polish
        let mut z: Vec<f64> = phi.to_vec();
        let mut nu = 1.0;
        for _ in 0..10_000 {
            let zp: Vec<f64> = z.iter().map(|&x| signed_pow(x, p)).collect();
            let next = data.green.apply(&zp);
            nu = l2(&next) * w.sqrt();
            let next: Vec<f64> = next.iter().map(|x| x / nu).collect();
            let diff = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            z = next;
            if diff < 1e-14 {
                break;
            }
        }
        let kappa = ((1.0 - m) / nu).powf(1.0 / (p - 1.0));
        let v: Vec<f64> = z.iter().map(|x| kappa * x).collect();
        newton_profile(op, v, m, 100)
    });
    match v {
        Some(v) if v.iter().all(|&x| x >= -1e-14 * inf_norm(&v)) => {
            let prof: Vec<f64> = v.iter().map(|&x| x.max(0.0).powf(p)).collect();
            Field::new(op.grid.clone(), prof)
        }
        Some(_) => Err(Error::ProfileNotFound("solution changes sign".into())),
        None => Err(Error::ProfileNotFound("Newton and fixed-point iterations failed".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_grid;
    use crate::norms::{lp_norm, rayleigh_q};
    use crate::operators::{build_identity, build_local_laplacian, build_rfl, build_sfl};
    use approx::assert_relative_eq;

    fn grid(n: usize) -> Arc<crate::mesh::Grid> {
        Arc::new(make_grid(1, n).unwrap())
    }

    fn bisect_scalar(u: f64, a: f64, m: f64, dt: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, u);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + dt * a * mid.powf(m) > u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn step_of_zero_is_zero() {
        let op = build_local_laplacian(grid(5)).unwrap();
        let z = Field::zeros(op.grid.clone());
        let w = proximal_step(&op, &z, 0.5, 0.1, &SolverConfig::default()).unwrap();
        assert!(w.is_zero());
    }

    #[test]
    fn scalar_step_matches_bisection() {
        let g = grid(1);
        let op = build_local_laplacian(g.clone()).unwrap();
        let a = op.matrix[(0, 0)];
        for (u, m, dt) in [(1.0, 0.5, 0.01), (3.0, 0.2, 0.5), (0.01, 0.8, 1.0)] {
            let f = Field::new(g.clone(), vec![u]).unwrap();
            let w = proximal_step(&op, &f, m, dt, &SolverConfig::default()).unwrap();
            assert_relative_eq!(w.values()[0], bisect_scalar(u, a, m, dt), epsilon = 1e-12 * u);
        }
    }

    #[test]
    fn step_solves_equation() {
        let op = build_rfl(grid(20), 0.4).unwrap();
        let u = Field::from_fn(op.grid.clone(), |x| (std::f64::consts::PI * x[0]).sin()).unwrap();
        let m = 0.3;
        let w = proximal_step(&op, &u, m, 0.05, &SolverConfig::default()).unwrap();
        let wm: Vec<f64> = w.values().iter().map(|&x| signed_pow(x, m)).collect();
        let awm = op.apply(&wm);
        for i in 0..20 {
            let r = w.values()[i] + 0.05 * awm[i] - u.values()[i];
            assert!(r.abs() < 1e-11);
        }
        assert!(w.values().iter().all(|&x| x >= 0.0));
        assert!(w.max_abs() <= u.max_abs());
    }

    #[test]
    fn scalar_closed_form() {
        assert_relative_eq!(scalar_solution(1.0, 1.0, 1.0, 0.5), 0.25);
        assert_eq!(scalar_solution(2.5, 1.0, 1.0, 0.5), 0.0);
    }

    fn scalar_data() -> Arc<OperatorData> {
        Arc::new(OperatorData::new(build_identity(grid(1))).unwrap())
    }

    #[test]
    fn zero_datum_extinguishes_immediately() {
        let d = scalar_data();
        let z = Field::zeros(d.op.grid.clone());
        let tr = run_flow(d, &z, 0.5, &SolverConfig::fixed(0.01), &[]).unwrap();
        assert_eq!(tr.extinction.unwrap().t_hat, 0.0);
    }

    #[test]
    fn scalar_extinction_time() {
        let d = scalar_data();
        let u0 = Field::new(d.op.grid.clone(), vec![1.0]).unwrap();
        let tr = run_flow(d, &u0, 0.5, &SolverConfig::fixed(1e-3), &[2.0]).unwrap();
        let est = detect_extinction(&tr).unwrap();
        assert!((est.t_fit - 2.0).abs() < 0.02, "{est:?}");
        assert!((est.t_hat - 2.0).abs() < 0.02, "{est:?}");
    }

    #[test]
    fn no_extinction_before_t_max() {
        let d = scalar_data();
        let u0 = Field::new(d.op.grid.clone(), vec![1.0]).unwrap();
        let cfg = SolverConfig {
            t_max: 0.5,
            ..SolverConfig::fixed(0.01)
        };
        let tr = run_flow(d, &u0, 0.5, &cfg, &[]).unwrap();
        assert!(tr.extinction.is_none());
        assert!(matches!(detect_extinction(&tr), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn scalar_profile_oracle() {
        let g = grid(1);
        let op = build_local_laplacian(g).unwrap();
        let a = op.matrix[(0, 0)];
        let d = OperatorData::new(op).unwrap();
        for m in [0.3, 0.5, 0.8] {
            let w = solve_separable_profile(&d, m).unwrap();
            assert_relative_eq!(w.values()[0], ((1.0 - m) * a).powf(1.0 / (1.0 - m)), max_relative = 1e-10);
        }
    }

    #[test]
    fn profile_residual_and_quotient() {
        for op in [build_rfl(grid(40), 0.6).unwrap(), build_sfl(grid(40), 0.5).unwrap()] {
            let d = OperatorData::new(op).unwrap();
            let m = 0.6;
            let w = solve_separable_profile(&d, m).unwrap();
            let wm: Vec<f64> = w.values().iter().map(|&x| x.powf(m)).collect();
            let r = d.op.apply(&wm);
            for (a, b) in r.iter().zip(w.values()) {
                assert!((a - b / (1.0 - m)).abs() <= 1e-10 * w.max_abs());
            }
            let q = rayleigh_q(&w, &d.op, m).unwrap();
            let expect = lp_norm(&w, 1.0 + m).unwrap().powf(1.0 - m) / (1.0 - m);
            assert_relative_eq!(q, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn energy_dissipation_per_step() {
        let op = build_rfl(grid(24), 0.3).unwrap();
        let d = OperatorData::new(op).unwrap();
        let m = 0.4;
        let mut u = Field::from_fn(d.op.grid.clone(), |x| 1.0 + (9.0 * x[0]).cos()).unwrap();
        for _ in 0..20 {
            let w = proximal_step(&d.op, &u, m, 0.02, &SolverConfig::default()).unwrap();
            let diff: Vec<f64> = w.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
            let lhs = energy(&w, m) + hstar_norm_sq(&diff, &d.green).unwrap() / (2.0 * 0.02);
            assert!(lhs <= energy(&u, m) * (1.0 + 1e-10));
            u = w;
        }
    }
}
