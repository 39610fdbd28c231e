use std::sync::Arc;

use ffde_core::constants::critical_exponents;
use ffde_core::flow::{run_flow, OperatorData, SolverConfig};
use ffde_core::operators::fit_boundary_exponent;
use ffde_core::verify::{check_smoothing, refinement_drift, SmoothingKind, MAX_DRIFT};
use ffde_core::{boundary_distance, build_operator, make_grid, Datum, OperatorKind, OperatorSpec};
use serde::Serialize;

/// Curves are thinned to at most this many points.
pub const MAX_POINTS: usize = 1500;
/// Largest grid the page may request.
pub const MAX_N: usize = 512;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(err)
}

fn operator(kind: &str, s: f64, n: usize) -> Result<Arc<OperatorData>, String> {
    if n == 0 || n > MAX_N {
        return Err(format!("n must lie in 1..={MAX_N}, got {n}"));
    }
    let kind: OperatorKind = kind.parse().map_err(err)?;
    let spec = OperatorSpec::new(kind, s).map_err(err)?;
    let grid = Arc::new(make_grid(1, n).map_err(err)?);
    let op = build_operator(grid, spec).map_err(err)?;
    Ok(Arc::new(OperatorData::new(op).map_err(err)?))
}

#[derive(Serialize)]
struct Profile {
    x: Vec<f64>,
    phi1: Vec<f64>,
    lambda1: f64,
    eigenvalues_head: Vec<f64>,
    gamma: f64,
    gamma_hat: Option<f64>,
    offdiag_nonpositive: bool,
}

pub fn operator_profile(kind: &str, s: f64, n: usize) -> Result<String, String> {
    let data = operator(kind, s, n)?;
    let grid = &data.op.grid;
    let phi = data.phi1().values();
    let top = phi.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let gamma_hat = if n >= 32 {
        fit_boundary_exponent(&data.spectral, &boundary_distance(grid)).ok()
    } else {
        None
    };
    to_json(&Profile {
        x: grid.nodes().iter().map(|p| p[0]).collect(),
        phi1: phi.iter().map(|v| v / top).collect(),
        lambda1: data.lambda1(),
        eigenvalues_head: data.spectral.eigenvalues.iter().take(8).copied().collect(),
        gamma: data.op.spec.gamma,
        gamma_hat,
        offdiag_nonpositive: data.op.offdiag_nonpositive,
    })
}

#[derive(Serialize, Default)]
struct Curves {
    t: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
    linf: Vec<f64>,
    l1phi: Vec<f64>,
    l1pm: Vec<f64>,
    hstar: Vec<f64>,
    q: Vec<f64>,
    /// `‖u‖_{1+m}^{1−m}`, linear in time up to extinction for separable data.
    rate: Vec<f64>,
    t_hat: Option<f64>,
    t_fit: Option<f64>,
    steps: usize,
}

fn parse_datum(name: &str) -> Result<Datum, String> {
    Ok(match name {
        "bump" => Datum::Bump,
        "eigenfunction" => Datum::Eigenfunction,
        "point_mass" => Datum::PointMass,
        "separable" => Datum::Separable,
        other => return Err(format!("unknown datum '{other}'")),
    })
}

fn thin(len: usize) -> Vec<usize> {
    if len <= MAX_POINTS {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..MAX_POINTS).map(|k| k * (len - 1) / (MAX_POINTS - 1)).collect();
    idx.dedup();
    idx
}

pub fn flow_curves(kind: &str, s: f64, n: usize, m: f64, datum: &str, t_max: f64) -> Result<String, String> {
    let data = operator(kind, s, n)?;
    let u0 = parse_datum(datum)?.build(&data, m, 1.0).map_err(err)?;
    let cfg = SolverConfig {
        dt_init: 1e-7,
        time_frac: 0.05,
        t_max,
        tail_snapshots: 0,
        ..Default::default()
    };
    let traj = run_flow(data, &u0, m, &cfg, &[2.0]).map_err(err)?;
    let mut c = Curves {
        steps: traj.norms.len(),
        t_hat: traj.extinction.map(|e| e.t_hat),
        t_fit: traj.extinction.and_then(|e| e.t_fit),
        ..Default::default()
    };
    for k in thin(traj.norms.len()) {
        let r = &traj.norms[k];
        c.t.push(r.t);
        c.l1.push(r.l1);
        c.l2.push(r.lp[0]);
        c.linf.push(r.linf);
        c.l1phi.push(r.l1phi);
        c.l1pm.push(r.l1pm);
        c.hstar.push(r.hstar);
        c.q.push(r.q);
        c.rate.push(r.l1pm.powf(1.0 - m));
    }
    to_json(&c)
}

pub fn exponent_table(dim: usize, s: f64, m: f64, gamma: f64) -> Result<String, String> {
    to_json(&critical_exponents(dim, s, m, gamma).map_err(err)?)
}

#[derive(Serialize, Default)]
struct Lines {
    m: Vec<f64>,
    /// `p_c(m)`; smoothing from `L^p` needs `p > p_c`.
    p_c: Vec<f64>,
    /// Weighted critical exponent, `None` where `2s ≤ γ`.
    p_c_gamma: Vec<Option<f64>>,
    m_c: f64,
    m_s: f64,
}

pub fn phase_lines(dim: usize, s: f64, gamma: f64, samples: usize) -> Result<String, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let mut out = Lines::default();
    for k in 0..samples {
        let m = (k as f64 + 0.5) / samples as f64;
        let t = critical_exponents(dim, s, m, gamma).map_err(err)?;
        out.m.push(m);
        out.p_c.push(t.p_c);
        out.p_c_gamma.push(t.p_c_gamma.finite());
        out.m_c = t.m_c;
        out.m_s = t.m_s;
    }
    to_json(&out)
}

#[derive(Serialize)]
struct Cell {
    m: f64,
    p: f64,
    kappa: Vec<Option<f64>>,
    ratios: Vec<f64>,
    bounded: bool,
    predicted_bounded: bool,
}

pub fn smoothing_cells(kind: &str, s: f64, ms: &[f64], ps: &[f64], ns: &[usize]) -> Result<String, String> {
    if ms.is_empty() || ps.is_empty() || ns.is_empty() {
        return Err("m, p and n lists must be non-empty".into());
    }
    let ops: Vec<Arc<OperatorData>> = ns.iter().map(|&n| operator(kind, s, n)).collect::<Result<_, _>>()?;
    let cfg = SolverConfig {
        dt_init: 1e-9,
        time_frac: 0.05,
        adapt_c: 0.05,
        probe_t_first: 1e-7,
        probe_ratio: 1.25,
        t_max: 50.0,
        tail_snapshots: 0,
        ..Default::default()
    };
    let mut cells = Vec::new();
    for &m in ms {
        let p_c = critical_exponents(1, s, m, 0.0).map_err(err)?.p_c;
        let trajs = ops
            .iter()
            .map(|d| {
                let u0 = Datum::PointMass.build(d, m, 1.0).map_err(err)?;
                run_flow(d.clone(), &u0, m, &cfg, ps).map_err(err)
            })
            .collect::<Result<Vec<_>, String>>()?;
        for &p in ps {
            let kappa: Vec<Option<f64>> = trajs
                .iter()
                .map(|t| check_smoothing(t, p, SmoothingKind::Lp).ok().and_then(|r| r.empirical_constant))
                .collect();
            let ks: Vec<f64> = kappa.iter().map(|k| k.unwrap_or(f64::NAN)).collect();
            let drift = refinement_drift(&ks, MAX_DRIFT);
            cells.push(Cell {
                m,
                p,
                kappa,
                ratios: drift.ratios,
                bounded: drift.stable,
                predicted_bounded: p > p_c,
            });
        }
    }
    to_json(&cells)
}
