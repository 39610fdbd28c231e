//! Grid functions, the norms they are measured in, and the functional constants.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::operators::{spectrum, DiscreteOperator, GreenMatrix};

/// Nodal values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite field value at node {i}"
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        Field { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &v| a.max(v.abs()))
    }
}

/// `sign(x)·|x|^a`.
pub fn signed_pow(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(a)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("norm exponent must be ≥ 1, got {p}")));
    }
    Ok(())
}

pub(crate) fn lp_of(values: &[f64], w: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |a, &v| a.max(v.abs()));
    }
    let sum: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
    (sum * w).powf(1.0 / p)
}

/// Discrete `L^p` norm; pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(lp_of(&f.values, f.grid.quad_weight(), p))
}

/// `L^p` norm weighted by the ground state.
pub fn lp_phi_norm(f: &Field, p: f64, phi1: &Field) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Err(Error::InvalidArgument("weighted norm needs finite p".into()));
    }
    if phi1.values.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("weight must be nonnegative".into()));
    }
    let sum: f64 = f
        .values
        .iter()
        .zip(&phi1.values)
        .map(|(v, w)| v.abs().powf(p) * w)
        .sum();
    Ok((sum * f.grid.quad_weight()).powf(1.0 / p))
}

fn checked_sqrt(q: f64, scale: f64) -> Result<f64> {
    if q < -1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NegativeQuadraticForm(q));
    }
    Ok(q.max(0.0).sqrt())
}

/// `‖f‖²_{H*} = ∫ f A^{-1} f`.
pub fn hstar_norm_sq(f: &[f64], green: &GreenMatrix) -> Result<f64> {
    let gf = green.apply(f);
    let w = green.grid.quad_weight();
    let q: f64 = f.iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>() * w;
    let scale: f64 = f.iter().zip(&gf).map(|(a, b)| (a * b).abs()).sum::<f64>() * w;
    checked_sqrt(q, scale).map(|r| r * r)
}

pub fn hstar_norm(f: &Field, green: &GreenMatrix) -> Result<f64> {
    hstar_norm_sq(&f.values, green).map(f64::sqrt)
}

/// `‖f‖²_H = ∫ f A f`.
pub fn h_norm_sq(f: &[f64], op: &DiscreteOperator) -> Result<f64> {
    let af = op.apply(f);
    let w = op.grid.quad_weight();
    let q: f64 = f.iter().zip(&af).map(|(a, b)| a * b).sum::<f64>() * w;
    let scale: f64 = f.iter().zip(&af).map(|(a, b)| (a * b).abs()).sum::<f64>() * w;
    checked_sqrt(q, scale).map(|r| r * r)
}

pub fn h_norm(f: &Field, op: &DiscreteOperator) -> Result<f64> {
    h_norm_sq(&f.values, op).map(f64::sqrt)
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidArgument(format!("m must lie in (0,1), got {m}")));
    }
    Ok(())
}

/// `Q[f] = ‖f^m‖²_H / ‖f‖_{1+m}^{2m}`.
pub fn rayleigh_q(f: &Field, op: &DiscreteOperator, m: f64) -> Result<f64> {
    check_m(m)?;
    if f.is_zero() {
        return Err(Error::InvalidArgument("Rayleigh quotient of the zero field".into()));
    }
    let fm: Vec<f64> = f.values.iter().map(|&v| signed_pow(v, m)).collect();
    let num = h_norm_sq(&fm, op)?;
    let den = lp_norm(f, 1.0 + m)?.powf(2.0 * m);
    Ok(num / den)
}

/// `Q*[f] = ‖f‖_{1+m}^{1+m} / ‖f‖_{H*}^{1+m}`.
pub fn rayleigh_qstar(f: &Field, green: &GreenMatrix, m: f64) -> Result<f64> {
    check_m(m)?;
    if f.is_zero() {
        return Err(Error::InvalidArgument("Rayleigh quotient of the zero field".into()));
    }
    let num = lp_norm(f, 1.0 + m)?.powf(1.0 + m);
    let den = hstar_norm(f, green)?.powf(1.0 + m);
    Ok(num / den)
}

/// Lower estimates of the Sobolev and HLS constants of the discrete operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalConstants {
    pub lambda1: f64,
    /// `None` when `N ≤ 2s`, where the critical exponent is undefined.
    pub sobolev_s: Option<f64>,
    pub hls_h: Option<f64>,
    pub two_star: Option<f64>,
    pub sobolev_converged: bool,
    pub hls_converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub random_starts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            random_starts: 50,
            seed: 0x5eed,
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

pub fn estimate_functional_constants(
    op: &DiscreteOperator,
    green: &GreenMatrix,
    n_eff: usize,
    s: f64,
) -> Result<FunctionalConstants> {
    estimate_functional_constants_with(op, green, n_eff, s, &EstimateOptions::default())
}

pub fn estimate_functional_constants_with(
    op: &DiscreteOperator,
    green: &GreenMatrix,
    n_eff: usize,
    s: f64,
    opts: &EstimateOptions,
) -> Result<FunctionalConstants> {
    let spec = spectrum(op)?;
    let lambda1 = spec.lambda1();
    let n = n_eff as f64;
    if n <= 2.0 * s {
        return Ok(FunctionalConstants {
            lambda1,
            sobolev_s: None,
            hls_h: None,
            two_star: None,
            sobolev_converged: false,
            hls_converged: false,
        });
    }
    let two_star = 2.0 * n / (n - 2.0 * s);
    let dual = 2.0 * n / (n + 2.0 * s);
    let w = op.grid.quad_weight();
    let len = op.len();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![spec.phi1.values.clone()];
    for _ in 0..opts.random_starts {
        let v: Vec<f64> = (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.abs()
            })
            .collect();
        starts.push(v);
    }

    // Sobolev: maximize ‖f‖_{2*} on the unit H-sphere; fixed point f ∝ A^{-1}(|f|^{2*-2} f).
    let h_normalize = |f: &mut Vec<f64>| -> Result<()> {
        let r = h_norm_sq(f, op)?.sqrt();
        f.iter_mut().for_each(|v| *v /= r);
        Ok(())
    };
    let mut best_s = 0.0f64;
    let mut conv_s = true;
    let mut s_points = Vec::with_capacity(starts.len());
    for start in &starts {
        let mut f = start.clone();
        h_normalize(&mut f)?;
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let rhs: Vec<f64> = f.iter().map(|&v| signed_pow(v, two_star - 1.0)).collect();
            let mut next = green.apply(&rhs);
            h_normalize(&mut next)?;
            let diff: Vec<f64> = next.iter().zip(&f).map(|(a, b)| a - b).collect();
            let step = h_norm_sq(&diff, op)?.sqrt();
            f = next;
            if step <= opts.tol {
                converged = true;
                break;
            }
        }
        conv_s &= converged;
        best_s = best_s.max(lp_of(&f, w, two_star));
        s_points.push(f);
    }

    // HLS: maximize ‖f‖_{H*} on the unit (2*)'-sphere; fixed point f ∝ |A^{-1} f|^{2*-2} A^{-1} f.
    let lp_normalize = |f: &mut Vec<f64>| {
        let r = lp_of(f, w, dual);
        f.iter_mut().for_each(|v| *v /= r);
    };
    let mut best_h = 0.0f64;
    let mut conv_h = true;
    let mut h_points = Vec::with_capacity(starts.len());
    for start in &starts {
        let mut f = start.clone();
        lp_normalize(&mut f);
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let g = green.apply(&f);
            let mut next: Vec<f64> = g.iter().map(|&v| signed_pow(v, two_star - 1.0)).collect();
            lp_normalize(&mut next);
            let diff: Vec<f64> = next.iter().zip(&f).map(|(a, b)| a - b).collect();
            let step = lp_of(&diff, w, dual);
            f = next;
            if step <= opts.tol {
                converged = true;
                break;
            }
        }
        conv_h &= converged;
        best_h = best_h.max(hstar_norm_sq(&f, green)?.sqrt());
        h_points.push(f);
    }

    // Each problem's optimizer maps to a feasible point of the other one.
    for f in &h_points {
        let g = green.apply(f);
        best_s = best_s.max(lp_of(&g, w, two_star) / h_norm_sq(&g, op)?.sqrt());
    }
    for g in &s_points {
        let f: Vec<f64> = g.iter().map(|&v| signed_pow(v, two_star - 1.0)).collect();
        best_h = best_h.max(hstar_norm_sq(&f, green)?.sqrt() / lp_of(&f, w, dual));
    }

    Ok(FunctionalConstants {
        lambda1,
        sobolev_s: Some(best_s),
        hls_h: Some(best_h),
        two_star: Some(two_star),
        sobolev_converged: conv_s,
        hls_converged: conv_h,
    })
}
