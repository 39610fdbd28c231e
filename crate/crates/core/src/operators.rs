//! Dense discretizations of the diffusion operator and their spectral data.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{boundary_distance, BoundaryDistance, Grid};
use crate::norms::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Local,
    Sfl,
    Rfl,
    Cfl,
    /// `A = I`; only meaningful for scalar ODE oracles.
    Identity,
}

impl OperatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorKind::Local => "local",
            OperatorKind::Sfl => "sfl",
            OperatorKind::Rfl => "rfl",
            OperatorKind::Cfl => "cfl",
            OperatorKind::Identity => "identity",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(OperatorKind::Local),
            "sfl" => Ok(OperatorKind::Sfl),
            "rfl" => Ok(OperatorKind::Rfl),
            "cfl" => Ok(OperatorKind::Cfl),
            "identity" => Ok(OperatorKind::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown operator kind '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Operator family, fractional order and the boundary exponent it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub s: f64,
    pub gamma: f64,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, s: f64) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("{kind}: {msg}, got s = {s}")));
        let gamma = match kind {
            OperatorKind::Local => {
                if s != 1.0 {
                    return bad("local Laplacian requires s = 1");
                }
                1.0
            }
            OperatorKind::Sfl => {
                if !(s > 0.0 && s <= 1.0) {
                    return bad("requires s in (0, 1]");
                }
                1.0
            }
            OperatorKind::Rfl => {
                if !(s > 0.0 && s < 1.0) {
                    return bad("requires s in (0, 1)");
                }
                s
            }
            OperatorKind::Cfl => {
                if !(s > 0.5 && s < 1.0) {
                    return bad("requires s in (1/2, 1)");
                }
                2.0 * s - 1.0
            }
            OperatorKind::Identity => {
                if s != 1.0 {
                    return bad("identity operator uses s = 1");
                }
                0.0
            }
        };
        Ok(OperatorSpec { kind, s, gamma })
    }
}

/// Symmetric positive-definite matrix standing in for the operator on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub spec: OperatorSpec,
    pub grid: Arc<Grid>,
    pub matrix: DMatrix<f64>,
    pub offdiag_nonpositive: bool,
}

impl DiscreteOperator {
    fn from_parts(spec: OperatorSpec, grid: Arc<Grid>, matrix: DMatrix<f64>) -> Self {
        let offdiag_nonpositive = offdiag_nonpositive(&matrix);
        DiscreteOperator {
            spec,
            grid,
            matrix,
            offdiag_nonpositive,
        }
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(v);
        (&self.matrix * x).data.into()
    }

    /// `Σ_i f_i (A g)_i h^dim`.
    pub fn bilinear(&self, f: &[f64], g: &[f64]) -> f64 {
        let ag = self.apply(g);
        f.iter().zip(&ag).map(|(a, b)| a * b).sum::<f64>() * self.grid.quad_weight()
    }
}

fn offdiag_nonpositive(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || a[(i, j)] <= 0.0))
}

fn ensure_positive_definite(a: &DMatrix<f64>) -> Result<()> {
    if a.clone().cholesky().is_none() {
        return Err(Error::Construction(
            "assembled matrix is not positive definite".into(),
        ));
    }
    Ok(())
}

/// Dispatch on `spec.kind`.
pub fn build_operator(grid: Arc<Grid>, spec: OperatorSpec) -> Result<DiscreteOperator> {
    match spec.kind {
        OperatorKind::Local => build_local_laplacian(grid),
        OperatorKind::Sfl => build_sfl(grid, spec.s),
        OperatorKind::Rfl => build_rfl(grid, spec.s),
        OperatorKind::Cfl => build_cfl(grid, spec.s),
        OperatorKind::Identity => Ok(build_identity(grid)),
    }
}

pub fn build_identity(grid: Arc<Grid>) -> DiscreteOperator {
    let spec = OperatorSpec::new(OperatorKind::Identity, 1.0).expect("static spec");
    let m = grid.len();
    DiscreteOperator::from_parts(spec, grid, DMatrix::identity(m, m))
}

/// Five-point (2D) or three-point (1D) Dirichlet stencil.
pub fn build_local_laplacian(grid: Arc<Grid>) -> Result<DiscreteOperator> {
    let spec = OperatorSpec::new(OperatorKind::Local, 1.0)?;
    let n = grid.n_per_axis();
    let m = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut a = DMatrix::zeros(m, m);
    for k in 0..m {
        a[(k, k)] = 2.0 * grid.dim() as f64 * inv_h2;
        let (i, j) = (k % n, k / n);
        if i > 0 {
            a[(k, k - 1)] = -inv_h2;
        }
        if i + 1 < n {
            a[(k, k + 1)] = -inv_h2;
        }
        if grid.dim() == 2 {
            if j > 0 {
                a[(k, k - n)] = -inv_h2;
            }
            if j + 1 < n {
                a[(k, k + n)] = -inv_h2;
            }
        }
    }
    Ok(DiscreteOperator::from_parts(spec, grid, a))
}

/// Spectral power `V diag(μ^s) Vᵀ` of the stencil Laplacian.
pub fn build_sfl(grid: Arc<Grid>, s: f64) -> Result<DiscreteOperator> {
    let spec = OperatorSpec::new(OperatorKind::Sfl, s)?;
    if s == 1.0 {
        let mut op = build_local_laplacian(grid)?;
        op.spec = spec;
        return Ok(op);
    }
    let base = laplacian_eigenpairs(&grid);
    let w = grid.quad_weight();
    let mut scaled = base.vectors.clone();
    for (k, mu) in base.values.iter().enumerate() {
        let f = mu.powf(s) * w;
        scaled.column_mut(k).scale_mut(f);
    }
    let mut a = scaled * base.vectors.transpose();
    symmetrize(&mut a);
    Ok(DiscreteOperator::from_parts(spec, grid, a))
}

/// Normalization constant of the kernel `c |z|^{-N-2s}`.
pub fn kernel_constant(dim: usize, s: f64) -> f64 {
    let nh = dim as f64 / 2.0;
    s * 4f64.powf(s) * libm::tgamma(nh + s) / (PI.powf(nh) * libm::tgamma(1.0 - s))
}

/// Integral of `c |z|^{-1-2s}` over a cell of width `h` centred at distance `d ≥ h`.
fn cell_weight_1d(c: f64, s: f64, h: f64, d: f64) -> f64 {
    c / (2.0 * s) * ((d - 0.5 * h).powf(-2.0 * s) - (d + 0.5 * h).powf(-2.0 * s))
}

/// Integral of `c |z|^{-1-2s}` over `a ≤ |z| ≤ b`, one side only.
fn ray_integral_1d(c: f64, s: f64, a: f64, b: f64) -> f64 {
    let upper = if b.is_finite() { b.powf(-2.0 * s) } else { 0.0 };
    c / (2.0 * s) * (a.powf(-2.0 * s) - upper)
}

/// Whether the assembled kernel operator includes the exterior of the domain.
#[derive(Clone, Copy, PartialEq, Eq)]
enum KernelDomain {
    WholeSpace,
    DomainOnly,
}

/// Restricted fractional Laplacian via exact cell integration of the kernel.
pub fn build_rfl(grid: Arc<Grid>, s: f64) -> Result<DiscreteOperator> {
    let spec = OperatorSpec::new(OperatorKind::Rfl, s)?;
    let a = assemble_kernel(&grid, s, KernelDomain::WholeSpace)?;
    ensure_positive_definite(&a)?;
    Ok(DiscreteOperator::from_parts(spec, grid, a))
}

/// Censored fractional Laplacian: same interactions, kernel restricted to the domain.
///
/// The strips between the outermost cells and the boundary carry the
/// homogeneous Dirichlet datum; without them the matrix would have zero row
/// sums and be singular.
pub fn build_cfl(grid: Arc<Grid>, s: f64) -> Result<DiscreteOperator> {
    let spec = OperatorSpec::new(OperatorKind::Cfl, s)?;
    if grid.n_per_axis() < 2 {
        return Err(Error::InvalidArgument(
            "censored operator needs at least two nodes per axis".into(),
        ));
    }
    let a = assemble_kernel(&grid, s, KernelDomain::DomainOnly)?;
    ensure_positive_definite(&a)?;
    Ok(DiscreteOperator::from_parts(spec, grid, a))
}

fn assemble_kernel(grid: &Grid, s: f64, domain: KernelDomain) -> Result<DMatrix<f64>> {
    match grid.dim() {
        1 => Ok(assemble_kernel_1d(grid, s, domain)),
        _ => assemble_kernel_2d(grid, s, domain),
    }
}

fn assemble_kernel_1d(grid: &Grid, s: f64, domain: KernelDomain) -> DMatrix<f64> {
    let n = grid.n_per_axis();
    let h = grid.h();
    let c = kernel_constant(1, s);
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                cell_weight_1d(c, s, h, k as f64 * h)
            }
        })
        .collect();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[(i, j)] = -weights[i.abs_diff(j)];
            }
        }
        a[(i, i)] = match domain {
            // everything outside the node's own cell
            KernelDomain::WholeSpace => 2.0 * ray_integral_1d(c, s, 0.5 * h, f64::INFINITY),
            KernelDomain::DomainOnly => {
                let x = grid.node(i)[0];
                let interior: f64 = (0..n).filter(|&j| j != i).map(|j| weights[i.abs_diff(j)]).sum();
                let left = ray_integral_1d(c, s, x - 0.5 * h, x);
                let right = ray_integral_1d(c, s, (1.0 - x) - 0.5 * h, 1.0 - x);
                interior + left + right
            }
        };
    }
    a
}

#[cfg(not(feature = "kernel-2d"))]
fn assemble_kernel_2d(_grid: &Grid, _s: f64, _domain: KernelDomain) -> Result<DMatrix<f64>> {
    Err(Error::InvalidArgument(
        "restricted/censored kernels in 2D need the `kernel-2d` feature".into(),
    ))
}

#[cfg(feature = "kernel-2d")]
fn assemble_kernel_2d(grid: &Grid, s: f64, domain: KernelDomain) -> Result<DMatrix<f64>> {
    use kernel2d::*;
    let n = grid.n_per_axis();
    if n > 64 {
        return Err(Error::InvalidArgument(
            "2D kernel assembly is limited to 64 nodes per axis".into(),
        ));
    }
    let h = grid.h();
    let c = kernel_constant(2, s);
    let rule = Rule::new();
    // Interaction weights depend only on the index offset.
    let mut table = vec![0.0; n * n];
    for dj in 0..n {
        for di in 0..n {
            if di == 0 && dj == 0 {
                continue;
            }
            table[di + dj * n] = c * rule.cell_integral(s, h, di, dj);
        }
    }
    let own_complement = c * outside_square(s, 0.5 * h);
    let m = grid.len();
    let mut a = DMatrix::zeros(m, m);
    for p in 0..m {
        for q in 0..m {
            if p != q {
                let [di, dj] = grid.index_offset(p, q);
                a[(p, q)] = -table[di + dj * n];
            }
        }
        a[(p, p)] = match domain {
            KernelDomain::WholeSpace => own_complement,
            KernelDomain::DomainOnly => {
                let x = grid.node(p);
                own_complement - c * rule.outside_unit_square(s, x)
            }
        };
    }
    Ok(a)
}

#[cfg(feature = "kernel-2d")]
mod kernel2d {
    use gauss_quad::legendre::GaussLegendre;
    use std::f64::consts::PI;

    /// Offsets at or below this Chebyshev distance use subdivided quadrature.
    const NEAR: usize = 3;
    const SUBDIV: usize = 4;

    pub struct Rule {
        pairs: Vec<(f64, f64)>,
    }

    impl Rule {
        pub fn new() -> Self {
            let gl = GaussLegendre::new(8.try_into().unwrap());
            Rule {
                pairs: gl.as_node_weight_pairs().to_vec(),
            }
        }

        fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            self.pairs
                .iter()
                .map(|&(x, w)| w * f(mid + half * x))
                .sum::<f64>()
                * half
        }

        /// `∫_{cell at offset (di,dj)} |z|^{-2-2s} dz`, cells of side `h`.
        pub fn cell_integral(&self, s: f64, h: f64, di: usize, dj: usize) -> f64 {
            let (cx, cy) = (di as f64 * h, dj as f64 * h);
            if di.max(dj) > NEAR {
                return h * h * cx.hypot(cy).powf(-2.0 - 2.0 * s);
            }
            let sub = h / SUBDIV as f64;
            let mut total = 0.0;
            for a in 0..SUBDIV {
                for b in 0..SUBDIV {
                    let x0 = cx - 0.5 * h + a as f64 * sub;
                    let y0 = cy - 0.5 * h + b as f64 * sub;
                    total += self.integrate(x0, x0 + sub, |x| {
                        self.integrate(y0, y0 + sub, |y| x.hypot(y).powf(-2.0 - 2.0 * s))
                    });
                }
            }
            total
        }

        /// `∫_{R² \ [0,1]²} |x−y|^{-2-2s} dy` for `x` inside the unit square.
        pub fn outside_unit_square(&self, s: f64, x: [f64; 2]) -> f64 {
            let exit = |t: f64| {
                let (c, sn) = (t.cos(), t.sin());
                let tx = if c > 0.0 {
                    (1.0 - x[0]) / c
                } else if c < 0.0 {
                    -x[0] / c
                } else {
                    f64::INFINITY
                };
                let ty = if sn > 0.0 {
                    (1.0 - x[1]) / sn
                } else if sn < 0.0 {
                    -x[1] / sn
                } else {
                    f64::INFINITY
                };
                tx.min(ty)
            };
            let mut cuts: Vec<f64> = [[1.0, 1.0], [0.0, 1.0], [0.0, 0.0], [1.0, 0.0]]
                .iter()
                .map(|v| (v[1] - x[1]).atan2(v[0] - x[0]).rem_euclid(2.0 * PI))
                .collect();
            cuts.push(0.0);
            cuts.push(2.0 * PI);
            cuts.sort_by(f64::total_cmp);
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let pieces = 8;
                let step = (b - a) / pieces as f64;
                for k in 0..pieces {
                    let lo = a + k as f64 * step;
                    total += self.integrate(lo, lo + step, |t| exit(t).powf(-2.0 * s));
                }
            }
            total / (2.0 * s)
        }
    }

    /// `∫_{R² \ [−r,r]²} |z|^{-2-2s} dz` in closed polar form.
    pub fn outside_square(s: f64, r: f64) -> f64 {
        let gl = GaussLegendre::new(40.try_into().unwrap());
        let angular = 8.0 * gl.integrate(0.0, PI / 4.0, |t| t.cos().powf(2.0 * s));
        r.powf(-2.0 * s) / (2.0 * s) * angular
    }
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Eigenvalues ascending, eigenvectors as columns orthonormal in the weighted inner product.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub phi1: Field,
}

impl SpectralData {
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }
}

struct Eigenpairs {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Closed-form eigenpairs of the stencil Laplacian, sorted ascending.
fn laplacian_eigenpairs(grid: &Grid) -> Eigenpairs {
    let n = grid.n_per_axis();
    let h = grid.h();
    let mu: Vec<f64> = (1..=n)
        .map(|k| 4.0 / (h * h) * (k as f64 * PI * h / 2.0).sin().powi(2))
        .collect();
    let mode = |k: usize, x: f64| 2f64.sqrt() * ((k + 1) as f64 * PI * x).sin();
    match grid.dim() {
        1 => {
            let vectors = DMatrix::from_fn(n, n, |i, k| mode(k, grid.node(i)[0]));
            Eigenpairs { values: mu, vectors }
        }
        _ => {
            let mut order: Vec<(usize, usize)> =
                (0..n).flat_map(|l| (0..n).map(move |k| (k, l))).collect();
            order.sort_by(|a, b| (mu[a.0] + mu[a.1]).total_cmp(&(mu[b.0] + mu[b.1])));
            let values = order.iter().map(|&(k, l)| mu[k] + mu[l]).collect();
            let m = grid.len();
            let vectors = DMatrix::from_fn(m, m, |p, col| {
                let (k, l) = order[col];
                let x = grid.node(p);
                mode(k, x[0]) * mode(l, x[1])
            });
            Eigenpairs { values, vectors }
        }
    }
}

fn finish_spectrum(grid: &Arc<Grid>, pairs: Eigenpairs) -> Result<SpectralData> {
    if let Some(&l1) = pairs.values.first() {
        if !(l1 > 0.0) {
            return Err(Error::NotPositiveDefinite(l1));
        }
    }
    let mut phi = pairs.vectors.column(0).iter().copied().collect::<Vec<f64>>();
    if phi.iter().sum::<f64>() < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    let mut vectors = pairs.vectors;
    for (i, v) in phi.iter().enumerate() {
        vectors[(i, 0)] = *v;
    }
    Ok(SpectralData {
        eigenvalues: pairs.values,
        eigenvectors: vectors,
        phi1: Field::new(grid.clone(), phi)?,
    })
}

/// Full eigen-decomposition; closed form for the stencil-based operators.
pub fn spectrum(op: &DiscreteOperator) -> Result<SpectralData> {
    match op.spec.kind {
        OperatorKind::Local | OperatorKind::Sfl => {
            let mut pairs = laplacian_eigenpairs(&op.grid);
            let s = op.spec.s;
            pairs.values.iter_mut().for_each(|mu| *mu = mu.powf(s));
            finish_spectrum(&op.grid, pairs)
        }
        _ => spectrum_numeric(op),
    }
}

/// Eigen-decomposition by the dense symmetric solver, regardless of kind.
pub fn spectrum_numeric(op: &DiscreteOperator) -> Result<SpectralData> {
    let eig = SymmetricEigen::try_new(op.matrix.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = 1.0 / op.grid.quad_weight().sqrt();
    let m = op.len();
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m, m, |i, col| eig.eigenvectors[(i, order[col])] * scale);
    finish_spectrum(&op.grid, Eigenpairs { values, vectors })
}

/// Discrete Green kernel: `(A^{-1} f)_i = Σ_j g_ij f_j h^dim`.
#[derive(Debug, Clone)]
pub struct GreenMatrix {
    pub grid: Arc<Grid>,
    pub g: DMatrix<f64>,
}

impl GreenMatrix {
    /// `A^{-1} f` evaluated through the kernel.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(f);
        let mut y = &self.g * x;
        y.scale_mut(self.grid.quad_weight());
        y.data.into()
    }
}

pub fn green_matrix(op: &DiscreteOperator) -> Result<GreenMatrix> {
    let chol = op.matrix.clone().cholesky().ok_or(Error::Singular)?;
    let mut g = chol.inverse();
    symmetrize(&mut g);
    g.scale_mut(1.0 / op.grid.quad_weight());
    Ok(GreenMatrix {
        grid: op.grid.clone(),
        g,
    })
}

/// Empirical constants in the two-sided Green function bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundReport {
    /// Weighted upper constant; `None` when the singular template does not apply.
    pub c1_hat: Option<f64>,
    /// Unweighted upper constant `max G |x−y|^{N−2s}`.
    pub c1_unweighted: Option<f64>,
    pub c0_hat: f64,
    pub k4_ratio_range: Option<(f64, f64)>,
    pub excluded_band: usize,
    pub upper_applicable: bool,
}

pub const DEFAULT_EXCLUDED_BAND: usize = 1;

pub fn check_kernel_bounds(green: &GreenMatrix, spec: &OperatorSpec) -> KernelBoundReport {
    check_kernel_bounds_with_band(green, spec, DEFAULT_EXCLUDED_BAND)
}

pub fn check_kernel_bounds_with_band(
    green: &GreenMatrix,
    spec: &OperatorSpec,
    band: usize,
) -> KernelBoundReport {
    let grid = &green.grid;
    let dim = grid.dim() as f64;
    let bd = boundary_distance(grid);
    let weight: Vec<f64> = bd.delta.iter().map(|d| d.powf(spec.gamma)).collect();
    let upper_applicable = dim > 2.0 * spec.s;
    let m = grid.len();
    let mut c0 = f64::INFINITY;
    let mut c1u = f64::NEG_INFINITY;
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for q in 0..m {
        for p in 0..m {
            let [di, dj] = grid.index_offset(p, q);
            if di.max(dj) <= band {
                continue;
            }
            let gpq = green.g[(p, q)];
            c0 = c0.min(gpq / (weight[p] * weight[q]));
            if upper_applicable {
                let r = grid.distance(p, q);
                let rg = r.powf(spec.gamma);
                let sing = r.powf(dim - 2.0 * spec.s);
                let template = (weight[p] / rg).min(1.0) * (weight[q] / rg).min(1.0) / sing;
                let ratio = gpq / template;
                rmin = rmin.min(ratio);
                rmax = rmax.max(ratio);
                c1u = c1u.max(gpq * sing);
            }
        }
    }
    let any = rmax.is_finite();
    KernelBoundReport {
        c1_hat: any.then_some(rmax),
        c1_unweighted: any.then_some(c1u),
        c0_hat: c0,
        k4_ratio_range: any.then_some((rmin, rmax)),
        excluded_band: band,
        upper_applicable,
    }
}

/// Least-squares slope of `log Φ_1` against `log δ` over `2h ≤ δ ≤ 0.1`.
pub fn fit_boundary_exponent(spectral: &SpectralData, bd: &BoundaryDistance) -> Result<f64> {
    let grid = spectral.phi1.grid();
    if grid.n_per_axis() < 32 {
        return Err(Error::InvalidArgument(
            "boundary exponent fit needs at least 32 nodes per axis".into(),
        ));
    }
    let lo = 2.0 * grid.h() * (1.0 - 1e-12);
    let (xs, ys): (Vec<f64>, Vec<f64>) = bd
        .delta
        .iter()
        .zip(spectral.phi1.values())
        .filter(|(d, phi)| **d >= lo && **d <= 0.1 && **phi > 0.0)
        .map(|(d, phi)| (d.ln(), phi.ln()))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::TooFewNodes(xs.len()));
    }
    Ok(ols_slope(&xs, &ys))
}

pub(crate) fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_grid;
    use approx::assert_relative_eq;

    fn grid(dim: usize, n: usize) -> Arc<Grid> {
        Arc::new(make_grid(dim, n).unwrap())
    }

    #[test]
    fn local_stencil_small() {
        let op = build_local_laplacian(grid(1, 3)).unwrap();
        let expect = DMatrix::from_row_slice(
            3,
            3,
            &[32.0, -16.0, 0.0, -16.0, 32.0, -16.0, 0.0, -16.0, 32.0],
        );
        assert_eq!(op.matrix, expect);
        assert!(op.offdiag_nonpositive);
    }

    #[test]
    fn local_row_sums() {
        for (dim, n) in [(1, 9), (2, 5)] {
            let op = build_local_laplacian(grid(dim, n)).unwrap();
            let sums = op.apply(&vec![1.0; op.len()]);
            assert!(sums.iter().all(|&v| v >= 0.0));
            assert!(sums[0] > 0.0 && sums[op.len() - 1] > 0.0);
        }
    }

    #[test]
    fn local_lambda1_oracle() {
        let op = build_local_laplacian(grid(1, 3)).unwrap();
        let expect = 64.0 * (PI / 8.0).sin().powi(2);
        assert_relative_eq!(expect, 9.372583002030478, epsilon = 1e-12);
        let num = spectrum_numeric(&op).unwrap();
        assert_relative_eq!(num.lambda1(), expect, epsilon = 1e-12);
        let ana = spectrum(&op).unwrap();
        assert_relative_eq!(ana.lambda1(), expect, epsilon = 1e-12);
    }

    #[test]
    fn sfl_half_lambda1_oracle() {
        let op = build_sfl(grid(1, 3), 0.5).unwrap();
        let num = spectrum_numeric(&op).unwrap();
        let expect = (64.0 * (PI / 8.0).sin().powi(2)).sqrt();
        assert_relative_eq!(expect, 3.0615, epsilon = 1e-4);
        assert_relative_eq!(num.lambda1(), expect, epsilon = 1e-12);
    }

    #[test]
    fn sfl_unit_order_is_local() {
        for (dim, n) in [(1, 8), (2, 4)] {
            let g = grid(dim, n);
            let a = build_sfl(g.clone(), 1.0).unwrap();
            let b = build_local_laplacian(g).unwrap();
            assert!((a.matrix - b.matrix).amax() < 1e-10);
        }
    }

    #[test]
    fn sfl_eigenvalues_are_powers() {
        for (dim, n, s) in [(1, 12, 0.3), (2, 5, 0.7)] {
            let g = grid(dim, n);
            let base = spectrum_numeric(&build_local_laplacian(g.clone()).unwrap()).unwrap();
            let frac = spectrum_numeric(&build_sfl(g, s).unwrap()).unwrap();
            for (mu, lam) in base.eigenvalues.iter().zip(&frac.eigenvalues) {
                assert_relative_eq!(mu.powf(s), *lam, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn analytic_matches_numeric_spectrum() {
        let op = build_sfl(grid(2, 6), 0.4).unwrap();
        let a = spectrum(&op).unwrap();
        let b = spectrum_numeric(&op).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert_relative_eq!(x, y, max_relative = 1e-10);
        }
        for (x, y) in a.phi1.values().iter().zip(b.phi1.values()) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn rfl_single_node_closed_form() {
        let s = 0.3;
        let op = build_rfl(grid(1, 1), s).unwrap();
        let c = kernel_constant(1, s);
        // everything outside [1/4, 3/4] seen from 1/2
        let expect = c * 0.25f64.powf(-2.0 * s) / s;
        assert_relative_eq!(op.matrix[(0, 0)], expect, max_relative = 1e-14);
    }

    #[test]
    fn kernel_constant_values() {
        // s = 1/2 in 1D gives the Cauchy kernel constant 1/π
        assert_relative_eq!(kernel_constant(1, 0.5), 1.0 / PI, max_relative = 1e-14);
        // s = 1/2 in 2D: Γ(3/2)·√4/(2πΓ(1/2)) = 1/(2π)
        assert_relative_eq!(kernel_constant(2, 0.5), 0.5 / PI, max_relative = 1e-14);
    }

    #[test]
    fn rfl_positive_on_constants() {
        let op = build_rfl(grid(1, 40), 0.6).unwrap();
        assert!(op.offdiag_nonpositive);
        let r = op.apply(&vec![1.0; op.len()]);
        assert!(r.iter().all(|&v| v > 0.0));
        // (A 1)_i equals the exterior tail ∫_{R∖[h/2,1−h/2]} K(x_i − y) dy
        let (h, c, s) = (op.grid.h(), kernel_constant(1, 0.6), 0.6);
        for i in [0, 7, 20] {
            let x = op.grid.node(i)[0];
            let tail = c / (2.0 * s) * ((x - h / 2.0).powf(-2.0 * s) + (1.0 - h / 2.0 - x).powf(-2.0 * s));
            assert_relative_eq!(r[i], tail, max_relative = 1e-9);
        }
    }

    #[test]
    fn cfl_shares_offdiagonals_and_has_smaller_diagonal() {
        let g = grid(1, 20);
        let r = build_rfl(g.clone(), 0.75).unwrap();
        let c = build_cfl(g, 0.75).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if i != j {
                    assert_eq!(r.matrix[(i, j)], c.matrix[(i, j)]);
                }
            }
            assert!(c.matrix[(i, i)] < r.matrix[(i, i)]);
        }
    }

    #[test]
    fn cfl_rejections() {
        assert!(build_cfl(grid(1, 1), 0.75).is_err());
        assert!(build_cfl(grid(1, 8), 0.4).is_err());
        assert!(build_cfl(grid(1, 8), 0.5).is_err());
        assert!(build_rfl(grid(1, 8), 1.0).is_err());
        assert!(OperatorSpec::new(OperatorKind::Local, 0.5).is_err());
    }

    #[cfg(not(feature = "kernel-2d"))]
    #[test]
    fn rfl_2d_needs_feature() {
        assert!(build_rfl(grid(2, 4), 0.5).is_err());
    }

    #[test]
    fn green_inverts_operator() {
        for op in [
            build_local_laplacian(grid(1, 10)).unwrap(),
            build_sfl(grid(2, 4), 0.5).unwrap(),
            build_rfl(grid(1, 15), 0.3).unwrap(),
            build_cfl(grid(1, 15), 0.8).unwrap(),
        ] {
            let g = green_matrix(&op).unwrap();
            let f: Vec<f64> = (0..op.len()).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
            let back = op.apply(&g.apply(&f));
            for (a, b) in f.iter().zip(&back) {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
            let gmax = g.g.amax();
            assert!(g.g.iter().all(|&v| v >= -1e-10 * gmax));
        }
    }

    #[test]
    fn green_single_node() {
        let op = build_local_laplacian(grid(1, 1)).unwrap();
        let g = green_matrix(&op).unwrap();
        assert_relative_eq!(g.g[(0, 0)], 1.0 / (op.matrix[(0, 0)] * 0.5), max_relative = 1e-14);
    }

    #[test]
    fn green_on_ground_state() {
        let op = build_rfl(grid(1, 30), 0.4).unwrap();
        let sp = spectrum(&op).unwrap();
        let g = green_matrix(&op).unwrap();
        let out = g.apply(sp.phi1.values());
        for (o, p) in out.iter().zip(sp.phi1.values()) {
            assert_relative_eq!(*o, p / sp.lambda1(), epsilon = 1e-9);
        }
    }

    #[test]
    fn eigenvectors_orthonormal_and_phi1_nonnegative() {
        for op in [
            build_rfl(grid(1, 24), 0.6).unwrap(),
            build_cfl(grid(1, 24), 0.6).unwrap(),
            build_sfl(grid(2, 5), 0.3).unwrap(),
        ] {
            let sp = spectrum(&op).unwrap();
            let gram = sp.eigenvectors.transpose() * &sp.eigenvectors * op.grid.quad_weight();
            let id = DMatrix::<f64>::identity(op.len(), op.len());
            assert!((gram - id).amax() < 1e-10);
            assert!(sp.phi1.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn sfl_boundary_exponent() {
        let op = build_sfl(grid(1, 64), 0.75).unwrap();
        let sp = spectrum(&op).unwrap();
        let g = fit_boundary_exponent(&sp, &boundary_distance(&op.grid)).unwrap();
        assert!((g - 1.0).abs() < 0.15, "gamma_hat = {g}");
    }

    #[test]
    fn boundary_fit_needs_resolution() {
        let op = build_sfl(grid(1, 16), 0.75).unwrap();
        let sp = spectrum(&op).unwrap();
        assert!(fit_boundary_exponent(&sp, &boundary_distance(&op.grid)).is_err());
    }

    #[test]
    fn kernel_bounds_gating() {
        let op = build_sfl(grid(1, 32), 0.75).unwrap();
        let g = green_matrix(&op).unwrap();
        let rep = check_kernel_bounds(&g, &op.spec);
        assert!(!rep.upper_applicable);
        assert!(rep.c1_hat.is_none());
        assert!(rep.c0_hat > 0.0);

        let op = build_rfl(grid(1, 32), 0.3).unwrap();
        let g = green_matrix(&op).unwrap();
        let rep = check_kernel_bounds(&g, &op.spec);
        let c1 = rep.c1_hat.unwrap();
        assert!(rep.c0_hat <= c1);
        let (lo, hi) = rep.k4_ratio_range.unwrap();
        assert!(lo > 0.0 && lo <= hi);
    }
}
