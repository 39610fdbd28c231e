//! Closed-form exponents and constants of the a-priori estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A constant that may sit on a pole of its formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Tagged {
    Finite(f64),
    Pole,
}

impl Tagged {
    fn from_denominator(num: f64, den: f64) -> Self {
        if den.abs() <= 1e-14 * num.abs().max(1.0) {
            Tagged::Pole
        } else {
            Tagged::Finite(num / den)
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Tagged::Finite(v) => Some(v),
            Tagged::Pole => None,
        }
    }

    pub fn is_pole(self) -> bool {
        matches!(self, Tagged::Pole)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GoodFastDiffusion,
    VeryFastDiffusion,
}

/// Critical exponents for given `(N, s, m, γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub n: usize,
    pub s: f64,
    pub m: f64,
    pub gamma: f64,
    pub m_c: f64,
    pub p_c: f64,
    pub m_s: f64,
    pub m_c_gamma: f64,
    pub p_c_gamma: Tagged,
    pub two_star: Tagged,
    pub theta_1pm: Tagged,
    pub regime: Regime,
    /// `N ≤ 2s`: formulas are evaluated but the results lie outside their hypotheses.
    pub outside_hypotheses: bool,
}

impl ExponentTable {
    /// `1/(2sp − N(1−m))`.
    pub fn theta(&self, p: f64) -> Tagged {
        theta_p(self.n, self.s, self.m, p)
    }

    /// `1/((2s−γ)p − N(1−m))`.
    pub fn theta_gamma(&self, p: f64) -> Tagged {
        let nn = self.n as f64;
        Tagged::from_denominator(1.0, (2.0 * self.s - self.gamma) * p - nn * (1.0 - self.m))
    }
}

pub fn theta_p(n: usize, s: f64, m: f64, p: f64) -> Tagged {
    Tagged::from_denominator(1.0, 2.0 * s * p - n as f64 * (1.0 - m))
}

pub fn critical_exponents(n: usize, s: f64, m: f64, gamma: f64) -> Result<ExponentTable> {
    if n < 1 {
        return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidArgument(format!("s must lie in (0,1], got {s}")));
    }
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidArgument(format!("m must lie in (0,1), got {m}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0,1], got {gamma}")));
    }
    let nn = n as f64;
    let m_c = (nn - 2.0 * s) / nn;
    Ok(ExponentTable {
        n,
        s,
        m,
        gamma,
        m_c,
        p_c: nn * (1.0 - m) / (2.0 * s),
        m_s: (nn - 2.0 * s) / (nn + 2.0 * s),
        m_c_gamma: (nn + gamma - 2.0 * s) / nn,
        p_c_gamma: Tagged::from_denominator(nn * (1.0 - m), 2.0 * s - gamma),
        two_star: Tagged::from_denominator(2.0 * nn, nn - 2.0 * s),
        theta_1pm: Tagged::from_denominator(1.0, 2.0 * s * (1.0 + m) - nn * (1.0 - m)),
        regime: if m > m_c {
            Regime::GoodFastDiffusion
        } else {
            Regime::VeryFastDiffusion
        },
        outside_hypotheses: nn <= 2.0 * s,
    })
}

/// Constant of the `L^p → L^q` smoothing step.
pub fn kappa_pq(p: f64, q: f64, n: usize, s: f64, m: f64, sobolev: f64) -> Result<f64> {
    let nn = n as f64;
    let p_c = nn * (1.0 - m) / (2.0 * s);
    if p <= p_c {
        return Err(Error::InvalidArgument(format!("p = {p} must exceed p_c = {p_c}")));
    }
    if q < p || q <= 1.0 {
        return Err(Error::InvalidArgument(format!("need q ≥ p and q > 1, got p = {p}, q = {q}")));
    }
    let th = 1.0 / (2.0 * s * p - nn * (1.0 - m));
    let base = nn * sobolev * sobolev * (q - p) * (q + m - 1.0).powi(2) * th / (4.0 * q * (q - 1.0) * m);
    let expo = nn * (q - p) * th / q;
    if expo == 0.0 {
        return Ok(1.0);
    }
    Ok(base.powf(expo))
}

/// `c̄ = (N S²/(2m)) · p²/((p−1)(2sp − N(1−m)))`.
pub fn moser_cbar(p: f64, n: usize, s: f64, m: f64, sobolev: f64) -> f64 {
    let nn = n as f64;
    nn * sobolev * sobolev / (2.0 * m) * p * p / ((p - 1.0) * (2.0 * s * p - nn * (1.0 - m)))
}

/// Limit constant of the Moser iteration: `2^{N/(sp)} c̄^{Nϑ_p}`.
pub fn moser_kappa(p: f64, n: usize, s: f64, m: f64, sobolev: f64) -> Result<f64> {
    let nn = n as f64;
    let p_c = nn * (1.0 - m) / (2.0 * s);
    if p <= 1.0f64.max(p_c) {
        return Err(Error::InvalidArgument(format!(
            "p = {p} must exceed max(1, p_c) = {}",
            1.0f64.max(p_c)
        )));
    }
    if p.is_infinite() {
        return Ok(1.0);
    }
    let th = 1.0 / (2.0 * s * p - nn * (1.0 - m));
    let cbar = moser_cbar(p, n, s, m, sobolev);
    Ok(2f64.powf(nn / (s * p)) * cbar.powf(nn * th))
}

/// `c_{p,m} = (p+m−1)/(m(1−m))`.
pub fn cpm(p: f64, m: f64) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) || p + m <= 1.0 {
        return Err(Error::InvalidArgument(format!("need 0<m<1 and p+m>1, got p={p}, m={m}")));
    }
    Ok((p + m - 1.0) / (m * (1.0 - m)))
}

/// `c_{m,q} = 4(q−1)m/(q+m−1)²`.
pub fn cmq(m: f64, q: f64) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) || q <= 1.0 {
        return Err(Error::InvalidArgument(format!("need 0<m<1 and q>1, got m={m}, q={q}")));
    }
    Ok(4.0 * (q - 1.0) * m / (q + m - 1.0).powi(2))
}

/// Constant in the Stroock–Varopoulos inequality, `4(q−1)/q²`.
pub fn stroock_varopoulos_constant(q: f64) -> f64 {
    4.0 * (q - 1.0) / (q * q)
}

/// `c(α,λ,θ) = 1/((1−λ)^α (1 − θ/λ^α))`.
pub fn degiorgi_constant(alpha: f64, lambda: f64, theta: f64) -> Result<f64> {
    if alpha <= 0.0 || !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "need α>0 and θ∈[0,1), got α={alpha}, θ={theta}"
        )));
    }
    let lo = theta.powf(1.0 / alpha);
    if !(lambda > lo && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda} outside ({lo}, 1)"
        )));
    }
    Ok(1.0 / ((1.0 - lambda).powf(alpha) * (1.0 - theta / lambda.powf(alpha))))
}

/// Minimizes `degiorgi_constant` over λ by golden-section search; returns `(λ*, c*)`.
pub fn degiorgi_optimal(alpha: f64, theta: f64) -> Result<(f64, f64)> {
    degiorgi_constant(alpha, 0.5 * (1.0 + theta.powf(1.0 / alpha)), theta)?;
    let f = |l: f64| {
        degiorgi_constant(alpha, l, theta).unwrap_or(f64::INFINITY)
    };
    let (lambda, c) = golden_section_min(f, theta.powf(1.0 / alpha), 1.0, 1e-10);
    Ok((lambda, c))
}

/// Golden-section search for the minimum of a unimodal function on `(a, b)`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Boundary profile of the upper boundary estimate for a value `φ = Φ_1(x)`.
pub fn boundary_profile_b1(phi: f64, s: f64, gamma: f64) -> f64 {
    let d = 2.0 * s - gamma;
    if d.abs() <= 1e-14 {
        phi * (1.0 + phi.ln().abs())
    } else if d > 0.0 {
        phi
    } else {
        phi.powf(2.0 * s / gamma)
    }
}

/// Which branch of the Green-function `L^q` estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenBranch {
    Linear,
    Logarithmic,
    Power,
    NotApplicable,
}

/// Branch selection for `q` against the thresholds `N/(N−2s+γ)` and `N/(N−2s)`.
pub fn green_branch(q: f64, n: usize, s: f64, gamma: f64) -> GreenBranch {
    let nn = n as f64;
    if nn <= 2.0 * s || q <= 0.0 {
        return GreenBranch::NotApplicable;
    }
    let upper = nn / (nn - 2.0 * s);
    if q >= upper {
        return GreenBranch::NotApplicable;
    }
    let switch = nn / (nn - 2.0 * s + gamma);
    if (q - switch).abs() <= 1e-12 * switch {
        GreenBranch::Logarithmic
    } else if q < switch {
        GreenBranch::Linear
    } else {
        GreenBranch::Power
    }
}

/// Profile `B_q(φ)` of the Green-function `L^q` upper estimate.
pub fn boundary_profile_bq(phi: f64, q: f64, n: usize, s: f64, gamma: f64) -> Option<f64> {
    let nn = n as f64;
    match green_branch(q, n, s, gamma) {
        GreenBranch::Linear => Some(phi),
        GreenBranch::Logarithmic => Some(phi * (1.0 + phi.ln().abs().powf(1.0 / q))),
        GreenBranch::Power => Some(phi.powf((nn - q * (nn - 2.0 * s)) / (q * gamma))),
        GreenBranch::NotApplicable => None,
    }
}

/// `α_c = min{1, (N+2s)(1−m)/(4s)}`.
pub fn alpha_c(n: usize, s: f64, m: f64) -> f64 {
    let nn = n as f64;
    1f64.min((nn + 2.0 * s) * (1.0 - m) / (4.0 * s))
}

/// Decay constant `λ_1^{1/(1−m)} ‖Φ_1‖_1` of the weighted `L^1` extinction bound.
pub fn l1phi_decay_constant(lambda1: f64, phi1_l1: f64, m: f64) -> f64 {
    lambda1.powf(1.0 / (1.0 - m)) * phi1_l1
}

/// The two candidate lower bounds on the extinction time from `L^1_{Φ_1}` data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionLowerBounds {
    /// `λ_1 (‖u_0‖_{L^1_{Φ_1}} ‖Φ_1‖_1)^{1−m}` as printed.
    pub printed: f64,
    /// `‖u_0‖^{1−m}_{L^1_{Φ_1}} / ((1−m) λ_1 ‖Φ_1‖_1^{1−m})` from integrating the decay ODE.
    pub integrated: f64,
}

pub fn extinction_lower_bounds(
    u0_l1phi: f64,
    lambda1: f64,
    phi1_l1: f64,
    m: f64,
) -> ExtinctionLowerBounds {
    ExtinctionLowerBounds {
        printed: lambda1 * (u0_l1phi * phi1_l1).powf(1.0 - m),
        integrated: u0_l1phi.powf(1.0 - m) / ((1.0 - m) * lambda1 * phi1_l1.powf(1.0 - m)),
    }
}
