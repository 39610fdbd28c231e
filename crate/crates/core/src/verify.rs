//! Estimate harness: evaluates the a-priori inequalities along computed trajectories.
//!
//! Every check returns an [`InequalityReport`]. Hypotheses are tested before any
//! arithmetic that could produce a verdict; when they fail the report is
//! `not_applicable`, although free constants are still measured where the formula
//! is finite so that refinement studies can watch them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::{
    alpha_c, boundary_profile_b1, boundary_profile_bq, cpm, critical_exponents, extinction_lower_bounds,
    green_branch, l1phi_decay_constant, stroock_varopoulos_constant, ExponentTable, ExtinctionLowerBounds,
    GreenBranch, Tagged,
};
use crate::error::{Error, Result};
use crate::flow::{detect_extinction, Trajectory};
use crate::norms::{hstar_norm_sq, lp_of, signed_pow, Field};
use crate::operators::{DiscreteOperator, GreenMatrix, SpectralData};

/// Relative slack for inequalities with explicit constants.
pub const EXPLICIT_TOL: f64 = 0.01;
/// Relative slack for the time-monotonicity and contraction checks.
pub const MONOTONE_TOL: f64 = 1e-8;
/// Relative per-step slack for the Rayleigh quotients.
pub const RAYLEIGH_TOL: f64 = 1e-6;
/// Scale-relative slack for the algebraic inequalities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Relative slack for step-to-step norm decay (Newton residual is relative 1e-12).
pub const DECAY_TOL: f64 = 1e-10;
/// Largest refinement ratio still called stable.
pub const MAX_DRIFT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    HoldsWithConstant,
    Violated,
    NotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::HoldsWithConstant => "holds_with_constant",
            Verdict::Violated => "violated",
            Verdict::NotApplicable => "not_applicable",
        }
    }
}

/// One evaluated instance of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub node: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub ok: bool,
}

impl Record {
    fn new(lhs: f64, rhs: f64) -> Self {
        Record {
            label: None,
            t0: None,
            t1: None,
            node: None,
            lhs,
            rhs,
            ratio: ratio(lhs, rhs),
            ok: true,
        }
    }

    fn at(mut self, t: f64) -> Self {
        self.t1 = Some(t);
        self
    }

    fn pair(mut self, t0: f64, t1: f64) -> Self {
        self.t0 = Some(t0);
        self.t1 = Some(t1);
        self
    }

    fn node(mut self, k: usize) -> Self {
        self.node = Some(k);
        self
    }

    fn label(mut self, l: &str) -> Self {
        self.label = Some(l.to_string());
        self
    }

    /// Marks the record against `lhs ≤ rhs·(1+rel) + abs`.
    fn judge(mut self, rel: f64, abs: f64) -> Self {
        self.ok = self.lhs <= self.rhs * (1.0 + rel) + abs;
        self
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs <= rhs {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub records: Vec<Record>,
    /// Sup of the constant-free ratio (or the measured free constant).
    pub empirical_constant: Option<f64>,
    pub theoretical_constant: Option<f64>,
    pub verdict: Verdict,
    pub hypothesis_note: String,
    pub tol: f64,
}

/// Compact form used for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub name: String,
    pub hypothesis_note: String,
    pub verdict: Verdict,
    pub empirical_constant: Option<f64>,
    pub theoretical_constant: Option<f64>,
    pub n_records: usize,
    pub worst_record: Option<Record>,
}

impl InequalityReport {
    fn not_applicable(name: &str, note: impl Into<String>) -> Self {
        InequalityReport {
            name: name.into(),
            records: Vec::new(),
            empirical_constant: None,
            theoretical_constant: None,
            verdict: Verdict::NotApplicable,
            hypothesis_note: note.into(),
            tol: 0.0,
        }
    }

    /// Verdict from the per-record flags; the empirical constant is the largest ratio.
    fn judged(name: &str, records: Vec<Record>, tol: f64, note: impl Into<String>) -> Self {
        let verdict = if records.iter().all(|r| r.ok) {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        let empirical_constant = max_ratio(&records);
        InequalityReport {
            name: name.into(),
            records,
            empirical_constant,
            theoretical_constant: None,
            verdict,
            hypothesis_note: note.into(),
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, Verdict::Holds | Verdict::HoldsWithConstant)
    }

    /// Record with the largest ratio.
    pub fn worst_record(&self) -> Option<&Record> {
        self.records
            .iter()
            .filter(|r| !r.ratio.is_nan())
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.ok)
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            name: self.name.clone(),
            hypothesis_note: self.hypothesis_note.clone(),
            verdict: self.verdict,
            empirical_constant: self.empirical_constant,
            theoretical_constant: self.theoretical_constant,
            n_records: self.records.len(),
            worst_record: self.worst_record().cloned(),
        }
    }

    pub fn with_theoretical(mut self, c: Option<f64>) -> Self {
        self.theoretical_constant = c;
        self
    }
}

fn max_ratio(records: &[Record]) -> Option<f64> {
    records
        .iter()
        .map(|r| r.ratio)
        .filter(|r| !r.is_nan())
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
}

fn exponent_table(traj: &Trajectory) -> Result<ExponentTable> {
    let spec = traj.data.op.spec;
    critical_exponents(traj.data.op.grid.dim(), spec.s, traj.m, spec.gamma)
}

fn dimension_note(t: &ExponentTable) -> Option<String> {
    t.outside_hypotheses
        .then(|| format!("outside stated hypotheses: N = {} ≤ 2s = {}", t.n, 2.0 * t.s))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

/// Source norm for the smoothing family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingKind {
    Lp,
    LpPhi,
    Hstar,
}

impl std::str::FromStr for SmoothingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lp" => Ok(SmoothingKind::Lp),
            "lpphi" | "lp_phi" => Ok(SmoothingKind::LpPhi),
            "hstar" => Ok(SmoothingKind::Hstar),
            other => Err(Error::InvalidArgument(format!("unknown smoothing kind {other:?}"))),
        }
    }
}

/// `(t, ‖u(t)‖_source, ‖u(t)‖_∞)` at every recorded time level.
///
/// Uses the per-step norm rows when they carry the requested norm and falls back
/// to the stored snapshots otherwise.
fn source_series(traj: &Trajectory, kind: SmoothingKind, p: f64) -> Result<Vec<(f64, f64, f64)>> {
    let rows = &traj.norms;
    let idx = traj.lp_exponents.iter().position(|&q| close(q, p));
    let from_rows = |f: &dyn Fn(&crate::flow::NormRow) -> f64| rows.iter().map(|r| (r.t, f(r), r.linf)).collect();
    match kind {
        SmoothingKind::Hstar => return Ok(from_rows(&|r| r.hstar)),
        SmoothingKind::Lp => {
            if close(p, 1.0) {
                return Ok(from_rows(&|r| r.l1));
            }
            if close(p, 1.0 + traj.m) {
                return Ok(from_rows(&|r| r.l1pm));
            }
            if p.is_infinite() {
                return Ok(from_rows(&|r| r.linf));
            }
            if let Some(i) = idx {
                return Ok(from_rows(&|r| r.lp[i]));
            }
        }
        SmoothingKind::LpPhi => {
            if close(p, 1.0) {
                return Ok(from_rows(&|r| r.l1phi));
            }
            if let Some(i) = idx {
                return Ok(from_rows(&|r| r.lp_phi[i]));
            }
        }
    }
    let phi = traj.data.phi1().values();
    traj.snapshot_times
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, u)| {
            let w = u.grid().quad_weight();
            let v = match kind {
                SmoothingKind::Lp => lp_of(u.values(), w, p),
                _ => {
                    let sum: f64 = u.values().iter().zip(phi).map(|(a, f)| a.abs().powf(p) * f).sum();
                    (sum * w).powf(1.0 / p)
                }
            };
            Ok((t, v, u.max_abs()))
        })
        .collect()
}

/// Smoothing exponents `(ϑ, time exponent, norm exponent)` for the kind, or a reason they do not exist.
fn smoothing_exponents(t: &ExponentTable, kind: SmoothingKind, p: f64) -> std::result::Result<(f64, f64, f64), String> {
    let nn = t.n as f64;
    let s = t.s;
    match kind {
        SmoothingKind::Lp => match t.theta(p) {
            Tagged::Finite(th) => Ok((th, nn * th, 2.0 * s * p * th)),
            Tagged::Pole => Err(format!("p = {p} sits on p_c; the exponent has a pole")),
        },
        SmoothingKind::LpPhi => match t.theta_gamma(p) {
            Tagged::Finite(th) => Ok((th, nn * th, (2.0 * s - t.gamma) * p * th)),
            Tagged::Pole => Err(format!("p = {p} sits on p_c,γ; the exponent has a pole")),
        },
        SmoothingKind::Hstar => match t.theta_1pm {
            Tagged::Finite(th) => Ok((th, (nn + 2.0 * s) * th, 4.0 * s * th)),
            Tagged::Pole => Err("m sits on m_s; the exponent has a pole".into()),
        },
    }
}

/// Hypothesis gate for the smoothing family; `None` when every hypothesis holds.
fn smoothing_gate(t: &ExponentTable, kind: SmoothingKind, p: f64) -> Option<String> {
    if let Some(n) = dimension_note(t) {
        return Some(n);
    }
    match kind {
        SmoothingKind::Lp => {
            if p < 1.0 {
                Some(format!("p = {p} < 1"))
            } else if t.m <= t.m_c && p <= t.p_c {
                Some(format!("m = {} ≤ m_c = {} requires p > p_c = {}", t.m, t.m_c, t.p_c))
            } else {
                None
            }
        }
        SmoothingKind::LpPhi => {
            if 2.0 * t.s <= t.gamma {
                Some(format!("weighted estimate needs 2s > γ, got 2s = {}, γ = {}", 2.0 * t.s, t.gamma))
            } else if p < 1.0 {
                Some(format!("p = {p} < 1"))
            } else {
                match t.p_c_gamma {
                    Tagged::Finite(pcg) if t.m <= t.m_c_gamma && p <= pcg => Some(format!(
                        "m = {} ≤ m_c,γ = {} requires p > p_c,γ = {pcg}",
                        t.m, t.m_c_gamma
                    )),
                    _ => None,
                }
            }
        }
        SmoothingKind::Hstar => (t.m <= t.m_s).then(|| format!("H* smoothing needs m > m_s = {}", t.m_s)),
    }
}

/// Free-constant `X → L^∞` smoothing: `κ̂ = sup ‖u(t)‖_∞ (t−t0)^{a} / ‖u(t0)‖_X^{b}` over time pairs.
pub fn check_smoothing(traj: &Trajectory, p: f64, kind: SmoothingKind) -> Result<InequalityReport> {
    let name = match kind {
        SmoothingKind::Lp => "smoothing.lp",
        SmoothingKind::LpPhi => "smoothing.lp_phi",
        SmoothingKind::Hstar => "smoothing.hstar",
    };
    let table = exponent_table(traj)?;
    let gate = smoothing_gate(&table, kind, p);
    let (_, a, b) = match smoothing_exponents(&table, kind, p) {
        Ok(e) => e,
        Err(why) => return Ok(InequalityReport::not_applicable(name, why)),
    };
    let series = source_series(traj, kind, p)?;
    let mut records = Vec::new();
    for j in 1..series.len() {
        let (t1, _, linf) = series[j];
        let mut best: Option<(f64, usize)> = None;
        for (i, &(t0, src, _)) in series[..j].iter().enumerate() {
            if src == 0.0 || t1 <= t0 {
                continue;
            }
            let k = linf * (t1 - t0).powf(a) / src.powf(b);
            if best.is_none_or(|(v, _)| k > v) {
                best = Some((k, i));
            }
        }
        if let Some((k, i)) = best {
            let mut r = Record::new(k, 1.0).pair(series[i].0, t1);
            r.ratio = k;
            records.push(r);
        }
    }
    let sup = max_ratio(&records);
    let verdict = match (&gate, sup) {
        (Some(_), _) => Verdict::NotApplicable,
        (None, Some(k)) if k.is_finite() => Verdict::HoldsWithConstant,
        (None, None) => Verdict::NotApplicable,
        _ => Verdict::Violated,
    };
    Ok(InequalityReport {
        name: name.into(),
        records,
        empirical_constant: sup,
        theoretical_constant: None,
        verdict,
        hypothesis_note: gate.unwrap_or_else(|| format!("exponents a = {a}, b = {b}")),
        tol: 0.0,
    })
}

/// Behaviour of an empirical constant along a refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementDrift {
    pub constants: Vec<f64>,
    /// Consecutive ratios `c_{k+1}/c_k`.
    pub ratios: Vec<f64>,
    /// Every consecutive ratio lies in `[1/max_drift, max_drift]`.
    pub stable: bool,
    /// Strictly increasing along the sequence.
    pub increasing: bool,
}

pub fn refinement_drift(constants: &[f64], max_drift: f64) -> RefinementDrift {
    let ratios: Vec<f64> = constants.windows(2).map(|w| w[1] / w[0]).collect();
    let finite = constants.iter().all(|c| c.is_finite() && *c > 0.0);
    RefinementDrift {
        constants: constants.to_vec(),
        stable: finite && ratios.iter().all(|r| *r <= max_drift && *r >= 1.0 / max_drift),
        increasing: finite && ratios.iter().all(|r| *r > 1.0),
        ratios,
    }
}

/// Upper boundary estimate: `u^m(t,x) / [B(Φ_1(x)) ‖u(t0)‖^{b}/(t−t0)^{1+a}]` over snapshots, nodes and earlier times.
pub fn check_boundary_estimate(traj: &Trajectory, p: f64, kind: SmoothingKind) -> Result<InequalityReport> {
    let name = "boundary_estimate";
    if kind == SmoothingKind::Hstar {
        return Ok(InequalityReport::not_applicable(name, "no H* form of the boundary estimate"));
    }
    let table = exponent_table(traj)?;
    let mut gate = smoothing_gate(&table, kind, p);
    if kind == SmoothingKind::Lp && gate.is_none() && p < 1.0 {
        gate = Some(format!("p = {p} < 1"));
    }
    let (_, a, b) = match smoothing_exponents(&table, kind, p) {
        Ok(e) => e,
        Err(why) => return Ok(InequalityReport::not_applicable(name, why)),
    };
    let s = table.s;
    let gamma = table.gamma;
    let phi = traj.data.phi1().values();
    let profile: Vec<f64> = phi
        .iter()
        .map(|&f| match kind {
            SmoothingKind::LpPhi => f,
            _ => boundary_profile_b1(f, s, gamma),
        })
        .collect();
    let series = source_series(traj, kind, p)?;
    let m = traj.m;
    let mut records = Vec::new();
    for (&t1, u) in traj.snapshot_times.iter().zip(&traj.snapshots) {
        if t1 <= 0.0 {
            continue;
        }
        let (node, shape) = u
            .values()
            .iter()
            .zip(&profile)
            .enumerate()
            .map(|(k, (&v, &b))| (k, if b > 0.0 { v.abs().powf(m) / b } else { 0.0 }))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut best: Option<(f64, f64)> = None;
        for &(t0, src, _) in series.iter().take_while(|e| e.0 < t1) {
            if src == 0.0 {
                continue;
            }
            let k = shape * (t1 - t0).powf(1.0 + a) / src.powf(b);
            if best.is_none_or(|(v, _)| k > v) {
                best = Some((k, t0));
            }
        }
        if let Some((k, t0)) = best {
            let mut r = Record::new(k, 1.0).pair(t0, t1).node(node);
            r.ratio = k;
            records.push(r);
        }
    }
    let sup = max_ratio(&records);
    let verdict = match (&gate, sup) {
        (Some(_), _) | (None, None) => Verdict::NotApplicable,
        (None, Some(k)) if k.is_finite() => Verdict::HoldsWithConstant,
        _ => Verdict::Violated,
    };
    Ok(InequalityReport {
        name: name.into(),
        records,
        empirical_constant: sup,
        theoretical_constant: None,
        verdict,
        hypothesis_note: gate.unwrap_or_else(|| {
            if kind == SmoothingKind::LpPhi {
                "weighted form, profile Φ_1".into()
            } else {
                format!("profile B_1 with 2s − γ = {}", 2.0 * s - gamma)
            }
        }),
        tol: 0.0,
    })
}

/// The extinction families evaluated against the fitted extinction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionReport {
    pub t_fit: f64,
    pub t_hat: f64,
    /// Linear law for `‖u‖_p^{1−m}`, free constant.
    pub lp_law: InequalityReport,
    /// Linear law for `‖u^α‖_{H*}^{(1−m)/α}`, free constant.
    pub hstar_alpha_law: InequalityReport,
    /// `‖u‖_{L^1_{Φ_1}} ≤ c_1 (T−t)^{1/(1−m)}`.
    pub l1phi_rate: InequalityReport,
    /// `‖u‖_{1+m}^{1−m} ≤ (1−m) Q[u_0] (T−t)`.
    pub l1pm_rate: InequalityReport,
    /// `‖u‖_{H*} ≤ (1−m)^{1/(1−m)} Q*[u_0]^{1/(1−m)} (T−t)^{1/(1−m)}`.
    pub hstar_rate: InequalityReport,
    pub lower_bounds: ExtinctionLowerBounds,
    pub printed_lower_bound_holds: bool,
    pub integrated_lower_bound_holds: bool,
}

impl ExtinctionReport {
    pub fn parts(&self) -> [&InequalityReport; 5] {
        [
            &self.lp_law,
            &self.hstar_alpha_law,
            &self.l1phi_rate,
            &self.l1pm_rate,
            &self.hstar_rate,
        ]
    }
}

/// Two-sided linear law `c (T−t) ≤ y(t) ≤ y(t0) − c (t−t0)`; reports the largest admissible `c`.
fn linear_law(name: &str, ts: &[f64], ys: &[f64], t_ext: f64, note: String) -> InequalityReport {
    if ts.len() < 2 {
        return InequalityReport::not_applicable(name, "fewer than two time levels before extinction");
    }
    let lower = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| y / (t_ext - t))
        .fold(f64::INFINITY, f64::min);
    let decay = ts
        .windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| (y[0] - y[1]) / (t[1] - t[0]))
        .fold(f64::INFINITY, f64::min);
    let c = lower.min(decay);
    let mut records = Vec::new();
    for (k, (&t, &y)) in ts.iter().zip(ys).enumerate() {
        records.push(Record::new(c * (t_ext - t), y).at(t).label("lower"));
        if k + 1 < ts.len() {
            let rhs = y - c * (ts[k + 1] - t);
            records.push(Record::new(ys[k + 1], rhs).pair(t, ts[k + 1]).label("decay"));
        }
    }
    InequalityReport {
        name: name.into(),
        records,
        empirical_constant: Some(c),
        theoretical_constant: None,
        verdict: if c > 0.0 && c.is_finite() {
            Verdict::HoldsWithConstant
        } else {
            Verdict::Violated
        },
        hypothesis_note: note,
        tol: 0.0,
    }
}

/// Extinction-time estimates and rates, all with `T = t_fit` and `t ≤ 0.9 T`.
pub fn check_extinction_bounds(traj: &Trajectory, p: f64, alpha: f64) -> Result<ExtinctionReport> {
    let est = detect_extinction(traj)?;
    let t_ext = est.t_fit;
    let m = traj.m;
    let e = 1.0 / (1.0 - m);
    let table = exponent_table(traj)?;
    let data = &traj.data;
    let w = data.op.grid.quad_weight();
    let cutoff = 0.9 * t_ext;
    let rows: Vec<_> = traj.norms.iter().filter(|r| r.t <= cutoff).collect();

    let lp_law = if p <= table.p_c {
        InequalityReport::not_applicable("extinction.lp_law", format!("needs p > p_c = {}", table.p_c))
    } else {
        let series = source_series(traj, SmoothingKind::Lp, p)?;
        let (ts, ys): (Vec<f64>, Vec<f64>) = series
            .iter()
            .filter(|s| s.0 <= cutoff)
            .map(|s| (s.0, s.1.powf(1.0 - m)))
            .unzip();
        let mut note = format!("p = {p}");
        if let Some(n) = dimension_note(&table) {
            note = format!("{note}; {n}");
        }
        linear_law("extinction.lp_law", &ts, &ys, t_ext, note)
    };

    let ac = alpha_c(table.n, table.s, m);
    let hstar_alpha_law = if alpha <= ac {
        InequalityReport::not_applicable("extinction.hstar_alpha_law", format!("needs α > α_c = {ac}"))
    } else {
        let mut ts = Vec::new();
        let mut ys = Vec::new();
        for (&t, u) in traj.snapshot_times.iter().zip(&traj.snapshots) {
            if t > cutoff {
                break;
            }
            let ua: Vec<f64> = u.values().iter().map(|&v| signed_pow(v, alpha)).collect();
            let n2 = hstar_norm_sq(&ua, &data.green)?;
            ts.push(t);
            ys.push(n2.sqrt().powf((1.0 - m) / alpha));
        }
        linear_law("extinction.hstar_alpha_law", &ts, &ys, t_ext, format!("α = {alpha}, α_c = {ac}"))
    };

    let phi1_l1 = data.phi1().values().iter().sum::<f64>() * w;
    let c1 = l1phi_decay_constant(data.lambda1(), phi1_l1, m);
    let l1phi_rate = InequalityReport::judged(
        "extinction.l1phi_rate",
        rows.iter()
            .map(|r| Record::new(r.l1phi, c1 * (t_ext - r.t).powf(e)).at(r.t).judge(EXPLICIT_TOL, 0.0))
            .collect(),
        EXPLICIT_TOL,
        format!("c_1 = λ_1^(1/(1−m))‖Φ_1‖_1 = {c1}"),
    )
    .with_theoretical(Some(c1));

    let q0 = traj.norms[0].q;
    let l1pm_rate = InequalityReport::judged(
        "extinction.l1pm_rate",
        rows.iter()
            .map(|r| {
                Record::new(r.l1pm.powf(1.0 - m), (1.0 - m) * q0 * (t_ext - r.t))
                    .at(r.t)
                    .judge(EXPLICIT_TOL, 0.0)
            })
            .collect(),
        EXPLICIT_TOL,
        format!("(1−m)Q[u_0] = {}", (1.0 - m) * q0),
    )
    .with_theoretical(Some((1.0 - m) * q0));

    let qs0 = traj.norms[0].qstar;
    let ch = (1.0 - m).powf(e) * qs0.powf(e);
    let hstar_rate = InequalityReport::judged(
        "extinction.hstar_rate",
        rows.iter()
            .map(|r| Record::new(r.hstar, ch * (t_ext - r.t).powf(e)).at(r.t).judge(EXPLICIT_TOL, 0.0))
            .collect(),
        EXPLICIT_TOL,
        format!("(1−m)^(1/(1−m)) Q*[u_0]^(1/(1−m)) = {ch}"),
    )
    .with_theoretical(Some(ch));

    let lower_bounds = extinction_lower_bounds(traj.norms[0].l1phi, data.lambda1(), phi1_l1, m);
    Ok(ExtinctionReport {
        t_fit: t_ext,
        t_hat: est.t_hat,
        lp_law,
        hstar_alpha_law,
        l1phi_rate,
        l1pm_rate,
        hstar_rate,
        printed_lower_bound_holds: t_ext >= lower_bounds.printed,
        integrated_lower_bound_holds: t_ext >= lower_bounds.integrated,
        lower_bounds,
    })
}

fn submarkov_note(op: &DiscreteOperator) -> Option<String> {
    (!op.offdiag_nonpositive).then(|| {
        format!(
            "{} operator has positive off-diagonal entries; the discrete order-preservation hypothesis fails",
            op.spec.kind
        )
    })
}

/// Snapshot-pair checks use at most this many snapshots, thinned evenly by index.
pub const MAX_PAIR_SNAPSHOTS: usize = 400;

fn positive_snapshots(traj: &Trajectory) -> Vec<(f64, &Field)> {
    let all: Vec<(f64, &Field)> = traj
        .snapshot_times
        .iter()
        .zip(&traj.snapshots)
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, u)| (t, u))
        .collect();
    if all.len() <= MAX_PAIR_SNAPSHOTS {
        return all;
    }
    let last = all.len() - 1;
    let mut idx: Vec<usize> = (0..MAX_PAIR_SNAPSHOTS)
        .map(|k| (k * last + (MAX_PAIR_SNAPSHOTS - 1) / 2) / (MAX_PAIR_SNAPSHOTS - 1))
        .collect();
    idx.dedup();
    idx.into_iter().map(|i| all[i]).collect()
}

/// `t ↦ t^{−1/(1−m)} u(t,x)` is non-increasing, entrywise over all snapshot pairs.
pub fn check_time_monotonicity(traj: &Trajectory) -> InequalityReport {
    let name = "time_monotonicity";
    if let Some(n) = submarkov_note(&traj.data.op) {
        return InequalityReport::not_applicable(name, n);
    }
    let snaps = positive_snapshots(traj);
    if snaps.len() < 2 {
        return InequalityReport::not_applicable(name, "needs two snapshots with t > 0");
    }
    let e = -1.0 / (1.0 - traj.m);
    let scaled: Vec<(f64, Vec<f64>, f64)> = snaps
        .iter()
        .map(|(t, u)| {
            let c = t.powf(e);
            let v: Vec<f64> = u.values().iter().map(|x| c * x).collect();
            let top = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            (*t, v, top)
        })
        .collect();
    let mut records = Vec::new();
    for i in 0..scaled.len() {
        let (t0, ref v0, top) = scaled[i];
        let abs = 1e-10 * top;
        for (t1, v1, _) in &scaled[i + 1..] {
            let mut worst = (0usize, f64::NEG_INFINITY);
            for (k, (a, b)) in v1.iter().zip(v0).enumerate() {
                let excess = a - b * (1.0 + MONOTONE_TOL) - abs;
                if excess > worst.1 {
                    worst = (k, excess);
                }
            }
            let k = worst.0;
            records.push(
                Record::new(v1[k], v0[k])
                    .pair(t0, *t1)
                    .node(k)
                    .judge(MONOTONE_TOL, abs),
            );
        }
    }
    InequalityReport::judged(name, records, MONOTONE_TOL, "entrywise over all snapshot pairs")
}

/// `L^1_{Φ_1}` T-contraction, `H*` contraction and comparison between two trajectories.
pub fn check_contraction(u: &Trajectory, v: &Trajectory) -> Result<InequalityReport> {
    let name = "contraction";
    let same_op = std::sync::Arc::ptr_eq(&u.data, &v.data) || u.data.op.matrix == v.data.op.matrix;
    if !same_op || u.m != v.m {
        return Err(Error::MismatchedTrajectories(
            "trajectories must share operator and exponent".into(),
        ));
    }
    let common: Vec<(usize, usize)> = u
        .snapshot_times
        .iter()
        .enumerate()
        .filter_map(|(i, t)| v.snapshot_times.iter().position(|s| s == t).map(|j| (i, j)))
        .collect();
    if common.len() < 2 {
        return Err(Error::MismatchedTrajectories(format!(
            "{} shared snapshot times, need at least 2",
            common.len()
        )));
    }
    if let Some(n) = submarkov_note(&u.data.op) {
        return Ok(InequalityReport::not_applicable(name, n));
    }
    let data = &u.data;
    let w = data.op.grid.quad_weight();
    let phi = data.phi1().values();
    let u0 = u.snapshots[common[0].0].values();
    let v0 = v.snapshots[common[0].1].values();
    let ordered_below = u0.iter().zip(v0).all(|(a, b)| a <= b);
    let ordered_above = u0.iter().zip(v0).all(|(a, b)| a >= b);

    let mut series = Vec::with_capacity(common.len());
    for &(i, j) in &common {
        let d: Vec<f64> = u.snapshots[i]
            .values()
            .iter()
            .zip(v.snapshots[j].values())
            .map(|(a, b)| a - b)
            .collect();
        let plus: f64 = d.iter().zip(phi).map(|(x, f)| x.max(0.0) * f).sum::<f64>() * w;
        let minus: f64 = d.iter().zip(phi).map(|(x, f)| (-x).max(0.0) * f).sum::<f64>() * w;
        let hs = hstar_norm_sq(&d, &data.green)?.sqrt();
        let up = d.iter().fold(0.0f64, |a, &x| a.max(x));
        let down = d.iter().fold(0.0f64, |a, &x| a.max(-x));
        series.push((u.snapshot_times[i], plus, minus, hs, up, down));
    }
    let scale_uv = u0.iter().chain(v0).fold(0.0f64, |a, &x| a.max(x.abs()));
    let (p0, m0, h0) = (series[0].1, series[0].2, series[0].3);
    let mut records = Vec::new();
    for win in series.windows(2) {
        let (a, b) = (win[0], win[1]);
        let abs = |s: f64| 1e-12 * s.max(scale_uv * w);
        records.push(Record::new(b.1, a.1).pair(a.0, b.0).label("l1phi_plus").judge(MONOTONE_TOL, abs(p0)));
        records.push(Record::new(b.2, a.2).pair(a.0, b.0).label("l1phi_minus").judge(MONOTONE_TOL, abs(m0)));
        records.push(Record::new(b.3, a.3).pair(a.0, b.0).label("hstar").judge(MONOTONE_TOL, abs(h0)));
    }
    let order_abs = 1e-10 * scale_uv;
    for s in &series[1..] {
        if ordered_below {
            records.push(Record::new(s.4, 0.0).at(s.0).label("comparison").judge(0.0, order_abs));
        }
        if ordered_above {
            records.push(Record::new(s.5, 0.0).at(s.0).label("comparison").judge(0.0, order_abs));
        }
    }
    let note = format!(
        "{} shared snapshot times; data {}",
        common.len(),
        if ordered_below || ordered_above { "ordered" } else { "unordered" }
    );
    Ok(InequalityReport::judged(name, records, MONOTONE_TOL, note))
}

/// `‖u(t)‖_p` is non-increasing step to step for `p = 1`, `∞` and every recorded exponent.
pub fn check_lp_decay(traj: &Trajectory) -> InequalityReport {
    let name = "lp_decay";
    if !traj.data.op.offdiag_nonpositive {
        return InequalityReport::not_applicable(name, "operator has a positive off-diagonal entry");
    }
    if traj.norms.len() < 2 {
        return InequalityReport::not_applicable(name, "needs two time levels");
    }
    let mut records = Vec::new();
    for w in traj.norms.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        records.push(Record::new(b.l1, a.l1).pair(a.t, b.t).label("p=1").judge(DECAY_TOL, 0.0));
        for (k, p) in traj.lp_exponents.iter().enumerate() {
            let label = format!("p={p}");
            records.push(Record::new(b.lp[k], a.lp[k]).pair(a.t, b.t).label(&label).judge(DECAY_TOL, 0.0));
        }
        records.push(Record::new(b.linf, a.linf).pair(a.t, b.t).label("p=inf").judge(DECAY_TOL, 0.0));
    }
    InequalityReport::judged(name, records, DECAY_TOL, "consecutive time levels")
}

/// `Q` and `Q*` are non-increasing step to step before extinction.
pub fn check_rayleigh_monotonicity(traj: &Trajectory) -> InequalityReport {
    let name = "rayleigh_monotonicity";
    let rows: Vec<_> = traj
        .norms
        .iter()
        .filter(|r| r.linf >= traj.extinction_threshold && r.q.is_finite() && r.qstar.is_finite())
        .collect();
    if rows.len() < 3 {
        return InequalityReport::not_applicable(name, "needs three time levels before extinction");
    }
    let mut records = Vec::new();
    for w in rows.windows(2) {
        records.push(Record::new(w[1].q, w[0].q).pair(w[0].t, w[1].t).label("Q").judge(RAYLEIGH_TOL, 0.0));
        records.push(
            Record::new(w[1].qstar, w[0].qstar)
                .pair(w[0].t, w[1].t)
                .label("Qstar")
                .judge(RAYLEIGH_TOL, 0.0),
        );
    }
    InequalityReport::judged(name, records, RAYLEIGH_TOL, "consecutive time levels")
}

/// Fundamental pointwise chain between snapshot pairs, plus the `L^p` upper bound for each `p` in `ps`.
pub fn check_pointwise_formula(traj: &Trajectory, ps: &[f64]) -> Result<InequalityReport> {
    let name = "pointwise_formula";
    if let Some(n) = submarkov_note(&traj.data.op) {
        return Ok(InequalityReport::not_applicable(name, n));
    }
    let snaps = positive_snapshots(traj);
    if snaps.len() < 2 {
        return Ok(InequalityReport::not_applicable(name, "needs two snapshots with t > 0"));
    }
    let m = traj.m;
    let e = 1.0 / (1.0 - m);
    let green = &traj.data.green;
    let gu: Vec<Vec<f64>> = snaps.iter().map(|(_, u)| green.apply(u.values())).collect();
    let mut records = Vec::new();
    for i in 0..snaps.len() {
        let (t0, u0) = snaps[i];
        for j in i + 1..snaps.len() {
            let (t1, u1) = snaps[j];
            let den = (1.0 - m) * (t1.powf(e) - t0.powf(e));
            let mut worst_low = (0usize, f64::NEG_INFINITY, 0.0, 0.0);
            let mut worst_up = (0usize, f64::NEG_INFINITY, 0.0, 0.0);
            for k in 0..u0.len() {
                let left = u1.values()[k].max(0.0).powf(m) / t1.powf(m * e);
                let mid = (gu[i][k] - gu[j][k]) / den;
                let right = u0.values()[k].max(0.0).powf(m) / t0.powf(m * e);
                let x = ratio(left, mid);
                if x > worst_low.1 {
                    worst_low = (k, x, left, mid);
                }
                let y = ratio(mid, right);
                if y > worst_up.1 {
                    worst_up = (k, y, mid, right);
                }
            }
            records.push(
                Record::new(worst_low.2, worst_low.3)
                    .pair(t0, t1)
                    .node(worst_low.0)
                    .label("lower")
                    .judge(EXPLICIT_TOL, 0.0),
            );
            records.push(
                Record::new(worst_up.2, worst_up.3)
                    .pair(t0, t1)
                    .node(worst_up.0)
                    .label("upper")
                    .judge(EXPLICIT_TOL, 0.0),
            );
        }
    }
    for &p in ps {
        let Ok(c) = cpm(p, m) else { continue };
        let label = format!("lp_bound p={p}");
        let gup: Vec<Vec<f64>> = snaps
            .iter()
            .map(|(_, u)| {
                let up: Vec<f64> = u.values().iter().map(|x| x.max(0.0).powf(p)).collect();
                green.apply(&up)
            })
            .collect();
        for i in 0..snaps.len() {
            let tau = snaps[i].0;
            for j in i + 1..snaps.len() {
                let (t, u) = snaps[j];
                let pre = c * t.powf((p + m - 1.0) * e) / (t - tau).powf(p * e);
                let (k, _, l, r) = u
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let l = v.max(0.0).powf(p + m - 1.0);
                        let r = pre * gup[i][k];
                        (k, ratio(l, r), l, r)
                    })
                    .fold((0, f64::NEG_INFINITY, 0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
                records.push(
                    Record::new(l, r)
                        .pair(tau, t)
                        .node(k)
                        .label(&label)
                        .judge(EXPLICIT_TOL, 0.0),
                );
            }
        }
    }
    Ok(InequalityReport::judged(
        name,
        records,
        EXPLICIT_TOL,
        "two-sided chain on snapshot pairs with t0 > 0; p-bound with t1 = t",
    ))
}

/// Energy estimate `‖u^m(t1)‖²_H ≤ ‖u(t)‖^{1+m}_{1+m}/(2m(t1−t)) ≤ ‖u(t0)‖²_{H*}/(2m(1+m)(t1−t)(t−t0))`.
///
/// The common factor `1/(t1−t)` is cancelled in the second inequality, so both are
/// checked over time pairs.
pub fn check_energy_estimate(traj: &Trajectory) -> InequalityReport {
    let name = "energy_estimate";
    let rows = &traj.norms;
    if rows.len() < 3 {
        return InequalityReport::not_applicable(name, "needs three time levels");
    }
    let m = traj.m;
    let mut records = Vec::new();
    let ys: Vec<f64> = rows.iter().map(|r| r.l1pm.powf(1.0 + m)).collect();
    for i in 0..rows.len() {
        let a = &rows[i];
        let first = |j: usize| (rows[j].h_um * rows[j].h_um, ys[i] / (2.0 * m * (rows[j].t - a.t)));
        let second = |j: usize| {
            let dt = rows[j].t - a.t;
            (ys[j] / (2.0 * m), a.hstar * a.hstar / (2.0 * m * (1.0 + m) * dt))
        };
        let worst = |f: &dyn Fn(usize) -> (f64, f64)| {
            let mut best: Option<(usize, f64)> = None;
            for j in i + 1..rows.len() {
                let (l, r) = f(j);
                let x = ratio(l, r);
                if best.is_none_or(|(_, b)| x > b) {
                    best = Some((j, x));
                }
            }
            best.map(|(j, _)| j)
        };
        for (label, f) in [("first", &first as &dyn Fn(usize) -> (f64, f64)), ("second", &second)] {
            if let Some(j) = worst(f) {
                let (l, r) = f(j);
                records.push(Record::new(l, r).pair(a.t, rows[j].t).label(label).judge(EXPLICIT_TOL, 0.0));
            }
        }
    }
    InequalityReport::judged(name, records, EXPLICIT_TOL, "worst later time per starting time")
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn abs_normal_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect()
}

fn markov_gate(op: &DiscreteOperator) -> Option<String> {
    if let Some(n) = submarkov_note(op) {
        return Some(n);
    }
    let n = op.matrix.nrows();
    let scale = op.matrix.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let min_row = (0..n).map(|i| op.matrix.row(i).sum()).fold(f64::INFINITY, f64::min);
    (min_row < -1e-12 * scale).then(|| format!("negative row sum {min_row}"))
}

/// `⟨v^{q−1}, Av⟩ ≥ 4(q−1)/q² ⟨v^{q/2}, A v^{q/2}⟩` on random nonnegative fields.
pub fn check_stroock_varopoulos(op: &DiscreteOperator, q: f64, trials: usize, seed: u64) -> InequalityReport {
    let name = "stroock_varopoulos";
    if let Some(n) = markov_gate(op) {
        return InequalityReport::not_applicable(name, n);
    }
    if q <= 1.0 {
        return InequalityReport::not_applicable(name, format!("needs q > 1, got {q}"));
    }
    let c = stroock_varopoulos_constant(q);
    let mut rng = rng_for(seed);
    let w = op.grid.quad_weight();
    let mut records = Vec::with_capacity(trials);
    for trial in 0..trials {
        let v = abs_normal_field(&mut rng, op.len());
        let vq1: Vec<f64> = v.iter().map(|x| x.powf(q - 1.0)).collect();
        let vq2: Vec<f64> = v.iter().map(|x| x.powf(q / 2.0)).collect();
        let av = op.apply(&v);
        let aw = op.apply(&vq2);
        let left: f64 = vq1.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>() * w;
        let right: f64 = vq2.iter().zip(&aw).map(|(a, b)| a * b).sum::<f64>() * w;
        let scale: f64 = (vq1.iter().zip(&av).map(|(a, b)| (a * b).abs()).sum::<f64>()
            + vq2.iter().zip(&aw).map(|(a, b)| (a * b).abs()).sum::<f64>())
            * w;
        let mut r = Record::new(c * right, left).label("trial").judge(0.0, ALGEBRAIC_TOL * scale);
        r.node = Some(trial);
        records.push(r);
    }
    InequalityReport::judged(name, records, ALGEBRAIC_TOL, format!("q = {q}, seed = {seed}"))
        .with_theoretical(Some(c))
}

type Convex = (&'static str, fn(f64) -> f64, fn(f64) -> f64);

const SHIFT: f64 = 0.5;
const POWER: f64 = 1.5;

/// Convex test functions with `f(0) ≤ 0`, with a one-sided derivative at kinks.
const KATO_FUNCTIONS: [Convex; 5] = [
    ("identity", |x| x, |_| 1.0),
    ("positive_part", |x| x.max(0.0), |x| if x > 0.0 { 1.0 } else { 0.0 }),
    ("abs", f64::abs, |x| if x >= 0.0 { 1.0 } else { -1.0 }),
    ("positive_square", |x| x.max(0.0).powi(2), |x| 2.0 * x.max(0.0)),
    (
        "shifted_power",
        |x| (x + SHIFT).max(0.0).powf(POWER) - SHIFT.powf(POWER),
        |x| POWER * (x + SHIFT).max(0.0).powf(POWER - 1.0),
    ),
];

/// Entrywise Kato inequality `A f(v) ≤ f'(v) A v` and the elementary inequality
/// `(a^α−b^α)(a^β−b^β) ≥ αβ(a−b)²` for `α+β = 2`.
pub fn check_kato(op: &DiscreteOperator, trials: usize, seed: u64) -> InequalityReport {
    let name = "kato";
    if let Some(n) = markov_gate(op) {
        return InequalityReport::not_applicable(name, n);
    }
    let mut rng = rng_for(seed);
    let abs_mat = op.matrix.abs();
    let mut records = Vec::new();
    for trial in 0..trials {
        let v: Vec<f64> = (0..op.len()).map(|_| rng.sample(StandardNormal)).collect();
        let av = op.apply(&v);
        let av_abs = {
            let va: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            (&abs_mat * nalgebra::DVector::from_vec(va)).data.as_vec().clone()
        };
        for (label, f, df) in KATO_FUNCTIONS {
            let fv: Vec<f64> = v.iter().map(|&x| f(x)).collect();
            let afv = op.apply(&fv);
            let fabs: Vec<f64> = fv.iter().map(|x| x.abs()).collect();
            let afv_abs = (&abs_mat * nalgebra::DVector::from_vec(fabs)).data.as_vec().clone();
            let mut worst: Option<Record> = None;
            for i in 0..v.len() {
                let rhs = df(v[i]) * av[i];
                let scale = afv_abs[i] + df(v[i]).abs() * av_abs[i];
                let mut r = Record::new(afv[i], rhs).node(i).label(label).judge(0.0, ALGEBRAIC_TOL * scale);
                r.ratio = (afv[i] - rhs) / scale.max(f64::MIN_POSITIVE);
                r.t0 = Some(trial as f64);
                if worst.as_ref().is_none_or(|w| r.ratio > w.ratio) {
                    worst = Some(r);
                }
            }
            records.extend(worst);
        }
        let a: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        let b: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        let alpha: f64 = rng.random_range(0.0..=2.0);
        let beta = 2.0 - alpha;
        let left = alpha * beta * (a - b).powi(2);
        let right = (a.powf(alpha) - b.powf(alpha)) * (a.powf(beta) - b.powf(beta));
        let scale = left.abs() + (a.powf(alpha) + b.powf(alpha)) * (a.powf(beta) + b.powf(beta));
        let mut r = Record::new(left, right).label("num_ineq").judge(0.0, ALGEBRAIC_TOL * scale);
        r.t0 = Some(trial as f64);
        records.push(r);
    }
    InequalityReport::judged(name, records, ALGEBRAIC_TOL, format!("seed = {seed}; ratio is the scaled excess for the Kato records"))
}

/// `‖(u(t+h)−u(t))/h‖_{L^1_{Φ_1}} ≤ 2‖u_0‖_{L^1_{Φ_1}}/((1−m)t)` on consecutive snapshots.
pub fn check_strong_derivative(traj: &Trajectory) -> InequalityReport {
    let name = "strong_derivative";
    if let Some(n) = submarkov_note(&traj.data.op) {
        return InequalityReport::not_applicable(name, n);
    }
    let phi = traj.data.phi1().values();
    let w = traj.data.op.grid.quad_weight();
    let norm0 = traj.norms[0].l1phi;
    let m = traj.m;
    let mut records = Vec::new();
    for k in 1..traj.snapshots.len().saturating_sub(1) {
        let (t0, t1) = (traj.snapshot_times[k], traj.snapshot_times[k + 1]);
        if t0 <= 0.0 {
            continue;
        }
        let h = t1 - t0;
        let d: f64 = traj.snapshots[k + 1]
            .values()
            .iter()
            .zip(traj.snapshots[k].values())
            .zip(phi)
            .map(|((a, b), f)| (a - b).abs() * f)
            .sum::<f64>()
            * w
            / h;
        records.push(
            Record::new(d, 2.0 * norm0 / ((1.0 - m) * t0))
                .pair(t0, t1)
                .judge(EXPLICIT_TOL, 0.0),
        );
    }
    if records.is_empty() {
        return InequalityReport::not_applicable(name, "needs two snapshots with t > 0");
    }
    InequalityReport::judged(name, records, EXPLICIT_TOL, "difference quotients of consecutive snapshots")
}

/// Upper and lower `L^q` bounds on the Green function rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenNormReport {
    pub branch: GreenBranch,
    /// Ratios `‖G(x0,·)‖_q / B_q(Φ_1(x0))`; the empirical constant is their sup.
    pub upper: InequalityReport,
    /// Ratios `Φ_1(x0) / ‖G(x0,·)‖_q`; the empirical constant is the inf of the inverse.
    pub lower: InequalityReport,
}

pub fn check_green_norm_bounds(green: &GreenMatrix, spectral: &SpectralData, q: f64, gamma: f64, s: f64) -> GreenNormReport {
    let grid = &green.grid;
    let n = grid.dim();
    let branch = green_branch(q, n, s, gamma);
    if branch == GreenBranch::NotApplicable {
        let note = format!("q = {q} outside (0, N/(N−2s)) or N ≤ 2s");
        return GreenNormReport {
            branch,
            upper: InequalityReport::not_applicable("green_norm.upper", note.clone()),
            lower: InequalityReport::not_applicable("green_norm.lower", note),
        };
    }
    let w = grid.quad_weight();
    let phi = spectral.phi1.values();
    let mut up = Vec::new();
    let mut low = Vec::new();
    for x0 in 0..grid.len() {
        let row = green.g.row(x0);
        let gq = (row.iter().map(|g| g.max(0.0).powf(q)).sum::<f64>() * w).powf(1.0 / q);
        let b = boundary_profile_bq(phi[x0], q, n, s, gamma).unwrap_or(f64::NAN);
        up.push(Record::new(gq, b).node(x0));
        low.push(Record::new(phi[x0], gq).node(x0));
    }
    let finish = |name: &str, records: Vec<Record>, invert: bool| {
        let sup = max_ratio(&records);
        let c = if invert { sup.map(|r| 1.0 / r) } else { sup };
        let ok = c.is_some_and(|c| c.is_finite() && c > 0.0);
        InequalityReport {
            name: name.into(),
            records,
            empirical_constant: c,
            theoretical_constant: None,
            verdict: if ok { Verdict::HoldsWithConstant } else { Verdict::Violated },
            hypothesis_note: format!("q = {q}, branch {branch:?}"),
            tol: 0.0,
        }
    };
    GreenNormReport {
        branch,
        upper: finish("green_norm.upper", up, false),
        lower: finish("green_norm.lower", low, true),
    }
}
