//! Running configured harness checks on a trajectory and writing their reports.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ffde_core::flow::{run_flow, Trajectory};
use ffde_core::verify::{
    check_boundary_estimate, check_contraction, check_energy_estimate, check_extinction_bounds,
    check_green_norm_bounds, check_kato, check_lp_decay, check_pointwise_formula,
    check_rayleigh_monotonicity, check_smoothing, check_strong_derivative, check_stroock_varopoulos,
    check_time_monotonicity, InequalityReport, Verdict,
};
use ffde_core::Datum;
use serde::Serialize;

use crate::config::{CheckSpec, ExperimentConfig};
use crate::io::{fmt_f64, write_json};

/// A report together with the file stem it is written under.
pub struct NamedReport {
    pub stem: String,
    pub report: InequalityReport,
}

fn tag(x: f64) -> String {
    format!("{x}").replace('.', "_")
}

fn named(stem: String, report: InequalityReport) -> NamedReport {
    NamedReport { stem, report }
}

/// Extra JSON written next to the extinction reports.
#[derive(Serialize)]
struct ExtinctionSummary {
    t_fit: f64,
    t_hat: f64,
    lower_bounds: ffde_core::constants::ExtinctionLowerBounds,
    printed_lower_bound_holds: bool,
    integrated_lower_bound_holds: bool,
}

pub fn run_check(
    cfg: &ExperimentConfig,
    traj: &Trajectory,
    check: &CheckSpec,
    report_dir: Option<&Path>,
) -> Result<Vec<NamedReport>> {
    let mut out = Vec::new();
    match check {
        CheckSpec::Smoothing { p, kind } => {
            for &p in p {
                let r = check_smoothing(traj, p, *kind)?;
                out.push(named(format!("{}_p{}", r.name, tag(p)), r));
            }
        }
        CheckSpec::BoundaryEstimate { p, kind } => {
            for &p in p {
                let r = check_boundary_estimate(traj, p, *kind)?;
                out.push(named(format!("{}_{:?}_p{}", r.name, kind, tag(p)).to_lowercase(), r));
            }
        }
        CheckSpec::ExtinctionBounds { p, alpha } => {
            for &p in p {
                for &a in alpha {
                    let rep = check_extinction_bounds(traj, p, a)?;
                    let suffix = format!("p{}_alpha{}", tag(p), tag(a));
                    if let Some(dir) = report_dir {
                        write_json(
                            &dir.join(format!("extinction_{suffix}.json")),
                            &ExtinctionSummary {
                                t_fit: rep.t_fit,
                                t_hat: rep.t_hat,
                                lower_bounds: rep.lower_bounds,
                                printed_lower_bound_holds: rep.printed_lower_bound_holds,
                                integrated_lower_bound_holds: rep.integrated_lower_bound_holds,
                            },
                        )?;
                    }
                    for part in rep.parts() {
                        out.push(named(format!("{}_{suffix}", part.name), part.clone()));
                    }
                }
            }
        }
        CheckSpec::TimeMonotonicity => out.push(named("time_monotonicity".into(), check_time_monotonicity(traj))),
        CheckSpec::Contraction { bump } => {
            let bumped = Datum::Bump.build(&traj.data, traj.m, *bump)?;
            let u0 = traj.initial();
            let v0: Vec<f64> = u0.values().iter().zip(bumped.values()).map(|(a, b)| a + b).collect();
            let v0 = ffde_core::Field::new(u0.grid().clone(), v0)?;
            let other = run_flow(traj.data.clone(), &v0, traj.m, &cfg.solver, &traj.lp_exponents)
                .context("companion run for the contraction check")?;
            out.push(named("contraction".into(), check_contraction(traj, &other)?));
        }
        CheckSpec::LpDecay => out.push(named("lp_decay".into(), check_lp_decay(traj))),
        CheckSpec::RayleighMonotonicity => {
            out.push(named("rayleigh_monotonicity".into(), check_rayleigh_monotonicity(traj)))
        }
        CheckSpec::PointwiseFormula { p } => {
            out.push(named("pointwise_formula".into(), check_pointwise_formula(traj, p)?))
        }
        CheckSpec::EnergyEstimate => out.push(named("energy_estimate".into(), check_energy_estimate(traj))),
        CheckSpec::StroockVaropoulos { q, trials, seed } => {
            let seed = cfg.check_seed(*seed);
            for &q in q {
                let r = check_stroock_varopoulos(&traj.data.op, q, *trials, seed);
                out.push(named(format!("stroock_varopoulos_q{}", tag(q)), r));
            }
        }
        CheckSpec::Kato { trials, seed } => {
            out.push(named("kato".into(), check_kato(&traj.data.op, *trials, cfg.check_seed(*seed))))
        }
        CheckSpec::StrongDerivative => out.push(named("strong_derivative".into(), check_strong_derivative(traj))),
        CheckSpec::GreenNormBounds { q } => {
            let spec = traj.data.op.spec;
            for &q in q {
                let r = check_green_norm_bounds(&traj.data.green, &traj.data.spectral, q, spec.gamma, spec.s);
                out.push(named(format!("green_norm_upper_q{}", tag(q)), r.upper));
                out.push(named(format!("green_norm_lower_q{}", tag(q)), r.lower));
            }
        }
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn opt_usize(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_records_csv(path: &Path, r: &InequalityReport) -> Result<()> {
    let mut out = String::from("label,t0,t1,node,lhs,rhs,ratio,ok\n");
    for rec in &r.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            rec.label.as_deref().unwrap_or(""),
            opt(rec.t0),
            opt(rec.t1),
            opt_usize(rec.node),
            fmt_f64(rec.lhs),
            fmt_f64(rec.rhs),
            fmt_f64(rec.ratio),
            rec.ok
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Write one JSON summary and one records CSV per report, plus a roll-up table.
pub fn write_reports(dir: &Path, reports: &[NamedReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut rollup = String::from("report,verdict,empirical_constant,theoretical_constant,n_records\n");
    for r in reports {
        write_json(&dir.join(format!("{}.json", r.stem)), &r.report.summary())?;
        write_records_csv(&dir.join(format!("{}.csv", r.stem)), &r.report)?;
        rollup.push_str(&format!(
            "{},{},{},{},{}\n",
            r.stem,
            r.report.verdict.as_str(),
            opt(r.report.empirical_constant),
            opt(r.report.theoretical_constant),
            r.report.records.len()
        ));
    }
    fs::write(dir.join("summary.csv"), rollup)?;
    Ok(())
}

/// Aligned text version of the roll-up.
pub fn rollup_table(reports: &[NamedReport]) -> String {
    let w = reports.iter().map(|r| r.stem.len()).max().unwrap_or(6).max(6);
    let mut s = format!("{:<w$}  {:<20}  {:>12}  {:>12}  {:>8}\n", "report", "verdict", "empirical", "theoretical", "records");
    for r in reports {
        let e = r.report.empirical_constant.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
        let t = r.report.theoretical_constant.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "{:<w$}  {:<20}  {:>12}  {:>12}  {:>8}\n",
            r.stem,
            r.report.verdict.as_str(),
            e,
            t,
            r.report.records.len()
        ));
    }
    s
}

pub fn any_violated(reports: &[NamedReport]) -> bool {
    reports.iter().any(|r| r.report.verdict == Verdict::Violated)
}
