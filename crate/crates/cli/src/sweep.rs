//! Parameter sweeps and the phase-diagram table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ffde_core::constants::critical_exponents;
use ffde_core::flow::OperatorData;
use ffde_core::verify::{check_smoothing, refinement_drift, SmoothingKind, Verdict, MAX_DRIFT};
use ffde_core::OperatorKind;
use rayon::prelude::*;

use crate::config::{AxisValue, ExperimentConfig, SweepMode, SweepPlan};
use crate::io::fmt_f64;
use crate::run;

pub const AXES: [&str; 5] = ["m", "s", "p", "kind", "n"];
pub const PHASE_HEADER: &str = "m,s,p,kind,n,verdict,kappa_hat,T_fit";

/// One point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub m: f64,
    pub s: f64,
    pub p: f64,
    pub kind: OperatorKind,
    pub n: usize,
}

/// One line of the phase table.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub cell: Cell,
    /// A verdict name, or `error` when the run failed.
    pub verdict: String,
    pub kappa_hat: Option<f64>,
    pub t_fit: Option<f64>,
}

fn num(v: &AxisValue, axis: &str) -> Result<f64> {
    match v {
        AxisValue::Num(x) => Ok(*x),
        AxisValue::Text(t) => t.parse().with_context(|| format!("axis {axis}: '{t}' is not a number")),
    }
}

/// Expand the plan into cells, validating axes, zip lengths and the cap.
pub fn expand(plan: &SweepPlan, base: &ExperimentConfig) -> Result<Vec<Cell>> {
    if plan.axes.is_empty() {
        bail!("sweep needs at least one axis");
    }
    for (name, vals) in &plan.axes {
        if !AXES.contains(&name.as_str()) {
            bail!("unknown sweep axis '{name}' (expected one of {})", AXES.join(", "));
        }
        if vals.is_empty() {
            bail!("sweep axis '{name}' is empty");
        }
    }
    if plan.parallelism == 0 {
        bail!("parallelism must be at least 1");
    }
    let names: Vec<&String> = plan.axes.keys().collect();
    let lens: Vec<usize> = plan.axes.values().map(Vec::len).collect();
    let combos: Vec<Vec<usize>> = match plan.mode {
        SweepMode::Zip => {
            if lens.iter().any(|&l| l != lens[0]) {
                bail!("zip sweep needs axes of equal length, got {lens:?}");
            }
            (0..lens[0]).map(|i| vec![i; lens.len()]).collect()
        }
        SweepMode::Cartesian => {
            let total = lens.iter().try_fold(1usize, |a, &l| a.checked_mul(l));
            match total {
                Some(t) if t <= plan.cap => {}
                _ => bail!("cartesian sweep has more than {} cells", plan.cap),
            }
            let mut out = vec![vec![]];
            for &l in &lens {
                out = out
                    .into_iter()
                    .flat_map(|c| {
                        (0..l).map(move |i| {
                            let mut c = c.clone();
                            c.push(i);
                            c
                        })
                    })
                    .collect();
            }
            out
        }
    };
    if combos.len() > plan.cap {
        bail!("sweep has {} cells, cap is {}", combos.len(), plan.cap);
    }
    combos
        .into_iter()
        .map(|idx| {
            let mut cell = Cell {
                m: base.m,
                s: base.s(),
                p: 2.0,
                kind: base.operator.kind,
                n: base.grid.n,
            };
            for (name, &i) in names.iter().zip(&idx) {
                let v = &plan.axes[*name][i];
                match name.as_str() {
                    "m" => cell.m = num(v, name)?,
                    "s" => cell.s = num(v, name)?,
                    "p" => cell.p = num(v, name)?,
                    "n" => {
                        let x = num(v, name)?;
                        if !(x >= 1.0 && x.fract() == 0.0) {
                            bail!("axis n: {x} is not a positive integer");
                        }
                        cell.n = x as usize;
                    }
                    "kind" => {
                        cell.kind = match v {
                            AxisValue::Text(t) => t.parse()?,
                            AxisValue::Num(x) => bail!("axis kind: {x} is not an operator name"),
                        }
                    }
                    _ => unreachable!(),
                }
            }
            Ok(cell)
        })
        .collect()
}

/// The run configuration a cell maps to; cells differing only in `p` share it.
fn run_config(base: &ExperimentConfig, cell: &Cell, exponents: &[f64]) -> ExperimentConfig {
    let mut c = base.clone();
    c.m = cell.m;
    c.operator.kind = cell.kind;
    c.operator.s = Some(cell.s);
    c.grid.n = cell.n;
    c.lp_exponents = exponents.to_vec();
    c.checks.clear();
    c
}

type OpKey = (OperatorKind, u64, usize);

fn op_key(c: &Cell) -> OpKey {
    (c.kind, c.s.to_bits(), c.n)
}

/// Run every cell and return the phase rows in cell order.
pub fn run_sweep(plan: &SweepPlan, base: &ExperimentConfig, resume: bool) -> Result<Vec<PhaseRow>> {
    let cells = expand(plan, base)?;
    let mut exps: Vec<f64> = cells.iter().map(|c| c.p).collect::<Vec<_>>();
    exps.extend(&base.lp_exponents);
    exps.sort_by(f64::total_cmp);
    exps.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .context("building the worker pool")?;

    // Operators are shared between runs with equal (kind, s, n).
    let keys: BTreeSet<OpKey> = cells.iter().map(op_key).collect();
    let ops: HashMap<OpKey, std::result::Result<Arc<OperatorData>, String>> = pool.install(|| {
        keys.into_par_iter()
            .map(|k| {
                let cell = cells.iter().find(|c| op_key(c) == k).expect("key from cells");
                let cfg = run_config(base, cell, &exps);
                let r = cfg
                    .validate()
                    .and_then(|_| run::operator_data(&cfg))
                    .map_err(|e| format!("{e:#}"));
                (k, r)
            })
            .collect()
    });

    // Group cells by run so each flow is computed once.
    let mut runs: BTreeMap<String, (ExperimentConfig, Vec<usize>)> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        let cfg = run_config(base, c, &exps);
        runs.entry(cfg.run_hash()).or_insert_with(|| (cfg, Vec::new())).1.push(i);
    }
    let groups: Vec<(ExperimentConfig, Vec<usize>)> = runs.into_values().collect();

    let results: Vec<Vec<(usize, PhaseRow)>> = pool.install(|| {
        groups
            .par_iter()
            .map(|(cfg, idx)| {
                let cell0 = &cells[idx[0]];
                let outcome = ops[&op_key(cell0)]
                    .clone()
                    .map_err(anyhow::Error::msg)
                    .and_then(|d| run::solve(cfg, Some(d), resume));
                idx.iter()
                    .map(|&i| {
                        let cell = cells[i].clone();
                        let row = match &outcome {
                            Ok(r) => {
                                let t_fit = r.trajectory.extinction.and_then(|e| e.t_fit);
                                match check_smoothing(&r.trajectory, cell.p, SmoothingKind::Lp) {
                                    Ok(rep) => PhaseRow {
                                        cell,
                                        verdict: rep.verdict.as_str().into(),
                                        kappa_hat: rep.empirical_constant,
                                        t_fit,
                                    },
                                    Err(e) => error_row(cell, &e.into()),
                                }
                            }
                            Err(e) => error_row(cell, e),
                        };
                        (i, row)
                    })
                    .collect()
            })
            .collect()
    });
    let mut rows: Vec<(usize, PhaseRow)> = results.into_iter().flatten().collect();
    rows.sort_by_key(|(i, _)| *i);
    let mut rows: Vec<PhaseRow> = rows.into_iter().map(|(_, r)| r).collect();
    apply_refinement(&mut rows);
    Ok(rows)
}

fn error_row(cell: Cell, e: &anyhow::Error) -> PhaseRow {
    eprintln!(
        "cell m={} s={} p={} kind={} n={} failed: {e:#}",
        cell.m, cell.s, cell.p, cell.kind, cell.n
    );
    PhaseRow {
        cell,
        verdict: "error".into(),
        kappa_hat: None,
        t_fit: None,
    }
}

fn family_key(c: &Cell) -> (u64, u64, u64, OperatorKind) {
    (c.m.to_bits(), c.s.to_bits(), c.p.to_bits(), c.kind)
}

/// Where the hypotheses hold, a constant that is not stable under refinement is a violation.
fn apply_refinement(rows: &mut [PhaseRow]) {
    let mut fam: HashMap<_, Vec<usize>> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        fam.entry(family_key(&r.cell)).or_default().push(i);
    }
    for mut idx in fam.into_values() {
        if idx.len() < 2 {
            continue;
        }
        idx.sort_by_key(|&i| rows[i].cell.n);
        let ks: Vec<f64> = idx.iter().map(|&i| rows[i].kappa_hat.unwrap_or(f64::NAN)).collect();
        let stable = refinement_drift(&ks, MAX_DRIFT).stable;
        for &i in &idx {
            if rows[i].verdict == Verdict::HoldsWithConstant.as_str() && !stable {
                rows[i].verdict = Verdict::Violated.as_str().into();
            }
        }
    }
}

pub fn phase_csv(rows: &[PhaseRow]) -> String {
    let mut out = format!("{PHASE_HEADER}\n");
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_else(|| "NaN".into());
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.cell.m),
            fmt_f64(r.cell.s),
            fmt_f64(r.cell.p),
            r.cell.kind,
            r.cell.n,
            r.verdict,
            opt(r.kappa_hat),
            opt(r.t_fit)
        ));
    }
    out
}

pub fn write_phase_csv(path: &Path, rows: &[PhaseRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, phase_csv(rows)).with_context(|| format!("writing {}", path.display()))
}

pub fn failure_fraction(rows: &[PhaseRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.verdict == "error").count() as f64 / rows.len() as f64
}

/// Empirical and predicted class of an `(m, p)` family across refinements.
#[derive(Debug, Clone, PartialEq)]
pub struct CellClass {
    pub m: f64,
    pub p: f64,
    pub kappa: Vec<f64>,
    pub ratios: Vec<f64>,
    /// κ̂ stable under every refinement.
    pub bounded: bool,
    /// `p > p_c`.
    pub predicted_bounded: bool,
}

/// Classify each `(m, p)` of a single-kind sweep by refinement stability.
pub fn classify(rows: &[PhaseRow], dim: usize) -> Vec<CellClass> {
    let mut fam: BTreeMap<(u64, u64), Vec<&PhaseRow>> = BTreeMap::new();
    for r in rows {
        fam.entry((r.cell.m.to_bits(), r.cell.p.to_bits())).or_default().push(r);
    }
    let mut out: Vec<CellClass> = fam
        .into_values()
        .map(|mut v| {
            v.sort_by_key(|r| r.cell.n);
            let c = &v[0].cell;
            let kappa: Vec<f64> = v.iter().map(|r| r.kappa_hat.unwrap_or(f64::NAN)).collect();
            let drift = refinement_drift(&kappa, MAX_DRIFT);
            let predicted_bounded = critical_exponents(dim, c.s, c.m, 0.0)
                .map(|t| c.p > t.p_c)
                .unwrap_or(false);
            CellClass {
                m: c.m,
                p: c.p,
                kappa,
                ratios: drift.ratios,
                bounded: drift.stable,
                predicted_bounded,
            }
        })
        .collect();
    out.sort_by(|a, b| a.m.total_cmp(&b.m).then(a.p.total_cmp(&b.p)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_toml("m = 0.5\n[operator]\nkind = \"rfl\"\ns = 0.25\n[grid]\nn = 8\n").unwrap()
    }

    fn plan(axes: &[(&str, Vec<AxisValue>)], mode: SweepMode) -> SweepPlan {
        SweepPlan {
            axes: axes.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            mode,
            ..Default::default()
        }
    }

    fn nums(v: &[f64]) -> Vec<AxisValue> {
        v.iter().map(|&x| AxisValue::Num(x)).collect()
    }

    #[test]
    fn empty_axes_are_rejected() {
        assert!(expand(&plan(&[], SweepMode::Cartesian), &base()).is_err());
        assert!(expand(&plan(&[("m", vec![])], SweepMode::Cartesian), &base()).is_err());
    }

    #[test]
    fn zip_needs_equal_lengths() {
        let p = plan(&[("m", nums(&[0.2, 0.3])), ("p", nums(&[1.0]))], SweepMode::Zip);
        assert!(expand(&p, &base()).is_err());
        let p = plan(&[("m", nums(&[0.2, 0.3])), ("p", nums(&[1.0, 2.0]))], SweepMode::Zip);
        let cells = expand(&p, &base()).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!((cells[1].m, cells[1].p), (0.3, 2.0));
    }

    #[test]
    fn cartesian_product_and_cap() {
        let p = plan(&[("m", nums(&[0.2, 0.3, 0.4])), ("p", nums(&[1.0, 2.0]))], SweepMode::Cartesian);
        assert_eq!(expand(&p, &base()).unwrap().len(), 6);
        let big = plan(
            &[("m", nums(&vec![0.5; 40])), ("p", nums(&vec![1.0; 40]))],
            SweepMode::Cartesian,
        );
        assert!(expand(&big, &base()).is_err());
    }

    #[test]
    fn unknown_axis_and_bad_kind() {
        assert!(expand(&plan(&[("q", nums(&[1.0]))], SweepMode::Cartesian), &base()).is_err());
        let k = vec![AxisValue::Text("nope".into())];
        assert!(expand(&plan(&[("kind", k)], SweepMode::Cartesian), &base()).is_err());
    }

    #[test]
    fn small_sweep_runs_and_shares_flows() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = base();
        b.output_dir = dir.path().to_path_buf();
        b.datum.kind = crate::config::DatumKind::PointMass;
        let p = SweepPlan {
            parallelism: 2,
            ..plan(&[("m", nums(&[0.3, 0.7])), ("p", nums(&[1.0, 2.0]))], SweepMode::Cartesian)
        };
        let rows = run_sweep(&p, &b, false).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.verdict != "error"));
        // m = 0.3 < m_c = 0.5 and p = 1 < p_c = 1.4
        assert_eq!(rows[0].verdict, "not_applicable");
        assert_eq!(rows[3].verdict, "holds_with_constant");
        let runs = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(runs, 2);
        let again = run_sweep(&p, &b, true).unwrap();
        assert_eq!(phase_csv(&rows), phase_csv(&again));
    }
}
