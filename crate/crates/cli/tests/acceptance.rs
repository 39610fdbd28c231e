//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ffde_cli::run::{self, operator_data};
use ffde_cli::sweep::{classify, run_sweep, CellClass, PhaseRow};
use ffde_cli::{ExperimentConfig, SweepPlan};
use ffde_core::constants::{critical_exponents, moser_kappa};
use ffde_core::flow::{run_flow, scalar_solution, OperatorData, SolverConfig, Trajectory};
use ffde_core::mesh::boundary_distance;
use ffde_core::norms::estimate_functional_constants;
use ffde_core::operators::fit_boundary_exponent;
use ffde_core::verify::{
    check_boundary_estimate, check_contraction, check_energy_estimate, check_extinction_bounds, check_kato,
    check_lp_decay, check_pointwise_formula, check_rayleigh_monotonicity, check_strong_derivative,
    check_stroock_varopoulos, check_time_monotonicity, refinement_drift, InequalityReport, SmoothingKind, Verdict,
    MAX_DRIFT,
};
use ffde_core::{Datum, Field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    /// The failure matches a characterised, understood limitation.
    expected: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        expected: false,
        detail: detail.into(),
    }
}

fn config(toml: &str, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(toml).expect("valid config");
    c.output_dir = out.to_path_buf();
    c
}

fn solve(cfg: &ExperimentConfig, data: Option<Arc<OperatorData>>) -> Trajectory {
    run::solve(cfg, data, false).expect("solve").trajectory
}

/// A named trajectory used by the invariant criteria.
struct Case {
    label: String,
    traj: Trajectory,
    /// Companion from a larger ordered datum, sharing the probe times.
    companion: Option<Trajectory>,
}

// ---------------------------------------------------------------- criterion 1

fn scalar_cfg(dt: f64, out: &Path) -> ExperimentConfig {
    config(
        &format!(
            "m = 0.5\n[operator]\nkind = \"identity\"\n[grid]\nn = 1\n[datum]\nkind = \"eigenfunction\"\n\
             [solver]\ndt_init = {dt}\ndt_policy = \"fixed\"\nrecord_all = true\nt_max = 3.0\n"
        ),
        out,
    )
}

fn scalar_error(traj: &Trajectory) -> f64 {
    traj.snapshot_times
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, u)| (u.values()[0] - scalar_solution(t, 1.0, 1.0, 0.5)).abs())
        .fold(0.0, f64::max)
}

fn criterion_1(out: &Path, cases: &mut Vec<Case>) -> Outcome {
    let traj = solve(&scalar_cfg(1e-4, out), None);
    let t_fit = traj.extinction.and_then(|e| e.t_fit).unwrap_or(f64::NAN);
    let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| scalar_error(&solve(&scalar_cfg(dt, out), None)))
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    cases.push(Case {
        label: "scalar".into(),
        traj,
        companion: None,
    });
    let pass = (1.98..=2.02).contains(&t_fit) && orders.iter().all(|o| (0.8..=1.2).contains(o));
    outcome(pass, format!("T_fit = {t_fit:.5}, orders {orders:.3?}"))
}

// ---------------------------------------------------------------- criterion 2

const SEPARABLE_KINDS: [(&str, f64); 4] = [("local", 1.0), ("sfl", 0.5), ("rfl", 0.75), ("cfl", 0.75)];

fn separable_cfg(kind: &str, s: f64, m: f64, n: usize, out: &Path) -> ExperimentConfig {
    config(
        &format!(
            "m = {m}\nlp_exponents = [1.0, 2.0]\n[operator]\nkind = \"{kind}\"\ns = {s}\n[grid]\nn = {n}\n\
             [datum]\nkind = \"separable\"\nextinction_time = 1.0\n\
             [solver]\ndt_init = 1e-5\nadapt_c = 0.0001\ntime_frac = 0.01\nt_max = 0.91\n\
             probe_t_first = 0.01\nprobe_ratio = 1.5\n"
        ),
        out,
    )
}

/// Worst relative deviation of `‖u‖_{1+m}^{1−m}` from `(1−m) Q[u_0] (1−t)` on `[0.1, 0.9]`.
fn separable_deviation(traj: &Trajectory) -> f64 {
    let m = traj.m;
    let q0 = traj.norms[0].q;
    traj.norms
        .iter()
        .filter(|r| (0.1..=0.9).contains(&r.t))
        .map(|r| {
            let exact = (1.0 - m) * q0 * (1.0 - r.t);
            (r.l1pm.powf(1.0 - m) - exact).abs() / exact
        })
        .fold(0.0, f64::max)
}

fn criterion_2(out: &Path, cases: &mut Vec<Case>) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (kind, s) in SEPARABLE_KINDS {
        let data = operator_data(&separable_cfg(kind, s, 0.5, 128, out)).expect("operator");
        for m in [0.5, 0.8] {
            let traj = solve(&separable_cfg(kind, s, m, 128, out), Some(data.clone()));
            let dev = separable_deviation(&traj);
            worst = worst.max(dev);
            parts.push(format!("{kind} m={m}: {:.2}%", 100.0 * dev));
            cases.push(Case {
                label: format!("separable {kind} m={m}"),
                traj,
                companion: None,
            });
        }
    }
    outcome(worst <= 0.01, parts.join(", "))
}

// ---------------------------------------------------------------- generic trajectories

const GENERIC_KINDS: [(&str, f64); 5] = [("local", 1.0), ("sfl", 0.5), ("rfl", 0.75), ("cfl", 0.75), ("rfl", 0.25)];

fn generic_cases(out: &Path, cases: &mut Vec<Case>) {
    for (kind, s) in GENERIC_KINDS {
        for m in [0.3, 0.7] {
            let cfg = config(
                &format!(
                    "m = {m}\nlp_exponents = [1.5, 2.0]\n[operator]\nkind = \"{kind}\"\ns = {s}\n[grid]\nn = 64\n\
                     [datum]\nkind = \"bump\"\n[solver]\ndt_init = 1e-7\ntime_frac = 0.01\nt_max = 20.0\n\
                     probe_t_first = 1e-4\nprobe_ratio = 1.2\n"
                ),
                out,
            );
            let data = operator_data(&cfg).expect("operator");
            let u = solve(&cfg, Some(data.clone()));
            let bump = Datum::Bump.build(&data, m, 0.5).expect("bump");
            let v0: Vec<f64> = u.initial().values().iter().zip(bump.values()).map(|(a, b)| a + b).collect();
            let v0 = Field::new(u.initial().grid().clone(), v0).expect("field");
            let v = run_flow(data, &v0, m, &cfg.solver, &cfg.lp_exponents).expect("companion");
            cases.push(Case {
                label: format!("bump {kind} s={s} m={m}"),
                traj: u,
                companion: Some(v),
            });
        }
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn acceptable(r: &InequalityReport) -> bool {
    matches!(r.verdict, Verdict::Holds | Verdict::NotApplicable)
}

fn summarize(failures: &[String], checked: usize, skipped: usize) -> String {
    if failures.is_empty() {
        format!("{checked} reports hold, {skipped} outside hypotheses")
    } else {
        format!("{} of {checked} failed: {}", failures.len(), failures.join("; "))
    }
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3(cases: &[Case]) -> Outcome {
    let mut failures = Vec::new();
    let (mut checked, mut skipped) = (0, 0);
    for c in cases {
        let t = &c.traj;
        let mut reports = vec![
            check_energy_estimate(t),
            check_strong_derivative(t),
            check_pointwise_formula(t, &t.lp_exponents).expect("pointwise"),
        ];
        if t.extinction.and_then(|e| e.t_fit).is_some() {
            reports.push(check_extinction_bounds(t, 2.0, 1.0).expect("extinction").l1phi_rate);
        }
        for r in reports {
            checked += 1;
            if r.verdict == Verdict::NotApplicable {
                skipped += 1;
            }
            if !acceptable(&r) {
                failures.push(format!("{} on {}", r.name, c.label));
            }
        }
    }
    outcome(failures.is_empty(), summarize(&failures, checked, skipped))
}

// ---------------------------------------------------------------- criteria 4 and 8

const SWEEP_P: [f64; 7] = [1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0];
const SWEEP_N: [usize; 3] = [64, 128, 256];
const SWEEP_S: f64 = 0.25;
/// Within this distance of the green line the smoothing exponent exceeds 20 and
/// point-mass constants are still pre-asymptotic at n ≤ 256.
const NEAR_LINE: f64 = 0.1 + 1e-9;

fn p_c(m: f64) -> f64 {
    critical_exponents(1, SWEEP_S, m, 0.0).map(|t| t.p_c).unwrap_or(f64::NAN)
}

fn sweep_rows(out: &Path) -> Vec<PhaseRow> {
    let base = config(
        &format!(
            "m = 0.5\nlp_exponents = {SWEEP_P:?}\n[operator]\nkind = \"rfl\"\ns = {SWEEP_S}\n[grid]\nn = 64\n\
             [datum]\nkind = \"point_mass\"\n[solver]\ndt_init = 1e-9\ntime_frac = 0.05\nadapt_c = 0.05\n\
             probe_t_first = 1e-7\nprobe_ratio = 1.25\nt_max = 50.0\ntail_snapshots = 0\n"
        ),
        out,
    );
    let ms: Vec<String> = (3..=18).map(|k| format!("{}", k as f64 * 0.05)).collect();
    let plan: SweepPlan = toml::from_str(&format!(
        "parallelism = {}\n[axes]\nm = [{}]\np = {SWEEP_P:?}\nn = {SWEEP_N:?}\n",
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        ms.join(", ")
    ))
    .expect("plan");
    run_sweep(&plan, &base, false).expect("sweep")
}

fn criterion_4(rows: &[PhaseRow], classes: &[CellClass]) -> Outcome {
    let mut drift_fail = Vec::new();
    let mut far_fail = 0;
    let mut above = 0;
    for c in classes.iter().filter(|c| c.predicted_bounded) {
        above += 1;
        if !c.bounded {
            let gap = c.p - p_c(c.m);
            far_fail += usize::from(gap > NEAR_LINE);
            drift_fail.push(format!("(m={:.2}, p={}) p - p_c = {gap:.2}, ratios {:.2?}", c.m, c.p, c.ratios));
        }
    }
    let mut growth_fail = Vec::new();
    let mut below = 0;
    for c in classes.iter().filter(|c| c.m < 0.5 - 1e-12 && c.p == 1.0) {
        below += 1;
        if !refinement_drift(&c.kappa, MAX_DRIFT).increasing {
            growth_fail.push(format!("m={} κ̂ {}", c.m, sci(&c.kappa)));
        }
    }
    // Moser constant with the estimated Sobolev constant at each resolution.
    let mut moser_fail = Vec::new();
    let mut compared = 0;
    for (k, &n) in SWEEP_N.iter().enumerate() {
        let cfg = ExperimentConfig::from_toml(&format!(
            "m = 0.5\n[operator]\nkind = \"rfl\"\ns = {SWEEP_S}\n[grid]\nn = {n}\n"
        ))
        .expect("config");
        let data = operator_data(&cfg).expect("operator");
        let sobolev = estimate_functional_constants(&data.op, &data.green, 1, SWEEP_S)
            .expect("constants")
            .sobolev_s
            .expect("N > 2s");
        for c in classes {
            let kh = c.kappa[k];
            if let (Ok(bound), true) = (moser_kappa(c.p, 1, SWEEP_S, c.m, sobolev), kh.is_finite()) {
                compared += 1;
                if bound < kh {
                    moser_fail.push(format!("(m={}, p={}, n={n}) {bound:.3e} < {kh:.3e}", c.m, c.p));
                }
            }
        }
    }
    let errors = rows.iter().filter(|r| r.verdict == "error").count();
    let pass = drift_fail.is_empty() && growth_fail.is_empty() && moser_fail.is_empty() && errors == 0;
    let mut detail = format!(
        "{}/{above} cells above the line stable; {}/{below} sub-critical p=1 columns grow; \
         moser ≥ κ̂ in {}/{compared}; {errors} failed runs",
        above - drift_fail.len(),
        below - growth_fail.len(),
        compared - moser_fail.len()
    );
    for f in drift_fail.iter().chain(&growth_fail).chain(&moser_fail) {
        detail.push_str(&format!("\n      {f}"));
    }
    let expected = !pass && far_fail == 0 && growth_fail.is_empty() && moser_fail.is_empty() && errors == 0;
    if expected {
        detail.push_str("\n      every unstable cell lies within 0.1 of p_c (known pre-asymptotic drift)");
    }
    Outcome {
        expected,
        ..outcome(pass, detail)
    }
}

fn criterion_8(classes: &[CellClass]) -> Outcome {
    let mut worst = 0usize;
    let mut bad = Vec::new();
    let mut ms: Vec<f64> = classes.iter().map(|c| c.m).collect();
    ms.dedup();
    for m in ms {
        let column: Vec<&CellClass> = classes.iter().filter(|c| c.m == m).collect();
        // First grid index from which every cell is bounded, empirically and by theory.
        let first = |f: &dyn Fn(&CellClass) -> bool| {
            (0..=column.len())
                .find(|&i| column[i..].iter().all(|c| f(c)))
                .unwrap_or(column.len())
        };
        let emp = first(&|c| c.bounded);
        let pred = first(&|c| c.predicted_bounded);
        let d = emp.abs_diff(pred);
        worst = worst.max(d);
        if d > 1 {
            bad.push(format!("m={m}: empirical index {emp}, p_c={:.2} index {pred}", p_c(m)));
        }
    }
    let detail = if bad.is_empty() {
        format!("boundary within {worst} cell(s) of p_c(m) in every column")
    } else {
        bad.join("; ")
    };
    outcome(bad.is_empty(), detail)
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5(out: &Path) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, expect) in [("sfl", 1.0), ("rfl", 0.75), ("cfl", 0.5)] {
        let cfg = ExperimentConfig::from_toml(&format!(
            "m = 0.5\n[operator]\nkind = \"{kind}\"\ns = 0.75\n[grid]\nn = 256\n"
        ))
        .expect("config");
        let data = operator_data(&cfg).expect("operator");
        let g = fit_boundary_exponent(&data.spectral, &boundary_distance(&data.op.grid)).expect("fit");
        let rel = (g - expect).abs() / expect;
        pass &= rel <= 0.15;
        parts.push(format!("{kind} γ̂={g:.3} ({:.1}%)", 100.0 * rel));
    }
    for (kind, s) in [("sfl", 0.25), ("rfl", 0.25), ("sfl", 0.75), ("rfl", 0.75), ("cfl", 0.75)] {
        let mut ks = Vec::new();
        let mut inside = true;
        for n in [64, 128] {
            let traj = solve(&separable_cfg(kind, s, 0.5, n, out), None);
            let r = check_boundary_estimate(&traj, 2.0, SmoothingKind::Lp).expect("boundary");
            inside &= r.verdict == Verdict::HoldsWithConstant;
            ks.push(match r.verdict {
                Verdict::Violated => f64::NAN,
                _ => r.empirical_constant.unwrap_or(f64::NAN),
            });
        }
        // Inside the hypotheses exactly when N > 2s.
        pass &= inside == (2.0 * s < 1.0);
        pass &= refinement_drift(&ks, MAX_DRIFT).stable;
        let tag = if inside { "" } else { " (outside hypotheses)" };
        parts.push(format!("{kind} s={s} boundary ratio {}{tag}", sci(&ks)));
    }
    outcome(pass, parts.join(", "))
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6(cases: &[Case]) -> Outcome {
    let mut failures = Vec::new();
    let (mut checked, mut skipped) = (0, 0);
    let mut tally = |r: InequalityReport, label: &str, strict: bool| {
        checked += 1;
        if r.verdict == Verdict::NotApplicable {
            skipped += 1;
        }
        let ok = if strict { r.verdict == Verdict::Holds } else { acceptable(&r) };
        if !ok {
            failures.push(format!("{} on {label}", r.name));
        }
    };
    for (kind, s) in [("rfl", 0.25), ("rfl", 0.75), ("cfl", 0.75)] {
        let cfg = ExperimentConfig::from_toml(&format!(
            "m = 0.5\n[operator]\nkind = \"{kind}\"\ns = {s}\n[grid]\nn = 48\n"
        ))
        .expect("config");
        let data = operator_data(&cfg).expect("operator");
        let label = format!("{kind} s={s}");
        for (i, q) in [1.5, 2.0, 3.0].into_iter().enumerate() {
            tally(check_stroock_varopoulos(&data.op, q, 100, 11 + i as u64), &label, true);
        }
        tally(check_kato(&data.op, 100, 17), &label, true);
    }
    for c in cases {
        tally(check_lp_decay(&c.traj), &c.label, false);
        tally(check_time_monotonicity(&c.traj), &c.label, false);
        tally(check_rayleigh_monotonicity(&c.traj), &c.label, false);
        if let Some(v) = &c.companion {
            tally(check_contraction(&c.traj, v).expect("contraction"), &c.label, false);
        }
    }
    outcome(failures.is_empty(), summarize(&failures, checked, skipped))
}

// ---------------------------------------------------------------- criterion 7

struct Properties {
    positive: bool,
    ordered: bool,
    contracting: bool,
}

fn properties(data: &Arc<OperatorData>, u0: &Field, v0: &Field, m: f64, dt: f64, stride: usize) -> Properties {
    let mut cfg = SolverConfig::fixed(dt);
    cfg.record_all = true;
    cfg.t_max = 0.5;
    let u = run_flow(data.clone(), u0, m, &cfg, &[]).expect("flow");
    let v = run_flow(data.clone(), v0, m, &cfg, &[]).expect("flow");
    let phi = data.phi1().values();
    let steps = u.snapshots.len().min(v.snapshots.len());
    let idx: Vec<usize> = (0..steps).step_by(stride).collect();
    let dist = |k: usize| -> f64 {
        u.snapshots[k]
            .values()
            .iter()
            .zip(v.snapshots[k].values())
            .zip(phi)
            .map(|((a, b), f)| (a - b).abs() * f)
            .sum()
    };
    let scale = v0.max_abs();
    Properties {
        positive: idx.iter().all(|&k| {
            u.snapshots[k].values().iter().chain(v.snapshots[k].values()).all(|&x| x >= -1e-12 * scale)
        }),
        ordered: idx.iter().all(|&k| {
            u.snapshots[k]
                .values()
                .iter()
                .zip(v.snapshots[k].values())
                .all(|(a, b)| *a <= b + 1e-10 * scale)
        }),
        contracting: idx.windows(2).all(|w| dist(w[1]) <= dist(w[0]) * (1.0 + 1e-8) + 1e-14 * scale),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let specs = [("local", 1.0), ("rfl", 0.5), ("cfl", 0.75), ("rfl", 0.25)];
    let (dt, stride) = (1e-2, 100);
    let mut agree = 0;
    let mut total = 0;
    let mut bad = Vec::new();
    for pair in 0..20 {
        let (kind, s) = specs[pair % specs.len()];
        let n = 2 + pair % 3;
        let m = rng.random_range(0.2..0.9);
        let cfg = ExperimentConfig::from_toml(&format!(
            "m = {m}\n[operator]\nkind = \"{kind}\"\ns = {s}\n[grid]\nn = {n}\n"
        ))
        .expect("config");
        let data = operator_data(&cfg).expect("operator");
        let grid = data.op.grid.clone();
        let u0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let v0: Vec<f64> = u0.iter().map(|x| x + rng.random_range(0.0..1.0)).collect();
        let u0 = Field::new(grid.clone(), u0).expect("field");
        let v0 = Field::new(grid, v0).expect("field");
        let coarse = properties(&data, &u0, &v0, m, dt, 1);
        let fine = properties(&data, &u0, &v0, m, dt / 100.0, stride);
        for (what, a, b) in [
            ("positivity", coarse.positive, fine.positive),
            ("comparison", coarse.ordered, fine.ordered),
            ("contraction", coarse.contracting, fine.contracting),
        ] {
            total += 1;
            if a == b && a {
                agree += 1;
            } else {
                bad.push(format!("pair {pair} ({kind} n={n}) {what}: step {a}, reference {b}"));
            }
        }
    }
    let mut detail = format!("{agree}/{total} property verdicts agree and hold");
    if !bad.is_empty() {
        detail.push_str(&format!(": {}", bad.join("; ")));
    }
    outcome(bad.is_empty(), detail)
}

// ----------------------------------------------------------------

fn report(k: usize, title: &str, start: Instant, o: &Outcome, all: &mut bool) {
    *all &= o.pass || o.expected;
    println!(
        "criterion {k} {:<4} {title} [{:.1}s] {}",
        match (o.pass, o.expected) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        },
        start.elapsed().as_secs_f64(),
        o.detail
    );
}

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path();
    let mut cases = Vec::new();
    let mut all = true;

    let t = Instant::now();
    let c1 = criterion_1(out, &mut cases);
    report(1, "scalar oracle", t, &c1, &mut all);


    let t = Instant::now();
    let c2 = criterion_2(out, &mut cases);
    report(2, "separable sharpness", t, &c2, &mut all);

    let t = Instant::now();
    generic_cases(out, &mut cases);
    let c3 = criterion_3(&cases);
    report(3, "explicit-constant inequalities", t, &c3, &mut all);

    let t = Instant::now();
    let rows = sweep_rows(out);
    let classes = classify(&rows, 1);
    let c4 = criterion_4(&rows, &classes);
    report(4, "free-constant smoothing", t, &c4, &mut all);

    let t = Instant::now();
    let c5 = criterion_5(out);
    report(5, "boundary law", t, &c5, &mut all);

    let t = Instant::now();
    let c6 = criterion_6(&cases);
    report(6, "structure preservation", t, &c6, &mut all);

    let t = Instant::now();
    let c7 = criterion_7();
    report(7, "brute-force parity", t, &c7, &mut all);

    let t = Instant::now();
    let c8 = criterion_8(&classes);
    report(8, "phase diagram", t, &c8, &mut all);

    if !all {
        eprintln!("acceptance: unexpected failures");
        std::process::exit(1);
    }
}
