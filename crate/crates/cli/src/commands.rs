//! Subcommands of the `ffde` binary.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ffde_core::constants::critical_exponents;
use ffde_core::norms::{estimate_functional_constants_with, EstimateOptions, FunctionalConstants};
use ffde_core::operators::{check_kernel_bounds, fit_boundary_exponent, KernelBoundReport};
use ffde_core::{boundary_distance, OperatorKind, OperatorSpec};
use serde::Serialize;

use crate::checks::{any_violated, rollup_table, run_check, write_reports, NamedReport};
use crate::config::{parse_value, AxisValue, CheckSpec, ExperimentConfig, SweepMode};
use crate::io::{self, write_json};
use crate::run;
use crate::sweep;

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Exit code for invalid arguments or configuration.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for runtime failures and violated explicit-constant checks.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "ffde", version, about = "Discrete fractional fast diffusion lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an operator and report spectrum, kernel bounds, boundary exponent and functional constants.
    Operator(ConfigArgs),
    /// Run the flow and write trajectory, snapshots and manifest.
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Reuse a complete run with the same configuration hash.
        #[arg(long)]
        resume: bool,
    },
    /// Run harness checks on a stored run.
    Verify {
        /// Run directory or its manifest; defaults to the directory of the configured run.
        run: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Check to run with default parameters (repeatable); `all` selects every check.
        #[arg(long = "check")]
        checks: Vec<String>,
    },
    /// Sweep parameters and write the phase table.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Axis as `name=v1,v2,...` with name in m, s, p, kind, n (repeatable).
        #[arg(long = "axis")]
        axes: Vec<String>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        cap: Option<usize>,
        /// Skip cells whose run directory already holds a complete manifest.
        #[arg(long)]
        resume: bool,
        /// Phase table path; defaults to `<output_dir>/phase.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print critical exponents as aligned text and JSON.
    Constants {
        /// Spatial dimension N.
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        m: f64,
        /// Boundary exponent; inferred from `--kind` when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        kind: Option<OperatorKind>,
        /// Exponents at which ϑ_p and ϑ_{p,γ} are printed.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
    },
}

/// Configuration file plus per-key overrides shared by the run-based subcommands.
#[derive(Debug, Args, Default, Clone)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any key, e.g. `--set solver.time_frac=0.05` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<f64>,
    /// Initial datum: eigenfunction, point_mass, separable, bump, custom_csv.
    #[arg(long)]
    pub datum: Option<String>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub extinction_time: Option<f64>,
    #[arg(long)]
    pub datum_path: Option<PathBuf>,
    /// Initial (or fixed) time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// fixed or adaptive.
    #[arg(long)]
    pub dt_policy: Option<String>,
    #[arg(long)]
    pub adapt_c: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub probe_t_first: Option<f64>,
    #[arg(long)]
    pub probe_ratio: Option<f64>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
    /// Recorded L^p exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lp: Vec<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn str_value(s: &str) -> toml::Value {
    toml::Value::String(s.to_string())
}

impl ConfigArgs {
    pub fn overrides(&self) -> Result<Vec<(String, toml::Value)>> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: toml::Value| out.push((k.to_string(), v));
        if let Some(v) = &self.kind {
            put("operator.kind", str_value(&v.to_ascii_lowercase()));
        }
        if let Some(v) = self.s {
            put("operator.s", v.into());
        }
        if let Some(v) = self.dim {
            put("grid.dim", (v as i64).into());
        }
        if let Some(v) = self.n {
            put("grid.n", (v as i64).into());
        }
        if let Some(v) = self.m {
            put("m", v.into());
        }
        if let Some(v) = &self.datum {
            put("datum.kind", str_value(v));
        }
        if let Some(v) = self.scale {
            put("datum.scale", v.into());
        }
        if let Some(v) = self.extinction_time {
            put("datum.extinction_time", v.into());
        }
        if let Some(v) = &self.datum_path {
            put("datum.path", str_value(&v.to_string_lossy()));
        }
        if let Some(v) = self.dt {
            put("solver.dt_init", v.into());
        }
        if let Some(v) = &self.dt_policy {
            put("solver.dt_policy", str_value(v));
        }
        if let Some(v) = self.adapt_c {
            put("solver.adapt_c", v.into());
        }
        if let Some(v) = self.t_max {
            put("solver.t_max", v.into());
        }
        if let Some(v) = self.probe_t_first {
            put("solver.probe_t_first", v.into());
        }
        if let Some(v) = self.probe_ratio {
            put("solver.probe_ratio", v.into());
        }
        if let Some(v) = self.newton_tol {
            put("solver.newton_tol", v.into());
        }
        if !self.lp.is_empty() {
            put("lp_exponents", toml::Value::Array(self.lp.iter().map(|&p| p.into()).collect()));
        }
        if let Some(v) = &self.output_dir {
            put("output_dir", str_value(&v.to_string_lossy()));
        }
        if let Some(v) = self.seed {
            put("seed", (v as i64).into());
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
            out.push((k.trim().to_string(), parse_value(v.trim())));
        }
        Ok(out)
    }

    pub fn load(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::load(self.config.as_deref(), &self.overrides()?)
    }

    /// Like `load`, but `m` may be omitted (operator-only commands).
    fn load_without_m(&self) -> Result<ExperimentConfig> {
        let mut ov = vec![("m".to_string(), toml::Value::Float(0.5))];
        if let Some(p) = &self.config {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            if text.parse::<toml::Table>().map(|t| t.contains_key("m")).unwrap_or(false) {
                ov.clear();
            }
        }
        ov.extend(self.overrides()?);
        ExperimentConfig::load(self.config.as_deref(), &ov)
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn runtime<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn dispatch(cmd: Command) -> std::result::Result<i32, Failure> {
    match cmd {
        Command::Operator(args) => {
            let cfg = usage(args.load_without_m())?;
            let rec = runtime(operator_record(&cfg))?;
            let text = serde_json::to_string_pretty(&rec).expect("record serializes");
            say!("{text}");
            let path = cfg.output_dir.join(format!("operator-{}.json", operator_hash(&cfg)));
            runtime(std::fs::create_dir_all(&cfg.output_dir).map_err(Into::into).and_then(|_| write_json(&path, &rec)))?;
            Ok(0)
        }
        Command::Solve { config, resume } => {
            let cfg = usage(config.load())?;
            let r = runtime(run::solve(&cfg, None, resume))?;
            if r.reused {
                say!("reused complete run");
            }
            say!("{}", run::extinction_line(&r.trajectory));
            say!("run_dir={}", r.dir.display());
            if let Some(note) = &r.manifest.note {
                say!("note: {note}");
            }
            Ok(0)
        }
        Command::Verify { run, config, checks } => {
            let have_cfg = config.config.is_some() || run.is_none();
            let cfg = if have_cfg { Some(usage(config.load())?) } else { None };
            let dir = match (&run, &cfg) {
                (Some(p), _) => io::run_dir_of(p),
                (None, Some(c)) => c.run_dir(),
                (None, None) => unreachable!(),
            };
            let (stored, _, traj) = runtime(io::load_run(&dir, None))?;
            let mut base = cfg.unwrap_or_else(|| stored.clone());
            let mut list = if checks.is_empty() { base.checks.clone() } else { Vec::new() };
            for name in &checks {
                if name == "all" {
                    list.extend(CheckSpec::all());
                } else {
                    list.push(usage(CheckSpec::by_name(name))?);
                }
            }
            if list.is_empty() {
                list = CheckSpec::all();
            }
            base.solver = stored.solver.clone();
            let reports = runtime(verify_run(&base, &traj, &list, &dir.join("reports")))?;
            say!("{}", rollup_table(&reports).trim_end());
            Ok(if any_violated(&reports) { EXIT_FAILURE } else { 0 })
        }
        Command::Sweep {
            config,
            axes,
            mode,
            parallelism,
            cap,
            resume,
            out,
        } => {
            let mut cfg = usage(config.load())?;
            for a in &axes {
                let (name, vals) = usage(parse_axis(a))?;
                cfg.sweep.axes.insert(name, vals);
            }
            if let Some(m) = mode {
                cfg.sweep.mode = usage(match m.as_str() {
                    "cartesian" => Ok(SweepMode::Cartesian),
                    "zip" => Ok(SweepMode::Zip),
                    other => Err(anyhow::anyhow!("unknown sweep mode '{other}'")),
                })?;
            }
            if let Some(p) = parallelism {
                cfg.sweep.parallelism = p;
            }
            if let Some(c) = cap {
                cfg.sweep.cap = c;
            }
            usage(sweep::expand(&cfg.sweep, &cfg))?;
            let rows = runtime(sweep::run_sweep(&cfg.sweep, &cfg, resume))?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("phase.csv"));
            runtime(sweep::write_phase_csv(&path, &rows))?;
            let frac = sweep::failure_fraction(&rows);
            say!("cells={} failed={:.1}% phase_table={}", rows.len(), 100.0 * frac, path.display());
            Ok(if frac > 0.1 { EXIT_FAILURE } else { 0 })
        }
        Command::Constants { dim, s, m, gamma, kind, p } => {
            let gamma = match (gamma, kind) {
                (Some(g), _) => g,
                (None, Some(k)) => usage(OperatorSpec::new(k, s).map_err(Into::into))?.gamma,
                (None, None) => 0.0,
            };
            let t = usage(critical_exponents(dim, s, m, gamma).map_err(Into::into))?;
            say!("{}", constants_text(&t, &p).trim_end());
            say!("{}", serde_json::to_string(&t).expect("table serializes"));
            Ok(0)
        }
    }
}

fn parse_axis(spec: &str) -> Result<(String, Vec<AxisValue>)> {
    let (name, vals) = spec
        .split_once('=')
        .with_context(|| format!("--axis expects name=v1,v2,..., got '{spec}'"))?;
    let vals: Vec<AxisValue> = vals
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| match v.parse::<f64>() {
            Ok(x) => AxisValue::Num(x),
            Err(_) => AxisValue::Text(v.to_string()),
        })
        .collect();
    Ok((name.trim().to_string(), vals))
}

/// Run each check and write the reports under `report_dir`.
pub fn verify_run(
    cfg: &ExperimentConfig,
    traj: &ffde_core::flow::Trajectory,
    checks: &[CheckSpec],
    report_dir: &Path,
) -> Result<Vec<NamedReport>> {
    std::fs::create_dir_all(report_dir)?;
    let mut reports = Vec::new();
    for c in checks {
        reports.extend(run_check(cfg, traj, c, Some(report_dir))?);
    }
    write_reports(report_dir, &reports)?;
    Ok(reports)
}

#[derive(Debug, Serialize)]
pub struct OperatorRecord {
    pub operator: OperatorSpec,
    pub dim: usize,
    pub n: usize,
    pub lambda1: f64,
    pub eigenvalues_head: Vec<f64>,
    pub offdiag_nonpositive: bool,
    /// `None` below 32 nodes per axis.
    pub gamma_hat: Option<f64>,
    pub kernel_bounds: KernelBoundReport,
    pub functional_constants: FunctionalConstants,
}

pub fn operator_record(cfg: &ExperimentConfig) -> Result<OperatorRecord> {
    let data = run::operator_data(cfg)?;
    let grid = &data.op.grid;
    let gamma_hat = if grid.n_per_axis() >= 32 {
        Some(fit_boundary_exponent(&data.spectral, &boundary_distance(grid))?)
    } else {
        None
    };
    let opts = EstimateOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    let spec = data.op.spec;
    Ok(OperatorRecord {
        operator: spec,
        dim: grid.dim(),
        n: grid.n_per_axis(),
        lambda1: data.lambda1(),
        eigenvalues_head: data.spectral.eigenvalues.iter().take(8).copied().collect(),
        offdiag_nonpositive: data.op.offdiag_nonpositive,
        gamma_hat,
        kernel_bounds: check_kernel_bounds(&data.green, &spec),
        functional_constants: estimate_functional_constants_with(&data.op, &data.green, grid.dim(), spec.s, &opts)?,
    })
}

fn operator_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.run_identity();
    c.m = 0.5;
    c.datum = Default::default();
    c.solver = Default::default();
    c.lp_exponents.clear();
    c.seed = cfg.seed;
    c.run_hash()
}

fn tagged(t: ffde_core::constants::Tagged) -> String {
    t.finite().map(|v| format!("{v:.6}")).unwrap_or_else(|| "pole".into())
}

pub fn constants_text(t: &ffde_core::constants::ExponentTable, ps: &[f64]) -> String {
    let mut rows: Vec<(String, String)> = vec![
        ("N".into(), t.n.to_string()),
        ("s".into(), format!("{}", t.s)),
        ("m".into(), format!("{}", t.m)),
        ("gamma".into(), format!("{}", t.gamma)),
        ("m_c".into(), format!("{:.6}", t.m_c)),
        ("p_c".into(), format!("{:.6}", t.p_c)),
        ("m_s".into(), format!("{:.6}", t.m_s)),
        ("m_c_gamma".into(), format!("{:.6}", t.m_c_gamma)),
        ("p_c_gamma".into(), tagged(t.p_c_gamma)),
        ("2*".into(), tagged(t.two_star)),
        ("theta_1pm".into(), tagged(t.theta_1pm)),
        ("regime".into(), format!("{:?}", t.regime)),
        ("outside_hypotheses".into(), t.outside_hypotheses.to_string()),
    ];
    for &p in ps {
        rows.push((format!("theta_p[{p}]"), tagged(t.theta(p))));
        rows.push((format!("theta_p_gamma[{p}]"), tagged(t.theta_gamma(p))));
    }
    let w = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
}
