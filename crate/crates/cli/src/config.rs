//! Experiment configuration: TOML file plus dotted-key overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ffde_core::flow::SolverConfig;
use ffde_core::verify::SmoothingKind;
use ffde_core::{OperatorKind, OperatorSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SEED_ENV: &str = "FFDE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub kind: OperatorKind,
    /// Defaults to 1 for the local and identity operators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "one")]
    pub dim: usize,
    pub n: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    Eigenfunction,
    PointMass,
    Separable,
    Bump,
    CustomCsv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSection {
    pub kind: DatumKind,
    #[serde(default = "unit")]
    pub scale: f64,
    /// Separable datum only: overrides `scale` with `T^{1/(1−m)}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extinction_time: Option<f64>,
    /// CSV with a header row; the last column holds nodal values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn unit() -> f64 {
    1.0
}

impl Default for DatumSection {
    fn default() -> Self {
        DatumSection {
            kind: DatumKind::Bump,
            scale: 1.0,
            extinction_time: None,
            path: None,
        }
    }
}

/// A named harness check with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Smoothing {
        #[serde(default = "p_one_two")]
        p: Vec<f64>,
        #[serde(default = "lp_kind")]
        kind: SmoothingKind,
    },
    BoundaryEstimate {
        #[serde(default = "p_one")]
        p: Vec<f64>,
        #[serde(default = "lp_phi_kind")]
        kind: SmoothingKind,
    },
    ExtinctionBounds {
        #[serde(default = "p_two")]
        p: Vec<f64>,
        #[serde(default = "alpha_one")]
        alpha: Vec<f64>,
    },
    TimeMonotonicity,
    Contraction {
        /// Height of the bump added to the datum for the companion run.
        #[serde(default = "half")]
        bump: f64,
    },
    LpDecay,
    RayleighMonotonicity,
    PointwiseFormula {
        #[serde(default = "p_one_two")]
        p: Vec<f64>,
    },
    EnergyEstimate,
    StroockVaropoulos {
        #[serde(default = "q_default")]
        q: Vec<f64>,
        #[serde(default = "trials")]
        trials: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Kato {
        #[serde(default = "trials")]
        trials: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    StrongDerivative,
    GreenNormBounds {
        #[serde(default = "p_one_two")]
        q: Vec<f64>,
    },
}

fn p_one() -> Vec<f64> {
    vec![1.0]
}
fn p_two() -> Vec<f64> {
    vec![2.0]
}
fn p_one_two() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn alpha_one() -> Vec<f64> {
    vec![1.0]
}
fn q_default() -> Vec<f64> {
    vec![1.5, 2.0, 3.0]
}
fn trials() -> usize {
    100
}
fn half() -> f64 {
    0.5
}
fn lp_kind() -> SmoothingKind {
    SmoothingKind::Lp
}
fn lp_phi_kind() -> SmoothingKind {
    SmoothingKind::LpPhi
}

impl CheckSpec {
    pub const NAMES: [&'static str; 13] = [
        "smoothing",
        "boundary_estimate",
        "extinction_bounds",
        "time_monotonicity",
        "contraction",
        "lp_decay",
        "rayleigh_monotonicity",
        "pointwise_formula",
        "energy_estimate",
        "stroock_varopoulos",
        "kato",
        "strong_derivative",
        "green_norm_bounds",
    ];

    /// The check with default parameters.
    pub fn by_name(name: &str) -> Result<Self> {
        let v = toml::Value::Table(toml::map::Map::from_iter([(
            "name".to_string(),
            toml::Value::String(name.to_string()),
        )]));
        v.try_into()
            .map_err(|_| anyhow!("unknown check '{name}'; known checks: {}", Self::NAMES.join(", ")))
    }

    pub fn all() -> Vec<Self> {
        Self::NAMES.iter().map(|n| Self::by_name(n).expect("registry name")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    #[default]
    Cartesian,
    Zip,
}

/// Axis value: a number or an operator kind name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    /// Parameter name (`m`, `s`, `p`, `kind`, `n`) to the values it takes.
    #[serde(default)]
    pub axes: BTreeMap<String, Vec<AxisValue>>,
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default = "cap")]
    pub cap: usize,
}

fn cap() -> usize {
    1024
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            axes: BTreeMap::new(),
            mode: SweepMode::Cartesian,
            parallelism: 1,
            cap: cap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "p_two")]
    pub lp_exponents: Vec<f64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub operator: OperatorSection,
    pub grid: GridSection,
    #[serde(default)]
    pub datum: DatumSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub sweep: SweepPlan,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// Parse a flag value as TOML, falling back to a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Set `a.b.c = value` inside a TOML table, creating sections as needed.
pub fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| anyhow!("empty key"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("'{p}' in '{key}' is not a section"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Read `path` (if any), apply `key=value` overrides, then validate.
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?
                .parse::<toml::Table>()
                .with_context(|| format!("parsing config {}", p.display()))?,
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            set_dotted(&mut table, k, v.clone())?;
        }
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .context("invalid configuration")?;
        cfg.apply_seed_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            let seed: u64 = raw
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got '{raw}'"))?;
            self.seed = seed;
            for c in &mut self.checks {
                if let CheckSpec::StroockVaropoulos { seed: s, .. } | CheckSpec::Kato { seed: s, .. } = c {
                    *s = Some(seed);
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m < 1.0) {
            bail!("m must lie in (0, 1), got {}", self.m);
        }
        self.operator_spec()?;
        if self.grid.dim != 1 && self.grid.dim != 2 {
            bail!("grid.dim must be 1 or 2, got {}", self.grid.dim);
        }
        if self.grid.n < 1 {
            bail!("grid.n must be positive");
        }
        self.solver.validate()?;
        if self.lp_exponents.iter().any(|&p| !(p >= 1.0)) {
            bail!("lp_exponents must all be ≥ 1");
        }
        if !self.datum.scale.is_finite() {
            bail!("datum.scale must be finite");
        }
        match (self.datum.kind, &self.datum.path) {
            (DatumKind::CustomCsv, None) => bail!("datum kind custom_csv needs datum.path"),
            (DatumKind::CustomCsv, Some(_)) | (_, None) => {}
            (_, Some(_)) => bail!("datum.path is only used by custom_csv"),
        }
        if let Some(t) = self.datum.extinction_time {
            if self.datum.kind != DatumKind::Separable || !(t > 0.0) {
                bail!("datum.extinction_time needs a separable datum and a positive time");
            }
        }
        Ok(())
    }

    pub fn s(&self) -> f64 {
        self.operator.s.unwrap_or(1.0)
    }

    pub fn operator_spec(&self) -> Result<OperatorSpec> {
        Ok(OperatorSpec::new(self.operator.kind, self.s())?)
    }

    pub fn datum_scale(&self) -> f64 {
        match self.datum.extinction_time {
            Some(t) => ffde_core::separable_scale(t, self.m),
            None => self.datum.scale,
        }
    }

    /// Seed for a check, after the environment override.
    pub fn check_seed(&self, explicit: Option<u64>) -> u64 {
        explicit.unwrap_or(self.seed)
    }

    /// The part of the configuration that determines a flow run.
    pub fn run_identity(&self) -> ExperimentConfig {
        ExperimentConfig {
            output_dir: PathBuf::new(),
            checks: Vec::new(),
            sweep: SweepPlan::default(),
            seed: 0,
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Content hash of the run-determining fields.
    pub fn run_hash(&self) -> String {
        let mut text = self.run_identity().to_toml();
        if let (DatumKind::CustomCsv, Some(p)) = (self.datum.kind, &self.datum.path) {
            if let Ok(bytes) = std::fs::read(p) {
                text.push_str(&hex::encode(Sha256::digest(&bytes)));
            }
        }
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(format!("run-{}", self.run_hash()))
    }
}
