//! Building operators and data from a configuration, and running flows.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ffde_core::flow::{run_flow, OperatorData, Trajectory};
use ffde_core::{build_operator, make_grid, Datum, Field};

use crate::config::{DatumKind, ExperimentConfig};
use crate::io;

pub fn operator_data(cfg: &ExperimentConfig) -> Result<Arc<OperatorData>> {
    let grid = Arc::new(make_grid(cfg.grid.dim, cfg.grid.n)?);
    let op = build_operator(grid, cfg.operator_spec()?)?;
    Ok(Arc::new(OperatorData::new(op)?))
}

pub fn initial_datum(cfg: &ExperimentConfig, data: &OperatorData) -> Result<Field> {
    let datum = match cfg.datum.kind {
        DatumKind::Eigenfunction => Datum::Eigenfunction,
        DatumKind::PointMass => Datum::PointMass,
        DatumKind::Separable => Datum::Separable,
        DatumKind::Bump => Datum::Bump,
        DatumKind::CustomCsv => {
            let path = cfg.datum.path.as_ref().context("custom_csv needs a path")?;
            Datum::Values {
                values: io::read_values_csv(path)?,
            }
        }
    };
    Ok(datum.build(data, cfg.m, cfg.datum_scale())?)
}

/// Outcome of `solve`: where the run lives and whether it was reused.
pub struct RunResult {
    pub dir: PathBuf,
    pub manifest: io::Manifest,
    pub trajectory: Trajectory,
    pub reused: bool,
}

/// Run the flow into its hashed directory. With `resume`, a complete run is loaded instead.
pub fn solve(cfg: &ExperimentConfig, data: Option<Arc<OperatorData>>, resume: bool) -> Result<RunResult> {
    let dir = cfg.run_dir();
    if resume && io::is_complete(&dir) {
        let (_, manifest, trajectory) = io::load_run(&dir, data)?;
        return Ok(RunResult {
            dir,
            manifest,
            trajectory,
            reused: true,
        });
    }
    if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    io::mark_partial(&dir, cfg)?;
    let data = match data {
        Some(d) => d,
        None => operator_data(cfg)?,
    };
    let u0 = initial_datum(cfg, &data)?;
    let trajectory = match run_flow(data, &u0, cfg.m, &cfg.solver, &cfg.lp_exponents) {
        Ok(t) => t,
        Err(e) => {
            let _ = fs::write(dir.join("error.txt"), format!("{e}\n"));
            bail!("solver failed: {e}");
        }
    };
    let manifest = io::write_run(&dir, cfg, &trajectory)?;
    Ok(RunResult {
        dir,
        manifest,
        trajectory,
        reused: false,
    })
}

/// `T_hat=… T_fit=…`, or a note when the run did not extinguish.
pub fn extinction_line(traj: &Trajectory) -> String {
    match traj.extinction {
        Some(e) => format!(
            "T_hat={} T_fit={}",
            io::fmt_f64(e.t_hat),
            e.t_fit.map(io::fmt_f64).unwrap_or_else(|| "NA".into())
        ),
        None => "T_hat=NA T_fit=NA (no extinction before t_max)".into(),
    }
}
