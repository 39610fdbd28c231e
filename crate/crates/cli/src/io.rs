//! Run directories: trajectory and snapshot CSVs, manifest, reload.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ffde_core::flow::{ExtinctionRecord, NormRow, OperatorData, Trajectory};
use ffde_core::{Field, Grid};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const PARTIAL: &str = ".partial";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Round-trip float formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .with_context(|| format!("malformed number '{s}' in {what}"))
}

fn exponent_tag(p: f64) -> String {
    format!("{p}")
}

pub const TRAJECTORY_HEADER: [&str; 9] = [
    "t",
    "norm_L1",
    "norm_Lp",
    "norm_Linf",
    "norm_L1phi",
    "norm_L1pm",
    "norm_Hstar",
    "Q",
    "Qstar",
];

/// Header: the fixed columns, then `norm_H_um`, then `norm_L[p]` and `norm_Lphi[p]` per exponent.
pub fn trajectory_header(lp_exponents: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = TRAJECTORY_HEADER.iter().map(|s| s.to_string()).collect();
    h.push("norm_H_um".into());
    for p in lp_exponents {
        h.push(format!("norm_L[{}]", exponent_tag(*p)));
    }
    for p in lp_exponents {
        h.push(format!("norm_Lphi[{}]", exponent_tag(*p)));
    }
    h
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::new();
    out.push_str(&trajectory_header(&traj.lp_exponents).join(","));
    out.push('\n');
    for r in &traj.norms {
        let first_lp = r.lp.first().copied().unwrap_or(f64::NAN);
        let mut cols = vec![r.t, r.l1, first_lp, r.linf, r.l1phi, r.l1pm, r.hstar, r.q, r.qstar, r.h_um];
        cols.extend(&r.lp);
        cols.extend(&r.lp_phi);
        let line: Vec<String> = cols.into_iter().map(fmt_f64).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = rdr
        .headers()
        .with_context(|| format!("file format error in {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("file format error in {} at row {}", path.display(), k + 1))?;
        if rec.len() != header.len() {
            bail!("file format error in {}: row {} has {} fields", path.display(), k + 1, rec.len());
        }
        let what = format!("{} row {}", path.display(), k + 1);
        rows.push(rec.iter().map(|s| parse_f64(s, &what)).collect::<Result<Vec<_>>>()?);
    }
    Ok((header, rows))
}

pub fn read_trajectory_csv(path: &Path, lp_exponents: &[f64]) -> Result<Vec<NormRow>> {
    let (header, rows) = read_csv(path)?;
    let expect = trajectory_header(lp_exponents);
    if header != expect {
        bail!("file format error in {}: unexpected header", path.display());
    }
    let k = lp_exponents.len();
    Ok(rows
        .into_iter()
        .map(|c| NormRow {
            t: c[0],
            l1: c[1],
            linf: c[3],
            l1phi: c[4],
            l1pm: c[5],
            hstar: c[6],
            q: c[7],
            qstar: c[8],
            h_um: c[9],
            lp: c[10..10 + k].to_vec(),
            lp_phi: c[10 + k..10 + 2 * k].to_vec(),
        })
        .collect())
}

pub fn write_field_csv(path: &Path, u: &Field) -> Result<()> {
    let g = u.grid();
    let mut out = String::from(if g.dim() == 1 { "x,u\n" } else { "x,y,u\n" });
    for (k, v) in u.values().iter().enumerate() {
        let x = g.node(k);
        if g.dim() == 1 {
            out.push_str(&format!("{},{}\n", fmt_f64(x[0]), fmt_f64(*v)));
        } else {
            out.push_str(&format!("{},{},{}\n", fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(*v)));
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Nodal values from the last column of a headed CSV.
pub fn read_values_csv(path: &Path) -> Result<Vec<f64>> {
    let (_, rows) = read_csv(path)?;
    rows.into_iter()
        .map(|r| r.last().copied().context("empty row"))
        .collect()
}

pub fn read_field_csv(path: &Path, grid: &Arc<Grid>) -> Result<Field> {
    let (header, rows) = read_csv(path)?;
    let want = if grid.dim() == 1 { 2 } else { 3 };
    if header.len() != want || header.last().map(String::as_str) != Some("u") {
        bail!("file format error in {}: unexpected header", path.display());
    }
    if rows.len() != grid.len() {
        bail!("file format error in {}: {} rows for {} nodes", path.display(), rows.len(), grid.len());
    }
    Ok(Field::new(grid.clone(), rows.iter().map(|r| r[want - 1]).collect())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub n_steps: usize,
    pub lp_exponents: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub snapshot_files: Vec<String>,
    pub extinction: Option<ExtinctionRecord>,
    pub extinction_threshold: f64,
    pub signed_input: bool,
    pub note: Option<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write every output of a finished run and clear the partial marker last.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, traj: &Trajectory) -> Result<Manifest> {
    fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
    write_trajectory_csv(&dir.join(TRAJECTORY), traj)?;
    let mut files = Vec::new();
    for (k, u) in traj.snapshots.iter().enumerate() {
        let name = format!("{SNAPSHOT_DIR}/snap_{k:05}.csv");
        write_field_csv(&dir.join(&name), u)?;
        files.push(name);
    }
    let note = traj
        .extinction
        .is_none()
        .then(|| format!("no extinction before t_max = {}", cfg.solver.t_max));
    let manifest = Manifest {
        config_hash: cfg.run_hash(),
        n_steps: traj.norms.len().saturating_sub(1),
        lp_exponents: traj.lp_exponents.clone(),
        snapshot_times: traj.snapshot_times.clone(),
        snapshot_files: files,
        extinction: traj.extinction,
        extinction_threshold: traj.extinction_threshold,
        signed_input: traj.signed_input,
        note,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    let _ = fs::remove_file(dir.join(PARTIAL));
    Ok(manifest)
}

pub fn mark_partial(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG), cfg.run_identity().to_toml())?;
    fs::File::create(dir.join(PARTIAL))?.write_all(b"")?;
    Ok(())
}

/// A run counts as complete when its manifest parses and no partial marker remains.
pub fn is_complete(dir: &Path) -> bool {
    !dir.join(PARTIAL).exists()
        && fs::read_to_string(dir.join(MANIFEST))
            .ok()
            .and_then(|t| serde_json::from_str::<Manifest>(&t).ok())
            .is_some()
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).with_context(|| format!("missing manifest {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("file format error in {}", path.display()))
}

/// Resolve a path that names either a run directory or its manifest.
pub fn run_dir_of(path: &Path) -> PathBuf {
    if path.file_name().map(|n| n == MANIFEST).unwrap_or(false) {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        path.to_path_buf()
    }
}

/// Rebuild a trajectory from disk; the operator is reassembled from the stored config.
pub fn load_run(dir: &Path, data: Option<Arc<OperatorData>>) -> Result<(ExperimentConfig, Manifest, Trajectory)> {
    let manifest = read_manifest(dir)?;
    if dir.join(PARTIAL).exists() {
        bail!("run {} is incomplete (partial marker present)", dir.display());
    }
    let text = fs::read_to_string(dir.join(CONFIG)).with_context(|| format!("missing {CONFIG} in {}", dir.display()))?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let data = match data {
        Some(d) => d,
        None => crate::run::operator_data(&cfg)?,
    };
    let norms = read_trajectory_csv(&dir.join(TRAJECTORY), &manifest.lp_exponents)?;
    if manifest.snapshot_files.len() != manifest.snapshot_times.len() {
        bail!("file format error in manifest: snapshot lists differ in length");
    }
    let snapshots = manifest
        .snapshot_files
        .iter()
        .map(|f| read_field_csv(&dir.join(f), &data.op.grid))
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory {
        m: cfg.m,
        data,
        lp_exponents: manifest.lp_exponents.clone(),
        norms,
        snapshot_times: manifest.snapshot_times.clone(),
        snapshots,
        extinction: manifest.extinction,
        extinction_threshold: manifest.extinction_threshold,
        signed_input: manifest.signed_input,
    };
    Ok((cfg, manifest, traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -2.5, f64::MIN_POSITIVE, f64::MAX] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
        assert_eq!(fmt_f64(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn header_starts_with_fixed_columns() {
        let h = trajectory_header(&[2.0, 1.5]);
        assert_eq!(h[..9].join(","), "t,norm_L1,norm_Lp,norm_Linf,norm_L1phi,norm_L1pm,norm_Hstar,Q,Qstar");
        assert_eq!(h[10], "norm_L[2]");
        assert_eq!(h[13], "norm_Lphi[1.5]");
    }

    #[test]
    fn corrupted_csv_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "x,u\n0.5,abc\n").unwrap();
        let err = read_values_csv(&p).unwrap_err();
        assert!(format!("{err:#}").contains("malformed number"));
        fs::write(&p, "x,u\n0.5,1,2\n").unwrap();
        assert!(read_values_csv(&p).is_err());
    }
}
