use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ffde(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffde"))
        .current_dir(dir)
        .env_remove("FFDE_SEED")
        .args(args)
        .output()
        .expect("spawn ffde")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(text: &str, key: &str) -> Option<String> {
    text.split_whitespace()
        .find_map(|w| w.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn run_dir(o: &Output) -> PathBuf {
    PathBuf::from(field(&stdout(o), "run_dir").expect("run_dir line"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SCALAR: &str = "m = 0.5\noutput_dir = \"out\"\n[operator]\nkind = \"identity\"\n[grid]\nn = 1\n\
[datum]\nkind = \"eigenfunction\"\n[solver]\ndt_init = 1e-4\ndt_policy = \"fixed\"\n";

const SEPARABLE: &str = "m = 0.5\noutput_dir = \"out\"\n[operator]\nkind = \"rfl\"\ns = 0.75\n[grid]\nn = 32\n\
[datum]\nkind = \"separable\"\nextinction_time = 1.0\n[solver]\ndt_init = 1e-6\nadapt_c = 0.002\n";

#[test]
fn scalar_run_extinguishes_at_two() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "scalar.toml", SCALAR);
    let o = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t: f64 = field(&stdout(&o), "T_fit").unwrap().parse().unwrap();
    assert!((t - 2.0).abs() <= 0.02, "T_fit = {t}");
}

#[test]
fn separable_datum_extinguishes_at_prescribed_time() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "sep.toml", SEPARABLE);
    let o = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t: f64 = field(&stdout(&o), "T_fit").unwrap().parse().unwrap();
    assert!((t - 1.0).abs() <= 0.01, "T_fit = {t}");
}

#[test]
fn short_horizon_is_not_an_error() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "scalar.toml", SCALAR);
    let o = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap(), "--t-max", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("T_fit=NA"));
    let manifest = fs::read_to_string(d.path().join(run_dir(&o)).join("manifest.json")).unwrap();
    assert!(manifest.contains("no extinction before t_max"), "{manifest}");
}

#[test]
fn censored_kernel_below_one_half_is_a_usage_error() {
    let d = TempDir::new().unwrap();
    let o = ffde(d.path(), &["operator", "--kind", "cfl", "--s", "0.4", "--n", "16"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = ffde(d.path(), &["solve", "--kind", "rfl", "--s", "0.5", "--n", "8"]);
    assert_eq!(o.status.code(), Some(2), "missing m must be a usage error");
    let o = ffde(d.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spectral_kernel_at_unit_order_matches_the_local_laplacian() {
    let d = TempDir::new().unwrap();
    let record = |kind: &str| -> serde_json::Value {
        let o = ffde(d.path(), &["operator", "--kind", kind, "--s", "1.0", "--n", "24", "--output-dir", "ops"]);
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_str(&stdout(&o)).unwrap()
    };
    let (a, b) = (record("sfl"), record("local"));
    let ea = a["eigenvalues_head"].as_array().unwrap();
    let eb = b["eigenvalues_head"].as_array().unwrap();
    assert_eq!(ea.len(), eb.len());
    for (x, y) in ea.iter().zip(eb) {
        let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
        assert!((x - y).abs() <= 1e-10 * y, "{x} vs {y}");
    }
    assert_eq!(fs::read_dir(d.path().join("ops")).unwrap().count(), 2);
}

#[test]
fn verify_on_a_separable_run_finds_no_violations() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "sep.toml", SEPARABLE);
    let o = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = d.path().join(run_dir(&o));
    let v = ffde(d.path(), &["verify", run.to_str().unwrap(), "--check", "all"]);
    assert!(v.status.success(), "{}\n{}", stdout(&v), stderr(&v));
    let summary = fs::read_to_string(run.join("reports/summary.csv")).unwrap();
    assert!(summary.starts_with("report,verdict,"));
    assert!(!summary.contains(",violated,"), "{summary}");
    assert!(run.join("reports/time_monotonicity.json").exists());
    assert!(run.join("reports/time_monotonicity.csv").exists());
}

#[test]
fn smoothing_below_the_critical_line_is_not_applicable() {
    let d = TempDir::new().unwrap();
    let cfg = write(
        d.path(),
        "sub.toml",
        "m = 0.3\noutput_dir = \"out\"\n[operator]\nkind = \"rfl\"\ns = 0.25\n[grid]\nn = 32\n\
         [datum]\nkind = \"point_mass\"\n[[checks]]\nname = \"smoothing\"\np = [1.0]\n",
    );
    let o = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = ffde(d.path(), &["verify", "--config", cfg.to_str().unwrap()]);
    assert!(v.status.success(), "{}", stderr(&v));
    assert!(stdout(&v).contains("not_applicable"), "{}", stdout(&v));
    let run = d.path().join(run_dir(&o));
    let json = fs::read_to_string(run.join("reports/smoothing.lp_p1.json")).unwrap();
    assert!(json.contains("requires p > p_c"), "{json}");
}

#[test]
fn corrupted_and_incomplete_runs_are_reported() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "scalar.toml", SCALAR);
    let o = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap(), "--t-max", "0.2"]);
    let run = d.path().join(run_dir(&o));
    let traj = run.join("trajectory.csv");
    let mut text = fs::read_to_string(&traj).unwrap();
    text.push_str("0.3,abc\n");
    fs::write(&traj, text).unwrap();
    let v = ffde(d.path(), &["verify", run.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stderr(&v).contains("trajectory"), "{}", stderr(&v));

    fs::remove_file(run.join("manifest.json")).unwrap();
    let v = ffde(d.path(), &["verify", run.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stderr(&v).contains("manifest"), "{}", stderr(&v));
}

#[test]
fn identical_configs_give_identical_files() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "sep.toml", SEPARABLE);
    let mut dirs = Vec::new();
    for out in ["a", "b"] {
        let o = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap(), "--output-dir", out]);
        assert!(o.status.success());
        dirs.push(d.path().join(run_dir(&o)));
    }
    assert_eq!(dirs[0].file_name(), dirs[1].file_name());
    for f in ["trajectory.csv", "manifest.json", "config.toml"] {
        assert_eq!(fs::read(dirs[0].join(f)).unwrap(), fs::read(dirs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resume_reuses_a_complete_run() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "scalar.toml", SCALAR);
    let first = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert!(!stdout(&first).contains("reused"));
    let run = d.path().join(run_dir(&first));
    assert!(!run.join(".partial").exists());
    let again = ffde(d.path(), &["solve", "--config", cfg.to_str().unwrap(), "--resume"]);
    assert!(again.status.success());
    assert!(stdout(&again).contains("reused complete run"));
    assert_eq!(field(&stdout(&first), "T_fit"), field(&stdout(&again), "T_fit"));
}

#[test]
fn sweep_axes_are_validated() {
    let d = TempDir::new().unwrap();
    let cfg = write(
        d.path(),
        "base.toml",
        "m = 0.5\noutput_dir = \"out\"\n[operator]\nkind = \"rfl\"\ns = 0.25\n[grid]\nn = 8\n",
    );
    let c = cfg.to_str().unwrap();
    let o = ffde(d.path(), &["sweep", "--config", c]);
    assert_eq!(o.status.code(), Some(2), "no axes");
    let o = ffde(d.path(), &["sweep", "--config", c, "--axis", "m="]);
    assert_eq!(o.status.code(), Some(2), "empty axis");
    let o = ffde(d.path(), &["sweep", "--config", c, "--axis", "m=0.3,0.6", "--axis", "p=1", "--mode", "zip"]);
    assert_eq!(o.status.code(), Some(2), "zip mismatch");

    let o = ffde(d.path(), &["sweep", "--config", c, "--axis", "m=0.3,0.6", "--axis", "p=1,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(d.path().join("out/phase.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("m,s,p,kind,n,verdict,kappa_hat,T_fit"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn seed_environment_variable_overrides_the_config() {
    let d = TempDir::new().unwrap();
    let cfg = write(
        d.path(),
        "sv.toml",
        "m = 0.5\noutput_dir = \"out\"\nseed = 1\n[operator]\nkind = \"rfl\"\ns = 0.5\n[grid]\nn = 16\n\
         [solver]\nt_max = 0.01\n[[checks]]\nname = \"stroock_varopoulos\"\nq = [2.0]\ntrials = 5\n",
    );
    let c = cfg.to_str().unwrap();
    assert!(ffde(d.path(), &["solve", "--config", c]).status.success());
    let worst = |seed: Option<&str>| -> String {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ffde"));
        cmd.current_dir(d.path()).args(["verify", "--config", c]);
        match seed {
            Some(s) => cmd.env("FFDE_SEED", s),
            None => cmd.env_remove("FFDE_SEED"),
        };
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        let dir = fs::read_dir(d.path().join("out")).unwrap().next().unwrap().unwrap().path();
        fs::read_to_string(dir.join("reports/stroock_varopoulos_q2.csv")).unwrap()
    };
    let base = worst(None);
    assert_eq!(base, worst(Some("1")));
    assert_ne!(base, worst(Some("2")));
}

#[test]
fn constants_prints_the_exponent_table() {
    let d = TempDir::new().unwrap();
    let o = ffde(d.path(), &["constants", "--s", "0.25", "--m", "0.3", "--kind", "rfl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json = stdout(&o).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!((v["p_c"].as_f64().unwrap() - 1.4).abs() < 1e-12);
    assert!((v["m_c"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}
