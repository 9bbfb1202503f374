use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sabc_core::RunRecord;

fn sabc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sabc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const TINY_GMM: &str = "\
task = gmm
algorithm = sabc-multi
particles = 100
updates = 1000   # ten sweeps
v = 0.001
seed = 3
";

fn run_tiny(dir: &Path, out: &str, extra: &[&str]) -> PathBuf {
    let cfg = write_config(dir, "tiny.cfg", TINY_GMM);
    let out = dir.join(out);
    let mut args = vec!["run", "--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let res = sabc(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

#[test]
fn missing_task_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "algorithm = sabc-single\n");
    let out = dir.path().join("out");
    let res = sabc(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("task"), "{stderr}");
    assert!(!out.exists());
}

#[test]
fn invalid_field_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "task = gmm\nalgorithm = sabc-single\nparticles = 12\n");
    let out = dir.path().join("out");
    let res = sabc(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("line 3") && stderr.contains("particles"), "{stderr}");
    assert!(!out.exists());

    let res = sabc(&["run", "--config", cfg.to_str().unwrap(), "--workers", "0"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn tiny_run_writes_parseable_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tiny(dir.path(), "out", &[]);

    let posterior = std::fs::read_to_string(out.join("posterior.csv")).unwrap();
    let mut lines = posterior.lines();
    assert_eq!(lines.next(), Some("θ_1,θ_2"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 100);

    let traj = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("sweep,U_1,U_2,beta_e_1,beta_e_2,accept_rate"));
    assert_eq!(lines.count(), 10);

    let json = std::fs::read_to_string(out.join("record.json")).unwrap();
    let record: RunRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(record.posterior, rows);
    assert_eq!(record.trajectories.len(), 10);
    assert_eq!(serde_json::to_string_pretty(&record).unwrap(), json);
}

#[test]
fn same_seed_gives_identical_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_tiny(dir.path(), "a", &[]);
    let b = run_tiny(dir.path(), "b", &[]);
    let c = run_tiny(dir.path(), "c", &["--workers", "4"]);
    let read = |p: &Path| std::fs::read(p.join("posterior.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
    let d = run_tiny(dir.path(), "d", &["--seed", "4"]);
    assert_ne!(read(&a), read(&d));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.cfg", TINY_GMM);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let res = sabc(&[
        "run",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        blocker.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn verify_reports_targets() {
    let res = sabc(&["verify", "--n-max", "2", "--samples", "100000"]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("within 3 standard errors"), "{stdout}");
    assert_eq!(sabc(&["verify", "--samples", "10"]).status.code(), Some(2));
    assert_eq!(sabc(&["verify", "--n-max", "7"]).status.code(), Some(2));
}

#[test]
fn benchmark_writes_one_row_per_algorithm_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "base.cfg", "task = gmm\nalgorithm = sabc-multi\nupdates = 20000\nv = 0.001\n");
    let out = dir.path().join("bench");
    let res = sabc(&[
        "benchmark",
        "--task",
        "gmm",
        "--seeds",
        "0,1",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("task,algorithm,seed,mmd,c2st,simulator_calls,wall_clock"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 3 * 2);
    let baseline = std::fs::read_to_string(out.join("baseline.csv")).unwrap();
    let prior_c2st: f64 = baseline.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    for row in &rows {
        let c: f64 = row[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&c));
        if row[1].starts_with("sabc") {
            assert!(c < prior_c2st, "{row:?} vs prior {prior_c2st}");
        }
    }
    assert!(out.join("oracle-cache").read_dir().unwrap().count() > 0);
}
