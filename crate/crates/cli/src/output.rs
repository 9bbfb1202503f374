//! Output files. Every file is written to a temporary sibling and renamed
//! into place, so readers never see a partial file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use sabc_core::{RunRecord, Trajectories};

pub const POSTERIOR_FILE: &str = "posterior.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const RECORD_FILE: &str = "record.json";
pub const METRICS_FILE: &str = "metrics.csv";

pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Header `θ_1..θ_d`, one row per particle.
pub fn posterior_csv(posterior: &[Vec<f64>]) -> String {
    let d = posterior.first().map_or(0, Vec::len);
    let mut out = (1..=d).map(|k| format!("θ_{k}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in posterior {
        out.push_str(&join(row.iter().copied()));
        out.push('\n');
    }
    out
}

/// Header `sweep,U_1..U_n,beta_e_1..beta_e_n,accept_rate`, one row per sweep.
pub fn trajectories_csv(t: &Trajectories) -> String {
    let n = t.u.first().map_or(0, Vec::len);
    let mut header = vec!["sweep".to_string()];
    header.extend((1..=n).map(|k| format!("U_{k}")));
    header.extend((1..=n).map(|k| format!("beta_e_{k}")));
    header.push("accept_rate".into());
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..t.len() {
        let _ = writeln!(
            out,
            "{},{},{},{:?}",
            t.sweep[i],
            join(t.u[i].iter().copied()),
            join(t.beta_e[i].iter().copied()),
            t.accept_rate[i]
        );
    }
    out
}

/// One benchmark result row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub task: String,
    pub algorithm: String,
    pub seed: u64,
    pub mmd: f64,
    pub c2st: f64,
    pub simulator_calls: u64,
    pub wall_clock: f64,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("task,algorithm,seed,mmd,c2st,simulator_calls,wall_clock\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:?},{:?},{},{:?}",
            r.task, r.algorithm, r.seed, r.mmd, r.c2st, r.simulator_calls, r.wall_clock
        );
    }
    out
}

/// Writes posterior, trajectories and the full record into `dir`.
pub fn write_run(dir: &Path, record: &RunRecord) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join(POSTERIOR_FILE), posterior_csv(&record.posterior).as_bytes())?;
    write_atomic(
        &dir.join(TRAJECTORIES_FILE),
        trajectories_csv(&record.trajectories).as_bytes(),
    )?;
    let json = serde_json::to_vec_pretty(record).map_err(std::io::Error::other)?;
    write_atomic(&dir.join(RECORD_FILE), &json)
}
