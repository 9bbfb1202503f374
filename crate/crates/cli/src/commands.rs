//! The three subcommands, independent of argument parsing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use sabc_core::oracle::{c2st, mmd, thin, OracleCache, OracleMethod, REFERENCE_SIZE};
use sabc_core::sampler::master_stream;
use sabc_core::verify::onsager_mc;
use sabc_core::{run, task_by_name, Algorithm, Progress, RunConfig, RunRecord};

use crate::config_file::ConfigFile;
use crate::output::{self, MetricsRow};
use crate::CliError;

/// Output directory used when neither `--out` nor the config names one.
pub const DEFAULT_OUT: &str = "sabc-out";

/// Seed of the reference posterior; fixed so every benchmark run compares
/// against the same sample.
pub const ORACLE_SEED: u64 = 1;

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Loads and validates a config, applying command-line overrides. Nothing is
/// written to disk here.
pub fn resolve_config(path: &Path, overrides: &Overrides) -> Result<(RunConfig, PathBuf), CliError> {
    let mut file = ConfigFile::load(path)?;
    if let Some(seed) = overrides.seed {
        file.run.seed = seed;
    }
    if let Some(workers) = overrides.workers {
        file.run.workers = workers;
    }
    file.validate()?;
    let out = overrides
        .out
        .clone()
        .or(file.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok((file.run, out))
}

fn progress_printer(total_sweeps: u64) -> impl FnMut(&Progress) {
    let every = (total_sweeps / 10).max(1);
    move |p: &Progress| {
        if p.sweep % every == 0 {
            let u_mean = p.u.iter().sum::<f64>() / p.u.len() as f64;
            let b_max = p.beta_e.iter().copied().fold(0.0, f64::max);
            eprintln!(
                "sweep {:>8}  mean U {u_mean:.3e}  max beta_e {b_max:.3e}  accept {:.3}",
                p.sweep, p.accept_rate
            );
        }
    }
}

/// `sabc run`: executes one configured run and writes its output files.
pub fn cmd_run(config: &Path, overrides: &Overrides, quiet: bool) -> Result<RunRecord, CliError> {
    let (cfg, out) = resolve_config(config, overrides)?;
    let task = task_by_name(&cfg.task)?;
    let mut printer = progress_printer(cfg.updates / cfg.particles as u64);
    let progress: Option<&mut dyn FnMut(&Progress)> = if quiet { None } else { Some(&mut printer) };
    let record = run(task, &cfg, progress)?;
    output::write_run(&out, &record)?;
    eprintln!(
        "{} on {}: status {:?}, {} simulator calls, {:.1}s; wrote {}",
        cfg.algorithm.as_str(),
        cfg.task,
        record.status,
        record.simulator_calls,
        record.wall_clock_seconds,
        out.display()
    );
    Ok(record)
}

/// `sabc verify`: Monte Carlo check of the Onsager coefficients. Returns
/// whether every entry lies within three standard errors of its target.
pub fn cmd_verify(n_max: usize, samples: usize, seed: u64) -> Result<bool, CliError> {
    if !(1..=4).contains(&n_max) {
        return Err(CliError::Usage(format!("--n-max must lie in 1..=4, got {n_max}")));
    }
    if samples < 100_000 {
        return Err(CliError::Usage(format!("--samples must be at least 100000, got {samples}")));
    }
    println!("n  entry     estimate        se  target       z");
    let mut ok = true;
    for n in 1..=n_max {
        let est = onsager_mc(n, samples, seed + n as u64);
        let mut row = |name: &str, value: f64, se: f64, target: f64| {
            let z = (value - target) / se;
            ok &= z.abs() <= 3.0;
            println!("{n}  {name:<8} {value:>9.4} {se:>9.4} {target:>7} {z:>7.2}");
        };
        row("diagonal", est.diagonal, est.diagonal_se, est.diagonal_target);
        if let (Some((value, se)), Some(target)) = (est.off_diagonal, est.off_diagonal_target) {
            row("off-diag", value, se, target);
        }
    }
    println!("{}", if ok { "all entries within 3 standard errors" } else { "MISMATCH" });
    Ok(ok)
}

/// Scores of the prior against the reference posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub mmd: f64,
    pub c2st: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub rows: Vec<MetricsRow>,
    pub baseline: Baseline,
}

/// `sabc benchmark`: every algorithm on every seed, scored against the
/// reference posterior.
pub fn cmd_benchmark(
    task_name: &str,
    seeds: &[u64],
    base: Option<&Path>,
    overrides: &Overrides,
) -> Result<BenchmarkOutcome, CliError> {
    let (mut template, out) = match base {
        Some(path) => resolve_config(path, overrides)?,
        None => {
            let mut cfg = RunConfig::new(task_name, Algorithm::SabcMulti);
            if let Some(w) = overrides.workers {
                cfg.workers = w;
            }
            let out = overrides.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            (cfg, out)
        }
    };
    template.task = task_name.to_string();
    template.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if seeds.is_empty() {
        return Err(CliError::Usage("--seeds must name at least one seed".into()));
    }
    OracleMethod::for_task(task_name)?;
    let task = task_by_name(task_name)?;

    let cache = OracleCache::new(out.join("oracle-cache"));
    let oracle = cache.get_or_compute(&*task, REFERENCE_SIZE, ORACLE_SEED)?.samples;
    let mut rng = master_stream(ORACLE_SEED + 1);
    let prior: Vec<Vec<f64>> = (0..oracle.len()).map(|_| task.prior_sample(&mut rng)).collect();
    let baseline = Baseline {
        mmd: mmd(&prior, &oracle)?,
        c2st: c2st(&prior, &oracle)?,
    };
    eprintln!("prior baseline: mmd {:.4e}, c2st {:.4}", baseline.mmd, baseline.c2st);

    let mut rows = Vec::new();
    for alg in Algorithm::ALL {
        for &seed in seeds {
            let mut cfg = template.clone();
            cfg.algorithm = alg;
            cfg.seed = seed;
            let start = Instant::now();
            let record = run(task.clone(), &cfg, None)?;
            let wall_clock = start.elapsed().as_secs_f64();
            let reference = thin(&oracle, record.posterior.len());
            let row = MetricsRow {
                task: task_name.to_string(),
                algorithm: alg.as_str().to_string(),
                seed,
                mmd: mmd(&record.posterior, &reference)?,
                c2st: c2st(&record.posterior, &reference)?,
                simulator_calls: record.simulator_calls,
                wall_clock,
            };
            eprintln!(
                "{:<12} seed {seed}: mmd {:.4e}, c2st {:.4}, {:.1}s",
                row.algorithm, row.mmd, row.c2st, row.wall_clock
            );
            rows.push(row);
        }
    }

    std::fs::create_dir_all(&out)?;
    output::write_atomic(&out.join(output::METRICS_FILE), output::metrics_csv(&rows).as_bytes())?;
    output::write_atomic(
        &out.join("baseline.csv"),
        format!("task,mmd,c2st\n{task_name},{},{}\n", baseline.mmd, baseline.c2st).as_bytes(),
    )?;
    Ok(BenchmarkOutcome { rows, baseline })
}
