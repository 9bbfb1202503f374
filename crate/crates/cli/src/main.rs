use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sabc_cli::commands::{cmd_benchmark, cmd_run, cmd_verify, Overrides};

#[derive(Parser)]
#[command(name = "sabc", version, about = "Simulated-annealing ABC runs and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured sampler and write posterior.csv, trajectories.csv
    /// and record.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress per-sweep progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Monte Carlo check of the Onsager coefficients.
    Verify {
        #[arg(long, default_value_t = 3)]
        n_max: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// All algorithms over several seeds, scored against the reference
    /// posterior; writes metrics.csv.
    Benchmark {
        #[arg(long)]
        task: String,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// Base settings (particles, updates, v, ...); task and algorithm
        /// are overridden.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
            quiet,
        } => cmd_run(&config, &Overrides { seed, workers, out }, quiet).map(|_| true),
        Command::Verify { n_max, samples, seed } => cmd_verify(n_max, samples, seed),
        Command::Benchmark {
            task,
            seeds,
            config,
            workers,
            out,
        } => cmd_benchmark(
            &task,
            &seeds,
            config.as_deref(),
            &Overrides {
                seed: None,
                workers,
                out,
            },
        )
        .map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
