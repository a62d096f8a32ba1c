use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffkmeans_cli::commands::{
    cmd_baseline, cmd_eval, cmd_gen_data, cmd_gradcheck, cmd_train, GradCheckOptions, Overrides,
};

/// Differentiable k-means: train cluster means jointly with an embedding
/// under weak foreground/background supervision.
#[derive(Parser)]
#[command(name = "diffkmeans", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the key = value run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes checkpoint.bin, history.csv, and the confusion CSV.
    Train(RunArgs),
    /// Evaluate a checkpoint on the held-out split; writes confusion CSV and summary.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint path (default: <out>/<run-id>/checkpoint.bin).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Lloyd's k-means on the frozen embedding of a checkpoint.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Number of clusters (default: the checkpoint's K).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate the configured synthetic dataset as CSV.
    GenData(RunArgs),
    /// Finite-difference check of the full objective's gradients.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of non-degenerate instances to check.
        #[arg(long, default_value_t = 20)]
        instances: usize,
        /// Largest batch size sampled.
        #[arg(long = "max-n", default_value_t = 8)]
        max_n: usize,
        /// Largest input dimension sampled.
        #[arg(long = "max-d", default_value_t = 6)]
        max_d: usize,
        /// Cluster counts to sample from.
        #[arg(long = "k-values", value_delimiter = ',', default_values_t = [2usize, 3])]
        k_values: Vec<usize>,
        /// Test hook: corrupt one analytic gradient entry (must fail).
        #[arg(long)]
        corrupt: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(run) => cmd_train(&run.config, &run.overrides()),
        Command::Eval { run, checkpoint } => {
            cmd_eval(&run.config, &run.overrides(), checkpoint.as_deref())
        }
        Command::Baseline { run, checkpoint, k } => {
            cmd_baseline(&run.config, &run.overrides(), checkpoint.as_deref(), *k)
        }
        Command::GenData(run) => cmd_gen_data(&run.config, &run.overrides()),
        Command::Gradcheck {
            seed,
            instances,
            max_n,
            max_d,
            k_values,
            corrupt,
        } => cmd_gradcheck(&GradCheckOptions {
            seed: *seed,
            instances: *instances,
            max_samples: *max_n,
            max_dim: *max_d,
            k_values: k_values.clone(),
            corrupt: *corrupt,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
