//! `rashomon` — multiplicity and consistency analysis for seeded ensembles
//! of probabilistic binary classifiers.
//!
//! Pipelines are config-driven and content-addressed: every command resolves
//! an effective config (flag > env > file > default), hashes it, and reads
//! or writes artifacts under `<output_dir>/<hash>/`. Given the same config,
//! every command is deterministic byte for byte, independent of
//! `--threads`.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Overrides};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "rashomon", version)]
#[command(about = "Quantify predictive multiplicity and neighborhood consistency of seeded classifier ensembles")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    /// Results do not depend on this value.
    #[arg(long, global = true, env = "RASHOMON_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Path to the experiment config (TOML).
    #[arg(long, env = "RASHOMON_CONFIG")]
    config: PathBuf,

    /// Base seed override.
    #[arg(long, env = "RASHOMON_SEED")]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long, env = "RASHOMON_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    /// Shot-count override.
    #[arg(long, env = "RASHOMON_N_SHOTS")]
    n_shots: Option<usize>,

    /// Ensemble-size override.
    #[arg(long, env = "RASHOMON_N_MODELS")]
    n_models: Option<usize>,
}

impl ConfigArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            n_shots: self.n_shots,
            n_models: self.n_models,
            ..Overrides::default()
        }
    }

    fn load(&self, extra: impl FnOnce(&mut Overrides)) -> Result<ExperimentConfig, CliError> {
        let mut overrides = self.overrides();
        extra(&mut overrides);
        ExperimentConfig::load(&self.config, &overrides)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate the dataset and report split and embedding geometry.
    Ingest {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the seeded model ensemble and record test accuracies.
    TrainEnsemble {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Build the competing set and emit the multiplicity report.
    Multiplicity {
        #[command(flatten)]
        config: ConfigArgs,
        /// Error tolerance for the competing set.
        #[arg(long, env = "RASHOMON_DELTA")]
        delta: Option<f64>,
    },
    /// Profile one model's consistency over the test split.
    Consistency {
        #[command(flatten)]
        config: ConfigArgs,
        /// Ensemble member to profile (default: the reference model).
        #[arg(long, env = "RASHOMON_MODEL_ID")]
        model_id: Option<usize>,
    },
    /// Correlate the consistency profile with the multiplicity report.
    Correlate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Monte Carlo verification of the divergence and consistency bounds.
    VerifyBound {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trials per grid cell.
        #[arg(long, env = "RASHOMON_TRIALS")]
        trials: Option<usize>,
        /// Diagnostic multiplier on the estimated beta (1.0 = honest).
        #[arg(long, env = "RASHOMON_BETA_SCALE")]
        beta_scale: Option<f64>,
    },
    /// Generate a demo dataset and a matching config file.
    GenData {
        /// Rows to generate.
        #[arg(long, default_value_t = 2000)]
        rows: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Ingest { config } => {
            let config = config.load(|_| {})?;
            commands::cmd_ingest(&config)
        }
        Command::TrainEnsemble { config } => {
            let config = config.load(|_| {})?;
            commands::cmd_train_ensemble(&config)
        }
        Command::Multiplicity { config, delta } => {
            let config = config.load(|o| o.delta = delta)?;
            commands::cmd_multiplicity(&config)
        }
        Command::Consistency { config, model_id } => {
            let config = config.load(|_| {})?;
            commands::cmd_consistency(&config, model_id)
        }
        Command::Correlate { config } => {
            let config = config.load(|_| {})?;
            commands::cmd_correlate(&config)
        }
        Command::VerifyBound {
            config,
            trials,
            beta_scale,
        } => {
            let config = config.load(|o| {
                o.trials = trials;
                o.beta_scale = beta_scale;
            })?;
            commands::cmd_verify_bound(&config)
        }
        Command::GenData { rows, seed, out } => commands::cmd_gen_data(rows, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version requests are not errors
            if err.use_stderr() {
                err.print().expect("stderr");
                return ExitCode::from(1);
            }
            err.print().expect("stdout");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
