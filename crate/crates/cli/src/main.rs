use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_sensing_cli::commands;
use ris_sensing_cli::{CliError, ExperimentConfig};

/// RIS sensing experiment runner: optimize a configuration matrix,
/// generate labeled datasets, train and evaluate the decision network,
/// and compare against the random and non-configurable baselines.
#[derive(Parser)]
#[command(name = "ris-sensing", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override dataset noise: "on" or "off".
    #[arg(long, value_parser = ["on", "off"])]
    noise: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the configuration matrix and write it with its
    /// coherence history.
    OptimizeConfig(CommonArgs),
    /// Generate labeled train/test datasets for a stored matrix.
    GenDataset {
        #[command(flatten)]
        common: CommonArgs,
        /// Configuration-matrix artifact to sense with.
        #[arg(long)]
        t_matrix: PathBuf,
    },
    /// Train the decision network on a train split and evaluate it on a
    /// test split.
    TrainEval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Run the optimized / random / fixed-state pipelines and tabulate
    /// mu, accuracy, and cost.
    Compare(CommonArgs),
    /// Export the pairwise coherence table of a configuration matrix.
    CoherenceReport {
        #[command(flatten)]
        common: CommonArgs,
        /// Stored matrix; a seeded random one is used when omitted.
        #[arg(long)]
        t_matrix: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::OptimizeConfig(c) | Command::Compare(c) => c,
            Command::GenDataset { common, .. }
            | Command::TrainEval { common, .. }
            | Command::CoherenceReport { common, .. } => common,
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(noise) = &common.noise {
        config.dataset.noise = noise == "on";
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&config.out_dir));
    Ok((config, out))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (config, out) = load_config(cli.command.common())?;
    match &cli.command {
        Command::OptimizeConfig(_) => {
            let summary = commands::cmd_optimize_config(&config, &out)?;
            println!(
                "optimize-config: mu {} -> {} over {} iterations; wrote {}",
                summary.initial_mu,
                summary.final_mu,
                summary.iterations,
                summary.t_path.display()
            );
        }
        Command::GenDataset { t_matrix, .. } => {
            let summary = commands::cmd_gen_dataset(&config, t_matrix, &out)?;
            println!(
                "gen-dataset: {} train rows -> {}, {} test rows -> {}",
                summary.train_rows,
                summary.train_path.display(),
                summary.test_rows,
                summary.test_path.display()
            );
        }
        Command::TrainEval { train, test, .. } => {
            let summary = commands::cmd_train_eval(&config, train, test, &out)?;
            println!(
                "train-eval: accuracy={:.4} psi_hat={:.6} epochs={} model={}",
                summary.accuracy,
                summary.psi_hat,
                summary.epochs,
                summary.model_path.display()
            );
        }
        Command::Compare(_) => {
            let rows = commands::cmd_compare(&config, &out)?;
            println!("case,mu,accuracy,psi_hat");
            for row in rows {
                println!("{},{:.6},{:.4},{:.6}", row.case, row.mu, row.accuracy, row.psi_hat);
            }
        }
        Command::CoherenceReport { t_matrix, .. } => {
            let mu = commands::cmd_coherence_report(&config, t_matrix.as_deref(), &out)?;
            println!("coherence-report: average_mutual_coherence={mu}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
