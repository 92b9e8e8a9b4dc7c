use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use survsynth_cli::{cmd_evaluate, cmd_fit, cmd_pipeline, cmd_synthesize, CliError, PipelineConfig};

const AFTER_HELP: &str = "\
Seeds: every random stage derives its seed from the config `seed`.
  fit          deterministic, no seed
  synthesize   covariates: seed + 1, survival times: seed + 2
Exit codes: 0 ok, 2 config or schema error, 3 model cannot be inverted
(non-monotone cumulative hazard), 4 numerical failure.";

#[derive(Parser)]
#[command(name = "survsynth", version, about = "Synthetic survival cohorts from a spline hazard model", after_help = AFTER_HELP)]
struct Cli {
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the survival model and write the model JSON.
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate the synthetic cohort from the saved model.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the synthetic cohort with the original.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit, synthesize and evaluate.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(command: Command) -> Result<String, CliError> {
    match command {
        Command::Fit { config } => cmd_fit(&PipelineConfig::load(config)?),
        Command::Synthesize { config } => {
            let n = cmd_synthesize(&PipelineConfig::load(config)?)?;
            Ok(format!("synthetic rows: {n}\n"))
        }
        Command::Evaluate { config } => cmd_evaluate(&PipelineConfig::load(config)?).map(|l| l + "\n"),
        Command::Pipeline { config } => cmd_pipeline(&PipelineConfig::load(config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
