//! Command-line front end: each subcommand runs a slice of the pipeline
//! against one JSON run configuration.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 partial
//! completion (some stage skipped or failed while the rest ran).

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use stagewise::ingest::Stage;
use stagewise::learners::Learner;
use stagewise::pipeline::{run_with_options, PipelineOptions, RunConfig};
use stagewise::Error;

#[derive(Parser)]
#[command(
    name = "stagewise",
    version,
    about = "Stage-stratified cancer survivability models with explanations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's root seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to one stage: localized | regional | distant | all
    #[arg(long, default_value = "all")]
    stage: String,
    /// Restrict to one learner: lr | rf | ada | gbdt | all
    #[arg(long, default_value = "all")]
    learner: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic cohort CSV named by the config
    Synth(CommonArgs),
    /// Parse, clean, label, and stage-split the cohort
    Ingest(CommonArgs),
    /// Grid-search the learners and store the best models
    Train(CommonArgs),
    /// Cross-validated metrics tables and ROC curves
    Evaluate(CommonArgs),
    /// Shapley summaries, local surrogate case reports, presence matrices
    Explain(CommonArgs),
    /// Descriptive statistics and correlation reports
    Report(CommonArgs),
    /// The full workflow
    Run(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Synth(a)
            | Command::Ingest(a)
            | Command::Train(a)
            | Command::Evaluate(a)
            | Command::Explain(a)
            | Command::Report(a)
            | Command::Run(a) => a,
        }
    }

    fn options(&self) -> PipelineOptions {
        let off = PipelineOptions {
            ingest_reports: false,
            train: false,
            evaluate: false,
            explain: false,
            stats: false,
        };
        match self {
            Command::Synth(_) => off,
            Command::Ingest(_) => PipelineOptions {
                ingest_reports: true,
                ..off
            },
            Command::Train(_) => PipelineOptions { train: true, ..off },
            Command::Evaluate(_) => PipelineOptions {
                train: true,
                evaluate: true,
                ..off
            },
            Command::Explain(_) => PipelineOptions {
                explain: true,
                ..off
            },
            Command::Report(_) => PipelineOptions {
                ingest_reports: true,
                stats: true,
                ..off
            },
            Command::Run(_) => PipelineOptions::all(),
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

fn load_config(args: &CommonArgs) -> Result<RunConfig, String> {
    let mut config = RunConfig::from_path(&args.config)
        .map_err(|e| format!("cannot load config {}: {e}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if args.stage != "all" {
        config.stage_filter = Some(Stage::from_str(&args.stage)?);
    }
    if args.learner != "all" {
        config.learner_filter = Some(Learner::from_str(&args.learner)?);
    }
    Ok(config)
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::InvalidConfig(_) | Error::InvalidSchema(_) | Error::ModelVersion(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command;

    let config = match load_config(command.common()) {
        Ok(config) => config,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    match run_with_options(&config, command.options()) {
        Ok(summary) => {
            for (stage, status) in &summary.manifest.stages {
                println!("{stage}: {status}");
            }
            for error in &summary.manifest.errors {
                eprintln!("warning: {error}");
            }
            println!("artifacts: {}", summary.out_dir.display());
            if summary.partial {
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
