use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacc::experiment::{ExperimentConfig, Stage};

#[derive(Parser)]
#[command(name = "pacc", version, about = "Driving-style learning and personalized cruise control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic driver population as raw trajectories.
    Synth(Common),
    /// Extract car-following events from the trajectories.
    Extract(Common),
    /// Learn reward weights for every source driver.
    Learn(Common),
    /// Elbow scan and k-means over the learned weights.
    Cluster(Common),
    /// Fit cluster mixtures and run the prediction accuracy study.
    Predict(Common),
    /// Drive closed-loop cruise-control episodes with the chosen style.
    Plan(Common),
    /// Cumulative reward and cost against the simulation budget.
    Sweep(Common),
    /// Write the report, summary and figure tables.
    Report(Common),
    /// Every stage in order.
    All(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single-threaded, with no wall-clock cut-off in the planner.
    #[arg(long)]
    deterministic: bool,
}

fn run(stages: &[Stage], args: &Common) -> pacc::Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    for stage in stages {
        log::info!("running {}", stage.name());
        stage.run(&config, args.deterministic)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (stages, args): (&[Stage], _) = match &cli.command {
        Command::Synth(a) => (&[Stage::Synth], a),
        Command::Extract(a) => (&[Stage::Extract], a),
        Command::Learn(a) => (&[Stage::Learn], a),
        Command::Cluster(a) => (&[Stage::Cluster], a),
        Command::Predict(a) => (&[Stage::Predict], a),
        Command::Plan(a) => (&[Stage::Plan], a),
        Command::Sweep(a) => (&[Stage::Sweep], a),
        Command::Report(a) => (&[Stage::Report], a),
        Command::All(a) => (&Stage::ALL, a),
    };
    match run(stages, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
