//! Every stage on a reduced configuration, writing the artifacts to a
//! directory (default `pacc-demo`).
//!
//!     cargo run --release --example full_pipeline -- /tmp/pacc-demo

use pacc::experiment::{ExperimentConfig, Layout, Stage};

fn main() -> pacc::Result<()> {
    let mut config = ExperimentConfig::default();
    config.out_dir = std::env::args().nth(1).unwrap_or_else(|| "pacc-demo".into()).into();
    config.population.source_drivers = 20;
    config.population.target_drivers = 4;
    config.prediction.trials = 5;
    config.prediction.kl_samples = 2_000;
    config.planner.n_simulations = 2_000;
    config.pacc.episodes = 5;
    config.sweep.budgets = vec![32, 256, 2048];
    config.sweep.seeds = 4;
    for stage in Stage::ALL {
        println!("running {}", stage.name());
        stage.run(&config, false)?;
    }
    let summary = Layout::new(&config.out_dir).summary();
    print!("{}", std::fs::read_to_string(&summary).map_err(|e| pacc::Error::InvalidArgument(e.to_string()))?);
    Ok(())
}
