//! Learn a reward per source driver and group the drivers into styles.
//!
//!     cargo run --release --example cluster_styles

use pacc::data::DiscretizationSpec;
use pacc::experiment::{build_population, cluster_styles, learn_driver, synthesize_population, ExperimentConfig, Role};
use pacc::irl::IrlConfig;
use pacc::stats::adjusted_rand_index;

fn main() -> pacc::Result<()> {
    let config = ExperimentConfig::default();
    let spec = DiscretizationSpec::default();
    let population = build_population(&config.population, 11);
    let events = synthesize_population(&population, &spec)?;
    let mut learned = Vec::new();
    let mut archetypes = Vec::new();
    for (driver, events) in population.drivers.iter().zip(&events) {
        if driver.role == Role::Source {
            learned.push(learn_driver(&driver.driver_id, events, &spec, &IrlConfig::default())?);
            archetypes.push(driver.archetype);
        }
    }
    let styles = cluster_styles(&learned, &config.clustering, 11)?;
    println!("k   inertia");
    for row in &styles.elbow.rows {
        println!("{:<3} {:.3}", row.k, row.inertia);
    }
    let labels: Vec<usize> = learned.iter().map(|d| styles.model.assignments[&d.driver_id]).collect();
    println!("elbow k = {:?}", styles.elbow_k);
    for c in 0..styles.model.k {
        println!("style {c}: {:?}", styles.model.members(c));
    }
    println!("adjusted Rand index vs archetypes: {:.3}", adjusted_rand_index(&labels, &archetypes));
    Ok(())
}
