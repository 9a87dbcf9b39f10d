//! Predict the style of new drivers from a handful of events by comparing
//! their Gaussian mixture with each style's mixture.
//!
//!     cargo run --release --example predict_style

use std::collections::BTreeMap;

use pacc::data::DiscretizationSpec;
use pacc::experiment::{build_population, cluster_styles, learn_driver, synthesize_population, ExperimentConfig, Role};
use pacc::irl::IrlConfig;
use pacc::prediction::{event_points, fit_style_model, ground_truth_cluster, predict_cluster, PredictionConfig};

fn main() -> pacc::Result<()> {
    let config = ExperimentConfig::default();
    let spec = DiscretizationSpec::default();
    let irl = IrlConfig::default();
    let population = build_population(&config.population, 5);
    let events = synthesize_population(&population, &spec)?;

    let mut learned = Vec::new();
    let mut points = BTreeMap::new();
    for (driver, events) in population.drivers.iter().zip(&events) {
        if driver.role == Role::Source {
            learned.push(learn_driver(&driver.driver_id, events, &spec, &irl)?);
            points.insert(driver.driver_id.clone(), event_points(events));
        }
    }
    let clusters = cluster_styles(&learned, &config.clustering, 5)?.model;
    let style = fit_style_model(&clusters, &points, 3, 5)?;

    let prediction = PredictionConfig::default();
    for (driver, events) in population.drivers.iter().zip(&events) {
        if driver.role != Role::Target {
            continue;
        }
        let truth = ground_truth_cluster(&events[10..], &style.centroids, &spec, &irl)?;
        let guesses: Vec<usize> = [1, 3, 6, 10]
            .into_iter()
            .map(|n| predict_cluster(&driver.driver_id, &event_points(&events[..n]), &style, &prediction, 9))
            .map(|p| p.map(|p| p.predicted_cluster))
            .collect::<pacc::Result<_>>()?;
        println!("{}: truth {truth}, predicted with 1/3/6/10 events {guesses:?}", driver.driver_id);
    }
    Ok(())
}
