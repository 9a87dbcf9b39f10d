//! Style prediction for drivers with little data: the driver and every
//! cluster are modelled as mixtures over aggregated (speed, distance)
//! points, and the driver inherits the centroid reward of the cluster with
//! the smallest KL divergence.

mod gmm;
mod kl;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gmm::{fit_gmm, min_eigenvalue, Cov, Gmm, GmmComponent, GmmFit, Point, COV_REGULARIZATION, EM_MAX_ITERATIONS, EM_TOLERANCE};
pub use kl::{kl_divergence_mc, KlEstimate, DENSITY_FLOOR, MIN_KL_SAMPLES};

use crate::clustering::ClusterModel;
use crate::data::{aggregate, discretize_event, CarFollowingEvent, DiscretizationSpec};
use crate::error::{Error, Result};
use crate::irl::{learn_reward, normalize_weights, Demonstration, IrlConfig, RewardWeights};
use crate::rng::{derive_seed, task_rng};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionConfig {
    /// Mixture components for both driver and cluster models.
    pub components: usize,
    pub kl_samples: usize,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self { components: 3, kl_samples: 10_000 }
    }
}

/// Aggregated (speed, distance) points of a set of events.
pub fn event_points<'a>(events: impl IntoIterator<Item = &'a CarFollowingEvent>) -> Vec<Point> {
    events
        .into_iter()
        .flat_map(aggregate)
        .map(|p| [p.speed, p.distance])
        .collect()
}

/// One mixture per cluster plus the cluster centroid rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleModel {
    pub gmms: Vec<Gmm>,
    pub centroids: Vec<RewardWeights>,
}

/// Fit each cluster's mixture on the pooled points of its member drivers.
pub fn fit_style_model(
    clusters: &ClusterModel,
    points_by_driver: &BTreeMap<String, Vec<Point>>,
    components: usize,
    seed: u64,
) -> Result<StyleModel> {
    let gmms = (0..clusters.k)
        .into_par_iter()
        .map(|c| {
            let pooled: Vec<Point> = clusters
                .members(c)
                .iter()
                .filter_map(|id| points_by_driver.get(*id))
                .flatten()
                .copied()
                .collect();
            fit_gmm(&pooled, components, derive_seed(seed, c as u64)).map(|f| f.gmm)
        })
        .collect::<Result<Vec<_>>>()?;
    let centroids = clusters
        .centroids
        .iter()
        .map(|c| {
            let w: [f64; crate::data::N_STATES] = c
                .as_slice()
                .try_into()
                .map_err(|_| Error::invalid("centroid length must equal the number of states"))?;
            Ok(RewardWeights(w))
        })
        .collect::<Result<_>>()?;
    Ok(StyleModel { gmms, centroids })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub driver_id: String,
    pub kl: Vec<KlEstimate>,
    pub predicted_cluster: usize,
    pub weights: RewardWeights,
}

/// Index of the smallest value; ties go to the lowest index.
fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Fit the driver's mixture and pick the cluster with the smallest
/// D(driver || cluster). Every cluster is scored on the same draws from the
/// driver mixture.
pub fn predict_cluster(
    driver_id: &str,
    driver_samples: &[Point],
    style: &StyleModel,
    config: &PredictionConfig,
    seed: u64,
) -> Result<PredictionOutcome> {
    if style.gmms.is_empty() || style.gmms.len() != style.centroids.len() {
        return Err(Error::invalid("style model needs one mixture and one centroid per cluster"));
    }
    let f = fit_gmm(driver_samples, config.components, derive_seed(seed, 0))?.gmm;
    let kl_seed = derive_seed(seed, 1);
    let kl = style
        .gmms
        .iter()
        .map(|g| kl_divergence_mc(&f, g, config.kl_samples, kl_seed))
        .collect::<Result<Vec<_>>>()?;
    let predicted_cluster = argmin(kl.iter().map(|k| k.value));
    Ok(PredictionOutcome {
        driver_id: driver_id.to_string(),
        weights: style.centroids[predicted_cluster],
        kl,
        predicted_cluster,
    })
}

/// A low-data driver: the first `fit_pool` events are candidates for the
/// mixture fit, the rest are held out to learn the ground-truth reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDriver {
    pub driver_id: String,
    pub events: Vec<CarFollowingEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccuracyConfig {
    pub n_events: Vec<usize>,
    pub trials: usize,
    pub fit_pool: usize,
    pub prediction: PredictionConfig,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        Self {
            n_events: (1..=10).collect(),
            trials: 20,
            fit_pool: 10,
            prediction: PredictionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub driver_id: String,
    pub n_events: usize,
    pub trial: usize,
    pub kl: Vec<f64>,
    pub predicted: usize,
    pub truth: usize,
}

impl PredictionRecord {
    pub fn correct(&self) -> bool {
        self.predicted == self.truth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub n_events: usize,
    /// Mean over trials of the fraction of drivers predicted correctly.
    pub accuracy: f64,
    /// Standard deviation of that fraction across trials.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub rows: Vec<AccuracyRow>,
    pub records: Vec<PredictionRecord>,
    /// Ground-truth cluster per evaluated driver.
    pub truth: BTreeMap<String, usize>,
    pub excluded: Vec<String>,
}

/// Ground truth: the cluster whose centroid is nearest to the normalized
/// reward learned from the driver's held-out events.
pub fn ground_truth_cluster(
    validation: &[CarFollowingEvent],
    centroids: &[RewardWeights],
    spec: &DiscretizationSpec,
    irl: &IrlConfig,
) -> Result<usize> {
    let demos = validation
        .iter()
        .map(|e| discretize_event(e, spec).map(Demonstration::new))
        .collect::<Result<Vec<_>>>()?;
    let w = normalize_weights(&learn_reward(&demos, irl)?.weights)?;
    let dist = |c: &RewardWeights| -> f64 { c.0.iter().zip(&w.0).map(|(a, b)| (a - b).powi(2)).sum() };
    Ok(argmin(centroids.iter().map(dist)))
}

/// Prediction accuracy as a function of the number of events used for the
/// driver's mixture, averaged over trials with freshly drawn event subsets.
/// `irl` learns the ground-truth rewards from the held-out events.
pub fn evaluate_accuracy(
    targets: &[TargetDriver],
    style: &StyleModel,
    spec: &DiscretizationSpec,
    irl: &IrlConfig,
    config: &AccuracyConfig,
    seed: u64,
) -> Result<AccuracyReport> {
    if config.trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if let Some(&n) = config.n_events.iter().find(|&&n| n == 0 || n > config.fit_pool) {
        return Err(Error::invalid(format!("n_events {n} must lie within [1, fit_pool = {}]", config.fit_pool)));
    }
    let mut excluded = Vec::new();
    let mut usable = Vec::new();
    for t in targets {
        if t.events.len() <= config.fit_pool {
            log::warn!("driver {} has no held-out validation events; excluded", t.driver_id);
            excluded.push(t.driver_id.clone());
        } else {
            usable.push(t);
        }
    }
    if usable.is_empty() {
        return Err(Error::invalid("no target driver has validation events"));
    }
    let truths = usable
        .par_iter()
        .map(|t| ground_truth_cluster(&t.events[config.fit_pool..], &style.centroids, spec, irl))
        .collect::<Result<Vec<_>>>()?;

    let drivers = usable.len();
    let mut jobs = Vec::with_capacity(config.n_events.len() * config.trials * drivers);
    for &n in &config.n_events {
        for trial in 0..config.trials {
            jobs.extend((0..drivers).map(|d| (n, trial, d)));
        }
    }
    let records = jobs
        .par_iter()
        .map(|&(n, trial, d)| {
            let stream = ((n as u64) << 40) | ((trial as u64) << 20) | d as u64;
            let mut rng = task_rng(seed, stream);
            let mut chosen = sample_indices(&mut rng, config.fit_pool, n).into_vec();
            chosen.sort_unstable();
            let target = usable[d];
            let points = event_points(chosen.iter().map(|&i| &target.events[i]));
            let outcome = predict_cluster(&target.driver_id, &points, style, &config.prediction, derive_seed(seed, stream))?;
            Ok(PredictionRecord {
                driver_id: target.driver_id.clone(),
                n_events: n,
                trial,
                kl: outcome.kl.iter().map(|k| k.value).collect(),
                predicted: outcome.predicted_cluster,
                truth: truths[d],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = config
        .n_events
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let per_trial: Vec<f64> = (0..config.trials)
                .map(|trial| {
                    let start = (i * config.trials + trial) * drivers;
                    let hits = records[start..start + drivers].iter().filter(|r| r.correct()).count();
                    hits as f64 / drivers as f64
                })
                .collect();
            AccuracyRow { n_events: n, accuracy: stats::mean(&per_trial), sd: stats::std_dev(&per_trial) }
        })
        .collect();
    let truth = usable.iter().zip(&truths).map(|(t, &c)| (t.driver_id.clone(), c)).collect();
    Ok(AccuracyReport { rows, records, truth, excluded })
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format { path: path.to_path_buf(), message: e.to_string() }
}

/// `driver_id,n_events,kl_c1..kl_cK,predicted,truth,correct`, one row per
/// driver, event count and trial. Clusters are numbered from 1.
pub fn write_prediction_csv(path: &Path, report: &AccuracyReport) -> Result<()> {
    let k = report.records.first().map_or(0, |r| r.kl.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["driver_id".to_string(), "n_events".to_string()];
    header.extend((1..=k).map(|c| format!("kl_c{c}")));
    header.extend(["predicted", "truth", "correct"].map(String::from));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in &report.records {
        let mut row = vec![r.driver_id.clone(), r.n_events.to_string()];
        row.extend(r.kl.iter().map(|v| v.to_string()));
        row.extend([(r.predicted + 1).to_string(), (r.truth + 1).to_string(), r.correct().to_string()]);
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `n_events,accuracy,sd`.
pub fn write_accuracy_csv(path: &Path, report: &AccuracyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["n_events", "accuracy", "sd"]).map_err(|e| csv_error(path, e))?;
    for r in &report.rows {
        w.write_record([r.n_events.to_string(), r.accuracy.to_string(), r.sd.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_prefers_lowest_index() {
        assert_eq!(argmin([2.0, 1.0, 1.0]), 1);
        assert_eq!(argmin([f64::NAN, 3.0]), 1);
    }
}
