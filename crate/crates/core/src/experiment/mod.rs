//! End-to-end experiments: a synthetic driver population, source learning,
//! the style prediction study, closed-loop cruise control episodes and the
//! simulation-budget sweep. Each stage reads the artifacts of earlier
//! stages from the output directory and writes its own.

mod config;
mod figures;
mod layout;
mod stages;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    ClusteringConfig, ExperimentConfig, PaccConfig, PopulationConfig, PredictionStudyConfig, SweepConfig,
};
pub use layout::Layout;
pub use stages::{
    run_cluster, run_extract, run_learn, run_plan, run_predict, run_report, run_sweep, run_synth, ClusteringSummary,
    DecisionTiming, EpisodeSummary, PaccStyle, PaccSummary, PredictionSummary, ReportMetrics, RunReport, Stage,
    StageTiming, SweepSummary, REFERENCE_ACCURACY,
};

use crate::clustering::{cluster_drivers, elbow_scan, select_k, ClusterModel, ElbowReport};
use crate::data::{discretize_event, synthesize_driver, CarFollowingEvent, DiscretizationSpec, DriverProfile};
use crate::error::{Error, Result};
use crate::irl::{learn_reward, normalize_weights, Demonstration, IrlConfig, RewardWeights};
use crate::planner::{run_episode, Episode, PlannerConfig};
use crate::pomdp::PaccModel;
use crate::rng::{derive_seed, task_rng};
use crate::stats;

// Stream ids under the master seed.
const STREAM_POPULATION: u64 = 1;
const STREAM_DRIVERS: u64 = 1 << 20;
const STREAM_CLUSTERING: u64 = 2;
const STREAM_STYLE: u64 = 3;
const STREAM_PREDICTION: u64 = 4;
const STREAM_PACC: u64 = 2 << 20;
const STREAM_SWEEP: u64 = 3 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationDriver {
    pub driver_id: String,
    pub role: Role,
    pub archetype: usize,
    pub profile: DriverProfile,
    pub n_events: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub drivers: Vec<PopulationDriver>,
}

impl Population {
    pub fn by_role(&self, role: Role) -> impl Iterator<Item = &PopulationDriver> {
        self.drivers.iter().filter(move |d| d.role == role)
    }
}

/// Driver roster: ids, archetypes, event counts and generator seeds.
pub fn build_population(config: &PopulationConfig, seed: u64) -> Population {
    let mut rng = task_rng(seed, STREAM_POPULATION);
    let a = config.archetypes.len();
    let [lo, hi] = config.source_events;
    let mut drivers = Vec::with_capacity(config.source_drivers + config.target_drivers);
    for i in 0..config.source_drivers {
        drivers.push(PopulationDriver {
            driver_id: format!("source-{i:03}"),
            role: Role::Source,
            archetype: i % a,
            profile: config.archetypes[i % a].clone(),
            n_events: rng.random_range(lo..=hi),
            seed: derive_seed(seed, STREAM_DRIVERS + i as u64),
        });
    }
    for i in 0..config.target_drivers {
        drivers.push(PopulationDriver {
            driver_id: format!("target-{i:03}"),
            role: Role::Target,
            archetype: i % a,
            profile: config.archetypes[i % a].clone(),
            n_events: config.target_events,
            seed: derive_seed(seed, STREAM_DRIVERS + (config.source_drivers + i) as u64),
        });
    }
    Population { drivers }
}

/// Events of every driver, in roster order.
pub fn synthesize_population(population: &Population, spec: &DiscretizationSpec) -> Result<Vec<Vec<CarFollowingEvent>>> {
    population
        .drivers
        .par_iter()
        .map(|d| synthesize_driver(&d.driver_id, &d.profile, d.n_events, d.seed, spec))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedDriver {
    pub driver_id: String,
    pub weights: RewardWeights,
    pub normalized: RewardWeights,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub n_events: usize,
}

pub fn learn_driver(driver_id: &str, events: &[CarFollowingEvent], spec: &DiscretizationSpec, irl: &IrlConfig) -> Result<LearnedDriver> {
    let demos = events
        .iter()
        .map(|e| discretize_event(e, spec).map(Demonstration::new))
        .collect::<Result<Vec<_>>>()?;
    let fit = learn_reward(&demos, irl)?;
    Ok(LearnedDriver {
        driver_id: driver_id.to_string(),
        normalized: normalize_weights(&fit.weights)?,
        weights: fit.weights,
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
        n_events: events.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleClustering {
    pub elbow: ElbowReport,
    /// k picked by the elbow rule, if it found one.
    pub elbow_k: Option<usize>,
    pub model: ClusterModel,
}

/// Elbow scan over the configured k range, then k-means at the configured
/// or elbow-selected k.
pub fn cluster_styles(drivers: &[LearnedDriver], config: &ClusteringConfig, seed: u64) -> Result<StyleClustering> {
    let ids: Vec<String> = drivers.iter().map(|d| d.driver_id.clone()).collect();
    let points: Vec<Vec<f64>> = drivers.iter().map(|d| d.normalized.0.to_vec()).collect();
    let k_max = config.k_max.min(points.len());
    let seed = derive_seed(seed, STREAM_CLUSTERING);
    let elbow = elbow_scan(&points, config.k_min..=k_max, seed, config.restarts)?;
    let elbow_k = match select_k(&elbow) {
        Ok(k) => Some(k),
        Err(Error::NoElbow) | Err(Error::InvalidArgument(_)) => None,
        Err(e) => return Err(e),
    };
    let k = config.k.or(elbow_k).ok_or(Error::NoElbow)?;
    let model = cluster_drivers(&ids, &points, k, seed, config.restarts)?;
    Ok(StyleClustering { elbow, elbow_k, model })
}

/// Cluster whose centroid weighs `cell` most; ties go to the lowest index.
pub fn choose_style(model: &ClusterModel, cell: usize) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, centroid) in model.centroids.iter().enumerate() {
        let w = *centroid.get(cell).ok_or_else(|| Error::invalid("style cell outside the centroid"))?;
        if best.is_none_or(|(_, b)| w > b) {
            best = Some((c, w));
        }
    }
    best.map(|(c, _)| c).ok_or_else(|| Error::invalid("cluster model has no centroids"))
}

/// Episodes with seeds derived from `seed`, in episode order.
pub fn run_episodes(model: &PaccModel, planner: &PlannerConfig, episodes: usize, seed: u64, stream: u64) -> Result<Vec<Episode>> {
    (0..episodes)
        .into_par_iter()
        .map(|e| run_episode(model, planner, derive_seed(seed, stream + e as u64)))
        .collect()
}

pub fn pacc_episodes(model: &PaccModel, planner: &PlannerConfig, episodes: usize, seed: u64) -> Result<Vec<Episode>> {
    run_episodes(model, planner, episodes, seed, STREAM_PACC)
}

/// Driving statistics over a set of episodes. A step's position is the one
/// reached after its action, at time `(t + 1) * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaccStatistics {
    pub episodes: usize,
    pub steps: usize,
    pub collisions: usize,
    /// Steps ending with a gap under the cost distance.
    pub unsafe_steps: usize,
    pub unsafe_fraction: f64,
    pub style_cell: usize,
    pub post_warmup_steps: usize,
    pub occupancy: f64,
    /// Steps of the mean trajectory whose mean gap is under the cost distance.
    pub mean_trajectory_unsafe_steps: usize,
    pub mean_cumulative_reward: f64,
    pub mean_cumulative_cost: f64,
}

pub fn pacc_statistics(episodes: &[Episode], model: &PaccModel, warmup_s: f64, style_cell: usize) -> PaccStatistics {
    let spec = &model.config.discretization;
    let dt = model.config.dt;
    let limit = model.config.cost_distance;
    let (mut steps, mut unsafe_steps, mut post, mut inside) = (0, 0, 0, 0);
    for e in episodes {
        for s in &e.steps {
            steps += 1;
            let gap = s.observation.gap();
            if gap < limit {
                unsafe_steps += 1;
            }
            if (s.t + 1) as f64 * dt > warmup_s {
                post += 1;
                if spec.discretize_state(s.observation.v_ego, gap).is_ok_and(|c| c.index() == style_cell) {
                    inside += 1;
                }
            }
        }
    }
    let mean = mean_trajectory(episodes);
    let rewards: Vec<f64> = episodes.iter().map(Episode::cumulative_reward).collect();
    let costs: Vec<f64> = episodes.iter().map(Episode::cumulative_cost).collect();
    PaccStatistics {
        episodes: episodes.len(),
        steps,
        collisions: episodes.iter().filter(|e| e.collision).count(),
        unsafe_steps,
        unsafe_fraction: ratio(unsafe_steps, steps),
        style_cell,
        post_warmup_steps: post,
        occupancy: ratio(inside, post),
        mean_trajectory_unsafe_steps: mean.iter().filter(|p| p.gap < limit).count(),
        mean_cumulative_reward: stats::mean(&rewards),
        mean_cumulative_cost: stats::mean(&costs),
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanTrajectoryPoint {
    pub t: usize,
    /// Episodes still running at this step.
    pub episodes: usize,
    pub speed: f64,
    pub speed_sd: f64,
    pub gap: f64,
    pub gap_sd: f64,
}

/// Per-step mean speed and gap across episodes, over the episodes that
/// reached that step.
pub fn mean_trajectory(episodes: &[Episode]) -> Vec<MeanTrajectoryPoint> {
    let len = episodes.iter().map(|e| e.steps.len()).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let obs: Vec<_> = episodes.iter().filter_map(|e| e.steps.get(t)).map(|s| s.observation).collect();
            let speeds: Vec<f64> = obs.iter().map(|o| o.v_ego).collect();
            let gaps: Vec<f64> = obs.iter().map(|o| o.gap()).collect();
            MeanTrajectoryPoint {
                t,
                episodes: obs.len(),
                speed: stats::mean(&speeds),
                speed_sd: stats::std_dev(&speeds),
                gap: stats::mean(&gaps),
                gap_sd: stats::std_dev(&gaps),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_simulations: usize,
    pub episodes: usize,
    pub reward_mean: f64,
    pub reward_sd: f64,
    pub cost_mean: f64,
    pub cost_sd: f64,
    #[serde(skip)]
    pub decisions: usize,
    /// Planning time per decision, seconds.
    #[serde(skip)]
    pub mean_decision_s: f64,
    #[serde(skip)]
    pub max_decision_s: f64,
}

/// Cumulative reward and cost per simulation budget. Every budget replays
/// the same episode seeds.
pub fn simulation_sweep(model: &PaccModel, planner: &PlannerConfig, sweep: &SweepConfig, seed: u64) -> Result<Vec<SweepRow>> {
    sweep
        .budgets
        .iter()
        .map(|&n| {
            let config = PlannerConfig { n_simulations: n, ..planner.clone() };
            let episodes = run_episodes(model, &config, sweep.seeds, seed, STREAM_SWEEP)?;
            let rewards: Vec<f64> = episodes.iter().map(Episode::cumulative_reward).collect();
            let costs: Vec<f64> = episodes.iter().map(Episode::cumulative_cost).collect();
            let times: Vec<f64> = episodes.iter().flat_map(|e| e.steps.iter().map(|s| s.planning_time_s)).collect();
            Ok(SweepRow {
                n_simulations: n,
                episodes: episodes.len(),
                reward_mean: stats::mean(&rewards),
                reward_sd: stats::std_dev(&rewards),
                cost_mean: stats::mean(&costs),
                cost_sd: stats::std_dev(&costs),
                decisions: times.len(),
                mean_decision_s: stats::mean(&times),
                max_decision_s: times.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect()
}

fn pooled_sd(a: f64, b: f64) -> f64 {
    ((a * a + b * b) / 2.0).sqrt()
}

/// Whether, between every pair of consecutive budgets, the mean reward
/// never falls and the mean cost never rises by more than the pooled SD.
pub fn sweep_trends(rows: &[SweepRow]) -> (bool, bool) {
    let reward = rows
        .windows(2)
        .all(|w| w[1].reward_mean >= w[0].reward_mean - pooled_sd(w[0].reward_sd, w[1].reward_sd));
    let cost = rows
        .windows(2)
        .all(|w| w[1].cost_mean <= w[0].cost_mean + pooled_sd(w[0].cost_sd, w[1].cost_sd));
    (reward, cost)
}

pub(crate) fn style_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_STYLE)
}

pub(crate) fn prediction_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_PREDICTION)
}
