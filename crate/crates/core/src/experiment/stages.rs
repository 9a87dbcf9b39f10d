use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::figures;
use super::{
    build_population, cluster_styles, choose_style, learn_driver, mean_trajectory, pacc_episodes, pacc_statistics,
    prediction_seed, simulation_sweep, style_seed, sweep_trends, synthesize_population, ExperimentConfig, Layout,
    LearnedDriver, PaccStatistics, Population, Role, SweepRow,
};
use crate::clustering::{write_elbow_csv, ClusterModel};
use crate::data::{
    events_to_trajectory, extract_events, load_trajectories, read_events_json, write_events_json,
    write_trajectories_csv, CarFollowingEvent, DriverEvents,
};
use crate::error::{Error, Result};
use crate::irl::{normalize_weights, RewardWeights};
use crate::planner::{ActionStats, Episode};
use crate::pomdp::{Intention, PaccModel};
use crate::prediction::{
    evaluate_accuracy, event_points, fit_style_model, write_accuracy_csv, write_prediction_csv, AccuracyConfig,
    AccuracyRow, TargetDriver,
};
use crate::stats::adjusted_rand_index;

/// Best prediction accuracy reported on naturalistic (SPMD) data, shown
/// next to the synthetic result for comparison.
pub const REFERENCE_ACCURACY: f64 = 0.857;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Synth,
    Extract,
    Learn,
    Cluster,
    Predict,
    Plan,
    Sweep,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] =
        [Stage::Synth, Stage::Extract, Stage::Learn, Stage::Cluster, Stage::Predict, Stage::Plan, Stage::Sweep, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Extract => "extract",
            Stage::Learn => "learn",
            Stage::Cluster => "cluster",
            Stage::Predict => "predict",
            Stage::Plan => "plan",
            Stage::Sweep => "sweep",
            Stage::Report => "report",
        }
    }

    /// Run this stage. With `deterministic`, work runs on one thread and the
    /// planner ignores its wall-clock budget, so outputs depend only on the
    /// configuration.
    pub fn run(self, config: &ExperimentConfig, deterministic: bool) -> Result<()> {
        let mut config = config.clone();
        if deterministic {
            config.planner.time_budget = f64::INFINITY;
        }
        let body = || match self {
            Stage::Synth => run_synth(&config),
            Stage::Extract => run_extract(&config),
            Stage::Learn => run_learn(&config),
            Stage::Cluster => run_cluster(&config),
            Stage::Predict => run_predict(&config),
            Stage::Plan => run_plan(&config),
            Stage::Sweep => run_sweep(&config),
            Stage::Report => run_report(&config).map(|_| ()),
        };
        let result = if deterministic {
            rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
                .install(body)
        } else {
            body()
        };
        result.map_err(|e| e.in_stage(self.name()))
    }
}

/// Wall-clock figures of a stage, kept apart from the reproducible outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    /// Per-decision planning times, for the planning stages.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub decisions: BTreeMap<String, DecisionTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTiming {
    pub decisions: usize,
    pub mean_s: f64,
    pub max_s: f64,
    pub deployable: bool,
}

impl DecisionTiming {
    fn of(episodes: &[Episode], deployable_s: f64) -> Self {
        let times: Vec<f64> = episodes.iter().flat_map(|e| e.steps.iter().map(|s| s.planning_time_s)).collect();
        let max_s = times.iter().copied().fold(0.0, f64::max);
        Self { decisions: times.len(), mean_s: crate::stats::mean(&times), max_s, deployable: max_s < deployable_s }
    }
}

fn format_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format { path: path.to_path_buf(), message: e.to_string() }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| format_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| format_error(path, e))
}

pub(super) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| format_error(path, e))
}

pub(super) fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| format_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| format_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn save_timing(layout: &Layout, stage: Stage, started: Instant, decisions: BTreeMap<String, DecisionTiming>) -> Result<()> {
    create_dir(&layout.timing_dir())?;
    let timing = StageTiming { stage: stage.name().to_string(), seconds: started.elapsed().as_secs_f64(), decisions };
    write_json(&layout.stage_timing(stage.name()), &timing)
}

fn layout(config: &ExperimentConfig) -> Result<Layout> {
    config.validate()?;
    let layout = Layout::new(&config.out_dir);
    create_dir(layout.root())?;
    Ok(layout)
}

pub(super) fn read_population(layout: &Layout) -> Result<Population> {
    read_json(&layout.population())
}

pub(super) fn read_events(layout: &Layout, driver_id: &str) -> Result<Vec<CarFollowingEvent>> {
    let path = layout.events(driver_id);
    require(&path)?;
    Ok(read_events_json(&path)?.into_events())
}

pub(super) fn read_learned(layout: &Layout, population: &Population) -> Result<Vec<LearnedDriver>> {
    population.by_role(Role::Source).map(|d| read_json(&layout.weights(&d.driver_id))).collect()
}

pub(super) fn read_cluster_model(layout: &Layout) -> Result<ClusterModel> {
    read_json(&layout.cluster_model())
}

/// Generate the population and write it as raw 10 Hz trajectories.
pub fn run_synth(config: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let layout = layout(config)?;
    let population = build_population(&config.population, config.seed);
    let events = synthesize_population(&population, &config.discretization)?;
    let trajectories: Vec<_> = population
        .drivers
        .iter()
        .zip(&events)
        .map(|(d, e)| events_to_trajectory(&d.driver_id, e))
        .collect();
    write_trajectories_csv(layout.trajectories(), &trajectories)?;
    write_json(&layout.population(), &population)?;
    fs::write(layout.config(), config.to_toml()?).map_err(|e| Error::io(layout.config(), e))?;
    save_timing(&layout, Stage::Synth, started, BTreeMap::new())
}

/// Cut every driver's trajectory into car-following events.
pub fn run_extract(config: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let layout = layout(config)?;
    let population = read_population(&layout)?;
    require(&layout.trajectories())?;
    let mut by_driver: BTreeMap<String, Vec<CarFollowingEvent>> = BTreeMap::new();
    for t in load_trajectories(layout.trajectories())? {
        by_driver.entry(t.driver_id.clone()).or_default().extend(extract_events(&t, &config.discretization));
    }
    create_dir(&layout.events_dir())?;
    for d in &population.drivers {
        let events = by_driver.get(&d.driver_id).map(Vec::as_slice).unwrap_or_default();
        if events.is_empty() {
            return Err(Error::invalid(format!("driver {} has no car-following events", d.driver_id)));
        }
        if events.len() != d.n_events {
            log::warn!("driver {}: extracted {} events, generated {}", d.driver_id, events.len(), d.n_events);
        }
        write_events_json(layout.events(&d.driver_id), &DriverEvents::new(&d.driver_id, events))?;
    }
    save_timing(&layout, Stage::Extract, started, BTreeMap::new())
}

/// Learn and normalize the reward weights of every source driver.
pub fn run_learn(config: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let layout = layout(config)?;
    let population = read_population(&layout)?;
    let sources: Vec<_> = population.by_role(Role::Source).collect();
    let learned = sources
        .par_iter()
        .map(|d| {
            let events = read_events(&layout, &d.driver_id)?;
            learn_driver(&d.driver_id, &events, &config.discretization, &config.irl)
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&layout.weights_dir())?;
    for l in &learned {
        write_json(&layout.weights(&l.driver_id), l)?;
    }
    let mut header = vec!["driver_id".to_string()];
    header.extend((1..=crate::data::N_STATES).map(|f| format!("w{f}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        &layout.weights_csv(),
        &header,
        learned.iter().map(|l| std::iter::once(l.driver_id.clone()).chain(l.normalized.0.iter().map(f64::to_string))),
    )?;
    save_timing(&layout, Stage::Learn, started, BTreeMap::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub k: usize,
    pub elbow_k: Option<usize>,
    pub inertia: f64,
    pub sizes: Vec<usize>,
    /// Agreement of the assignments with the generating archetypes.
    pub adjusted_rand_index: f64,
}

/// Elbow scan and k-means over the learned weights.
pub fn run_cluster(config: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let layout = layout(config)?;
    let population = read_population(&layout)?;
    let learned = read_learned(&layout, &population)?;
    let styles = cluster_styles(&learned, &config.clustering, config.seed)?;
    write_elbow_csv(&layout.elbow(), &styles.elbow)?;
    write_json(&layout.cluster_model(), &styles.model)?;
    let model = &styles.model;
    let (labels, truth): (Vec<usize>, Vec<usize>) = population
        .by_role(Role::Source)
        .map(|d| (model.assignments[&d.driver_id], d.archetype))
        .unzip();
    let summary = ClusteringSummary {
        k: model.k,
        elbow_k: styles.elbow_k,
        inertia: model.inertia,
        sizes: (0..model.k).map(|c| model.members(c).len()).collect(),
        adjusted_rand_index: adjusted_rand_index(&labels, &truth),
    };
    write_json(&layout.clustering(), &summary)?;
    save_timing(&layout, Stage::Cluster, started, BTreeMap::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub rows: Vec<AccuracyRow>,
    pub best_accuracy: f64,
    /// Ground-truth cluster of each target driver.
    pub truth: BTreeMap<String, usize>,
    pub excluded: Vec<String>,
}

/// Fit the cluster mixtures and run the accuracy study on the target drivers.
pub fn run_predict(config: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let layout = layout(config)?;
    let population = read_population(&layout)?;
    let model = read_cluster_model(&layout)?;
    let points = population
        .by_role(Role::Source)
        .map(|d| Ok((d.driver_id.clone(), event_points(&read_events(&layout, &d.driver_id)?))))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let study = &config.prediction;
    let style = fit_style_model(&model, &points, study.components, style_seed(config.seed))?;
    write_json(&layout.style_model(), &style)?;
    let targets = population
        .by_role(Role::Target)
        .map(|d| Ok(TargetDriver { driver_id: d.driver_id.clone(), events: read_events(&layout, &d.driver_id)? }))
        .collect::<Result<Vec<_>>>()?;
    let accuracy_config = AccuracyConfig {
        n_events: (1..=study.max_events).collect(),
        trials: study.trials,
        fit_pool: study.fit_pool,
        prediction: study.prediction(),
    };
    let report = evaluate_accuracy(
        &targets,
        &style,
        &config.discretization,
        &config.irl,
        &accuracy_config,
        prediction_seed(config.seed),
    )?;
    write_prediction_csv(&layout.predictions(), &report)?;
    write_accuracy_csv(&layout.accuracy(), &report)?;
    let summary = PredictionSummary {
        best_accuracy: report.rows.iter().map(|r| r.accuracy).fold(0.0, f64::max),
        rows: report.rows,
        truth: report.truth,
        excluded: report.excluded,
    };
    write_json(&layout.prediction_summary(), &summary)?;
    save_timing(&layout, Stage::Predict, started, BTreeMap::new())
}

/// The cruise-control reward: the chosen cluster centroid mapped onto [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaccStyle {
    pub cluster: usize,
    pub weights: RewardWeights,
    /// Cell with the highest reward.
    pub peak_cell: usize,
}

pub(super) fn pacc_style(config: &ExperimentConfig, model: &ClusterModel) -> Result<PaccStyle> {
    let cluster = choose_style(model, config.pacc.style_cell)?;
    let raw: [f64; crate::data::N_STATES] = model.centroids[cluster]
        .as_slice()
        .try_into()
        .map_err(|_| Error::invalid("centroid length must equal the number of states"))?;
    let weights = normalize_weights(&RewardWeights(raw))?;
    Ok(PaccStyle { cluster, peak_cell: weights.argmax().index(), weights })
}

fn pacc_model(config: &ExperimentConfig, layout: &Layout) -> Result<(PaccStyle, PaccModel)> {
    let style = pacc_style(config, &read_cluster_model(layout)?)?;
    let model = PaccModel::new(config.model.clone(), style.weights)?;
    Ok((style, model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub intention: Intention,
    pub steps: usize,
    pub collision: bool,
    pub cumulative_reward: f64,
    pub cumulative_cost: f64,
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaccSummary {
    pub style: PaccStyle,
    pub statistics: PaccStatistics,
    pub episodes: Vec<EpisodeSummary>,
}

#[derive(Serialize)]
struct DiagnosticsLine<'a> {
    episode: usize,
    t: usize,
    action: usize,
    lambda: f64,
    simulations: usize,
    root: &'a [ActionStats],
}

fn write_episode_csv(path: &Path, episode: &Episode, dt: f64) -> Result<()> {
    write_rows(
        path,
        &[
            "t", "time_s", "v_ego", "y_ego", "v_lead", "y_lead", "gap", "intention", "action", "accel", "reward",
            "cost", "lambda",
        ],
        episode.steps.iter().map(|s| {
            let o = &s.observation;
            [
                s.t.to_string(),
                ((s.t + 1) as f64 * dt).to_string(),
                o.v_ego.to_string(),
                o.y_ego.to_string(),
                o.v_lead.to_string(),
                o.y_lead.to_string(),
                o.gap().to_string(),
                format!("{:?}", s.state.intention).to_lowercase(),
                s.action.to_string(),
                s.accel.to_string(),
                s.reward.to_string(),
                s.cost.to_string(),
                s.diagnostics.lambda.to_string(),
            ]
        }),
    )
}

/// Closed-loop episodes with the chosen style.
pub fn run_plan(config: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let layout = layout(config)?;
    let (style, model) = pacc_model(config, &layout)?;
    let episodes = pacc_episodes(&model, &config.planner, config.pacc.episodes, config.seed)?;
    let dir = layout.pacc_dir();
    create_dir(&dir)?;
    let dt = model.config.dt;
    for (i, e) in episodes.iter().enumerate() {
        write_episode_csv(&layout.episode(i), e, dt)?;
    }
    write_rows(
        &layout.mean_trajectory(),
        &["t", "time_s", "episodes", "speed", "speed_sd", "gap", "gap_sd"],
        mean_trajectory(&episodes).iter().map(|p| {
            [
                p.t.to_string(),
                ((p.t + 1) as f64 * dt).to_string(),
                p.episodes.to_string(),
                p.speed.to_string(),
                p.speed_sd.to_string(),
                p.gap.to_string(),
                p.gap_sd.to_string(),
            ]
        }),
    )?;
    write_occupancy(&layout.occupancy(), &episodes, &model, config.pacc.warmup_s)?;
    let path = layout.diagnostics();
    let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    for (i, e) in episodes.iter().enumerate() {
        for s in &e.steps {
            let line = DiagnosticsLine {
                episode: i,
                t: s.t,
                action: s.action,
                lambda: s.diagnostics.lambda,
                simulations: s.diagnostics.simulations,
                root: &s.diagnostics.root,
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| format_error(&path, e))?;
            writeln!(w).map_err(|e| Error::io(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let summary = PaccSummary {
        statistics: pacc_statistics(&episodes, &model, config.pacc.warmup_s, style.peak_cell),
        episodes: episodes
            .iter()
            .enumerate()
            .map(|(i, e)| EpisodeSummary {
                episode: i,
                intention: e.intention,
                steps: e.steps.len(),
                collision: e.collision,
                cumulative_reward: e.cumulative_reward(),
                cumulative_cost: e.cumulative_cost(),
                min_gap: e.steps.iter().map(|s| s.observation.gap()).fold(f64::INFINITY, f64::min),
            })
            .collect(),
        style,
    };
    write_json(&layout.pacc_summary(), &summary)?;
    let timing = BTreeMap::from([(
        config.planner.n_simulations.to_string(),
        DecisionTiming::of(&episodes, config.sweep.deployable_s),
    )]);
    save_timing(&layout, Stage::Plan, started, timing)
}

/// Post-warm-up share of steps in every cell; off-grid steps are counted in
/// a final row with state -1.
fn write_occupancy(path: &Path, episodes: &[Episode], model: &PaccModel, warmup_s: f64) -> Result<()> {
    let spec = &model.config.discretization;
    let mut counts = [0usize; crate::data::N_STATES];
    let (mut off_grid, mut total) = (0usize, 0usize);
    for s in episodes.iter().flat_map(|e| &e.steps) {
        if (s.t + 1) as f64 * model.config.dt <= warmup_s {
            continue;
        }
        total += 1;
        match spec.discretize_state(s.observation.v_ego, s.observation.gap()) {
            Ok(c) => counts[c.index()] += 1,
            Err(_) => off_grid += 1,
        }
    }
    let share = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    let mut rows: Vec<[String; 5]> = crate::data::StateIndex::all()
        .map(|c| {
            [
                c.index().to_string(),
                c.speed_bin().to_string(),
                c.distance_bin().to_string(),
                counts[c.index()].to_string(),
                share(counts[c.index()]).to_string(),
            ]
        })
        .collect();
    rows.push(["-1".into(), String::new(), String::new(), off_grid.to_string(), share(off_grid).to_string()]);
    write_rows(path, &["state", "speed_bin", "distance_bin", "steps", "share"], rows)
}

/// Cumulative reward and cost against the simulation budget.
pub fn run_sweep(config: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let layout = layout(config)?;
    let (_, model) = pacc_model(config, &layout)?;
    let rows = simulation_sweep(&model, &config.planner, &config.sweep, config.seed)?;
    write_sweep_csv(&layout.sweep(), &rows)?;
    let timing = rows
        .iter()
        .map(|r| {
            (
                r.n_simulations.to_string(),
                DecisionTiming {
                    decisions: r.decisions,
                    mean_s: r.mean_decision_s,
                    max_s: r.max_decision_s,
                    deployable: r.max_decision_s < config.sweep.deployable_s,
                },
            )
        })
        .collect();
    save_timing(&layout, Stage::Sweep, started, timing)
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(
        path,
        &["n_simulations", "episodes", "reward_mean", "reward_sd", "cost_mean", "cost_sd"],
        rows.iter().map(|r| {
            [
                r.n_simulations.to_string(),
                r.episodes.to_string(),
                r.reward_mean.to_string(),
                r.reward_sd.to_string(),
                r.cost_mean.to_string(),
                r.cost_sd.to_string(),
            ]
        }),
    )
}

pub(super) fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    require(path)?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| format_error(path, e))?;
    reader.deserialize().map(|r| r.map_err(|e| format_error(path, e))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub reward_non_decreasing: bool,
    pub cost_non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetrics {
    pub clustering: ClusteringSummary,
    pub elbow: Vec<crate::clustering::ElbowRow>,
    pub prediction: PredictionSummary,
    pub reference_best_accuracy: f64,
    pub pacc: PaccSummary,
    pub sweep: SweepSummary,
}

/// Index of a finished run. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub note: String,
    pub artifacts: BTreeMap<String, PathBuf>,
    pub figures: BTreeMap<String, PathBuf>,
    pub metrics: ReportMetrics,
    /// Wall-clock timings; written to their own file.
    #[serde(skip)]
    pub timing: Vec<StageTiming>,
}

fn read_elbow_csv(path: &Path) -> Result<Vec<crate::clustering::ElbowRow>> {
    require(path)?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| format_error(path, e))?;
    reader.deserialize().map(|r| r.map_err(|e| format_error(path, e))).collect()
}

/// Collect the stage outputs into `report.json`, `summary.txt`, the figure
/// tables and `timing.json`.
pub fn run_report(config: &ExperimentConfig) -> Result<RunReport> {
    let layout = layout(config)?;
    let population = read_population(&layout)?;
    let clustering: ClusteringSummary = read_json(&layout.clustering())?;
    let prediction: PredictionSummary = read_json(&layout.prediction_summary())?;
    let pacc: PaccSummary = read_json(&layout.pacc_summary())?;
    let rows = read_sweep_csv(&layout.sweep())?;
    let (reward_non_decreasing, cost_non_increasing) = sweep_trends(&rows);
    let metrics = ReportMetrics {
        clustering,
        elbow: read_elbow_csv(&layout.elbow())?,
        prediction,
        reference_best_accuracy: REFERENCE_ACCURACY,
        pacc,
        sweep: SweepSummary { rows, reward_non_decreasing, cost_non_increasing },
    };
    let figures = figures::write_figures(config, &layout, &population, &metrics)?;

    let root = layout.root();
    let rel = |p: PathBuf| p.strip_prefix(root).map(Path::to_path_buf).unwrap_or(p);
    let mut artifacts = BTreeMap::new();
    for (name, path) in [
        ("config", layout.config()),
        ("population", layout.population()),
        ("trajectories", layout.trajectories()),
        ("events", layout.events_dir()),
        ("weights", layout.weights_dir()),
        ("weights_table", layout.weights_csv()),
        ("elbow", layout.elbow()),
        ("cluster_model", layout.cluster_model()),
        ("clustering", layout.clustering()),
        ("style_model", layout.style_model()),
        ("predictions", layout.predictions()),
        ("accuracy", layout.accuracy()),
        ("prediction_summary", layout.prediction_summary()),
        ("pacc", layout.pacc_dir()),
        ("mean_trajectory", layout.mean_trajectory()),
        ("occupancy", layout.occupancy()),
        ("diagnostics", layout.diagnostics()),
        ("pacc_summary", layout.pacc_summary()),
        ("sweep", layout.sweep()),
        ("summary", layout.summary()),
        ("timing", layout.timing()),
    ] {
        artifacts.insert(name.to_string(), rel(path));
    }
    let timing = Stage::ALL[..Stage::ALL.len() - 1]
        .iter()
        .filter_map(|s| {
            let path = layout.stage_timing(s.name());
            path.exists().then(|| read_json::<StageTiming>(&path))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = RunReport {
        seed: config.seed,
        note: "All figure tables come from a synthetic driver population; they are analogs of results on naturalistic data, not reproductions.".into(),
        artifacts,
        figures: figures.into_iter().map(|(k, p)| (k, rel(p))).collect(),
        metrics,
        timing,
    };
    fs::write(layout.summary(), summary_text(&report)).map_err(|e| Error::io(layout.summary(), e))?;
    write_json(&layout.timing(), &report.timing)?;
    for path in report.artifacts.values().chain(report.figures.values()) {
        require(&root.join(path))?;
    }
    write_json(&layout.report(), &report)?;
    Ok(report)
}

fn summary_text(report: &RunReport) -> String {
    let m = &report.metrics;
    let mut s = String::new();
    let mut line = |text: String| {
        s.push_str(&text);
        s.push('\n');
    };
    line(format!("seed {}", report.seed));
    line(report.note.clone());
    line(String::new());
    let c = &m.clustering;
    line(format!(
        "clustering: k = {} (elbow rule: {}), sizes {:?}, adjusted Rand index vs archetypes {:.3}",
        c.k,
        c.elbow_k.map_or("none".to_string(), |k| k.to_string()),
        c.sizes,
        c.adjusted_rand_index
    ));
    line("prediction accuracy by number of events:".into());
    for r in &m.prediction.rows {
        line(format!("  {:>2} events: {:.3} (sd {:.3})", r.n_events, r.accuracy, r.sd));
    }
    line(format!(
        "best accuracy {:.1}% (reference on naturalistic data: {:.1}%)",
        100.0 * m.prediction.best_accuracy,
        100.0 * m.reference_best_accuracy
    ));
    let p = &m.pacc.statistics;
    line(format!(
        "cruise control: cluster {} peak cell {}, {} episodes, occupancy after warm-up {:.3}, unsafe steps {}/{} ({:.4}), collisions {}",
        m.pacc.style.cluster,
        m.pacc.style.peak_cell,
        p.episodes,
        p.occupancy,
        p.unsafe_steps,
        p.steps,
        p.unsafe_fraction,
        p.collisions
    ));
    line("simulation sweep (budget: reward mean ± sd, cost mean ± sd):".into());
    for r in &m.sweep.rows {
        line(format!(
            "  {:>5}: {:.2} ± {:.2}, {:.3} ± {:.3}",
            r.n_simulations, r.reward_mean, r.reward_sd, r.cost_mean, r.cost_sd
        ));
    }
    line(format!(
        "reward non-decreasing within 1 sd: {}, cost non-increasing within 1 sd: {}",
        m.sweep.reward_non_decreasing, m.sweep.cost_non_increasing
    ));
    s
}
