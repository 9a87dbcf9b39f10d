//! Plot-ready tables, one CSV per figure, built from persisted artifacts.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::stages::{read_cluster_model, read_events, read_learned, write_rows, ReportMetrics};
use super::{ExperimentConfig, Layout, Population, Role};
use crate::data::{aggregate, StateIndex};
use crate::error::{Error, Result};
use crate::pomdp::Intention;

/// Events of the first source driver shown in the raw-event figure.
const SHOWN_EVENTS: usize = 3;

fn cell_columns(c: StateIndex) -> [String; 3] {
    [(c.index() + 1).to_string(), c.speed_bin().to_string(), c.distance_bin().to_string()]
}

fn copy(from: PathBuf, to: &PathBuf) -> Result<()> {
    std::fs::copy(&from, to).map(|_| ()).map_err(|e| Error::io(from, e))
}

pub(super) fn write_figures(
    config: &ExperimentConfig,
    layout: &Layout,
    population: &Population,
    metrics: &ReportMetrics,
) -> Result<BTreeMap<String, PathBuf>> {
    std::fs::create_dir_all(layout.figures_dir()).map_err(|e| Error::io(layout.figures_dir(), e))?;
    let mut out = BTreeMap::new();
    let mut add = |name: &str| {
        let path = layout.figure(name);
        out.insert(name.to_string(), path.clone());
        path
    };
    let sources: Vec<_> = population.by_role(Role::Source).collect();
    let model = read_cluster_model(layout)?;

    if let Some(first) = sources.first() {
        let events = read_events(layout, &first.driver_id)?;
        let rows = events.iter().take(SHOWN_EVENTS).enumerate().flat_map(|(i, e)| {
            let t0 = e.samples.first().map_or(0.0, |s| s.timestamp);
            e.samples.iter().map(move |s| {
                vec![
                    first.driver_id.clone(),
                    (i + 1).to_string(),
                    (s.timestamp - t0).to_string(),
                    s.ego_speed.to_string(),
                    s.rel_distance.map(|d| d.to_string()).unwrap_or_default(),
                    s.ego_accel.to_string(),
                ]
            })
        });
        write_rows(&add("car_following_events"), &["driver_id", "event", "time_s", "speed", "gap", "accel"], rows)?;
    }

    let learned = read_learned(layout, population)?;
    let rows = learned.iter().flat_map(|l| {
        StateIndex::all().map(move |c| {
            let mut row = vec![l.driver_id.clone()];
            row.extend(cell_columns(c));
            row.push(l.normalized.0[c.index()].to_string());
            row
        })
    });
    write_rows(&add("driver_rewards"), &["driver_id", "feature", "speed_bin", "distance_bin", "weight"], rows)?;

    copy(layout.elbow(), &add("elbow"))?;

    let rows = model.centroids.iter().enumerate().flat_map(|(k, centroid)| {
        StateIndex::all().map(move |c| {
            let mut row = vec![(k + 1).to_string()];
            row.extend(cell_columns(c));
            row.push(centroid[c.index()].to_string());
            row
        })
    });
    write_rows(&add("cluster_centroids"), &["cluster", "feature", "speed_bin", "distance_bin", "weight"], rows)?;

    // Window means of every source driver, labelled by cluster: the data
    // behind per-cluster histograms and box plots.
    let mut rows = Vec::new();
    for d in &sources {
        let cluster = model.assignments.get(&d.driver_id).ok_or_else(|| {
            Error::invalid(format!("driver {} is missing from the cluster model", d.driver_id))
        })?;
        for e in read_events(layout, &d.driver_id)? {
            for p in aggregate(&e) {
                rows.push([(cluster + 1).to_string(), d.driver_id.clone(), p.speed.to_string(), p.distance.to_string()]);
            }
        }
    }
    write_rows(&add("cluster_points"), &["cluster", "driver_id", "speed", "gap"], rows)?;

    copy(layout.accuracy(), &add("prediction_accuracy"))?;

    let m = &config.model;
    let rows = Intention::ALL.iter().flat_map(|i| {
        m.lead_accels.iter().enumerate().map(move |(a, accel)| {
            [
                format!("{i:?}").to_lowercase(),
                accel.to_string(),
                m.intention_table[i.index()][a].to_string(),
            ]
        })
    });
    write_rows(&add("intention_model"), &["intention", "lead_accel", "probability"], rows)?;

    let spec = &config.discretization;
    let style = &metrics.pacc.style;
    let rows = StateIndex::all().map(|c| {
        let (i, j) = (c.speed_bin(), c.distance_bin());
        vec![
            (c.index() + 1).to_string(),
            spec.speed_edges[i].to_string(),
            spec.speed_edges[i + 1].to_string(),
            spec.distance_edges[j].to_string(),
            spec.distance_edges[j + 1].to_string(),
            style.weights.0[c.index()].to_string(),
        ]
    });
    write_rows(&add("pacc_reward"), &["feature", "speed_lo", "speed_hi", "gap_lo", "gap_hi", "weight"], rows)?;

    let sweep = &metrics.sweep.rows;
    write_rows(
        &add("sweep_reward"),
        &["n_simulations", "mean", "sd"],
        sweep.iter().map(|r| [r.n_simulations.to_string(), r.reward_mean.to_string(), r.reward_sd.to_string()]),
    )?;
    write_rows(
        &add("sweep_cost"),
        &["n_simulations", "mean", "sd"],
        sweep.iter().map(|r| [r.n_simulations.to_string(), r.cost_mean.to_string(), r.cost_sd.to_string()]),
    )?;

    copy(layout.mean_trajectory(), &add("mean_trajectory"))?;

    let mut rows = Vec::new();
    for i in 0..config.pacc.episodes {
        let path = layout.episode(i);
        let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::Format { path: path.clone(), message: e.to_string() })?;
        let headers = reader.headers().map_err(|e| Error::Format { path: path.clone(), message: e.to_string() })?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(t), Some(v), Some(g)) = (col("time_s"), col("v_ego"), col("gap")) else {
            return Err(Error::Format { path, message: "missing time_s, v_ego or gap column".into() });
        };
        for record in reader.records() {
            let r = record.map_err(|e| Error::Format { path: path.clone(), message: e.to_string() })?;
            rows.push([(i + 1).to_string(), r[t].to_string(), r[v].to_string(), r[g].to_string()]);
        }
    }
    write_rows(&add("trajectory_points"), &["episode", "time_s", "speed", "gap"], rows)?;

    Ok(out)
}
