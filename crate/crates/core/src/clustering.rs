//! K-means over normalized reward vectors and the elbow diagnostics used to
//! pick the number of driving styles.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{task_rng, TaskRng};

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every Lloyd iteration of the winning restart.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: BTreeMap<String, usize>,
    pub inertia: f64,
}

impl ClusterModel {
    /// Index of the centroid nearest to `point`; ties go to the lowest index.
    pub fn nearest(&self, point: &[f64]) -> usize {
        nearest(&self.centroids, point).0
    }

    /// Driver ids assigned to `cluster`, in id order.
    pub fn members(&self, cluster: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &c)| c == cluster)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(centroid, point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn validate_points(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::invalid(format!("{} points cannot form {k} clusters", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("points have different dimensions"));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("cluster input"));
    }
    Ok(())
}

/// k-means++ seeding: first centroid uniform, then proportional to squared
/// distance from the nearest chosen centroid.
fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut TaskRng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (c, d) = nearest(centroids, p);
            inertia += d;
            c
        })
        .collect();
    (labels, inertia)
}

/// Lloyd iterations from `centroids` until the assignment is stable.
pub(crate) fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeansFit {
    let k = centroids.len();
    let dim = points[0].len();
    let (mut labels, mut inertia) = assign(points, &centroids);
    let mut trace = vec![inertia];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // Reseed empty clusters at the point farthest from its centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centroids[labels[a]]);
                        let db = sq_dist(&points[b], &centroids[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
            }
        }
        let (new_labels, new_inertia) = assign(points, &centroids);
        trace.push(new_inertia);
        let stable = new_labels == labels;
        labels = new_labels;
        inertia = new_inertia;
        if stable {
            break;
        }
    }
    KMeansFit { centroids, labels, inertia, trace }
}

/// Best of `n_restarts` k-means++ / Lloyd runs by inertia. Restart `r` uses
/// its own stream of `seed`; ties go to the lowest restart index.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, n_restarts: usize) -> Result<KMeansFit> {
    validate_points(points, k)?;
    let runs: Vec<KMeansFit> = (0..n_restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, r as u64);
            lloyd(points, kmeans_pp(points, k, &mut rng))
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .unwrap();
    Ok(best)
}

/// Cluster drivers by their (normalized) reward vectors.
pub fn cluster_drivers(
    ids: &[String],
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    n_restarts: usize,
) -> Result<ClusterModel> {
    if ids.len() != points.len() {
        return Err(Error::invalid("one id per point is required"));
    }
    let fit = kmeans(points, k, seed, n_restarts)?;
    Ok(ClusterModel {
        k,
        assignments: ids.iter().cloned().zip(fit.labels.iter().copied()).collect(),
        centroids: fit.centroids,
        inertia: fit.inertia,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowRow {
    pub k: usize,
    pub inertia: f64,
    pub distortion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowReport {
    pub rows: Vec<ElbowRow>,
}

pub fn elbow_scan(
    points: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
    n_restarts: usize,
) -> Result<ElbowReport> {
    if k_range.is_empty() || *k_range.start() == 0 || *k_range.end() > points.len() {
        return Err(Error::invalid(format!(
            "k range {k_range:?} must lie within [1, {}]",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let rows = k_range
        .map(|k| {
            let fit = kmeans(points, k, seed, n_restarts)?;
            Ok(ElbowRow { k, inertia: fit.inertia, distortion: fit.inertia / n })
        })
        .collect::<Result<_>>()?;
    Ok(ElbowReport { rows })
}

/// The k with the largest discrete curvature I(k-1) - 2 I(k) + I(k+1) of the
/// inertia curve; ties go to the smallest k.
pub fn select_k(report: &ElbowReport) -> Result<usize> {
    let rows = &report.rows;
    if rows.len() < 3 {
        return Err(Error::invalid("the elbow rule needs at least three values of k"));
    }
    let scale = rows.iter().map(|r| r.inertia.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut best: Option<(usize, f64)> = None;
    for w in rows.windows(3) {
        let curvature = w[0].inertia - 2.0 * w[1].inertia + w[2].inertia;
        if best.is_none_or(|(_, c)| curvature > c) {
            best = Some((w[1].k, curvature));
        }
    }
    match best {
        Some((k, c)) if c > 1e-9 * scale => Ok(k),
        _ => Err(Error::NoElbow),
    }
}

pub fn write_elbow_csv(path: &std::path::Path, report: &ElbowReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let fmt = |e: csv::Error| Error::Format { path: path.to_path_buf(), message: e.to_string() };
    w.write_record(["k", "inertia", "distortion"]).map_err(fmt)?;
    for r in &report.rows {
        w.write_record([r.k.to_string(), r.inertia.to_string(), r.distortion.to_string()])
            .map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
