//! Two-dimensional Gaussian mixtures over aggregated (speed, distance)
//! points, fitted by EM.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::kmeans;
use crate::error::{Error, Result};

pub type Point = [f64; 2];
pub type Cov = [[f64; 2]; 2];

/// Ridge added to every covariance in each M-step.
pub const COV_REGULARIZATION: f64 = 1e-4;
pub const EM_TOLERANCE: f64 = 1e-6;
pub const EM_MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Point,
    pub cov: Cov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub components: Vec<GmmComponent>,
}

fn det(c: &Cov) -> f64 {
    c[0][0] * c[1][1] - c[0][1] * c[1][0]
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(c: &Cov) -> f64 {
    let tr = c[0][0] + c[1][1];
    let gap = ((c[0][0] - c[1][1]).powi(2) + 4.0 * c[0][1] * c[1][0]).max(0.0).sqrt();
    0.5 * (tr - gap)
}

impl GmmComponent {
    pub fn log_pdf(&self, x: &Point) -> f64 {
        let d = det(&self.cov);
        let (dx, dy) = (x[0] - self.mean[0], x[1] - self.mean[1]);
        let quad = (self.cov[1][1] * dx * dx - 2.0 * self.cov[0][1] * dx * dy + self.cov[0][0] * dy * dy) / d;
        -(2.0 * PI).ln() - 0.5 * d.ln() - 0.5 * quad
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        // Cholesky factor of the covariance.
        let l00 = self.cov[0][0].sqrt();
        let l10 = self.cov[1][0] / l00;
        let l11 = (self.cov[1][1] - l10 * l10).max(0.0).sqrt();
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        [self.mean[0] + l00 * z0, self.mean[1] + l10 * z0 + l11 * z1]
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Gmm {
    pub fn log_pdf(&self, x: &Point) -> f64 {
        let terms: Vec<f64> = self.components.iter().map(|c| c.weight.ln() + c.log_pdf(x)).collect();
        log_sum_exp(&terms)
    }

    pub fn pdf(&self, x: &Point) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut u = rng.random::<f64>();
        for c in &self.components {
            if u < c.weight {
                return c.sample(rng);
            }
            u -= c.weight;
        }
        self.components.last().unwrap().sample(rng)
    }

    pub fn log_likelihood(&self, samples: &[Point]) -> f64 {
        samples.iter().map(|x| self.log_pdf(x)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("mixture has no components"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 || self.components.iter().any(|c| c.weight < 0.0) {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        for c in &self.components {
            if (c.cov[0][1] - c.cov[1][0]).abs() > 1e-12 || !(min_eigenvalue(&c.cov) > 0.0) {
                return Err(Error::invalid("covariance is not symmetric positive definite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub gmm: Gmm,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Log-likelihood after every EM iteration.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// M-step from responsibilities `resp[i][c]`.
fn m_step(samples: &[Point], resp: &[Vec<f64>], m: usize) -> Gmm {
    let n = samples.len() as f64;
    let components = (0..m)
        .map(|c| {
            let nk: f64 = resp.iter().map(|r| r[c]).sum::<f64>().max(f64::MIN_POSITIVE);
            let mut mean = [0.0; 2];
            for (x, r) in samples.iter().zip(resp) {
                mean[0] += r[c] * x[0];
                mean[1] += r[c] * x[1];
            }
            mean = [mean[0] / nk, mean[1] / nk];
            let mut cov = [[0.0; 2]; 2];
            for (x, r) in samples.iter().zip(resp) {
                let d = [x[0] - mean[0], x[1] - mean[1]];
                for i in 0..2 {
                    for j in 0..2 {
                        cov[i][j] += r[c] * d[i] * d[j];
                    }
                }
            }
            for (i, row) in cov.iter_mut().enumerate() {
                for v in row.iter_mut() {
                    *v /= nk;
                }
                row[i] += COV_REGULARIZATION;
            }
            GmmComponent { weight: nk / n, mean, cov }
        })
        .collect();
    let mut gmm = Gmm { components };
    let total: f64 = gmm.components.iter().map(|c| c.weight).sum();
    gmm.components.iter_mut().for_each(|c| c.weight /= total);
    gmm
}

/// Responsibilities and log-likelihood under `gmm`.
fn e_step(samples: &[Point], gmm: &Gmm) -> (Vec<Vec<f64>>, f64) {
    let mut ll = 0.0;
    let resp = samples
        .iter()
        .map(|x| {
            let logs: Vec<f64> = gmm.components.iter().map(|c| c.weight.ln() + c.log_pdf(x)).collect();
            let norm = log_sum_exp(&logs);
            ll += norm;
            logs.iter().map(|l| (l - norm).exp()).collect()
        })
        .collect();
    (resp, ll)
}

/// EM from a k-means++ initialization. Samples are sorted first so the fit
/// does not depend on their order. Stops when the mean log-likelihood per
/// sample gains less than `EM_TOLERANCE`.
pub fn fit_gmm(samples: &[Point], m: usize, seed: u64) -> Result<GmmFit> {
    if m == 0 {
        return Err(Error::invalid("a mixture needs at least one component"));
    }
    if samples.len() < 2 * m {
        return Err(Error::invalid(format!(
            "{} samples are too few for a {m}-component mixture (need {})",
            samples.len(),
            2 * m
        )));
    }
    if samples.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("mixture samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let samples = &sorted[..];

    let points: Vec<Vec<f64>> = samples.iter().map(|p| p.to_vec()).collect();
    let init = kmeans(&points, m, seed, 1)?;
    let resp: Vec<Vec<f64>> = init
        .labels
        .iter()
        .map(|&l| (0..m).map(|c| if c == l { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut gmm = m_step(samples, &resp, m);
    let (mut resp, mut ll) = e_step(samples, &gmm);
    if !ll.is_finite() {
        return Err(Error::NonFiniteLikelihood { iteration: 0 });
    }
    let n = samples.len() as f64;
    let mut trace = vec![ll];
    let mut iterations = 0;
    while iterations < EM_MAX_ITERATIONS {
        iterations += 1;
        let next = m_step(samples, &resp, m);
        let (next_resp, next_ll) = e_step(samples, &next);
        if !next_ll.is_finite() {
            return Err(Error::NonFiniteLikelihood { iteration: iterations });
        }
        let gain = (next_ll - ll) / n;
        gmm = next;
        resp = next_resp;
        ll = next_ll;
        trace.push(ll);
        if gain < EM_TOLERANCE {
            break;
        }
    }
    Ok(GmmFit { gmm, log_likelihood: ll, iterations, trace })
}
