//! Synthetic demonstrations standing in for naturalistic driving logs.
//!
//! A synthetic driver makes one decision per 3-second window. Its decision
//! process lives on the 25-cell grid: the chosen action class moves the
//! speed bin (a hard acceleration by one bin, a mild one by one bin half of
//! the time) and a change of ego speed opens or closes the gap by a bin
//! with probability 0.7, while lead drift moves the gap bin now and then.
//! The driver picks classes by Boltzmann choice over the Q-values of its
//! planted reward (minus the grid distance to the preferred cell) under
//! that process. Each window is then rendered as 30 samples at 10 Hz whose
//! means fall in the window's cell and whose acceleration lies in the
//! window's class.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    CarFollowingEvent, DiscretizationSpec, RawSample, StateIndex, Trajectory, N_ACTIONS, N_STATES,
    SAMPLE_PERIOD_S, WINDOW_SAMPLES,
};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub preferred_state: StateIndex,
    /// Window-to-window speed variability inside a cell (m/s).
    pub speed_noise_sd: f64,
    /// Window-to-window gap variability inside a cell (m).
    pub gap_noise_sd: f64,
    /// Temperature of the Boltzmann action choice.
    pub policy_temperature: f64,
}

/// Acceleration range rendered for each action class, strictly inside the
/// class thresholds.
const CLASS_ACCEL: [(f64, f64); N_ACTIONS] =
    [(-2.4, -1.6), (-1.2, -0.4), (-0.1, 0.1), (0.4, 1.2), (1.6, 2.4)];
/// Probability that each class moves the speed bin by -1 / +1.
const SPEED_STEP: [(f64, f64); N_ACTIONS] = [(1.0, 0.0), (0.5, 0.0), (0.0, 0.0), (0.0, 0.5), (0.0, 1.0)];
/// Probability that a speed change is matched by an opposite gap change.
const GAP_FOLLOWS_SPEED: f64 = 0.7;
/// Probability of a gap change in either direction at constant speed bin.
const GAP_DRIFT: f64 = 0.15;
const DRIVER_DISCOUNT: f64 = 0.9;
const MIN_EVENT_WINDOWS: usize = 10;
const MAX_EVENT_WINDOWS: usize = 100;
/// Largest rendered relative speed (m/s).
const MAX_REL_SPEED: f64 = 6.0;
/// Keep rendered window means this far inside their cell.
const SPEED_MARGIN: f64 = 0.05;
const GAP_MARGIN: f64 = 0.25;
/// Idle time between consecutive events on the driver's clock.
const EVENT_SEPARATION_S: f64 = 600.0;

impl DriverProfile {
    pub fn validate(&self) -> Result<()> {
        if self.preferred_state.index() >= N_STATES {
            return Err(Error::invalid("preferred state out of range"));
        }
        if !(self.speed_noise_sd > 0.0 && self.gap_noise_sd > 0.0) {
            return Err(Error::invalid("noise standard deviations must be positive"));
        }
        if !(self.policy_temperature > 0.0 && self.policy_temperature.is_finite()) {
            return Err(Error::invalid("policy temperature must be positive"));
        }
        Ok(())
    }

    /// Ground-truth preference: minus the Euclidean distance, in grid cells,
    /// from each cell to the preferred one.
    pub fn planted_weights(&self) -> [f64; N_STATES] {
        let p = self.preferred_state;
        let mut w = [0.0; N_STATES];
        for s in StateIndex::all() {
            let di = s.speed_bin() as f64 - p.speed_bin() as f64;
            let dj = s.distance_bin() as f64 - p.distance_bin() as f64;
            w[s.index()] = -(di * di + dj * dj).sqrt();
        }
        w
    }

    /// Action probabilities of the driver in every cell.
    pub fn policy(&self) -> [[f64; N_ACTIONS]; N_STATES] {
        let q = policy_q(&self.planted_weights(), self.policy_temperature);
        let mut pi = [[0.0; N_ACTIONS]; N_STATES];
        for (row, q) in pi.iter_mut().zip(&q) {
            *row = boltzmann(q, self.policy_temperature);
        }
        pi
    }
}

type Transitions = [[[f64; N_STATES]; N_ACTIONS]; N_STATES];

/// Cell-to-cell transition probabilities of the driver's decision process.
pub fn transition_model() -> Transitions {
    let mut p = [[[0.0; N_STATES]; N_ACTIONS]; N_STATES];
    for s in StateIndex::all() {
        let (i, j) = (s.speed_bin() as i32, s.distance_bin() as i32);
        for (a, &(down, up)) in SPEED_STEP.iter().enumerate() {
            for (ps, di) in [(down, -1), (1.0 - down - up, 0), (up, 1)] {
                if ps == 0.0 {
                    continue;
                }
                let gap_moves: [(f64, i32); 3] = if di == 0 {
                    [(GAP_DRIFT, -1), (1.0 - 2.0 * GAP_DRIFT, 0), (GAP_DRIFT, 1)]
                } else {
                    [(GAP_FOLLOWS_SPEED, -di), (1.0 - GAP_FOLLOWS_SPEED, 0), (0.0, 0)]
                };
                for (pg, dj) in gap_moves {
                    let i2 = (i + di).clamp(0, 4) as usize;
                    let j2 = (j + dj).clamp(0, 4) as usize;
                    p[s.index()][a][StateIndex::from_bins(i2, j2).unwrap().index()] += ps * pg;
                }
            }
        }
    }
    p
}

fn boltzmann(q: &[f64; N_ACTIONS], temperature: f64) -> [f64; N_ACTIONS] {
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = q.map(|x| ((x - max) / temperature).exp());
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

/// Q-values of the Boltzmann policy on `reward`, iterated to a fixed point.
fn policy_q(reward: &[f64; N_STATES], temperature: f64) -> [[f64; N_ACTIONS]; N_STATES] {
    let model = transition_model();
    let mut q = [[0.0; N_ACTIONS]; N_STATES];
    for _ in 0..10_000 {
        let v: Vec<f64> = q
            .iter()
            .map(|row| boltzmann(row, temperature).iter().zip(row).map(|(p, q)| p * q).sum())
            .collect();
        let mut delta: f64 = 0.0;
        for s in 0..N_STATES {
            for a in 0..N_ACTIONS {
                let next: f64 = model[s][a].iter().zip(&v).map(|(p, v)| p * v).sum();
                let new = reward[s] + DRIVER_DISCOUNT * next;
                delta = delta.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        if delta < 1e-10 {
            break;
        }
    }
    q
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Clamp `x` into `[lo, hi]`, or the midpoint if the interval is empty.
fn clamp_into(x: f64, lo: f64, hi: f64) -> f64 {
    if lo > hi {
        0.5 * (lo + hi)
    } else {
        x.clamp(lo, hi)
    }
}

/// Offset of sample `k` from the window's mean time.
fn sample_offset(k: usize) -> f64 {
    (k as f64 - 0.5 * (WINDOW_SAMPLES - 1) as f64) * SAMPLE_PERIOD_S
}

/// Render a cell/class sequence as 10 Hz samples starting at `t0`.
fn render<R: Rng + ?Sized>(
    profile: &DriverProfile,
    cells: &[StateIndex],
    classes: &[usize],
    t0: f64,
    spec: &DiscretizationSpec,
    rng: &mut R,
) -> Vec<RawSample> {
    let half = sample_offset(WINDOW_SAMPLES - 1);
    let (v_min, v_max) = spec.speed_range();
    let (_, d_max) = spec.distance_range();
    let speed_noise = Normal::new(0.0, profile.speed_noise_sd).unwrap();
    let gap_noise = Normal::new(0.0, profile.gap_noise_sd).unwrap();
    let window_s = WINDOW_SAMPLES as f64 * SAMPLE_PERIOD_S;

    let mut samples = Vec::with_capacity(cells.len() * WINDOW_SAMPLES);
    let (mut speed, mut gap, mut accel, mut rel): (Option<f64>, Option<f64>, f64, f64) = (None, None, 0.0, 0.0);
    for (w, (&cell, &class)) in cells.iter().zip(classes).enumerate() {
        let (i, j) = (cell.speed_bin(), cell.distance_bin());
        let (s_lo, s_hi) = (spec.speed_edges[i], spec.speed_edges[i + 1]);
        let (g_lo, g_hi) = (spec.distance_edges[j], spec.distance_edges[j + 1]);
        let (a_lo, a_hi) = CLASS_ACCEL[class];
        let a = rng.random_range(a_lo..a_hi);

        // Carry the previous window forward, then keep every sample of this
        // window inside the envelope and its mean inside the cell.
        let proposal = match speed {
            Some(v) => v + 0.5 * window_s * (accel + a) + speed_noise.sample(rng),
            None => rng.random_range(s_lo..s_hi),
        };
        let v = clamp_into(
            proposal,
            (s_lo + SPEED_MARGIN).max(v_min + half * a.abs()),
            (s_hi - SPEED_MARGIN).min(v_max - half * a.abs()),
        );

        let next_gap_bin = cells.get(w + 1).map_or(j, |c| c.distance_bin());
        let proposal = match gap {
            Some(g) => g + window_s * rel + gap_noise.sample(rng),
            None => rng.random_range(g_lo..g_hi),
        };
        let margin = GAP_MARGIN + half * MAX_REL_SPEED;
        let g = clamp_into(proposal, (g_lo + GAP_MARGIN).max(margin), (g_hi - GAP_MARGIN).min(d_max - margin));
        // Drift toward the next window's gap bin.
        let (n_lo, n_hi) = (spec.distance_edges[next_gap_bin], spec.distance_edges[next_gap_bin + 1]);
        let target = g.clamp(n_lo + 0.1 * (n_hi - n_lo), n_hi - 0.1 * (n_hi - n_lo));
        let r = ((target - g) / window_s).clamp(-MAX_REL_SPEED, MAX_REL_SPEED);

        let start = t0 + (w * WINDOW_SAMPLES) as f64 * SAMPLE_PERIOD_S;
        for k in 0..WINDOW_SAMPLES {
            let dt = sample_offset(k);
            samples.push(RawSample {
                timestamp: ((start + k as f64 * SAMPLE_PERIOD_S) * 10.0).round() / 10.0,
                ego_speed: v + a * dt,
                ego_accel: a,
                rel_distance: Some(g + r * dt),
                rel_speed: Some(r),
            });
        }
        (speed, gap, accel, rel) = (Some(v), Some(g), a, r);
    }
    samples
}

/// Generate `n_events` car-following events for one synthetic driver.
/// Each event starts in a uniformly random cell and lasts 10 to 100 decision
/// windows. Deterministic given `seed`.
pub fn synthesize_driver(
    driver_id: &str,
    profile: &DriverProfile,
    n_events: usize,
    seed: u64,
    spec: &DiscretizationSpec,
) -> Result<Vec<CarFollowingEvent>> {
    profile.validate()?;
    spec.validate()?;
    if n_events == 0 {
        return Err(Error::invalid("n_events must be at least 1"));
    }
    let policy = profile.policy();
    let model = transition_model();
    let mut rng = seeded(seed);
    let mut events = Vec::with_capacity(n_events);
    let mut clock = 0.0;
    for _ in 0..n_events {
        let len = rng.random_range(MIN_EVENT_WINDOWS..=MAX_EVENT_WINDOWS);
        let mut state = rng.random_range(0..N_STATES);
        let (mut cells, mut classes) = (Vec::with_capacity(len), Vec::with_capacity(len));
        for _ in 0..len {
            let class = sample_index(&policy[state], &mut rng);
            cells.push(StateIndex::new(state)?);
            classes.push(class);
            state = sample_index(&model[state][class], &mut rng);
        }
        let samples = render(profile, &cells, &classes, clock, spec, &mut rng);
        clock = samples.last().map_or(clock, |s| s.timestamp) + EVENT_SEPARATION_S;
        events.push(CarFollowingEvent { driver_id: driver_id.to_string(), samples });
    }
    Ok(events)
}

/// Flatten events onto one time line, separated by idle gaps.
pub fn events_to_trajectory(driver_id: &str, events: &[CarFollowingEvent]) -> Trajectory {
    Trajectory {
        driver_id: driver_id.to_string(),
        samples: events.iter().flat_map(|e| e.samples.iter().copied()).collect(),
    }
}
