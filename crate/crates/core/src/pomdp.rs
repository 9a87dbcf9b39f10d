//! Car-following POMDP for personalized adaptive cruise control. The lead
//! driver's intention is hidden and sets the distribution of the lead
//! vehicle's acceleration; the reward comes from a learned style.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::DiscretizationSpec;
use crate::error::{Error, Result};
use crate::irl::RewardWeights;
use crate::rng::TaskRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intention {
    Hesitating,
    Normal,
    Aggressive,
}

impl Intention {
    pub const ALL: [Intention; 3] = [Intention::Hesitating, Intention::Normal, Intention::Aggressive];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Lead accelerations (m/s^2): brake, maintain, accelerate.
pub const LEAD_ACCELS: [f64; 3] = [-0.5, 0.0, 0.5];
/// Ego accelerations (m/s^2).
pub const EGO_ACCELS: [f64; 3] = [-0.6, 0.0, 0.6];

/// Probability of each lead acceleration given the intention, rows in
/// `Intention::ALL` order.
pub const INTENTION_TABLE: [[f64; 3]; 3] = [[0.3, 0.4, 0.3], [0.1, 0.8, 0.1], [0.4, 0.2, 0.4]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaccState {
    pub v_ego: f64,
    pub y_ego: f64,
    pub v_lead: f64,
    pub y_lead: f64,
    pub intention: Intention,
}

impl PaccState {
    pub fn gap(&self) -> f64 {
        self.y_lead - self.y_ego
    }
}

/// What the ego vehicle sees: exact kinematics, no intention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinObservation {
    pub v_ego: f64,
    pub y_ego: f64,
    pub v_lead: f64,
    pub y_lead: f64,
}

impl KinObservation {
    pub fn gap(&self) -> f64 {
        self.y_lead - self.y_ego
    }
}

pub fn observe(state: &PaccState) -> KinObservation {
    KinObservation { v_ego: state.v_ego, y_ego: state.y_ego, v_lead: state.v_lead, y_lead: state.y_lead }
}

/// Initial kinematics of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialKinematics {
    pub v_ego: f64,
    pub v_lead: f64,
    pub gap: f64,
}

impl Default for InitialKinematics {
    fn default() -> Self {
        Self { v_ego: 30.0, v_lead: 30.0, gap: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub discretization: DiscretizationSpec,
    pub intention_table: [[f64; 3]; 3],
    pub lead_accels: [f64; 3],
    pub ego_accels: [f64; 3],
    pub cost_value: f64,
    pub cost_distance: f64,
    pub discount: f64,
    pub dt: f64,
    pub horizon: usize,
    pub initial: InitialKinematics,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            discretization: DiscretizationSpec::default(),
            intention_table: INTENTION_TABLE,
            lead_accels: LEAD_ACCELS,
            ego_accels: EGO_ACCELS,
            cost_value: 10.0,
            cost_distance: 2.0,
            discount: 0.95,
            dt: 1.0,
            horizon: 120,
            initial: InitialKinematics::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.discretization.validate()?;
        for row in &self.intention_table {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("each intention row must be a probability distribution"));
            }
        }
        if !(self.dt > 0.0 && self.cost_distance > 0.0 && self.cost_value >= 0.0) {
            return Err(Error::invalid("dt and cost distance must be positive, cost value non-negative"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::invalid("discount must lie in [0, 1)"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        let i = self.initial;
        if !(i.v_ego >= 0.0 && i.v_lead >= 0.0 && i.gap > 0.0) {
            return Err(Error::invalid("initial speeds must be non-negative and the gap positive"));
        }
        Ok(())
    }
}

/// The POMDP: kinematics, intention model, style reward and safety cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PaccModel {
    pub config: ModelConfig,
    pub weights: RewardWeights,
}

/// Advance one vehicle under constant acceleration, stopping at zero speed.
pub fn advance(v: f64, y: f64, a: f64, dt: f64) -> (f64, f64) {
    let v_next = v + a * dt;
    if v_next >= 0.0 {
        (v_next, y + v * dt + 0.5 * a * dt * dt)
    } else {
        // Decelerates to a stop within the step and stays there.
        (0.0, y + v * v / (2.0 * -a))
    }
}

impl PaccModel {
    /// `weights` should be normalized to [-1, 1].
    pub fn new(config: ModelConfig, weights: RewardWeights) -> Result<Self> {
        config.validate()?;
        if weights.0.iter().any(|w| !w.is_finite() || w.abs() > 1.0 + 1e-9) {
            return Err(Error::invalid("reward weights must be normalized to [-1, 1]"));
        }
        Ok(Self { config, weights })
    }

    pub fn num_actions(&self) -> usize {
        self.config.ego_accels.len()
    }

    /// Index into `lead_accels`.
    pub fn sample_lead_accel<R: Rng + ?Sized>(&self, intention: Intention, rng: &mut R) -> usize {
        let row = &self.config.intention_table[intention.index()];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        row.len() - 1
    }

    /// Deterministic kinematics given both accelerations.
    pub fn kinematics(&self, state: &PaccState, ego_accel: f64, lead_accel: f64) -> PaccState {
        let dt = self.config.dt;
        let (v_ego, y_ego) = advance(state.v_ego, state.y_ego, ego_accel, dt);
        let (v_lead, y_lead) = advance(state.v_lead, state.y_lead, lead_accel, dt);
        PaccState { v_ego, y_ego, v_lead, y_lead, intention: state.intention }
    }

    /// One step; also returns the index of the lead acceleration drawn.
    pub fn transition<R: Rng + ?Sized>(&self, state: &PaccState, action: usize, rng: &mut R) -> (PaccState, usize) {
        let lead = self.sample_lead_accel(state.intention, rng);
        let next = self.kinematics(state, self.config.ego_accels[action], self.config.lead_accels[lead]);
        (next, lead)
    }

    /// Normalized weight of the state's cell, or -1 off the grid.
    pub fn reward_of_state(&self, state: &PaccState) -> f64 {
        let spec = &self.config.discretization;
        let gap = state.gap();
        let (v_lo, v_hi) = spec.speed_range();
        let (d_lo, d_hi) = spec.distance_range();
        if state.v_ego < v_lo || state.v_ego > v_hi || gap < d_lo || gap > d_hi {
            return -1.0;
        }
        match spec.discretize_state(state.v_ego, gap) {
            Ok(s) => self.weights.0[s.index()],
            Err(_) => -1.0,
        }
    }

    pub fn cost_of_state(&self, state: &PaccState) -> f64 {
        if state.gap() < self.config.cost_distance {
            self.config.cost_value
        } else {
            0.0
        }
    }

    pub fn is_collision(&self, state: &PaccState) -> bool {
        state.gap() <= 0.0
    }

    pub fn is_terminal(&self, state: &PaccState, elapsed_steps: usize) -> bool {
        elapsed_steps >= self.config.horizon || self.is_collision(state)
    }

    pub fn initial_state(&self, intention: Intention) -> PaccState {
        let i = self.config.initial;
        PaccState { v_ego: i.v_ego, y_ego: 0.0, v_lead: i.v_lead, y_lead: i.gap, intention }
    }

    /// Index of the lead acceleration closest to `a`.
    pub fn nearest_lead_accel(&self, a: f64) -> usize {
        let mut best = 0;
        for (i, x) in self.config.lead_accels.iter().enumerate() {
            if (x - a).abs() < (self.config.lead_accels[best] - a).abs() {
                best = i;
            }
        }
        best
    }
}

/// Uniformly random intention.
pub fn random_intention(rng: &mut TaskRng) -> Intention {
    Intention::ALL[rng.random_range(0..Intention::ALL.len())]
}
