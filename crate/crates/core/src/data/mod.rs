//! Trajectory ingestion, car-following event extraction, 3-second
//! aggregation and the 25-state / 5-action discretization.

mod discretize;
mod events;
mod io;
mod synth;

use serde::{Deserialize, Serialize};

pub use discretize::{
    ActionClass, DiscreteStep, DiscretizationSpec, StateIndex, N_ACTIONS, N_DISTANCE_BINS, N_SPEED_BINS, N_STATES,
};
pub use events::{aggregate, discretize_event, extract_events, satisfies_criteria, AggregatedPoint};
pub use io::{load_trajectories, read_events_json, write_events_json, write_trajectories_csv, DriverEvents};
pub use synth::{events_to_trajectory, synthesize_driver, transition_model, DriverProfile};

/// Nominal sampling period of the recorded data.
pub const SAMPLE_PERIOD_S: f64 = 0.1;
/// Consecutive samples further apart than this belong to different blocks.
pub const MAX_SAMPLE_GAP_S: f64 = 2.0 * SAMPLE_PERIOD_S + 1e-6;
pub const MIN_EVENT_DURATION_S: f64 = 30.0;
pub const WINDOW_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub timestamp: f64,
    pub ego_speed: f64,
    pub ego_accel: f64,
    /// `None` when no preceding vehicle was detected.
    pub rel_distance: Option<f64>,
    pub rel_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub driver_id: String,
    pub samples: Vec<RawSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarFollowingEvent {
    pub driver_id: String,
    pub samples: Vec<RawSample>,
}

impl CarFollowingEvent {
    /// Covered time, counting one sample period for the last sample.
    pub fn duration(&self) -> f64 {
        span_duration(&self.samples)
    }
}

pub(crate) fn span_duration(samples: &[RawSample]) -> f64 {
    match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => b.timestamp - a.timestamp + SAMPLE_PERIOD_S,
        _ => 0.0,
    }
}
