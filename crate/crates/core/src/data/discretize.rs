use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_SPEED_BINS: usize = 5;
pub const N_DISTANCE_BINS: usize = 5;
pub const N_STATES: usize = N_SPEED_BINS * N_DISTANCE_BINS;
pub const N_ACTIONS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub speed_edges: [f64; N_SPEED_BINS + 1],
    pub distance_edges: [f64; N_DISTANCE_BINS + 1],
    pub accel_edges: [f64; N_ACTIONS - 1],
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        Self {
            speed_edges: [18.0, 23.0, 28.0, 33.0, 38.0, 43.0],
            distance_edges: [0.0, 24.0, 48.0, 72.0, 96.0, 120.0],
            accel_edges: [-1.46, -0.18, 0.18, 1.46],
        }
    }
}

/// One of the 25 (speed, distance) cells. Feature numbers are 1-based:
/// `feature_number() == index + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateIndex(usize);

impl StateIndex {
    pub fn new(index: usize) -> Result<Self> {
        if index < N_STATES {
            Ok(Self(index))
        } else {
            Err(Error::invalid(format!("state index {index} >= {N_STATES}")))
        }
    }

    pub fn from_bins(speed_bin: usize, distance_bin: usize) -> Result<Self> {
        if speed_bin >= N_SPEED_BINS || distance_bin >= N_DISTANCE_BINS {
            return Err(Error::invalid(format!(
                "bins ({speed_bin}, {distance_bin}) out of range"
            )));
        }
        Ok(Self(N_DISTANCE_BINS * speed_bin + distance_bin))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn feature_number(self) -> usize {
        self.0 + 1
    }

    pub fn speed_bin(self) -> usize {
        self.0 / N_DISTANCE_BINS
    }

    pub fn distance_bin(self) -> usize {
        self.0 % N_DISTANCE_BINS
    }

    pub fn all() -> impl Iterator<Item = StateIndex> {
        (0..N_STATES).map(StateIndex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionClass {
    HighBrake,
    MildBrake,
    Minimal,
    MildAccel,
    HighAccel,
}

impl ActionClass {
    pub const ALL: [ActionClass; N_ACTIONS] = [
        ActionClass::HighBrake,
        ActionClass::MildBrake,
        ActionClass::Minimal,
        ActionClass::MildAccel,
        ActionClass::HighAccel,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteStep {
    pub state: StateIndex,
    pub action: ActionClass,
}

fn bin(value: f64, edges: &[f64]) -> usize {
    // Half-open [e_i, e_{i+1}); the top edge belongs to the last bin.
    let last = edges.len() - 2;
    edges[1..=last]
        .iter()
        .take_while(|&&e| value >= e)
        .count()
        .min(last)
}

impl DiscretizationSpec {
    pub fn validate(&self) -> Result<()> {
        let increasing = |e: &[f64]| e.windows(2).all(|w| w[0] < w[1]) && e.iter().all(|x| x.is_finite());
        if increasing(&self.speed_edges) && increasing(&self.distance_edges) && increasing(&self.accel_edges) {
            Ok(())
        } else {
            Err(Error::invalid("discretization edges must be finite and strictly increasing"))
        }
    }

    pub fn speed_range(&self) -> (f64, f64) {
        (self.speed_edges[0], self.speed_edges[N_SPEED_BINS])
    }

    pub fn distance_range(&self) -> (f64, f64) {
        (self.distance_edges[0], self.distance_edges[N_DISTANCE_BINS])
    }

    pub fn contains(&self, speed: f64, distance: f64) -> bool {
        let (s0, s1) = self.speed_range();
        let (d0, d1) = self.distance_range();
        (s0..=s1).contains(&speed) && (d0..=d1).contains(&distance)
    }

    pub fn discretize_state(&self, speed: f64, distance: f64) -> Result<StateIndex> {
        let (s0, s1) = self.speed_range();
        let (d0, d1) = self.distance_range();
        if !(s0..=s1).contains(&speed) {
            return Err(Error::OutOfRange { quantity: "speed", value: speed, min: s0, max: s1 });
        }
        if !(d0..=d1).contains(&distance) {
            return Err(Error::OutOfRange { quantity: "distance", value: distance, min: d0, max: d1 });
        }
        Ok(StateIndex(
            N_DISTANCE_BINS * bin(speed, &self.speed_edges) + bin(distance, &self.distance_edges),
        ))
    }

    /// Action classes are right-inclusive: `acc <= -1.46` is a high brake,
    /// `-0.18 < acc <= 0.18` is minimal, `acc > 1.46` a high acceleration.
    pub fn classify_action(&self, accel: f64) -> Result<ActionClass> {
        if !accel.is_finite() {
            return Err(Error::NonFinite("acceleration"));
        }
        let class = self.accel_edges.iter().filter(|&&e| accel > e).count();
        Ok(ActionClass::ALL[class])
    }

    /// Midpoint of a cell in (speed, distance).
    pub fn cell_center(&self, state: StateIndex) -> (f64, f64) {
        let (i, j) = (state.speed_bin(), state.distance_bin());
        (
            0.5 * (self.speed_edges[i] + self.speed_edges[i + 1]),
            0.5 * (self.distance_edges[j] + self.distance_edges[j + 1]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twelfth_feature_cell() {
        let spec = DiscretizationSpec::default();
        let s = spec.discretize_state(30.0, 30.0).unwrap();
        assert_eq!(s.index(), 11);
        assert_eq!(s.feature_number(), 12);
        assert_eq!((s.speed_bin(), s.distance_bin()), (2, 1));
    }

    #[test]
    fn grid_corners() {
        let spec = DiscretizationSpec::default();
        assert_eq!(spec.discretize_state(18.0, 0.0).unwrap().index(), 0);
        assert_eq!(spec.discretize_state(43.0, 120.0).unwrap().index(), 24);
        assert_eq!(spec.discretize_state(23.0, 24.0).unwrap().index(), 6);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let spec = DiscretizationSpec::default();
        assert!(matches!(spec.discretize_state(17.9, 10.0), Err(Error::OutOfRange { quantity: "speed", .. })));
        assert!(matches!(spec.discretize_state(20.0, 120.5), Err(Error::OutOfRange { quantity: "distance", .. })));
        assert!(spec.discretize_state(f64::NAN, 10.0).is_err());
    }

    #[test]
    fn action_thresholds() {
        let spec = DiscretizationSpec::default();
        assert_eq!(spec.classify_action(-2.0).unwrap(), ActionClass::HighBrake);
        assert_eq!(spec.classify_action(-1.46).unwrap(), ActionClass::HighBrake);
        assert_eq!(spec.classify_action(-0.18).unwrap(), ActionClass::MildBrake);
        assert_eq!(spec.classify_action(0.0).unwrap(), ActionClass::Minimal);
        assert_eq!(spec.classify_action(0.18).unwrap(), ActionClass::Minimal);
        assert_eq!(spec.classify_action(0.19).unwrap(), ActionClass::MildAccel);
        assert_eq!(spec.classify_action(1.46).unwrap(), ActionClass::MildAccel);
        assert_eq!(spec.classify_action(1.47).unwrap(), ActionClass::HighAccel);
        assert!(spec.classify_action(f64::INFINITY).is_err());
    }

    #[test]
    fn cell_centers_round_trip() {
        let spec = DiscretizationSpec::default();
        for s in StateIndex::all() {
            let (v, d) = spec.cell_center(s);
            assert_eq!(spec.discretize_state(v, d).unwrap(), s);
        }
    }

    #[test]
    fn grid_sweep_is_surjective() {
        let spec = DiscretizationSpec::default();
        let mut seen = [false; N_STATES];
        for i in 0..=100 {
            for j in 0..=100 {
                let v = 18.0 + 25.0 * i as f64 / 100.0;
                let d = 120.0 * j as f64 / 100.0;
                seen[spec.discretize_state(v, d).unwrap().index()] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    proptest! {
        #[test]
        fn discretize_is_total(v in 18.0f64..=43.0, d in 0.0f64..=120.0) {
            let spec = DiscretizationSpec::default();
            let s = spec.discretize_state(v, d).unwrap();
            prop_assert!(s.index() < N_STATES);
            let (lo, hi) = (spec.speed_edges[s.speed_bin()], spec.speed_edges[s.speed_bin() + 1]);
            prop_assert!(lo <= v && v <= hi);
        }

        #[test]
        fn actions_partition_the_line(a in -10.0f64..10.0) {
            let spec = DiscretizationSpec::default();
            let class = spec.classify_action(a).unwrap().index();
            // exactly one interval (lower, upper] contains a
            let lower = if class == 0 { f64::NEG_INFINITY } else { spec.accel_edges[class - 1] };
            let upper = if class == N_ACTIONS - 1 { f64::INFINITY } else { spec.accel_edges[class] };
            prop_assert!(a > lower && a <= upper);
        }
    }
}
