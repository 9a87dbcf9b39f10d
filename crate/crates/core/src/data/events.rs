use serde::{Deserialize, Serialize};

use super::{
    span_duration, CarFollowingEvent, DiscreteStep, DiscretizationSpec, RawSample, Trajectory,
    MAX_SAMPLE_GAP_S, MIN_EVENT_DURATION_S, WINDOW_SAMPLES,
};
use crate::error::Result;

/// Mean speed, distance and acceleration over one 3-second window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatedPoint {
    pub speed: f64,
    pub distance: f64,
    pub accel: f64,
}

/// Per-sample car-following predicate: a lead vehicle closer than the top
/// distance edge and an ego speed inside the speed grid.
pub fn satisfies_criteria(sample: &RawSample, spec: &DiscretizationSpec) -> bool {
    let (v_min, v_max) = spec.speed_range();
    let (_, d_max) = spec.distance_range();
    let distance_ok = matches!(sample.rel_distance, Some(d) if d > 0.0 && d < d_max);
    distance_ok && sample.ego_speed >= v_min && sample.ego_speed <= v_max
}

/// Maximal contiguous runs of qualifying samples lasting at least 30 s.
pub fn extract_events(trajectory: &Trajectory, spec: &DiscretizationSpec) -> Vec<CarFollowingEvent> {
    let mut events = Vec::new();
    let mut run: Vec<RawSample> = Vec::new();

    let mut flush = |run: &mut Vec<RawSample>| {
        if span_duration(run) >= MIN_EVENT_DURATION_S - 1e-6 {
            events.push(CarFollowingEvent {
                driver_id: trajectory.driver_id.clone(),
                samples: std::mem::take(run),
            });
        } else {
            run.clear();
        }
    };

    for sample in &trajectory.samples {
        if !satisfies_criteria(sample, spec) {
            flush(&mut run);
            continue;
        }
        if let Some(prev) = run.last() {
            if sample.timestamp - prev.timestamp > MAX_SAMPLE_GAP_S {
                flush(&mut run);
            }
        }
        run.push(*sample);
    }
    flush(&mut run);
    events
}

/// Consecutive non-overlapping windows of 30 samples; a trailing partial
/// window is dropped.
pub fn aggregate(event: &CarFollowingEvent) -> Vec<AggregatedPoint> {
    event
        .samples
        .chunks_exact(WINDOW_SAMPLES)
        .map(|window| {
            let n = window.len() as f64;
            let (mut speed, mut distance, mut accel) = (0.0, 0.0, 0.0);
            for s in window {
                speed += s.ego_speed;
                distance += s.rel_distance.unwrap_or(f64::NAN);
                accel += s.ego_accel;
            }
            AggregatedPoint {
                speed: speed / n,
                distance: distance / n,
                accel: accel / n,
            }
        })
        .collect()
}

/// Aggregate an event and map every point to its (state, action) pair.
pub fn discretize_event(event: &CarFollowingEvent, spec: &DiscretizationSpec) -> Result<Vec<DiscreteStep>> {
    aggregate(event)
        .iter()
        .map(|p| {
            Ok(DiscreteStep {
                state: spec.discretize_state(p.speed, p.distance)?,
                action: spec.classify_action(p.accel)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant(n: usize, speed: f64, distance: f64) -> Trajectory {
        Trajectory {
            driver_id: "d".into(),
            samples: (0..n)
                .map(|i| RawSample {
                    timestamp: i as f64 * 0.1,
                    ego_speed: speed,
                    ego_accel: 0.0,
                    rel_distance: Some(distance),
                    rel_speed: Some(0.0),
                })
                .collect(),
        }
    }

    #[test]
    fn forty_second_segment_is_one_event() {
        let spec = DiscretizationSpec::default();
        let events = extract_events(&constant(400, 25.0, 50.0), &spec);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].samples.len(), 400);
    }

    #[test]
    fn short_segment_is_dropped() {
        let spec = DiscretizationSpec::default();
        assert!(extract_events(&constant(290, 25.0, 50.0), &spec).is_empty());
        assert_eq!(extract_events(&constant(300, 25.0, 50.0), &spec).len(), 1);
    }

    #[test]
    fn far_lead_splits_the_segment() {
        let spec = DiscretizationSpec::default();
        let mut t = constant(700, 25.0, 50.0);
        t.samples[350].rel_distance = Some(130.0);
        let events = extract_events(&t, &spec);
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].samples.len(), 350);
        assert_eq!(events[1].samples.len(), 349);

        let mut t = constant(700, 25.0, 50.0);
        t.samples[200].rel_distance = Some(130.0);
        let events = extract_events(&t, &spec);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].samples[0].timestamp, t.samples[201].timestamp);
    }

    #[test]
    fn speed_and_gap_violations_split() {
        let spec = DiscretizationSpec::default();
        let mut t = constant(900, 25.0, 50.0);
        t.samples[320].ego_speed = 17.0;
        t.samples[640].rel_distance = None;
        let events = extract_events(&t, &spec);
        assert_eq!(events.len(), 2);
        for e in &events {
            assert!(e.samples.iter().all(|s| satisfies_criteria(s, &spec)));
        }
    }

    #[test]
    fn time_gap_splits() {
        let spec = DiscretizationSpec::default();
        let mut t = constant(800, 25.0, 50.0);
        for s in &mut t.samples[400..] {
            s.timestamp += 5.0;
        }
        assert_eq!(extract_events(&t, &spec).len(), 2);
    }

    #[test]
    fn aggregation_window_counts() {
        let spec = DiscretizationSpec::default();
        let e30 = &extract_events(&constant(300, 30.0, 40.0), &spec)[0];
        let e32 = &extract_events(&constant(320, 30.0, 40.0), &spec)[0];
        assert_eq!(aggregate(e30).len(), 10);
        assert_eq!(aggregate(e32).len(), 10);
        for p in aggregate(e30) {
            assert_relative_eq!(p.speed, 30.0);
            assert_relative_eq!(p.distance, 40.0);
            assert_relative_eq!(p.accel, 0.0);
        }
    }

    #[test]
    fn window_means_match_brute_force() {
        let spec = DiscretizationSpec::default();
        let mut t = constant(365, 30.0, 40.0);
        for (i, s) in t.samples.iter_mut().enumerate() {
            s.ego_speed = 25.0 + (i as f64 * 0.37).sin();
            s.rel_distance = Some(60.0 + (i as f64 * 0.11).cos() * 10.0);
            s.ego_accel = (i as f64 * 0.05).sin();
        }
        let event = &extract_events(&t, &spec)[0];
        let points = aggregate(event);
        assert_eq!(points.len(), (event.duration() / 3.0).floor() as usize);
        for (w, p) in points.iter().enumerate() {
            let mut v = 0.0;
            for i in 0..30 {
                v += event.samples[w * 30 + i].ego_speed;
            }
            assert_relative_eq!(p.speed, v / 30.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn discretized_event() {
        let spec = DiscretizationSpec::default();
        let e = &extract_events(&constant(300, 30.0, 30.0), &spec)[0];
        let steps = discretize_event(e, &spec).unwrap();
        assert_eq!(steps.len(), 10);
        assert!(steps.iter().all(|s| s.state.index() == 11 && s.action.index() == 2));
    }
}
