mod support;

use approx::assert_abs_diff_eq;
use pacc::irl::RewardWeights;
use pacc::planner::{belief_update, Belief};
use pacc::pomdp::*;
use pacc::rng::seeded;
use proptest::prelude::*;
use support::matrix_step;

fn model() -> PaccModel {
    let mut w = RewardWeights([-1.0; 25]);
    w.0[11] = 1.0;
    PaccModel::new(ModelConfig::default(), w).unwrap()
}

#[test]
fn lead_acceleration_frequencies_match_the_intention_table() {
    let m = model();
    let n = 100_000;
    let table = [[0.3, 0.4, 0.3], [0.1, 0.8, 0.1], [0.4, 0.2, 0.4]];
    for (i, intention) in Intention::ALL.into_iter().enumerate() {
        let mut rng = seeded(100 + i as u64);
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[m.sample_lead_accel(intention, &mut rng)] += 1;
        }
        for (a, &p) in table[i].iter().enumerate() {
            let expected = n as f64 * p;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (counts[a] as f64 - expected).abs() <= 3.0 * sigma,
                "{intention:?} accel {a}: {} vs {expected}",
                counts[a]
            );
        }
    }
}

#[test]
fn kinematics_follow_the_double_integrator() {
    let m = model();
    let start = PaccState { v_ego: 30.0, y_ego: 5.0, v_lead: 28.0, y_lead: 45.0, intention: Intention::Normal };
    for ego in EGO_ACCELS {
        for lead in LEAD_ACCELS {
            let next = m.kinematics(&start, ego, lead);
            let (y_e, v_e) = matrix_step(start.y_ego, start.v_ego, ego, 1.0);
            let (y_l, v_l) = matrix_step(start.y_lead, start.v_lead, lead, 1.0);
            assert_abs_diff_eq!(next.y_ego, y_e, epsilon = 1e-12);
            assert_abs_diff_eq!(next.v_ego, v_e, epsilon = 1e-12);
            assert_abs_diff_eq!(next.y_lead, y_l, epsilon = 1e-12);
            assert_abs_diff_eq!(next.v_lead, v_l, epsilon = 1e-12);
            assert_eq!(next.intention, Intention::Normal);
        }
    }
}

#[test]
fn transition_draws_the_lead_acceleration_from_the_intention() {
    let m = model();
    let s = m.initial_state(Intention::Aggressive);
    let mut rng = seeded(4);
    for action in 0..3 {
        let (next, lead) = m.transition(&s, action, &mut rng);
        assert_eq!(next, m.kinematics(&s, EGO_ACCELS[action], LEAD_ACCELS[lead]));
    }
}

#[test]
fn posterior_after_a_steady_lead_is_two_four_one_sevenths() {
    let m = model();
    let prior = PaccState { v_ego: 30.0, y_ego: 0.0, v_lead: 30.0, y_lead: 40.0, intention: Intention::Normal };
    let n = 30_000;
    let particles = (0..n).map(|i| PaccState { intention: Intention::ALL[i % 3], ..prior }).collect();
    let belief = Belief { particles };
    let next = m.kinematics(&prior, 0.0, 0.0);
    let post = belief_update(&belief, &observe(&next), &m, &mut seeded(1)).unwrap();
    let freq = post.intention_frequencies();
    for (f, p) in freq.iter().zip([2.0 / 7.0, 4.0 / 7.0, 1.0 / 7.0]) {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * sigma, "{freq:?}");
    }
    assert!(post.particles.iter().all(|p| p.v_lead == next.v_lead && p.y_ego == next.y_ego));
}

#[test]
fn impossible_observation_resets_to_uniform() {
    let config = ModelConfig { intention_table: [[0.5, 0.5, 0.0]; 3], ..ModelConfig::default() };
    let m = PaccModel::new(config, RewardWeights([0.0; 25])).unwrap();
    let prior = m.initial_state(Intention::Normal);
    let belief = Belief { particles: vec![prior; 3_000] };
    let next = m.kinematics(&prior, 0.0, 0.5);
    let post = belief_update(&belief, &observe(&next), &m, &mut seeded(2)).unwrap();
    assert_eq!(post.particles.len(), 3_000);
    for f in post.intention_frequencies() {
        assert!((f - 1.0 / 3.0).abs() < 0.05);
    }
}

proptest! {
    #[test]
    fn gap_changes_by_relative_motion(
        v_ego in 0.6..45.0f64, v_lead in 0.5..45.0f64, gap in 0.5..150.0f64,
        e in 0usize..3, l in 0usize..3,
    ) {
        let m = model();
        let s = PaccState { v_ego, y_ego: 0.0, v_lead, y_lead: gap, intention: Intention::Hesitating };
        let next = m.kinematics(&s, EGO_ACCELS[e], LEAD_ACCELS[l]);
        let expected = gap + (v_lead - v_ego) + 0.5 * (LEAD_ACCELS[l] - EGO_ACCELS[e]);
        prop_assert!((next.gap() - expected).abs() < 1e-9);
    }

    #[test]
    fn speeds_never_go_negative(v in 0.0..2.0f64, e in 0usize..3, l in 0usize..3) {
        let m = model();
        let s = PaccState { v_ego: v, y_ego: 0.0, v_lead: v, y_lead: 10.0, intention: Intention::Normal };
        let next = m.kinematics(&s, EGO_ACCELS[e], LEAD_ACCELS[l]);
        prop_assert!(next.v_ego >= 0.0 && next.v_lead >= 0.0);
        prop_assert!(next.y_ego >= s.y_ego && next.y_lead >= s.y_lead);
    }

    #[test]
    fn belief_keeps_its_size(seed in 0u64..500, n in 1usize..200, l in 0usize..3) {
        let m = model();
        let mut rng = seeded(seed);
        let s = m.initial_state(Intention::Normal);
        let belief = Belief::uniform(&observe(&s), n, &mut rng);
        let next = m.kinematics(&s, 0.0, LEAD_ACCELS[l]);
        let post = belief_update(&belief, &observe(&next), &m, &mut rng).unwrap();
        prop_assert_eq!(post.particles.len(), n);
        prop_assert!((post.intention_frequencies().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
