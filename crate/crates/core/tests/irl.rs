use pacc::data::{
    discretize_event, synthesize_driver, ActionClass, DiscreteStep, DiscretizationSpec, DriverProfile, StateIndex,
    N_ACTIONS, N_STATES,
};
use pacc::irl::*;
use pacc::stats::spearman;
use proptest::prelude::*;

fn demo(cells: &[(usize, usize)]) -> Demonstration {
    Demonstration::new(
        cells
            .iter()
            .map(|&(s, a)| DiscreteStep { state: StateIndex::new(s).unwrap(), action: ActionClass::from_index(a).unwrap() })
            .collect(),
    )
}

/// Mean discounted return-to-go over the occurrences of (s, a).
fn brute_q(demos: &[Vec<(usize, usize)>], w: &[f64; N_STATES], gamma: f64, s: usize, a: usize) -> Option<f64> {
    let mut returns = Vec::new();
    for d in demos {
        for t in 0..d.len() {
            if d[t] == (s, a) {
                returns.push(d[t..].iter().enumerate().map(|(k, &(x, _))| gamma.powi(k as i32) * w[x]).sum::<f64>());
            }
        }
    }
    (!returns.is_empty()).then(|| returns.iter().sum::<f64>() / returns.len() as f64)
}

fn demos_strategy() -> impl Strategy<Value = Vec<Vec<(usize, usize)>>> {
    proptest::collection::vec(proptest::collection::vec((0..N_STATES, 0..N_ACTIONS), 1..15), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn visited_q_is_the_mean_return_to_go(raw in demos_strategy(), w in proptest::array::uniform25(-1.0..1.0f64)) {
        let demos: Vec<_> = raw.iter().map(|d| demo(d)).collect();
        let q = estimate_q(&demos, &RewardWeights(w), 0.9).unwrap();
        for s in 0..N_STATES {
            let visited: Vec<f64> = (0..N_ACTIONS).filter_map(|a| brute_q(&raw, &w, 0.9, s, a)).collect();
            for a in 0..N_ACTIONS {
                let state = StateIndex::new(s).unwrap();
                match brute_q(&raw, &w, 0.9, s, a) {
                    Some(v) => prop_assert!((q.q(state, a) - v).abs() < 1e-9),
                    None if !visited.is_empty() => {
                        let min = visited.iter().cloned().fold(f64::INFINITY, f64::min);
                        prop_assert!((q.q(state, a) - (min - 1.0)).abs() < 1e-9);
                    }
                    None => {}
                }
            }
        }
    }

    #[test]
    fn likelihood_is_the_softmax_of_q(raw in demos_strategy(), w in proptest::array::uniform25(-1.0..1.0f64), temp in 0.1..3.0f64) {
        let demos: Vec<_> = raw.iter().map(|d| demo(d)).collect();
        let config = IrlConfig { temperature: temp, ..IrlConfig::default() };
        let q = estimate_q(&demos, &RewardWeights(w), config.discount).unwrap();
        let mut expected = 0.0;
        for d in &raw {
            for &(s, a) in d {
                let state = StateIndex::new(s).unwrap();
                let z: f64 = (0..N_ACTIONS).map(|b| (temp * q.q(state, b)).exp()).sum();
                expected += temp * q.q(state, a) - z.ln();
            }
        }
        let ll = log_likelihood(&demos, &RewardWeights(w), &config).unwrap();
        prop_assert!((ll - expected).abs() < 1e-8 * expected.abs().max(1.0));
        prop_assert!(ll <= 0.0);
    }

    #[test]
    fn normalization_maps_onto_the_unit_interval(w in proptest::array::uniform25(-50.0..50.0f64)) {
        let n = normalize_weights(&RewardWeights(w)).unwrap();
        let min = n.0.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = n.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!((min, max), (-1.0, 1.0));
        for i in 0..N_STATES {
            for j in 0..N_STATES {
                if w[i] < w[j] {
                    prop_assert!(n.0[i] <= n.0[j]);
                }
            }
        }
    }
}

#[test]
fn learning_recovers_a_planted_preference() {
    let spec = DiscretizationSpec::default();
    let profile = DriverProfile {
        preferred_state: StateIndex::new(11).unwrap(),
        speed_noise_sd: 1.0,
        gap_noise_sd: 4.0,
        policy_temperature: 1.0,
    };
    let events = synthesize_driver("d", &profile, 1000, 21, &spec).unwrap();
    let demos: Vec<_> = events.iter().map(|e| Demonstration::new(discretize_event(e, &spec).unwrap())).collect();
    let config = IrlConfig { step_growth: 1.2, ..IrlConfig::default() };
    let fit = learn_reward(&demos, &config).unwrap();
    for w in fit.history.windows(2) {
        assert!(w[1] >= w[0]);
    }
    let learned = normalize_weights(&fit.weights).unwrap();
    let rho = spearman(&learned.0, &profile.planted_weights());
    assert!(rho >= 0.7, "rho {rho}");
    assert_eq!(learned.argmax().index(), 11);
}

#[test]
fn invalid_configs_are_rejected() {
    let demos = vec![demo(&[(0, 0), (1, 2)])];
    for bad in [
        IrlConfig { discount: 1.0, ..IrlConfig::default() },
        IrlConfig { temperature: 0.0, ..IrlConfig::default() },
        IrlConfig { step_growth: 0.5, ..IrlConfig::default() },
    ] {
        assert!(learn_reward(&demos, &bad).is_err());
    }
}
