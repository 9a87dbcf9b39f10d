mod support;

use pacc::irl::RewardWeights;
use pacc::planner::*;
use pacc::pomdp::{ModelConfig, PaccModel};
use pacc::rng::seeded;
use pacc::Error;
use proptest::prelude::*;
use support::*;

#[test]
fn one_step_unconstrained_picks_the_better_reward() {
    let sim = OneStep { rewards: vec![1.0, 0.0], costs: vec![0.0, 0.0] };
    // Value iteration on the one-step MDP: Q = r, so the best action is 0.
    let best = if sim.rewards[0] >= sim.rewards[1] { 0 } else { 1 };
    let hits = (0..100)
        .filter(|&seed| plan(&[()], &sim, &config(200, f64::INFINITY), &mut seeded(seed)).unwrap().action == best)
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn one_step_constraint_binds() {
    let sim = OneStep { rewards: vec![10.0, 1.0], costs: vec![100.0, 0.0] };
    let feasible = constrained_oracle(&sim.rewards, &sim.costs, 1.0).unwrap();
    assert_eq!(feasible, 1);
    let hits = (0..100)
        .filter(|&seed| plan(&[()], &sim, &config(1000, 1.0), &mut seeded(seed)).unwrap().action == feasible)
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn depth_two_backups_match_enumeration() {
    // Near-equal root values keep both root actions well sampled.
    let sim = TwoStep {
        r1: [1.0, 0.1],
        c1: [0.2, 0.0],
        r2: [[0.0, 2.0], [3.0, 0.0]],
        c2: [[1.0, 0.0], [0.0, 0.5]],
    };
    let cfg = config(10_000, f64::INFINITY);
    let g = cfg.discount;
    let result = plan(&[(0, 0)], &sim, &cfg, &mut seeded(7)).unwrap();
    for a in 0..2 {
        let b = if sim.r2[a][0] >= sim.r2[a][1] { 0 } else { 1 };
        let q_r = sim.r1[a] + g * sim.r2[a][b];
        let q_c = sim.c1[a] + g * sim.c2[a][b];
        let root = result.diagnostics.root[a];
        assert!((root.q_reward - q_r).abs() < 0.05, "action {a}: {} vs {q_r}", root.q_reward);
        assert!((root.q_cost - q_c).abs() < 0.05, "action {a}: {} vs {q_c}", root.q_cost);
    }
    assert_eq!(result.action, 1);
}

#[test]
fn unconstrained_search_equals_plain_pomcp() {
    let belief = [0i64, 1, -1, 2];
    for seed in 0..10 {
        let cfg = PlannerConfig { max_depth: 8, ..config(2_000, f64::INFINITY) };
        let ours = plan(&belief, &Walk, &cfg, &mut seeded(seed)).unwrap();
        let mut reference = Reference::new(&cfg);
        let (action, root) = reference.plan(&belief, cfg.n_simulations, &mut seeded(seed));
        assert_eq!(ours.action, action, "seed {seed}");
        assert_eq!(ours.diagnostics.lambda, 0.0);
        for (a, b) in ours.diagnostics.root.iter().zip(&root) {
            assert_eq!(a.visits, b.visits, "seed {seed}");
            assert!((a.q_reward - b.q_reward).abs() < 1e-9, "seed {seed}");
        }
    }
}

#[test]
fn any_budget_returns_a_valid_action() {
    for n in [1, 2, 3, 7] {
        let r = plan(&[0i64], &Walk, &config(n, 0.5), &mut seeded(0)).unwrap();
        assert!(r.action < 3);
        assert_eq!(r.diagnostics.simulations, n);
    }
}

#[test]
fn exhausted_time_budget_is_an_error() {
    let cfg = PlannerConfig { time_budget: 1e-12, ..config(10, 0.5) };
    assert!(matches!(plan(&[0i64], &Walk, &cfg, &mut seeded(0)), Err(Error::BudgetExhausted)));
}

#[test]
fn empty_belief_is_rejected() {
    assert!(plan::<Walk>(&[], &Walk, &config(10, 0.5), &mut seeded(0)).is_err());
}

#[test]
fn planning_is_deterministic_given_the_seed() {
    let a = plan(&[0i64, 2], &Walk, &config(500, 0.3), &mut seeded(5)).unwrap();
    let b = plan(&[0i64, 2], &Walk, &config(500, 0.3), &mut seeded(5)).unwrap();
    assert_eq!(a.action, b.action);
    assert_eq!(a.diagnostics.root, b.diagnostics.root);
    assert_eq!(a.diagnostics.lambda, b.diagnostics.lambda);
}

fn small_model(horizon: usize) -> PaccModel {
    let mut w = RewardWeights([-1.0; 25]);
    w.0[11] = 1.0;
    PaccModel::new(ModelConfig { horizon, ..ModelConfig::default() }, w).unwrap()
}

#[test]
fn short_episode_runs_to_its_horizon() {
    let model = small_model(3);
    let cfg = PlannerConfig { particles: 50, ..config(200, 0.5) };
    let e = run_episode(&model, &cfg, 11).unwrap();
    assert_eq!(e.steps.len(), 3);
    assert!(!e.collision);
    for (t, s) in e.steps.iter().enumerate() {
        assert_eq!(s.t, t);
        assert_eq!(s.accel, model.config.ego_accels[s.action]);
        assert_eq!(s.reward, model.reward_of_state(&pacc::pomdp::PaccState {
            v_ego: s.observation.v_ego,
            y_ego: s.observation.y_ego,
            v_lead: s.observation.v_lead,
            y_lead: s.observation.y_lead,
            intention: s.state.intention,
        }));
    }
    let again = run_episode(&model, &cfg, 11).unwrap();
    assert_eq!(e.intention, again.intention);
    for (a, b) in e.steps.iter().zip(&again.steps) {
        assert_eq!((a.action, a.observation, a.reward, a.cost), (b.action, b.observation, b.reward, b.cost));
    }
}

#[test]
fn reused_subtree_keeps_its_statistics() {
    let cfg = config(2_000, 0.5);
    let (first, tree) = plan_from(&[0i64, 1], &Walk, &cfg, &mut seeded(3), SearchTree::default()).unwrap();
    let (visits, _) = tree.root().unwrap();
    assert_eq!(visits, 2_000);
    // Position 1 after stepping right from 0 is observation 1.
    let sub = tree.subtree(first.action, 1);
    assert!(!sub.is_empty() && sub.len() < tree.len());
    let (sub_visits, sub_root) = sub.root().map(|(n, a)| (n, a.to_vec())).unwrap();
    assert_eq!(sub_root.iter().map(|a| a.visits).sum::<u64>(), sub_visits);
    let (_, grown) = plan_from(&[1i64], &Walk, &config(300, 0.5), &mut seeded(4), sub).unwrap();
    assert_eq!(grown.root().unwrap().0, sub_visits + 300);
    assert!(tree.subtree(first.action, 999).is_empty());
}

#[test]
fn episodes_run_with_tree_reuse() {
    let model = small_model(5);
    let cfg = PlannerConfig { particles: 50, reuse_tree: true, ..config(300, 0.5) };
    let e = run_episode(&model, &cfg, 2).unwrap();
    assert_eq!(e.steps.len(), 5);
    assert!(e.steps[1..].iter().any(|s| s.diagnostics.root.iter().map(|a| a.visits).sum::<u64>() > 300));
    let again = run_episode(&model, &cfg, 2).unwrap();
    let actions = |e: &Episode| e.steps.iter().map(|s| (s.action, s.diagnostics.root.clone())).collect::<Vec<_>>();
    assert_eq!(actions(&again), actions(&e));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_stays_in_bounds(
        r0 in -5.0..5.0f64, r1 in -5.0..5.0f64, c0 in 0.0..50.0f64, c1 in 0.0..50.0f64,
        limit in 0.0..10.0f64, lambda_max in 0.5..20.0f64, n in 1usize..400, seed in 0u64..1000,
    ) {
        let sim = OneStep { rewards: vec![r0, r1], costs: vec![c0, c1] };
        let cfg = PlannerConfig { lambda_max, ..config(n, limit) };
        let r = plan(&[()], &sim, &cfg, &mut seeded(seed)).unwrap();
        prop_assert!(r.diagnostics.lambda >= 0.0 && r.diagnostics.lambda <= lambda_max);
    }

    #[test]
    fn unconstrained_lambda_stays_zero(n in 1usize..300, seed in 0u64..1000) {
        let r = plan(&[0i64], &Walk, &config(n, f64::INFINITY), &mut seeded(seed)).unwrap();
        prop_assert_eq!(r.diagnostics.lambda, 0.0);
    }
}
