//! Cumulative reward and cost of the controller as the number of planner
//! simulations grows.
//!
//!     cargo run --release --example simulation_sweep

use pacc::data::{DriverProfile, StateIndex};
use pacc::experiment::{simulation_sweep, sweep_trends, SweepConfig};
use pacc::irl::{normalize_weights, RewardWeights};
use pacc::planner::PlannerConfig;
use pacc::pomdp::{ModelConfig, PaccModel};

fn main() -> pacc::Result<()> {
    let profile = DriverProfile {
        preferred_state: StateIndex::new(11)?,
        speed_noise_sd: 1.0,
        gap_noise_sd: 4.0,
        policy_temperature: 1.0,
    };
    let model = PaccModel::new(ModelConfig::default(), normalize_weights(&RewardWeights(profile.planted_weights()))?)?;
    let sweep = SweepConfig { budgets: vec![32, 128, 512, 2048], seeds: 5, ..SweepConfig::default() };
    let rows = simulation_sweep(&model, &PlannerConfig::default(), &sweep, 0)?;
    println!("simulations  reward (sd)      cost (sd)     mean decision");
    for r in &rows {
        println!(
            "{:>11}  {:>7.1} ({:>5.1})  {:>6.2} ({:>5.2})  {:>8.4} s",
            r.n_simulations, r.reward_mean, r.reward_sd, r.cost_mean, r.cost_sd, r.mean_decision_s
        );
    }
    let (reward, cost) = sweep_trends(&rows);
    println!("reward non-decreasing within 1 SD: {reward}; cost non-increasing within 1 SD: {cost}");
    Ok(())
}
