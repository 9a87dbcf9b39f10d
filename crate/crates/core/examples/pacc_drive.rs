//! Drive one closed-loop episode behind a lead vehicle whose intention is
//! hidden, rewarding a speed of 28-33 m/s at a 24-48 m gap.
//!
//!     cargo run --release --example pacc_drive

use pacc::data::{DriverProfile, StateIndex};
use pacc::irl::{normalize_weights, RewardWeights};
use pacc::planner::{run_episode, PlannerConfig};
use pacc::pomdp::{ModelConfig, PaccModel};

fn main() -> pacc::Result<()> {
    let profile = DriverProfile {
        preferred_state: StateIndex::new(11)?,
        speed_noise_sd: 1.0,
        gap_noise_sd: 4.0,
        policy_temperature: 1.0,
    };
    let weights = normalize_weights(&RewardWeights(profile.planted_weights()))?;
    let model = PaccModel::new(ModelConfig::default(), weights)?;
    let planner = PlannerConfig { n_simulations: 5_000, ..PlannerConfig::default() };
    let episode = run_episode(&model, &planner, 1)?;

    println!("lead intention {:?}", episode.intention);
    println!("   t  v_ego  v_lead    gap  accel  reward  cost  lambda");
    for s in episode.steps.iter().step_by(5) {
        println!(
            "{:>4} {:>6.2} {:>7.2} {:>6.1} {:>6.1} {:>7.2} {:>5.1} {:>7.3}",
            s.t,
            s.state.v_ego,
            s.state.v_lead,
            s.state.gap(),
            s.accel,
            s.reward,
            s.cost,
            s.diagnostics.lambda
        );
    }
    println!(
        "cumulative reward {:.1}, cost {:.1}, collision {}",
        episode.cumulative_reward(),
        episode.cumulative_cost(),
        episode.collision
    );
    Ok(())
}
