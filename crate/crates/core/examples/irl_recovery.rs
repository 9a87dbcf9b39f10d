//! Plant a preference, generate demonstrations from it and learn it back.
//!
//!     cargo run --release --example irl_recovery

use pacc::data::{discretize_event, synthesize_driver, DiscretizationSpec, DriverProfile, StateIndex, N_DISTANCE_BINS};
use pacc::irl::{learn_reward, normalize_weights, Demonstration, IrlConfig};
use pacc::stats::spearman;

fn main() -> pacc::Result<()> {
    let spec = DiscretizationSpec::default();
    let profile = DriverProfile {
        preferred_state: StateIndex::from_bins(2, 1)?,
        speed_noise_sd: 1.0,
        gap_noise_sd: 4.0,
        policy_temperature: 1.0,
    };
    let events = synthesize_driver("demo", &profile, 1000, 7, &spec)?;
    let demos = events
        .iter()
        .map(|e| discretize_event(e, &spec).map(Demonstration::new))
        .collect::<pacc::Result<Vec<_>>>()?;
    let config = IrlConfig { step_growth: 1.2, convergence_tol: 1e-10, max_iterations: 5_000, ..IrlConfig::default() };
    let fit = learn_reward(&demos, &config)?;
    let learned = normalize_weights(&fit.weights)?;

    println!("{} events, {} iterations, log-likelihood {:.1}", events.len(), fit.iterations, fit.log_likelihood);
    println!("learned weights (rows: speed bins, columns: gap bins)");
    for row in learned.0.chunks(N_DISTANCE_BINS) {
        println!("  {}", row.iter().map(|w| format!("{w:+.2}")).collect::<Vec<_>>().join(" "));
    }
    println!(
        "peak cell {} (planted {}), Spearman rho {:.3}",
        learned.argmax().index(),
        profile.preferred_state.index(),
        spearman(&learned.0, &profile.planted_weights())
    );
    Ok(())
}
