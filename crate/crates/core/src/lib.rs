//! Personalized car-following: learn per-driver reward functions from
//! demonstrations, group them into driving styles, predict the style of a
//! driver with little data, and drive a simulated ego vehicle with a
//! cost-constrained Monte-Carlo planner that follows the learned style.

pub mod clustering;
pub mod data;
pub mod error;
pub mod experiment;
pub mod irl;
pub mod planner;
pub mod pomdp;
pub mod prediction;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
