//! Monte-Carlo KL divergence between mixtures.

use serde::{Deserialize, Serialize};

use super::gmm::Gmm;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Lower bound applied to g's density before taking its log.
pub const DENSITY_FLOOR: f64 = 1e-300;
pub const MIN_KL_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub value: f64,
    pub n_samples: usize,
    pub std_error: f64,
}

/// D(f || g) estimated as the mean of log f(x) - log g(x) over x ~ f.
pub fn kl_divergence_mc(f: &Gmm, g: &Gmm, n_samples: usize, seed: u64) -> Result<KlEstimate> {
    if n_samples < MIN_KL_SAMPLES {
        return Err(Error::invalid(format!("at least {MIN_KL_SAMPLES} samples are required")));
    }
    f.validate()?;
    g.validate()?;
    let mut rng = seeded(seed);
    let floor = DENSITY_FLOOR.ln();
    let terms: Vec<f64> = (0..n_samples)
        .map(|_| {
            let x = f.sample(&mut rng);
            f.log_pdf(&x) - g.log_pdf(&x).max(floor)
        })
        .collect();
    let n = n_samples as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(KlEstimate { value: mean, n_samples, std_error: (var / n).sqrt() })
}
