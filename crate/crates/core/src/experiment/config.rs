use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DiscretizationSpec, DriverProfile, StateIndex, N_STATES};
use crate::error::{Error, Result};
use crate::irl::IrlConfig;
use crate::planner::PlannerConfig;
use crate::pomdp::ModelConfig;
use crate::prediction::PredictionConfig;

/// Everything a pipeline run needs. Parsed from one TOML document; every
/// block falls back to its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub population: PopulationConfig,
    pub discretization: DiscretizationSpec,
    pub irl: IrlConfig,
    pub clustering: ClusteringConfig,
    pub prediction: PredictionStudyConfig,
    pub model: ModelConfig,
    pub planner: PlannerConfig,
    pub pacc: PaccConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            population: PopulationConfig::default(),
            discretization: DiscretizationSpec::default(),
            irl: IrlConfig::default(),
            clustering: ClusteringConfig::default(),
            prediction: PredictionStudyConfig::default(),
            model: ModelConfig::default(),
            planner: PlannerConfig::default(),
            pacc: PaccConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    /// Driver `i` of each role follows archetype `i % archetypes.len()`.
    pub archetypes: Vec<DriverProfile>,
    pub source_drivers: usize,
    /// Inclusive range of events per source driver.
    pub source_events: [usize; 2],
    pub target_drivers: usize,
    pub target_events: usize,
}

fn archetype(state: usize) -> DriverProfile {
    DriverProfile {
        preferred_state: StateIndex::new(state).expect("valid default state"),
        speed_noise_sd: 1.0,
        gap_noise_sd: 4.0,
        policy_temperature: 1.0,
    }
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            archetypes: [11, 8, 19, 22].map(archetype).to_vec(),
            source_drivers: 42,
            source_events: [11, 60],
            target_drivers: 7,
            target_events: 70,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    /// Fixed number of clusters; the elbow rule decides when absent.
    pub k: Option<usize>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { k_min: 1, k_max: 10, restarts: crate::clustering::DEFAULT_RESTARTS, k: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionStudyConfig {
    pub components: usize,
    pub kl_samples: usize,
    /// Largest number of events given to the driver mixture.
    pub max_events: usize,
    pub trials: usize,
    /// Leading target events the fit subsets are drawn from; the rest are
    /// held out for the ground truth.
    pub fit_pool: usize,
}

impl Default for PredictionStudyConfig {
    fn default() -> Self {
        let p = PredictionConfig::default();
        Self { components: p.components, kl_samples: p.kl_samples, max_events: 10, trials: 20, fit_pool: 10 }
    }
}

impl PredictionStudyConfig {
    pub fn prediction(&self) -> PredictionConfig {
        PredictionConfig { components: self.components, kl_samples: self.kl_samples }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaccConfig {
    pub episodes: usize,
    /// Leading time excluded from occupancy statistics, seconds.
    pub warmup_s: f64,
    /// The controller drives with the centroid that weighs this cell most.
    pub style_cell: usize,
}

impl Default for PaccConfig {
    fn default() -> Self {
        Self { episodes: 30, warmup_s: 20.0, style_cell: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub budgets: Vec<usize>,
    pub seeds: usize,
    /// Budgets whose slowest decision stays under this are deployable.
    pub deployable_s: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { budgets: (5..=12).map(|p| 1usize << p).collect(), seeds: 20, deployable_s: 1.0 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str::<Self>(&text)
            .map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
            .and_then(|c| c.validate().map(|_| c))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.population;
        if p.archetypes.is_empty() {
            return Err(Error::invalid("population needs at least one archetype"));
        }
        for a in &p.archetypes {
            a.validate()?;
        }
        if p.source_drivers == 0 || p.target_drivers == 0 {
            return Err(Error::invalid("source and target driver counts must be at least 1"));
        }
        let [lo, hi] = p.source_events;
        if lo == 0 || lo > hi {
            return Err(Error::invalid("source_events must be a non-empty range of positive counts"));
        }
        self.discretization.validate()?;
        self.irl.validate()?;
        let c = &self.clustering;
        if c.restarts == 0 || c.k_min == 0 || c.k_min > c.k_max {
            return Err(Error::invalid("clustering needs restarts >= 1 and 1 <= k_min <= k_max"));
        }
        if c.k.is_none() && c.k_max - c.k_min < 2 {
            return Err(Error::invalid("the elbow rule needs at least three values of k"));
        }
        if c.k_max > p.source_drivers || c.k.is_some_and(|k| k == 0 || k > p.source_drivers) {
            return Err(Error::invalid("cannot form more clusters than source drivers"));
        }
        let s = &self.prediction;
        if s.components == 0 || s.trials == 0 || s.max_events == 0 || s.max_events > s.fit_pool {
            return Err(Error::invalid("prediction needs components, trials >= 1 and 1 <= max_events <= fit_pool"));
        }
        if s.kl_samples < crate::prediction::MIN_KL_SAMPLES {
            return Err(Error::invalid("too few KL samples"));
        }
        if p.target_events <= s.fit_pool {
            return Err(Error::invalid("target drivers need more events than the fit pool"));
        }
        self.model.validate()?;
        if self.model.discretization != self.discretization {
            return Err(Error::invalid("model.discretization must equal the top-level discretization"));
        }
        self.planner.validate()?;
        if self.pacc.episodes == 0 || !(self.pacc.warmup_s >= 0.0) || self.pacc.style_cell >= N_STATES {
            return Err(Error::invalid("pacc needs episodes >= 1, warmup_s >= 0 and a valid style cell"));
        }
        let w = &self.sweep;
        if w.budgets.is_empty() || w.budgets.contains(&0) || w.seeds == 0 || !(w.deployable_s > 0.0) {
            return Err(Error::invalid("sweep needs positive budgets, seeds >= 1 and deployable_s > 0"));
        }
        Ok(())
    }
}
