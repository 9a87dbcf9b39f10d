use std::path::{Path, PathBuf};

/// File names under the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn at(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn config(&self) -> PathBuf {
        self.at("config.toml")
    }

    pub fn population(&self) -> PathBuf {
        self.at("population.json")
    }

    pub fn trajectories(&self) -> PathBuf {
        self.at("trajectories.csv")
    }

    pub fn events_dir(&self) -> PathBuf {
        self.at("events")
    }

    pub fn events(&self, driver_id: &str) -> PathBuf {
        self.events_dir().join(format!("{driver_id}.json"))
    }

    pub fn weights_dir(&self) -> PathBuf {
        self.at("weights")
    }

    pub fn weights(&self, driver_id: &str) -> PathBuf {
        self.weights_dir().join(format!("{driver_id}.json"))
    }

    pub fn weights_csv(&self) -> PathBuf {
        self.at("weights.csv")
    }

    pub fn elbow(&self) -> PathBuf {
        self.at("elbow.csv")
    }

    pub fn cluster_model(&self) -> PathBuf {
        self.at("cluster_model.json")
    }

    pub fn clustering(&self) -> PathBuf {
        self.at("clustering.json")
    }

    pub fn style_model(&self) -> PathBuf {
        self.at("style_model.json")
    }

    pub fn predictions(&self) -> PathBuf {
        self.at("prediction.csv")
    }

    pub fn accuracy(&self) -> PathBuf {
        self.at("accuracy.csv")
    }

    pub fn prediction_summary(&self) -> PathBuf {
        self.at("prediction.json")
    }

    pub fn pacc_dir(&self) -> PathBuf {
        self.at("pacc")
    }

    pub fn episode(&self, index: usize) -> PathBuf {
        self.pacc_dir().join(format!("episode_{index:03}.csv"))
    }

    pub fn mean_trajectory(&self) -> PathBuf {
        self.pacc_dir().join("mean_trajectory.csv")
    }

    pub fn occupancy(&self) -> PathBuf {
        self.pacc_dir().join("occupancy.csv")
    }

    pub fn diagnostics(&self) -> PathBuf {
        self.pacc_dir().join("diagnostics.jsonl")
    }

    pub fn pacc_summary(&self) -> PathBuf {
        self.pacc_dir().join("summary.json")
    }

    pub fn sweep(&self) -> PathBuf {
        self.at("sweep.csv")
    }

    pub fn figures_dir(&self) -> PathBuf {
        self.at("figures")
    }

    pub fn figure(&self, name: &str) -> PathBuf {
        self.figures_dir().join(format!("{name}.csv"))
    }

    pub fn timing_dir(&self) -> PathBuf {
        self.at("timing")
    }

    pub fn stage_timing(&self, stage: &str) -> PathBuf {
        self.timing_dir().join(format!("{stage}.json"))
    }

    pub fn timing(&self) -> PathBuf {
        self.at("timing.json")
    }

    pub fn report(&self) -> PathBuf {
        self.at("report.json")
    }

    pub fn summary(&self) -> PathBuf {
        self.at("summary.txt")
    }
}
