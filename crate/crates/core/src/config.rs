//! The run configuration document. Every default lives here or in the
//! `Default` impl of the section type it names.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::BenchConfig;
use crate::nav::EpisodeConfig;
use crate::net::TrainConfig;
use crate::sensor::{check_size, LidarConfig};
use crate::world::RESOLUTION;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {section}: {message}")]
    Invalid { section: &'static str, message: String },
}

/// Dataset generation. The lidar here is noise-free; navigation uses
/// `episode.lidar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub count: usize,
    /// Poses are drawn within this distance of furniture.
    pub max_dist: f64,
    /// Observation side stored in the file; 100 also serves 60-cell models.
    pub obs_size: usize,
    pub lidar: LidarConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 5000,
            max_dist: 1.0,
            obs_size: 100,
            lidar: LidarConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub episode: EpisodeConfig,
    pub bench: BenchConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |section, message: String| ConfigError::Invalid { section, message };
        let d = &self.dataset;
        if d.count == 0 {
            return Err(invalid("dataset", "count must be at least 1".into()));
        }
        if !(d.max_dist.is_finite() && d.max_dist > 0.0) {
            return Err(invalid("dataset", "max_dist must be positive".into()));
        }
        check_size(d.obs_size).map_err(|e| invalid("dataset", e.to_string()))?;
        d.lidar.validate().map_err(|e| invalid("dataset.lidar", e.to_string()))?;
        self.train.validate().map_err(|e| invalid("train", e))?;
        self.episode.validate(RESOLUTION).map_err(|e| invalid("episode", e.to_string()))?;
        let b = &self.bench;
        if b.paths_per_map == 0 {
            return Err(invalid("bench", "paths_per_map must be at least 1".into()));
        }
        if !(b.eval_max_dist.is_finite() && b.eval_max_dist > 0.0) {
            return Err(invalid("bench", "eval_max_dist must be positive".into()));
        }
        Ok(())
    }
}
