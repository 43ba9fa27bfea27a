//! Experiment configuration: one file drives training, evaluation, and
//! sweeps. TOML or JSON, defaults for everything, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use edgemarket_core::mappo::{BidderKind, TrainConfig};
use edgemarket_core::market::MechanismKind;
use edgemarket_core::simenv::WorldConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label stamped into every metrics record.
    pub experiment: String,
    pub mechanism: MechanismKind,
    pub bidder: BidderKind,
    /// Vehicle counts visited by `sweep`.
    pub iov_counts: Vec<usize>,
    pub episodes_per_eval: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Mechanisms swept per IoV count; empty means just `mechanism`.
    pub sweep_mechanisms: Vec<MechanismKind>,
    /// Bidders swept per IoV count; empty means just `bidder`.
    pub sweep_bidders: Vec<BidderKind>,
    pub world: WorldConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "exp".into(),
            mechanism: MechanismKind::McAfeeDouble,
            bidder: BidderKind::Learned,
            iov_counts: vec![20, 40, 60, 80],
            episodes_per_eval: 20,
            out_dir: PathBuf::from("out"),
            seed: 0,
            sweep_mechanisms: Vec::new(),
            sweep_bidders: Vec::new(),
            world: WorldConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.world.validate()?;
        self.train.validate().map_err(CliError::Mappo)?;
        if self.iov_counts.is_empty() {
            return Err(CliError::Invalid {
                field: "iov_counts",
                message: "needs at least one vehicle count".into(),
            });
        }
        if self.episodes_per_eval == 0 {
            return Err(CliError::Invalid {
                field: "episodes_per_eval",
                message: "must be at least 1".into(),
            });
        }
        if self.experiment.is_empty() || self.experiment.contains(',') {
            return Err(CliError::Invalid {
                field: "experiment",
                message: "must be a nonempty label without commas".into(),
            });
        }
        Ok(())
    }

    /// The mechanism series a sweep visits.
    pub fn mechanisms(&self) -> Vec<MechanismKind> {
        if self.sweep_mechanisms.is_empty() {
            vec![self.mechanism]
        } else {
            self.sweep_mechanisms.clone()
        }
    }

    /// The bidder series a sweep visits.
    pub fn bidders(&self) -> Vec<BidderKind> {
        if self.sweep_bidders.is_empty() {
            vec![self.bidder]
        } else {
            self.sweep_bidders.clone()
        }
    }
}

/// Load and validate a config file; `.json` parses as JSON, anything else as
/// TOML. An empty TOML file yields the full default configuration.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let body = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parse_err = |message: String| CliError::Parse {
        path: path.display().to_string(),
        message,
    };
    let config: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&body).map_err(|e| parse_err(e.to_string()))?
    } else {
        toml::from_str(&body).map_err(|e| parse_err(e.to_string()))?
    };
    config.validate()?;
    Ok(config)
}
