//! TOML configuration shared by the CLI and the simulator.
//!
//! Reward keys sit at the top level; simulation parameters live in an
//! optional `[simulation]` table. Missing keys take their defaults.
//!
//! ```toml
//! alpha = 2.0
//! beta = 0.4
//! strategy = "sequential"
//!
//! [simulation]
//! steps = 600
//! schedule = "phased"
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::ConfigError;
use crate::schedule::RewardConfig;
use crate::sim::SimParams;

pub const SIMULATION_TABLE: &str = "simulation";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub reward: RewardConfig,
    pub simulation: SimParams,
}

#[derive(Deserialize)]
struct Raw {
    #[serde(flatten)]
    reward: RewardConfig,
    #[serde(default)]
    simulation: SimParams,
}

/// Every key that is not recognised, with table keys written as `simulation.key`.
pub fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut unknown = Vec::new();
    for (key, value) in table {
        if key == SIMULATION_TABLE {
            match value.as_table() {
                Some(sim) => unknown.extend(
                    sim.keys()
                        .filter(|k| !SimParams::KEYS.contains(&k.as_str()))
                        .map(|k| format!("{SIMULATION_TABLE}.{k}")),
                ),
                None => unknown.push(key.clone()),
            }
        } else if !RewardConfig::KEYS.contains(&key.as_str()) {
            unknown.push(key.clone());
        }
    }
    unknown
}

impl Config {
    /// Parses and validates a config document. Unknown keys are reported all
    /// at once rather than one by one.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse()?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let raw: Raw = table.try_into()?;
        let config = Config {
            reward: raw.reward,
            simulation: raw.simulation,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.reward.validate()?;
        self.simulation.validate()
    }
}
