use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse_toml;
use crate::dqn::DqnConfig;
use crate::error::{Result, SimError};
use crate::evo::EvolutionConfig;
use crate::sensing::SensorConfig;
use crate::sim::{TickConfig, VehicleParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Seeded evaluation episodes per checkpoint.
    pub episodes: u64,
    pub max_ticks: u64,
    /// Arc-length spacing of comparison stations; vehicle body length when unset.
    pub align_step: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 5,
            max_ticks: 2000,
            align_step: None,
        }
    }
}

/// Everything a command needs besides the scenario. Serialized in full as
/// the run's config snapshot, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub tick: TickConfig,
    #[serde(default)]
    pub evo: EvolutionConfig,
    #[serde(default)]
    pub dqn: DqnConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            vehicle: VehicleParams::default(),
            sensor: SensorConfig::default(),
            tick: TickConfig::default(),
            evo: EvolutionConfig::default(),
            dqn: DqnConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SimError::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.vehicle.validate()?;
        self.sensor.validate()?;
        self.tick.validate()?;
        self.evo.validate(self.vehicle.max_speed)?;
        self.dqn.validate()?;
        if let Some(s) = self.eval.align_step {
            if !(s > 0.0) {
                return Err(SimError::config("eval.align_step", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Point every seeded component at `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.tick.seed = seed;
        self.evo.seed = seed;
        self.dqn.seed = seed;
        self
    }

    pub fn align_step(&self) -> f64 {
        self.eval.align_step.unwrap_or(self.vehicle.body_length)
    }
}
