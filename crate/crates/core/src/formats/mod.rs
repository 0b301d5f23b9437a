//! On-disk formats: TOML run configs and scenario files, and the binary
//! checkpoint layout.

mod checkpoint;
mod config;
mod scenario;

pub use checkpoint::{AgentKind, Checkpoint, TrainedPolicy, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{EvalConfig, RunConfig, SCHEMA_VERSION};
pub use scenario::{resolve_scenario, ScenarioFile};

use serde::de::DeserializeOwned;

use crate::error::{Result, SimError};

/// Parse TOML into `T`, reporting the dotted path of the offending field.
pub(crate) fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| SimError::config("<document>", e.message().trim()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SimError::config(if path == "." { "<document>".into() } else { path }, e.inner().message().trim())
    })
}
