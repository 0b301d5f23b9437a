use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_toml, SCHEMA_VERSION};
use crate::error::{Result, SimError};
use crate::scenarios::{preset, ScenarioSpec};

/// Scenario file: a schema version plus a `[scenario]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub scenario: ScenarioSpec,
}

impl ScenarioFile {
    pub fn new(scenario: ScenarioSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let f: Self = parse_toml(text)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(SimError::config("schema_version", format!("unsupported version {}", f.schema_version)));
        }
        Ok(f)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }
}

/// A preset name, or a path to a scenario file.
pub fn resolve_scenario(reference: &str) -> Result<ScenarioSpec> {
    if let Some(p) = preset(reference) {
        return Ok(p);
    }
    let path = Path::new(reference);
    if path.is_file() {
        return Ok(ScenarioFile::load(path)?.scenario);
    }
    Err(SimError::InvalidScenario(format!(
        "`{reference}` is neither a preset name nor a scenario file"
    )))
}
