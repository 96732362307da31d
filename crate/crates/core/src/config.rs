//! Run configuration: one TOML file with `[scenario]`, `[path_loss]`,
//! `[optimizer]` and `[campaign]` sections, plus dotted `key=value`
//! overrides. Unknown keys and ill-typed values are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::CampaignSettings;
use crate::sca::ScaSettings;
use crate::scenario::{PathLossModel, ScenarioConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub path_loss: PathLossModel,
    pub optimizer: ScaSettings,
    pub campaign: CampaignSettings,
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(e.to_string())
}

/// Parses the right-hand side of an override as a TOML value; bare words
/// that are not valid TOML are taken as strings.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_error)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Loads `path` (or the defaults), applies `overrides` in order, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        for o in overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `section.key=value` override, type-checked against the schema.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override '{assignment}' is not key=value")))?;
        let key = key.trim();
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidConfig(format!("malformed key '{key}'")));
        }
        let mut root = toml::Value::try_from(&*self).map_err(config_error)?;
        let (last, parents) = parts.split_last().expect("split yields one part");
        let mut table = root.as_table_mut().expect("config serializes to a table");
        for p in parents {
            table = table
                .get_mut(*p)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown config section '{p}' in '{key}'")))?;
        }
        table.insert(last.to_string(), parse_value(raw.trim()));
        *self = root
            .try_into()
            .map_err(|e| Error::InvalidConfig(format!("override '{key}': {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.path_loss.validate()?;
        self.optimizer.validate()?;
        self.campaign.validate()
    }

    /// The fully resolved configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(config_error)
    }
}
