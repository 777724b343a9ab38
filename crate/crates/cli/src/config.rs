//! JSON scenario files.
//!
//! A file holds the `ScenarioConfig` fields in snake_case plus an optional
//! `channel` object: either `{"seed": S, "trial": T}` for a generated draw or
//! `{"gains": [...]}` for noise-normalized gains given in user order.

use std::fs;
use std::path::Path;

use nomamec::model::{check_sorted_gains, ScenarioConfig};
use nomamec::scenario::{generate_channels, sort_users, ScenarioDraw, Seed};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Gains { gains: Vec<f64> },
    Seeded {
        seed: u64,
        #[serde(default)]
        trial: u64,
    },
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec::Seeded { seed: 0, trial: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigFile {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub channel: ChannelSpec,
}

fn parse_error(path: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {err}"))
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates; errors carry the JSON path of the bad field.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut root: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let channel = match root.as_object_mut().and_then(|o| o.remove("channel")) {
            None => ChannelSpec::default(),
            Some(v) => serde_path_to_error::deserialize(v).map_err(|e| {
                let inner = e.path().to_string();
                let at = if inner == "." { "channel".to_string() } else { format!("channel.{inner}") };
                parse_error(&at, e.into_inner())
            })?,
        };
        let scenario: ScenarioConfig = serde_path_to_error::deserialize(root)
            .map_err(|e| parse_error(&e.path().to_string(), e.into_inner()))?;
        scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let ChannelSpec::Gains { gains } = &channel {
            if gains.len() != scenario.users.len() {
                return Err(CliError::Config(format!(
                    "channel.gains: {} entries for {} users",
                    gains.len(),
                    scenario.users.len()
                )));
            }
        }
        Ok(Self { scenario, channel })
    }

    pub fn master_seed(&self) -> u64 {
        match self.channel {
            ChannelSpec::Seeded { seed, .. } => seed,
            ChannelSpec::Gains { .. } => 0,
        }
    }

    /// The channel named by the file, users sorted into SIC order.
    pub fn draw(&self) -> Result<ScenarioDraw, CliError> {
        match &self.channel {
            ChannelSpec::Gains { gains } => Ok(sort_users(gains, &self.scenario.users)?),
            ChannelSpec::Seeded { seed, trial } => {
                Ok(generate_channels(Seed::new(*seed, *trial), &self.scenario)?)
            }
        }
    }

    /// Given gains that are not already in SIC order, the index of the
    /// first out-of-order entry.
    pub fn unsorted_gains(&self) -> Option<usize> {
        match &self.channel {
            ChannelSpec::Gains { gains } => match check_sorted_gains(gains) {
                Err(nomamec::Error::UnsortedGains { index }) => Some(index),
                _ => None,
            },
            ChannelSpec::Seeded { .. } => None,
        }
    }
}
