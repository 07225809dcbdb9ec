//! Engine configuration, read from one TOML document. Every table and field is
//! optional; missing values take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::JitterConfig;
use crate::feedback::GuidanceConfig;
use crate::fsm::FsmConfig;
use crate::model::DEFAULT_PATTERN_RATIO;
use crate::trajectory::{CameraGeometry, CourtGeometry};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Valid trials per session used for session statistics.
    pub valid_trials: usize,
    /// Elbow-to-wrist change ratio at or above which a serve counts as
    /// elbow-and-wrist.
    pub pattern_ratio: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            valid_trials: 12,
            pattern_ratio: DEFAULT_PATTERN_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub bind: String,
    pub port: u16,
    /// Messages buffered per client before the oldest are dropped.
    pub client_queue: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8765,
            client_queue: 1024,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub fsm: FsmConfig,
    pub guidance: GuidanceConfig,
    pub jitter: JitterConfig,
    pub session: SessionConfig,
    pub court: CourtGeometry,
    pub camera: CameraGeometry,
    pub stream: StreamConfig,
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: EngineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.fsm.validate().map_err(|e| invalid(&e))?;
        self.guidance.validate().map_err(|e| invalid(&e))?;
        self.court.validate().map_err(|e| invalid(&e))?;
        if !(self.session.pattern_ratio > 0.0 && self.session.pattern_ratio.is_finite()) {
            return Err(ConfigError::Invalid("session.pattern_ratio must be positive".into()));
        }
        if self.stream.client_queue == 0 {
            return Err(ConfigError::Invalid("stream.client_queue must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        assert_eq!(EngineConfig::from_toml("").unwrap(), EngineConfig::default());
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = EngineConfig::default();
        assert_eq!(EngineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_tables_override() {
        let cfg = EngineConfig::from_toml("[fsm]\ndwell_s = 1.5\n[court]\nside_x = -3.05\n").unwrap();
        assert_eq!(cfg.fsm.dwell_s, 1.5);
        assert_eq!(cfg.fsm.trend_frames, 3);
        assert_eq!(cfg.court.side_x, -3.05);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(EngineConfig::from_toml("[fsm]\ndwel = 1\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(
            EngineConfig::from_toml("[fsm]\ntrend_frames = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            EngineConfig::from_toml("[session]\npattern_ratio = -1.0\n"),
            Err(ConfigError::Invalid(_))
        ));
    }
}
