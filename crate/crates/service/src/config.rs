//! Session configuration, loadable from JSON and overridable from the CLI.

use std::path::{Path, PathBuf};

use ifgame_core::scenarios::{builtin, ScenarioSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const LOG_DIR_ENV: &str = "IGAME_LOG_DIR";
pub const DEFAULT_LOG_DIR: &str = "logs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Controls come from the scenario's nominal policies.
    #[default]
    Synthetic,
    /// One human player over the socket.
    Live,
    /// Starts once every player slot is connected.
    MultiUser,
}

impl Mode {
    /// How many leading player slots are driven over the socket.
    pub fn humans(self, players: usize) -> usize {
        match self {
            Self::Synthetic => 0,
            Self::Live => 1.min(players),
            Self::MultiUser => players,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "synthetic" => Ok(Self::Synthetic),
            "live" => Ok(Self::Live),
            "multi-user" => Ok(Self::MultiUser),
            other => Err(format!("unknown mode `{other}` (synthetic | live | multi-user)")),
        }
    }
}

/// A built-in scenario name, a path to a scenario JSON file, or the spec inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Inline(Box<ScenarioSpec>),
    Named(String),
}

impl ScenarioRef {
    pub fn resolve(&self, seed: u64) -> Result<ScenarioSpec> {
        match self {
            Self::Inline(spec) => {
                spec.validate()?;
                Ok(spec.as_ref().clone())
            }
            Self::Named(name) => {
                let path = Path::new(name);
                if path.extension().is_some_and(|e| e == "json") || path.exists() {
                    Ok(ScenarioSpec::from_json(&std::fs::read_to_string(path)?)?)
                } else {
                    Ok(builtin(name, seed)?)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub scenario: ScenarioRef,
    #[serde(default)]
    pub mode: Mode,
    /// Overrides the scenario seed when given.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Ticks per second; must equal `1/dt` when given.
    #[serde(default)]
    pub tick_rate: Option<f64>,
    #[serde(default)]
    pub log_dir: Option<PathBuf>,
    #[serde(default)]
    pub session_id: Option<String>,
    /// Set limit for perception-game scenarios.
    #[serde(default)]
    pub sets: Option<usize>,
    /// Simulated seconds for plain runs.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Pace live sessions to wall-clock time.
    #[serde(default = "yes")]
    pub realtime: bool,
}

fn yes() -> bool {
    true
}

impl SessionConfig {
    pub fn new(scenario: ScenarioRef) -> Self {
        Self {
            scenario,
            mode: Mode::Synthetic,
            seed: None,
            tick_rate: None,
            log_dir: None,
            session_id: None,
            sets: None,
            horizon: None,
            realtime: true,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Resolves the scenario and checks cross-field constraints.
    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let mut spec = self.scenario.resolve(self.seed.unwrap_or(0))?;
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(rate) = self.tick_rate {
            let expected = 1.0 / spec.setup.dt;
            if (rate - expected).abs() > 1e-9 * expected {
                return Err(ServiceError::Config(format!("tick rate {rate} does not match scenario dt ({expected} Hz)")));
            }
        }
        if self.mode == Mode::MultiUser && spec.players() < 2 {
            return Err(ServiceError::Config("multi-user mode needs a scenario with at least two players".into()));
        }
        if self.sets == Some(0) {
            return Err(ServiceError::Config("--sets must be at least 1".into()));
        }
        if self.sets.is_some() && spec.perception.is_none() {
            return Err(ServiceError::Config(format!("scenario `{}` has no perception settings", spec.name)));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(ServiceError::Config("horizon must be positive".into()));
            }
        }
        Ok(spec)
    }

    pub fn log_dir(&self) -> PathBuf {
        self.log_dir
            .clone()
            .or_else(|| std::env::var_os(LOG_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_LOG_DIR))
    }

    /// `<scenario>-<seed>-<hash prefix>` unless set explicitly.
    pub fn session_id(&self, spec: &ScenarioSpec) -> String {
        self.session_id
            .clone()
            .unwrap_or_else(|| format!("{}-{}-{}", spec.name, spec.seed, &spec.config_hash()[..8]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_parse_and_count_humans() {
        assert_eq!("multi-user".parse::<Mode>().unwrap(), Mode::MultiUser);
        assert!("solo".parse::<Mode>().is_err());
        assert_eq!(Mode::Synthetic.humans(3), 0);
        assert_eq!(Mode::Live.humans(3), 1);
        assert_eq!(Mode::MultiUser.humans(3), 3);
    }

    #[test]
    fn config_file_defaults() {
        let c: SessionConfig = serde_json::from_str(r#"{"scenario": "relay"}"#).unwrap();
        assert_eq!(c.scenario, ScenarioRef::Named("relay".into()));
        assert_eq!(c.mode, Mode::Synthetic);
        assert!(c.realtime);
        let spec = c.scenario().unwrap();
        assert_eq!(c.session_id(&spec), format!("relay-0-{}", &spec.config_hash()[..8]));
    }
}
