//! Runnable scenario descriptions and their JSON form.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::figure::FigureSpec;
use crate::epsilon::cells::{detect_cell_transitions, CellComplex, Partition};
use crate::epsilon::representation::{EpsilonRepresentation, Representation};
use crate::epsilon::trace::{epsilon_trace, EpsilonEstimator, EpsilonTrace};
use crate::error::{check_dim, GameError, Result};
use crate::game::engine::{simulate, GameSetup, Trajectory};
use crate::perception::game::{MatchConfig, SetLimit, DEFAULT_HORIZON_CAP};
use crate::perception::stop::StopCriterion;
use crate::verbal::functionals::FunctionalSpec;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Stop rule and match settings for perception-game play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionSettings {
    pub criterion: StopCriterion,
    pub initial_omega: Vec<f64>,
    #[serde(default = "default_cap")]
    pub horizon_cap: f64,
    pub sets: usize,
}

fn default_cap() -> f64 {
    DEFAULT_HORIZON_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    pub name: String,
    pub setup: GameSetup,
    /// One per player; ε̂ is their concatenation.
    pub representations: Vec<EpsilonRepresentation>,
    pub cells: CellComplex,
    pub functionals: FunctionalSpec,
    /// Simulated seconds for plain (non-match) runs.
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perception: Option<PerceptionSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<FigureSpec>,
    pub seed: u64,
    /// Planted quantities for checking estimators; never read by the engine.
    #[serde(rename = "_ground_truth", default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<serde_json::Value>,
}

impl ScenarioSpec {
    pub fn players(&self) -> usize {
        self.setup.players()
    }

    pub fn epsilon_dim(&self) -> usize {
        self.representations.iter().map(|r| r.epsilon_dim()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(GameError::Invalid(format!("unsupported scenario schema version {}", self.schema_version)));
        }
        self.setup.validate()?;
        let d = self.setup.dynamics.dims;
        check_dim("representations", d.players, self.representations.len())?;
        for r in &self.representations {
            r.validate()?;
            let b = r.basis();
            check_dim("representation control dimension", d.control, b.control_dim)?;
            check_dim("representation state dimension", d.state, b.state_dim)?;
            check_dim("representation jet order", self.setup.jet_order, b.jet_order)?;
        }
        self.cells.validate()?;
        check_dim("cell complex dimension", self.epsilon_dim(), self.cells.dim())?;
        self.functionals.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(GameError::Invalid("horizon must be positive".into()));
        }
        if let Some(p) = &self.perception {
            p.criterion.validate()?;
            if p.sets == 0 {
                return Err(GameError::Invalid("perception settings need at least one set".into()));
            }
        }
        if let Some(f) = &self.figure {
            f.validate(d.players)?;
            check_dim("figure observer ε dimension", f.cells.dim() * d.players, self.epsilon_dim())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| GameError::Invalid(format!("scenario JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// SHA-256 of the compact JSON form with the seed zeroed, hex encoded;
    /// runs of one configuration under different seeds share it.
    pub fn config_hash(&self) -> String {
        let unseeded = Self { seed: 0, ..self.clone() };
        let bytes = serde_json::to_vec(&unseeded).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn estimator(&self) -> EpsilonEstimator {
        EpsilonEstimator::new(self.representations.clone())
    }

    pub fn simulate(&self, seed: u64) -> Result<Trajectory> {
        simulate(&self.setup, self.horizon, seed)
    }

    /// ε̂ trace and cell-transition partition of a trajectory.
    pub fn segment(&self, trajectory: &Trajectory) -> Result<(EpsilonTrace, Partition)> {
        let trace = epsilon_trace(trajectory, &self.representations)?;
        let partition = detect_cell_transitions(&trace, &self.cells)?;
        Ok((trace, partition))
    }

    pub fn match_config(&self, limit: Option<SetLimit>) -> Result<MatchConfig> {
        let p = self
            .perception
            .as_ref()
            .ok_or_else(|| GameError::Invalid(format!("scenario `{}` has no perception settings", self.name)))?;
        Ok(MatchConfig {
            criterion: p.criterion.clone(),
            functionals: self.functionals.clone(),
            representations: self.representations.clone(),
            initial_omega: p.initial_omega.clone(),
            horizon_cap: p.horizon_cap,
            limit: limit.unwrap_or(SetLimit::Count { sets: p.sets }),
        })
    }
}
