//! Coalition controls: each coalition I_i acts through one control v_i that
//! aggregates its members' pure controls plus a feedback term on the jet.

use serde::{Deserialize, Serialize};

use super::jet::Jet;
use crate::error::{check_dim, GameError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coalition {
    /// Player ids; a player may belong to several coalitions.
    pub members: Vec<usize>,
    /// One aggregation weight per member.
    pub weights: Vec<f64>,
    /// Optional `control_dim × jet_len` feedback matrix applied to the stacked jet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Vec<Vec<f64>>>,
}

impl Coalition {
    pub fn new(members: Vec<usize>, weights: Vec<f64>) -> Self {
        Self { members, weights, feedback: None }
    }

    pub fn with_feedback(mut self, matrix: Vec<Vec<f64>>) -> Self {
        self.feedback = Some(matrix);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionSpec {
    pub coalitions: Vec<Coalition>,
}

impl CoalitionSpec {
    /// Singleton coalitions `I_i = {i}` with unit weight.
    pub fn singletons(players: usize) -> Self {
        Self { coalitions: (0..players).map(|i| Coalition::new(vec![i], vec![1.0])).collect() }
    }

    pub fn validate(&self, players: usize) -> Result<()> {
        for (i, c) in self.coalitions.iter().enumerate() {
            if c.members.is_empty() {
                return Err(GameError::Invalid(format!("coalition {i} is empty")));
            }
            check_dim(&format!("coalition {i} weights"), c.members.len(), c.weights.len())?;
            if let Some(&p) = c.members.iter().find(|&&p| p >= players) {
                return Err(GameError::Invalid(format!("coalition {i} names unknown player {p}")));
            }
        }
        Ok(())
    }
}

/// Computes `v_i = Σ_{j∈I_i} w_ij u°_j + K_i · jet` for every coalition.
pub fn coalition_control(spec: &CoalitionSpec, pure: &[Vec<f64>], jet: &Jet) -> Result<Vec<Vec<f64>>> {
    spec.validate(pure.len())?;
    let stacked = jet.stacked();
    spec.coalitions
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let dim = pure[c.members[0]].len();
            let mut v = vec![0.0; dim];
            for (&p, w) in c.members.iter().zip(&c.weights) {
                check_dim(&format!("coalition {i} member {p} control"), dim, pure[p].len())?;
                for (vk, uk) in v.iter_mut().zip(&pure[p]) {
                    *vk += w * uk;
                }
            }
            if let Some(k) = &c.feedback {
                check_dim(&format!("coalition {i} feedback rows"), dim, k.len())?;
                for (vk, row) in v.iter_mut().zip(k) {
                    check_dim(&format!("coalition {i} feedback width"), stacked.len(), row.len())?;
                    *vk += row.iter().zip(&stacked).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            Ok(v)
        })
        .collect()
}
