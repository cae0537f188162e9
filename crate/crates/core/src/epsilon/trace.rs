//! Per-tick ε estimates along a trajectory.

use serde::{Deserialize, Serialize};

use super::representation::{estimate_epsilon, EpsilonRepresentation, Representation, DEFAULT_EVAL_BUDGET};
use crate::error::{check_dim, GameError, Result};
use crate::game::engine::{TickSample, Trajectory};
use crate::game::jet::Jet;

/// Tick-sampled ε̂ with inversion residuals. Warm-up ticks carry `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonTrace {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Option<Vec<f64>>>,
    pub residuals: Vec<Option<f64>>,
    /// Ticks where the inversion budget ran out.
    #[serde(default)]
    pub flagged: Vec<usize>,
}

impl EpsilonTrace {
    /// Wraps raw values, e.g. for relation mining on externally produced traces.
    pub fn from_values(t0: f64, dt: f64, values: Vec<Option<Vec<f64>>>) -> Self {
        let residuals = values.iter().map(|v| v.as_ref().map(|_| 0.0)).collect();
        Self { t0, dt, values, residuals, flagged: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_of(&self, tick: usize) -> f64 {
        self.t0 + tick as f64 * self.dt
    }

    pub fn dim(&self) -> Option<usize> {
        self.values.iter().flatten().next().map(Vec::len)
    }

    /// Present samples as `(tick, value)`.
    pub fn present(&self) -> impl Iterator<Item = (usize, &Vec<f64>)> {
        self.values.iter().enumerate().filter_map(|(j, v)| v.as_ref().map(|v| (j, v)))
    }
}

/// Per-tick estimator over all players' representations; ε̂ is the
/// concatenation of the players' parameters.
#[derive(Debug, Clone)]
pub struct EpsilonEstimator {
    pub representations: Vec<EpsilonRepresentation>,
    pub eval_budget: usize,
}

/// One tick's estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TickEstimate {
    pub epsilon: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
}

impl EpsilonEstimator {
    pub fn new(representations: Vec<EpsilonRepresentation>) -> Self {
        Self { representations, eval_budget: DEFAULT_EVAL_BUDGET }
    }

    pub fn epsilon_dim(&self) -> usize {
        self.representations.iter().map(|r| r.epsilon_dim()).sum()
    }

    /// `None` during the jet warm-up.
    pub fn estimate(&self, sample: &TickSample, jet: &Jet) -> Result<Option<TickEstimate>> {
        if !jet.is_complete() {
            return Ok(None);
        }
        check_dim("representations per player", sample.realized.len(), self.representations.len())?;
        let mut epsilon = Vec::with_capacity(self.epsilon_dim());
        let mut sq = 0.0;
        let mut converged = true;
        for (p, rep) in self.representations.iter().enumerate() {
            let est = estimate_epsilon(rep, &sample.realized[p], &sample.pure[p], jet, self.eval_budget)
                .map_err(|e| GameError::Evaluation { tick: sample.tick, reason: e.to_string() })?;
            epsilon.extend(est.epsilon);
            sq += est.residual * est.residual;
            converged &= est.converged;
        }
        Ok(Some(TickEstimate { epsilon, residual: sq.sqrt(), converged }))
    }
}

/// ε̂ at every tick of `trajectory`, one representation per player.
pub fn epsilon_trace(trajectory: &Trajectory, representations: &[EpsilonRepresentation]) -> Result<EpsilonTrace> {
    let estimator = EpsilonEstimator::new(representations.to_vec());
    trace_with(trajectory, |sample, jet| estimator.estimate(sample, jet))
}

/// ε̂ of one player under an arbitrary representation.
pub fn player_trace<R: Representation + ?Sized>(
    trajectory: &Trajectory,
    player: usize,
    representation: &R,
) -> Result<EpsilonTrace> {
    trace_with(trajectory, |sample, jet| {
        if !jet.is_complete() {
            return Ok(None);
        }
        let est = estimate_epsilon(
            representation,
            &sample.realized[player],
            &sample.pure[player],
            jet,
            DEFAULT_EVAL_BUDGET,
        )
        .map_err(|e| GameError::Evaluation { tick: sample.tick, reason: e.to_string() })?;
        Ok(Some(TickEstimate { epsilon: est.epsilon, residual: est.residual, converged: est.converged }))
    })
}

fn trace_with<F>(trajectory: &Trajectory, mut estimate: F) -> Result<EpsilonTrace>
where
    F: FnMut(&TickSample, &Jet) -> Result<Option<TickEstimate>>,
{
    let jets = trajectory.jets();
    let mut trace = EpsilonTrace {
        t0: trajectory.t0,
        dt: trajectory.dt,
        values: Vec::with_capacity(trajectory.len()),
        residuals: Vec::with_capacity(trajectory.len()),
        flagged: Vec::new(),
    };
    for (sample, jet) in trajectory.samples.iter().zip(&jets) {
        match estimate(sample, jet)? {
            Some(est) => {
                if !est.converged {
                    trace.flagged.push(sample.tick);
                }
                trace.values.push(Some(est.epsilon));
                trace.residuals.push(Some(est.residual));
            }
            None => {
                trace.values.push(None);
                trace.residuals.push(None);
            }
        }
    }
    Ok(trace)
}
