//! Drift checks for quantities declared time-independent along play.

use serde::{Deserialize, Serialize};

use super::engine::{TickSample, Trajectory};
use super::jet::Jet;
use crate::error::{GameError, Result};

/// One tick as seen by an invariant.
pub struct TickView<'a> {
    pub sample: &'a TickSample,
    pub jet: &'a Jet,
}

/// A scalar function of `(t, u, u°, jet)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InvariantFn {
    Constant { value: f64 },
    /// The tick time itself; never invariant, useful as a control.
    Time,
    /// `Σ w·u + Σ w·u° + Σ w·jet + c`, with per-player weights on the
    /// controls. Empty weight lists contribute nothing.
    Affine {
        realized: Vec<Vec<f64>>,
        pure: Vec<Vec<f64>>,
        jet: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariant {
    pub name: String,
    pub function: InvariantFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSpec {
    pub invariants: Vec<Invariant>,
}

fn weighted(weights: &[Vec<f64>], values: &[Vec<f64>]) -> Option<f64> {
    if weights.is_empty() {
        return Some(0.0);
    }
    if weights.len() != values.len() {
        return None;
    }
    let mut total = 0.0;
    for (w, v) in weights.iter().zip(values) {
        if w.len() != v.len() {
            return None;
        }
        total += w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
    Some(total)
}

impl InvariantFn {
    pub fn evaluate(&self, view: &TickView<'_>) -> std::result::Result<f64, String> {
        let value = match self {
            Self::Constant { value } => *value,
            Self::Time => view.sample.t,
            Self::Affine { realized, pure, jet, constant } => {
                let u = weighted(realized, &view.sample.realized).ok_or("realized weights do not match")?;
                let p = weighted(pure, &view.sample.pure).ok_or("pure weights do not match")?;
                let stacked = view.jet.stacked();
                let j = if jet.is_empty() {
                    0.0
                } else if jet.len() == stacked.len() {
                    jet.iter().zip(&stacked).map(|(a, b)| a * b).sum()
                } else {
                    return Err("jet weights do not match".into());
                };
                u + p + j + constant
            }
        };
        if value.is_finite() { Ok(value) } else { Err("non-finite value".into()) }
    }
}

/// Per-invariant `max_t |F(t) − F(t₀)|`, using any closure-backed functions.
pub fn check_invariants_with<F>(trajectory: &Trajectory, functions: &[F]) -> Result<Vec<f64>>
where
    F: Fn(&TickView<'_>) -> std::result::Result<f64, String>,
{
    if trajectory.is_empty() {
        return Err(GameError::Empty("trajectory".into()));
    }
    let jets = trajectory.jets();
    let mut first = vec![0.0; functions.len()];
    let mut drift = vec![0.0_f64; functions.len()];
    for (j, (sample, jet)) in trajectory.samples.iter().zip(&jets).enumerate() {
        let view = TickView { sample, jet };
        for (a, f) in functions.iter().enumerate() {
            let v = f(&view).map_err(|reason| GameError::Evaluation { tick: sample.tick, reason })?;
            if j == 0 {
                first[a] = v;
            } else {
                drift[a] = drift[a].max((v - first[a]).abs());
            }
        }
    }
    Ok(drift)
}

/// Per-invariant maximum drift from the initial tick.
pub fn check_invariants(trajectory: &Trajectory, spec: &InvariantSpec) -> Result<Vec<f64>> {
    let fns: Vec<_> = spec
        .invariants
        .iter()
        .map(|inv| move |view: &TickView<'_>| inv.function.evaluate(view))
        .collect();
    check_invariants_with(trajectory, &fns)
}
