//! Synthetic control policies: nominal pure controls and the feedback
//! couplings that turn them into realized controls.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::jet::Jet;
use crate::epsilon::representation::{EpsilonRepresentation, Representation};
use crate::error::{check_dim, GameError, Result};

/// Piecewise-constant vector signal of time. Segment `i` is active from
/// `segments[i].start` until the next segment starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub value: Vec<f64>,
}

impl Schedule {
    pub fn constant(value: Vec<f64>) -> Self {
        Self { segments: vec![Segment { start: 0.0, value }] }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, Vec<f64>)>) -> Self {
        Self { segments: pairs.into_iter().map(|(start, value)| Segment { start, value }).collect() }
    }

    /// Value at time `t`; a segment starting within half a tick counts as
    /// started, and the first segment also covers earlier times.
    pub fn value_at(&self, t: f64, dt: f64) -> &[f64] {
        let mut current = &self.segments[0].value;
        for seg in &self.segments {
            if seg.start <= t + 0.5 * dt {
                current = &seg.value;
            } else {
                break;
            }
        }
        current
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.segments.is_empty() {
            return Err(GameError::Invalid("schedule has no segments".into()));
        }
        if self.segments.iter().any(|s| !s.start.is_finite()) {
            return Err(GameError::Invalid("schedule start times must be finite".into()));
        }
        for w in self.segments.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(GameError::Invalid("schedule segments must start in increasing order".into()));
            }
        }
        for s in &self.segments {
            check_dim("schedule value", dim, s.value.len())?;
        }
        Ok(())
    }
}

/// Source of a player's pure control u° in synthetic play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NominalPolicy {
    Zero,
    /// `u° = gain · φ + offset`.
    Linear { gain: Vec<Vec<f64>>, offset: Vec<f64> },
    Scheduled { schedule: Schedule },
}

impl NominalPolicy {
    pub fn pure_control(&self, t: f64, dt: f64, phi: &[f64], control_dim: usize) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; control_dim],
            Self::Linear { gain, offset } => gain
                .iter()
                .zip(offset)
                .map(|(row, b)| row.iter().zip(phi).map(|(g, x)| g * x).sum::<f64>() + b)
                .collect(),
            Self::Scheduled { schedule } => schedule.value_at(t, dt).to_vec(),
        }
    }

    pub fn validate(&self, state_dim: usize, control_dim: usize) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Linear { gain, offset } => {
                check_dim("nominal gain rows", control_dim, gain.len())?;
                check_dim("nominal offset", control_dim, offset.len())?;
                for row in gain {
                    check_dim("nominal gain width", state_dim, row.len())?;
                }
                Ok(())
            }
            Self::Scheduled { schedule } => schedule.validate(control_dim),
        }
    }
}

/// The (normally unknown) coupling that produces realized controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeedbackPolicy {
    /// `u = u°`.
    Identity,
    /// `u = R(u°, jet; ε(t)) + noise` with a planted ε schedule.
    Planted {
        representation: EpsilonRepresentation,
        epsilon: Schedule,
        #[serde(default)]
        noise_std: f64,
    },
    /// Memoryless read-out of intention-field coordinates:
    /// `u = [u°] + ξ[offset .. offset + d_u]`.
    FieldReadout { offset: usize, include_pure: bool },
    /// Memory feedback `u = u° + ∫₀ᵗ φ dτ`, evaluated directly from the history.
    MemoryIntegral,
    /// Memory feedback `u̇ = (u° − u)/λ`, evaluated directly from the history.
    MemoryExpLag { lambda: f64, initial: Vec<f64> },
}

/// Per-player mutable state of a feedback policy.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackState {
    None,
    Integral { accumulated: Vec<f64>, recent: Vec<Vec<f64>> },
    ExpLag { current: Vec<f64>, last_pure: Option<Vec<f64>> },
}

/// Everything a feedback policy may observe at one tick.
pub struct PolicyContext<'a> {
    pub tick: usize,
    pub t: f64,
    pub dt: f64,
    pub pure: &'a [f64],
    pub jet: &'a Jet,
    pub xi: &'a [f64],
}

impl FeedbackPolicy {
    pub fn initial_state(&self, state_dim: usize) -> FeedbackState {
        match self {
            Self::MemoryIntegral => FeedbackState::Integral {
                accumulated: vec![0.0; state_dim],
                recent: Vec::new(),
            },
            Self::MemoryExpLag { initial, .. } => FeedbackState::ExpLag {
                current: initial.clone(),
                last_pure: None,
            },
            _ => FeedbackState::None,
        }
    }

    pub fn validate(&self, state_dim: usize, field_dim: usize, control_dim: usize) -> Result<()> {
        match self {
            Self::Identity => Ok(()),
            Self::Planted { representation, epsilon, noise_std } => {
                representation.validate()?;
                check_dim("planted representation control", control_dim, representation.control_dim())?;
                epsilon.validate(representation.epsilon_dim())?;
                if !(*noise_std >= 0.0) {
                    return Err(GameError::Invalid("noise level must be non-negative".into()));
                }
                Ok(())
            }
            Self::FieldReadout { offset, .. } => {
                if offset + control_dim > field_dim {
                    return Err(GameError::Invalid(format!(
                        "field read-out [{offset}, {}) exceeds intention-field dimension {field_dim}",
                        offset + control_dim
                    )));
                }
                Ok(())
            }
            Self::MemoryIntegral => check_dim("integral feedback control", state_dim, control_dim),
            Self::MemoryExpLag { lambda, initial } => {
                if !(*lambda > 0.0) {
                    return Err(GameError::Invalid("lag constant must be positive".into()));
                }
                check_dim("lag initial value", control_dim, initial.len())
            }
        }
    }

    /// Realized control for one player at one tick.
    pub fn realize(
        &self,
        ctx: &PolicyContext<'_>,
        state: &mut FeedbackState,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        match (self, state) {
            (Self::Identity, _) => Ok(ctx.pure.to_vec()),
            (Self::Planted { representation, epsilon, noise_std }, _) => {
                let eps = epsilon.value_at(ctx.t, ctx.dt);
                let mut u = representation.apply(ctx.pure, ctx.jet, eps)?;
                if *noise_std > 0.0 {
                    let normal = Normal::new(0.0, *noise_std)
                        .map_err(|e| GameError::Invalid(e.to_string()))?;
                    for v in &mut u {
                        *v += normal.sample(rng);
                    }
                }
                Ok(u)
            }
            (Self::FieldReadout { offset, include_pure }, _) => Ok((0..ctx.pure.len())
                .map(|k| ctx.xi[offset + k] + if *include_pure { ctx.pure[k] } else { 0.0 })
                .collect()),
            (Self::MemoryIntegral, FeedbackState::Integral { accumulated, recent }) => {
                integrate_history(accumulated, recent, ctx.jet.state(), ctx.dt);
                Ok(ctx.pure.iter().zip(accumulated.iter()).map(|(p, a)| p + a).collect())
            }
            (Self::MemoryExpLag { lambda, .. }, FeedbackState::ExpLag { current, last_pure }) => {
                if let Some(prev) = last_pure.as_ref() {
                    // Exact propagation of the lag over one tick with the
                    // previous pure control held.
                    let decay = (-ctx.dt / lambda).exp();
                    for (c, p) in current.iter_mut().zip(prev) {
                        *c = decay * *c + (1.0 - decay) * p;
                    }
                }
                *last_pure = Some(ctx.pure.to_vec());
                Ok(current.clone())
            }
            (policy, _) => Err(GameError::Invalid(format!("feedback state does not match policy {policy:?}"))),
        }
    }
}

/// Advances `∫₀ᵗ φ` by one tick using the newest sample, with Adams–Moulton
/// weights once enough history is available.
fn integrate_history(acc: &mut [f64], recent: &mut Vec<Vec<f64>>, phi: &[f64], dt: f64) {
    recent.insert(0, phi.to_vec());
    recent.truncate(4);
    let f = |i: usize, k: usize| recent[i][k];
    for k in 0..acc.len() {
        acc[k] += match recent.len() {
            1 => 0.0,
            2 => dt / 2.0 * (f(0, k) + f(1, k)),
            3 => dt / 12.0 * (5.0 * f(0, k) + 8.0 * f(1, k) - f(2, k)),
            _ => dt / 24.0 * (9.0 * f(0, k) + 19.0 * f(1, k) - 5.0 * f(2, k) + f(3, k)),
        };
    }
}
