//! Window functionals: the discrete dialogue state (ωₙ, vₙ) of one interval.

use serde::{Deserialize, Serialize};

use crate::epsilon::cells::{CellComplex, CellId, Partition};
use crate::epsilon::trace::EpsilonTrace;
use crate::error::{GameError, Result};
use crate::game::engine::Trajectory;

/// Tick samples of one partition interval `[start_tick, end_tick]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start_tick: usize,
    pub end_tick: usize,
    pub dt: f64,
    pub t_start: f64,
    pub phi: Vec<Vec<f64>>,
    pub epsilon: Vec<Option<Vec<f64>>>,
    /// All players' pure controls, concatenated.
    pub pure: Vec<Vec<f64>>,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellId>,
}

impl Window {
    /// Ticks `start..end` of a trajectory and its trace.
    pub fn from_range(
        trajectory: &Trajectory,
        trace: &EpsilonTrace,
        start: usize,
        end: usize,
        label: String,
        cell: Option<CellId>,
    ) -> Result<Self> {
        if start >= end || end > trajectory.len() || trace.len() < end {
            return Err(GameError::Invalid(format!("window [{start}, {end}) is outside the trajectory")));
        }
        let samples = &trajectory.samples[start..end];
        Ok(Self {
            start_tick: start,
            end_tick: end - 1,
            dt: trajectory.dt,
            t_start: samples[0].t,
            phi: samples.iter().map(|s| s.phi.clone()).collect(),
            epsilon: trace.values[start..end].to_vec(),
            pure: samples.iter().map(|s| s.pure.concat()).collect(),
            label,
            cell,
        })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn mean_phi(&self) -> Vec<f64> {
        mean(&self.phi.iter().collect::<Vec<_>>())
    }
}

/// One window per partition interval.
pub fn windows_for_partition(trajectory: &Trajectory, trace: &EpsilonTrace, partition: &Partition) -> Result<Vec<Window>> {
    partition
        .ranges()
        .into_iter()
        .zip(&partition.cells)
        .map(|((start, end), cell)| {
            Window::from_range(trajectory, trace, start, end, CellComplex::label(cell), Some(cell.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Epsilon,
    Phi,
    Pure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    WindowMean,
    TrapezoidIntegral,
    EndpointDelta,
    WindowVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelFunctional {
    pub channel: Channel,
    pub functional: Builtin,
}

impl ChannelFunctional {
    pub fn new(channel: Channel, functional: Builtin) -> Self {
        Self { channel, functional }
    }
}

/// Which functionals make up ω (over ε̂ and φ) and v (over u° and φ).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub omega: Vec<ChannelFunctional>,
    pub v: Vec<ChannelFunctional>,
}

impl FunctionalSpec {
    /// ω = window-mean of ε̂, v = window-mean of u°.
    pub fn means() -> Self {
        Self {
            omega: vec![ChannelFunctional::new(Channel::Epsilon, Builtin::WindowMean)],
            v: vec![ChannelFunctional::new(Channel::Pure, Builtin::WindowMean)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.is_empty() || self.v.is_empty() {
            return Err(GameError::Invalid("functional spec needs at least one ω and one v entry".into()));
        }
        if self.omega.iter().any(|f| f.channel == Channel::Pure) {
            return Err(GameError::Invalid("ω functionals read ε̂ and φ only".into()));
        }
        if self.v.iter().any(|f| f.channel == Channel::Epsilon) {
            return Err(GameError::Invalid("v functionals read u° and φ only".into()));
        }
        Ok(())
    }
}

/// Discrete dialogue state of interval `index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub index: usize,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
    pub label: String,
}

fn mean(rows: &[&Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut out = vec![0.0; rows.first().map_or(0, |r| r.len())];
    for r in rows {
        for (o, x) in out.iter_mut().zip(r.iter()) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Applies one built-in to a uniformly sampled vector channel.
pub fn apply_builtin(builtin: Builtin, rows: &[&Vec<f64>], dt: f64) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(GameError::Empty("window channel".into()));
    }
    let needs_two = matches!(builtin, Builtin::TrapezoidIntegral | Builtin::WindowVariance);
    if needs_two && rows.len() < 2 {
        return Err(GameError::UnderDetermined { required: 2, available: rows.len() });
    }
    let dim = rows[0].len();
    Ok(match builtin {
        Builtin::WindowMean => mean(rows),
        Builtin::TrapezoidIntegral => (0..dim)
            .map(|k| rows.windows(2).map(|w| 0.5 * dt * (w[0][k] + w[1][k])).sum())
            .collect(),
        Builtin::EndpointDelta => {
            let (first, last) = (rows[0], rows[rows.len() - 1]);
            last.iter().zip(first.iter()).map(|(b, a)| b - a).collect()
        }
        Builtin::WindowVariance => {
            let m = mean(rows);
            (0..dim)
                .map(|k| rows.iter().map(|r| (r[k] - m[k]).powi(2)).sum::<f64>() / rows.len() as f64)
                .collect()
        }
    })
}

fn channel_rows(window: &Window, channel: Channel) -> Vec<&Vec<f64>> {
    match channel {
        Channel::Phi => window.phi.iter().collect(),
        Channel::Pure => window.pure.iter().collect(),
        Channel::Epsilon => window.epsilon.iter().flatten().collect(),
    }
}

pub fn compute_window_functionals(window: &Window, spec: &FunctionalSpec, index: usize) -> Result<DialogueState> {
    spec.validate()?;
    let eval = |list: &[ChannelFunctional]| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for f in list {
            out.extend(apply_builtin(f.functional, &channel_rows(window, f.channel), window.dt)?);
        }
        Ok(out)
    };
    Ok(DialogueState { index, omega: eval(&spec.omega)?, v: eval(&spec.v)?, label: window.label.clone() })
}
