//! Reduction of memory feedbacks to memoryless ones by adding intention-field
//! coordinates.
//!
//! Two kernels are supported. For the running integral `u = u° + ∫φ` a field
//! block with `ξ̇ = φ` is added and read out as `u = u° + ξ`. For the
//! exponential lag `u̇ = (u° − u)/λ` a block with `ξ̇ = (u° − ξ)/λ` is added and
//! read out as `u = ξ`. Anything else is rejected.

use serde::{Deserialize, Serialize};

use super::dynamics::{DynamicsSpec, Term};
use super::engine::GameSetup;
use super::policy::FeedbackPolicy;
use crate::error::{check_dim, GameError, Result};

/// Kernel as written in scenario documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemoryKernel {
    None,
    Integral,
    ExpLag { lambda: f64, initial: Vec<f64> },
}

impl MemoryKernel {
    pub fn from_spec(spec: &KernelSpec, control_dim: usize) -> Result<Self> {
        match spec.kind.as_str() {
            "none" => Ok(Self::None),
            "integral" => Ok(Self::Integral),
            "exponential-lag" => {
                let lambda = spec
                    .lambda
                    .ok_or_else(|| GameError::Invalid("exponential-lag kernel needs lambda".into()))?;
                if !(lambda > 0.0) {
                    return Err(GameError::Invalid("lambda must be positive".into()));
                }
                let initial = spec.initial.clone().unwrap_or_else(|| vec![0.0; control_dim]);
                Ok(Self::ExpLag { lambda, initial })
            }
            other => Err(GameError::UnsupportedKernel(other.to_string())),
        }
    }
}

/// Copies `base` into a spec with `extra` additional field coordinates
/// appended after the existing ones.
fn widen(base: &DynamicsSpec, extra: usize) -> DynamicsSpec {
    let mut dims = base.dims;
    dims.field += extra;
    let mut out = DynamicsSpec::zero(dims);
    let old = base.dims;
    let remap = |c: usize| -> usize {
        let fixed = old.state + old.field;
        if c < fixed { c } else { c + extra }
    };
    for (r, row) in base.state_matrix.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out.state_matrix[r][remap(c)] = v;
        }
    }
    for (r, row) in base.field_matrix.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out.field_matrix[r][remap(c)] = v;
        }
    }
    out.state_offset = base.state_offset.clone();
    out.field_offset[..old.field].copy_from_slice(&base.field_offset);
    out
}

/// The memoryless form of `base` under `kernel`, applied to every player.
pub fn reduce_memory_feedback(kernel: &MemoryKernel, base: &GameSetup) -> Result<GameSetup> {
    let d = base.dynamics.dims;
    let players = d.players;
    let du = d.control;
    let old_field = d.field;
    let mut setup = base.clone();
    match kernel {
        MemoryKernel::None => {}
        MemoryKernel::Integral => {
            check_dim("integral kernel control", d.state, du)?;
            let mut spec = widen(&base.dynamics, players * du);
            for i in 0..players {
                for k in 0..du {
                    let row = old_field + i * du + k;
                    spec = spec.field_coeff(row, Term::Phi(k), 1.0);
                }
            }
            setup.dynamics = spec;
            setup.initial.xi.extend(std::iter::repeat_n(0.0, players * du));
            setup.feedback = (0..players)
                .map(|i| FeedbackPolicy::FieldReadout { offset: old_field + i * du, include_pure: true })
                .collect();
        }
        MemoryKernel::ExpLag { lambda, initial } => {
            check_dim("lag initial value", du, initial.len())?;
            let mut spec = widen(&base.dynamics, players * du);
            for i in 0..players {
                for k in 0..du {
                    let row = old_field + i * du + k;
                    spec = spec
                        .field_coeff(row, Term::Pure { player: i, k }, 1.0 / lambda)
                        .field_coeff(row, Term::Xi(row), -1.0 / lambda);
                }
            }
            setup.dynamics = spec;
            for _ in 0..players {
                setup.initial.xi.extend_from_slice(initial);
            }
            setup.feedback = (0..players)
                .map(|i| FeedbackPolicy::FieldReadout { offset: old_field + i * du, include_pure: false })
                .collect();
        }
    }
    setup.validate()?;
    Ok(setup)
}

/// The same game with the memory feedback evaluated directly from history.
pub fn memory_form(kernel: &MemoryKernel, base: &GameSetup) -> Result<GameSetup> {
    let mut setup = base.clone();
    let players = base.players();
    match kernel {
        MemoryKernel::None => {}
        MemoryKernel::Integral => setup.feedback = vec![FeedbackPolicy::MemoryIntegral; players],
        MemoryKernel::ExpLag { lambda, initial } => {
            setup.feedback = vec![FeedbackPolicy::MemoryExpLag { lambda: *lambda, initial: initial.clone() }; players]
        }
    }
    setup.validate()?;
    Ok(setup)
}
