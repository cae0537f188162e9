//! State and intention-field dynamics.
//!
//! [`Dynamics`] is the abstract right-hand side `(φ̇, ξ̇) = (Φ, Ξ)` evaluated on
//! the state, the intention field and the controls held for the current tick.
//! [`DynamicsSpec`] is the serializable affine instance used by scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, GameError, Result};

/// Controls held constant over one tick.
///
/// `actuated` are the controls entering the dynamics: the realized per-player
/// controls, or the coalition controls when coalitions are declared. `pure`
/// are always the per-player pure controls.
#[derive(Debug, Clone, Copy)]
pub struct ControlInputs<'a> {
    pub actuated: &'a [Vec<f64>],
    pub pure: &'a [Vec<f64>],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// State dimension d_φ.
    pub state: usize,
    /// Intention-field dimension d_ξ (may be zero).
    pub field: usize,
    /// Number of players n.
    pub players: usize,
    /// Number of actuated control slots (players, or coalitions).
    pub actuators: usize,
    /// Per-player (and per-slot) control dimension.
    pub control: usize,
}

pub trait Dynamics {
    fn dims(&self) -> Dims;

    /// Writes dφ/dt into `out`.
    fn state_rate(&self, phi: &[f64], xi: &[f64], inputs: &ControlInputs<'_>, out: &mut [f64]);

    /// Writes dξ/dt into `out`.
    fn field_rate(&self, phi: &[f64], xi: &[f64], inputs: &ControlInputs<'_>, out: &mut [f64]);
}

/// One input coordinate of the affine dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Phi(usize),
    Xi(usize),
    Actuated { slot: usize, k: usize },
    Pure { player: usize, k: usize },
}

/// Affine dynamics over the stacked input `z = [φ; ξ; actuated...; pure...]`:
///
/// ```text
/// φ̇ = state_matrix · z + state_offset
/// ξ̇ = field_matrix · z + field_offset
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    pub dims: Dims,
    pub state_matrix: Vec<Vec<f64>>,
    pub state_offset: Vec<f64>,
    pub field_matrix: Vec<Vec<f64>>,
    pub field_offset: Vec<f64>,
}

impl DynamicsSpec {
    /// All-zero dynamics of the given shape.
    pub fn zero(dims: Dims) -> Self {
        let width = input_width(&dims);
        Self {
            dims,
            state_matrix: vec![vec![0.0; width]; dims.state],
            state_offset: vec![0.0; dims.state],
            field_matrix: vec![vec![0.0; width]; dims.field],
            field_offset: vec![0.0; dims.field],
        }
    }

    pub fn input_width(&self) -> usize {
        input_width(&self.dims)
    }

    pub fn column(&self, term: Term) -> usize {
        let d = &self.dims;
        match term {
            Term::Phi(i) => i,
            Term::Xi(i) => d.state + i,
            Term::Actuated { slot, k } => d.state + d.field + slot * d.control + k,
            Term::Pure { player, k } => {
                d.state + d.field + d.actuators * d.control + player * d.control + k
            }
        }
    }

    /// Adds `value` to the coefficient of `term` in the equation for φ_row.
    pub fn state_coeff(mut self, row: usize, term: Term, value: f64) -> Self {
        let c = self.column(term);
        self.state_matrix[row][c] += value;
        self
    }

    /// Adds `value` to the coefficient of `term` in the equation for ξ_row.
    pub fn field_coeff(mut self, row: usize, term: Term, value: f64) -> Self {
        let c = self.column(term);
        self.field_matrix[row][c] += value;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if d.state == 0 {
            return Err(GameError::Invalid("state dimension must be at least 1".into()));
        }
        if d.players == 0 {
            return Err(GameError::Invalid("at least one player is required".into()));
        }
        let width = self.input_width();
        check_dim("state matrix rows", d.state, self.state_matrix.len())?;
        check_dim("state offset", d.state, self.state_offset.len())?;
        check_dim("field matrix rows", d.field, self.field_matrix.len())?;
        check_dim("field offset", d.field, self.field_offset.len())?;
        for row in self.state_matrix.iter().chain(&self.field_matrix) {
            check_dim("dynamics matrix width", width, row.len())?;
            crate::error::check_finite("dynamics matrix", row)?;
        }
        crate::error::check_finite("state offset", &self.state_offset)?;
        crate::error::check_finite("field offset", &self.field_offset)?;
        Ok(())
    }

    fn stacked(&self, phi: &[f64], xi: &[f64], inputs: &ControlInputs<'_>) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.input_width());
        z.extend_from_slice(phi);
        z.extend_from_slice(xi);
        for u in inputs.actuated {
            z.extend_from_slice(u);
        }
        for u in inputs.pure {
            z.extend_from_slice(u);
        }
        z
    }
}

fn input_width(d: &Dims) -> usize {
    d.state + d.field + (d.actuators + d.players) * d.control
}

fn affine_apply(matrix: &[Vec<f64>], offset: &[f64], z: &[f64], out: &mut [f64]) {
    for ((o, row), b) in out.iter_mut().zip(matrix).zip(offset) {
        *o = row.iter().zip(z).map(|(a, x)| a * x).sum::<f64>() + b;
    }
}

impl Dynamics for DynamicsSpec {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn state_rate(&self, phi: &[f64], xi: &[f64], inputs: &ControlInputs<'_>, out: &mut [f64]) {
        let z = self.stacked(phi, xi, inputs);
        affine_apply(&self.state_matrix, &self.state_offset, &z, out);
    }

    fn field_rate(&self, phi: &[f64], xi: &[f64], inputs: &ControlInputs<'_>, out: &mut [f64]) {
        let z = self.stacked(phi, xi, inputs);
        affine_apply(&self.field_matrix, &self.field_offset, &z, out);
    }
}

/// Dynamics given by closures, for ad-hoc systems and tests.
pub struct FnDynamics<F, G> {
    pub dims: Dims,
    pub state: F,
    pub field: G,
}

impl<F, G> Dynamics for FnDynamics<F, G>
where
    F: Fn(&[f64], &[f64], &ControlInputs<'_>, &mut [f64]),
    G: Fn(&[f64], &[f64], &ControlInputs<'_>, &mut [f64]),
{
    fn dims(&self) -> Dims {
        self.dims
    }

    fn state_rate(&self, phi: &[f64], xi: &[f64], inputs: &ControlInputs<'_>, out: &mut [f64]) {
        (self.state)(phi, xi, inputs, out)
    }

    fn field_rate(&self, phi: &[f64], xi: &[f64], inputs: &ControlInputs<'_>, out: &mut [f64]) {
        (self.field)(phi, xi, inputs, out)
    }
}
