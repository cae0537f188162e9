//! Classical fixed-step Runge–Kutta integrator for the coupled (φ, ξ) system.

use serde::{Deserialize, Serialize};

use super::dynamics::{ControlInputs, Dynamics};
use crate::error::{check_dim, GameError, Result};

/// Joint state of the system: φ and the intention field ξ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub phi: Vec<f64>,
    pub xi: Vec<f64>,
}

impl SystemState {
    pub fn new(phi: Vec<f64>, xi: Vec<f64>) -> Self {
        Self { phi, xi }
    }
}

/// One RK4 step of length `dt`. Controls are held constant across the step.
///
/// `tick` is only used to label a divergence error.
pub fn rk4_step<D: Dynamics + ?Sized>(
    dynamics: &D,
    state: &SystemState,
    inputs: &ControlInputs<'_>,
    dt: f64,
    tick: usize,
) -> Result<SystemState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(GameError::Invalid(format!("time step must be positive, got {dt}")));
    }
    let dims = dynamics.dims();
    check_dim("state", dims.state, state.phi.len())?;
    check_dim("intention field", dims.field, state.xi.len())?;
    check_dim("actuated controls", dims.actuators, inputs.actuated.len())?;
    check_dim("pure controls", dims.players, inputs.pure.len())?;
    for u in inputs.actuated.iter().chain(inputs.pure) {
        check_dim("control vector", dims.control, u.len())?;
    }

    let (np, nx) = (dims.state, dims.field);
    let eval = |phi: &[f64], xi: &[f64]| {
        let mut dphi = vec![0.0; np];
        let mut dxi = vec![0.0; nx];
        dynamics.state_rate(phi, xi, inputs, &mut dphi);
        dynamics.field_rate(phi, xi, inputs, &mut dxi);
        (dphi, dxi)
    };
    let offset = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, k)| b + h * k).collect()
    };

    let (k1p, k1x) = eval(&state.phi, &state.xi);
    let (k2p, k2x) = eval(&offset(&state.phi, &k1p, dt / 2.0), &offset(&state.xi, &k1x, dt / 2.0));
    let (k3p, k3x) = eval(&offset(&state.phi, &k2p, dt / 2.0), &offset(&state.xi, &k2x, dt / 2.0));
    let (k4p, k4x) = eval(&offset(&state.phi, &k3p, dt), &offset(&state.xi, &k3x, dt));

    let combine = |base: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        (0..base.len())
            .map(|i| base[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };
    let phi = combine(&state.phi, &k1p, &k2p, &k3p, &k4p);
    let xi = combine(&state.xi, &k1x, &k2x, &k3x, &k4x);
    if phi.iter().chain(&xi).any(|v| !v.is_finite()) {
        return Err(GameError::Diverged { tick });
    }
    Ok(SystemState { phi, xi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::dynamics::{Dims, DynamicsSpec, FnDynamics, Term};

    fn scalar_dims(field: usize) -> Dims {
        Dims { state: 1, field, players: 1, actuators: 1, control: 1 }
    }

    fn no_controls() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (vec![vec![0.0]], vec![vec![0.0]])
    }

    #[test]
    fn zero_dynamics_leave_state_unchanged() {
        let spec = DynamicsSpec::zero(scalar_dims(1));
        let (a, p) = no_controls();
        let inputs = ControlInputs { actuated: &a, pure: &p };
        let s = SystemState::new(vec![3.25], vec![-1.5]);
        let next = rk4_step(&spec, &s, &inputs, 0.1, 0).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn exponential_decay_matches_rk4_polynomial() {
        let spec = DynamicsSpec::zero(scalar_dims(0)).state_coeff(0, Term::Phi(0), -1.0);
        let (a, p) = no_controls();
        let inputs = ControlInputs { actuated: &a, pure: &p };
        let next = rk4_step(&spec, &SystemState::new(vec![1.0], vec![]), &inputs, 0.1, 0).unwrap();
        // RK4 on a linear ODE reproduces the degree-4 Taylor polynomial of e^{-h}.
        let h: f64 = 0.1;
        let taylor = 1.0 - h + h.powi(2) / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((next.phi[0] - taylor).abs() < 1e-15);
        assert!((next.phi[0] - (-h).exp()).abs() < 1e-7);
        assert!((next.phi[0] - 0.90483742).abs() < 1e-7);
    }

    #[test]
    fn field_integrates_constant_state() {
        let dims = Dims { state: 2, field: 2, players: 1, actuators: 1, control: 1 };
        let spec = DynamicsSpec::zero(dims)
            .field_coeff(0, Term::Phi(0), 1.0)
            .field_coeff(1, Term::Phi(1), 1.0);
        let (a, p) = no_controls();
        let inputs = ControlInputs { actuated: &a, pure: &p };
        let s = SystemState::new(vec![1.0, 2.0], vec![0.0, 0.0]);
        let next = rk4_step(&spec, &s, &inputs, 0.5, 0).unwrap();
        assert_eq!(next.phi, vec![1.0, 2.0]);
        assert_eq!(next.xi, vec![0.5, 1.0]);
    }

    #[test]
    fn blow_up_is_reported_with_tick() {
        let dyns = FnDynamics {
            dims: scalar_dims(0),
            state: |_: &[f64], _: &[f64], _: &ControlInputs<'_>, out: &mut [f64]| out[0] = f64::INFINITY,
            field: |_: &[f64], _: &[f64], _: &ControlInputs<'_>, _: &mut [f64]| {},
        };
        let (a, p) = no_controls();
        let inputs = ControlInputs { actuated: &a, pure: &p };
        let err = rk4_step(&dyns, &SystemState::new(vec![1.0], vec![]), &inputs, 0.1, 42).unwrap_err();
        assert_eq!(err, GameError::Diverged { tick: 42 });
    }

    #[test]
    fn non_positive_step_rejected() {
        let spec = DynamicsSpec::zero(scalar_dims(0));
        let (a, p) = no_controls();
        let inputs = ControlInputs { actuated: &a, pure: &p };
        assert!(rk4_step(&spec, &SystemState::new(vec![1.0], vec![]), &inputs, 0.0, 0).is_err());
    }
}
