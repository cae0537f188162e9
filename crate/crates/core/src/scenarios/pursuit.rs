//! Target tracking in error coordinates with a planted proportional feedback.
//!
//! One dimension: `φ = [e]`, `ė = c − u`, nominal `u° = k·e + s`, realized
//! `u = u° + ε·e`. Two dimensions: `φ = [e, v]` with a target velocity `v`
//! rotating at rate Ω, `ė = v − u`, and realized `u = u° + ε₁·e + ε₂·J·e`
//! where `J` is the quarter turn.

use serde_json::json;

use super::spec::{PerceptionSettings, ScenarioSpec, SCENARIO_SCHEMA_VERSION};
use crate::epsilon::cells::CellComplex;
use crate::epsilon::representation::{AffineBasis, EpsilonRepresentation, Feature};
use crate::error::{GameError, Result};
use crate::game::dynamics::{Dims, DynamicsSpec, Term};
use crate::game::engine::{GameSetup, DEFAULT_DT, DEFAULT_JET_ORDER};
use crate::game::integrator::SystemState;
use crate::game::policy::{FeedbackPolicy, NominalPolicy, Schedule};
use crate::perception::stop::{StopCriterion, StopFunctional};
use crate::verbal::functionals::FunctionalSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct PursuitOptions {
    pub dim: usize,
    pub epsilon: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
    /// Proportional closure gain `k`.
    pub gain: f64,
    /// Constant closing speed added to u° (one dimension only).
    pub closing_speed: f64,
    /// Target speed `c` (1-D drift or 2-D rotating velocity magnitude).
    pub target_speed: f64,
    pub turn_rate: f64,
    pub initial_error: f64,
    pub horizon: f64,
}

impl PursuitOptions {
    pub fn new(dim: usize, epsilon: Vec<f64>, noise: f64, seed: u64) -> Self {
        Self {
            dim,
            epsilon,
            noise,
            seed,
            gain: 1.0,
            closing_speed: 0.0,
            target_speed: 0.5,
            turn_rate: 0.5,
            initial_error: 1.0,
            horizon: 10.0,
        }
    }
}

pub fn build_pursuit(dim: usize, epsilon: Vec<f64>, noise: f64, seed: u64) -> Result<ScenarioSpec> {
    build_pursuit_with(&PursuitOptions::new(dim, epsilon, noise, seed))
}

/// The representation `u = u° + B(e)·ε` matching the planted feedback.
pub fn pursuit_representation(dim: usize) -> EpsilonRepresentation {
    let jet = |k| Feature::Jet { order: 0, k };
    let basis = if dim == 1 {
        AffineBasis::zeros(1, DEFAULT_JET_ORDER, 1, 1).entry(0, 0, jet(0), 1.0)
    } else {
        AffineBasis::zeros(4, DEFAULT_JET_ORDER, 2, 2)
            .entry(0, 0, jet(0), 1.0)
            .entry(0, 1, jet(1), 1.0)
            .entry(1, 0, jet(1), -1.0)
            .entry(1, 1, jet(0), 1.0)
    };
    EpsilonRepresentation::affine(basis)
}

pub fn build_pursuit_with(o: &PursuitOptions) -> Result<ScenarioSpec> {
    if !(o.dim == 1 || o.dim == 2) {
        return Err(GameError::Invalid(format!("pursuit dimension must be 1 or 2, got {}", o.dim)));
    }
    if o.epsilon.len() != o.dim {
        return Err(GameError::Invalid(format!("pursuit ε needs {} components", o.dim)));
    }
    if !(o.noise >= 0.0) {
        return Err(GameError::Invalid("noise level must be non-negative".into()));
    }
    if o.dim == 2 && o.closing_speed != 0.0 {
        return Err(GameError::Invalid("a constant closing speed is only defined in one dimension".into()));
    }
    let state = if o.dim == 1 { 1 } else { 4 };
    let dims = Dims { state, field: 0, players: 1, actuators: 1, control: o.dim };
    let act = |k| Term::Actuated { slot: 0, k };
    let (dynamics, initial, gain) = if o.dim == 1 {
        let mut d = DynamicsSpec::zero(dims).state_coeff(0, act(0), -1.0);
        d.state_offset[0] = o.target_speed;
        (d, vec![o.initial_error], vec![vec![o.gain]])
    } else {
        let d = DynamicsSpec::zero(dims)
            .state_coeff(0, Term::Phi(2), 1.0)
            .state_coeff(0, act(0), -1.0)
            .state_coeff(1, Term::Phi(3), 1.0)
            .state_coeff(1, act(1), -1.0)
            .state_coeff(2, Term::Phi(3), -o.turn_rate)
            .state_coeff(3, Term::Phi(2), o.turn_rate);
        (
            d,
            vec![o.initial_error, 0.0, 0.0, o.target_speed],
            vec![vec![o.gain, 0.0, 0.0, 0.0], vec![0.0, o.gain, 0.0, 0.0]],
        )
    };
    let representation = pursuit_representation(o.dim);
    let setup = GameSetup {
        dynamics,
        initial: SystemState { phi: initial, xi: vec![] },
        dt: DEFAULT_DT,
        t0: 0.0,
        jet_order: DEFAULT_JET_ORDER,
        nominal: vec![NominalPolicy::Linear { gain, offset: vec![o.closing_speed; o.dim] }],
        feedback: vec![FeedbackPolicy::Planted {
            representation: representation.clone(),
            epsilon: Schedule::constant(o.epsilon.clone()),
            noise_std: o.noise,
        }],
        coalitions: None,
    };
    let spec = ScenarioSpec {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: format!("pursuit{}d", o.dim),
        setup,
        representations: vec![representation],
        cells: CellComplex::uniform(vec![-1.0; o.dim], vec![1.0; o.dim], vec![4; o.dim], 0.05)?,
        functionals: FunctionalSpec::means(),
        horizon: o.horizon,
        perception: Some(PerceptionSettings {
            criterion: StopCriterion::new(
                StopFunctional::NegDistance { target: vec![0.0; o.dim], indices: Some((0..o.dim).collect()) },
                -0.05,
            ),
            initial_omega: vec![0.0; o.dim],
            horizon_cap: o.horizon,
            sets: 3,
        }),
        figure: None,
        seed: o.seed,
        ground_truth: Some(json!({ "epsilon": o.epsilon, "noise_std": o.noise })),
    };
    spec.validate()?;
    Ok(spec)
}
