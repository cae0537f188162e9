//! Constant-rate relay: `φ̇ = u = u° = rate`, stop when `φ ≥ F₀`, with ω the
//! progress `φ(end) − φ(start)` of each set and `F₀ ← F₀ + gain·ω`.

use serde_json::json;

use super::spec::{PerceptionSettings, ScenarioSpec, SCENARIO_SCHEMA_VERSION};
use crate::epsilon::cells::CellComplex;
use crate::epsilon::representation::{AffineBasis, EpsilonRepresentation};
use crate::error::Result;
use crate::game::dynamics::{Dims, DynamicsSpec, Term};
use crate::game::engine::{GameSetup, DEFAULT_DT, DEFAULT_JET_ORDER};
use crate::game::integrator::SystemState;
use crate::game::policy::{FeedbackPolicy, NominalPolicy};
use crate::perception::stop::{RecalibrationMap, StopCriterion, StopFunctional};
use crate::verbal::functionals::{Builtin, Channel, ChannelFunctional, FunctionalSpec};

pub fn build_relay(rate: f64, threshold: f64, gain: f64) -> Result<ScenarioSpec> {
    let dims = Dims { state: 1, field: 0, players: 1, actuators: 1, control: 1 };
    let dynamics = DynamicsSpec::zero(dims).state_coeff(0, Term::Actuated { slot: 0, k: 0 }, 1.0);
    let criterion = StopCriterion::new(
        StopFunctional::Linear { phi_weights: vec![1.0], omega_weights: vec![], constant: 0.0 },
        threshold,
    )
    .with_recalibration(RecalibrationMap::threshold_shift(3, 1, gain));
    let setup = GameSetup {
        dynamics,
        initial: SystemState { phi: vec![0.0], xi: vec![] },
        dt: DEFAULT_DT,
        t0: 0.0,
        jet_order: DEFAULT_JET_ORDER,
        nominal: vec![NominalPolicy::Linear { gain: vec![vec![0.0]], offset: vec![rate] }],
        feedback: vec![FeedbackPolicy::Identity],
        coalitions: None,
    };
    let spec = ScenarioSpec {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: "relay".into(),
        setup,
        representations: vec![EpsilonRepresentation::affine(AffineBasis::additive(1, DEFAULT_JET_ORDER, 1))],
        cells: CellComplex::uniform(vec![-1.0], vec![1.0], vec![2], 0.05)?,
        functionals: FunctionalSpec {
            omega: vec![ChannelFunctional::new(Channel::Phi, Builtin::EndpointDelta)],
            v: vec![ChannelFunctional::new(Channel::Pure, Builtin::WindowMean)],
        },
        horizon: 5.0,
        perception: Some(PerceptionSettings {
            criterion,
            initial_omega: vec![0.0],
            horizon_cap: 60.0,
            sets: 3,
        }),
        figure: None,
        seed: 0,
        ground_truth: Some(json!({ "rate": rate, "threshold": threshold, "gain": gain })),
    };
    spec.validate()?;
    Ok(spec)
}
