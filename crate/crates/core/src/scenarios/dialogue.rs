//! Two-player dialogue toy with planted piecewise-constant ε.
//!
//! Each player's intention `ξᵢ` relaxes toward the realized control
//! (`ξ̇ = −ξ + u`) and drives the state (`φ̇ = ξ`). Realized controls are
//! `u = u° + ε`. On segment n the pure control equals the planted increment
//! `δₙ = εₙ − εₙ₋₁`, so window means obey `ωₙ = ωₙ₋₁ + vₙ` exactly.

use serde_json::json;

use super::spec::{ScenarioSpec, SCENARIO_SCHEMA_VERSION};
use crate::epsilon::cells::CellComplex;
use crate::epsilon::representation::{AffineBasis, EpsilonRepresentation};
use crate::error::Result;
use crate::game::dynamics::{Dims, DynamicsSpec, Term};
use crate::game::engine::{GameSetup, DEFAULT_DT, DEFAULT_JET_ORDER};
use crate::game::integrator::SystemState;
use crate::game::policy::{FeedbackPolicy, NominalPolicy, Schedule};
use crate::verbal::functionals::FunctionalSpec;

pub const DIALOGUE_SEGMENT_SECONDS: f64 = 1.0;

/// Planted ε per segment for the two players; consecutive segments always
/// differ in at least one player's cell.
pub const DIALOGUE_PLAN: [[f64; 2]; 12] = [
    [0.5, 0.5],
    [1.5, 0.5],
    [1.5, 1.5],
    [2.4, 1.6],
    [2.4, 0.4],
    [1.3, 0.6],
    [0.6, 0.7],
    [0.6, 2.5],
    [1.4, 2.3],
    [2.6, 2.6],
    [2.5, 1.4],
    [0.4, 1.5],
];

pub fn build_dialogue_toy(seed: u64) -> Result<ScenarioSpec> {
    let dims = Dims { state: 2, field: 2, players: 2, actuators: 2, control: 1 };
    let mut dynamics = DynamicsSpec::zero(dims);
    for i in 0..2 {
        dynamics = dynamics
            .state_coeff(i, Term::Xi(i), 1.0)
            .field_coeff(i, Term::Xi(i), -1.0)
            .field_coeff(i, Term::Actuated { slot: i, k: 0 }, 1.0);
    }
    let starts: Vec<f64> = (0..DIALOGUE_PLAN.len()).map(|n| n as f64 * DIALOGUE_SEGMENT_SECONDS).collect();
    let representation = EpsilonRepresentation::affine(AffineBasis::additive(2, DEFAULT_JET_ORDER, 1));
    let mut nominal = Vec::new();
    let mut feedback = Vec::new();
    for p in 0..2 {
        let eps: Vec<f64> = DIALOGUE_PLAN.iter().map(|e| e[p]).collect();
        let increments = (0..eps.len()).map(|n| if n == 0 { 0.0 } else { eps[n] - eps[n - 1] });
        nominal.push(NominalPolicy::Scheduled {
            schedule: Schedule::from_pairs(starts.iter().zip(increments).map(|(t, d)| (*t, vec![d]))),
        });
        feedback.push(FeedbackPolicy::Planted {
            representation: representation.clone(),
            epsilon: Schedule::from_pairs(starts.iter().zip(&eps).map(|(t, e)| (*t, vec![*e]))),
            noise_std: 0.0,
        });
    }
    let setup = GameSetup {
        dynamics,
        initial: SystemState { phi: vec![0.0, 0.0], xi: vec![0.0, 0.0] },
        dt: DEFAULT_DT,
        t0: 0.0,
        jet_order: DEFAULT_JET_ORDER,
        nominal,
        feedback,
        coalitions: None,
    };
    let ticks_per_segment = (DIALOGUE_SEGMENT_SECONDS / DEFAULT_DT).round() as usize;
    let boundaries: Vec<usize> = (0..DIALOGUE_PLAN.len()).map(|n| n * ticks_per_segment).collect();
    let spec = ScenarioSpec {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: "dialogue-toy".into(),
        setup,
        representations: vec![representation.clone(), representation],
        cells: CellComplex::uniform(vec![0.0, 0.0], vec![3.0, 3.0], vec![3, 3], 0.05)?,
        functionals: FunctionalSpec::means(),
        horizon: DIALOGUE_PLAN.len() as f64 * DIALOGUE_SEGMENT_SECONDS,
        perception: None,
        figure: None,
        seed,
        ground_truth: Some(json!({
            "boundary_ticks": boundaries,
            "segments": DIALOGUE_PLAN.len(),
            "epsilon": DIALOGUE_PLAN,
            "recursion": { "omega_gain": [[1.0, 0.0], [0.0, 1.0]], "v_gain": [[1.0, 0.0], [0.0, 1.0]] },
        })),
    };
    spec.validate()?;
    Ok(spec)
}
