//! The deterministic tick engine and synthetic simulation.
//!
//! At tick `j` the engine exposes φ_j and its jet, takes the players' pure
//! controls, realizes them through the feedback policies, records the sample
//! and integrates one RK4 step with all controls held. Tick times are
//! `t₀ + j·dt`, computed from the index rather than accumulated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coalition::{coalition_control, CoalitionSpec};
use super::dynamics::{ControlInputs, Dynamics, DynamicsSpec};
use super::integrator::{rk4_step, SystemState};
use super::jet::{jets_for_states, Jet, JetHistory};
use super::policy::{FeedbackPolicy, FeedbackState, NominalPolicy, PolicyContext};
use crate::error::{check_dim, check_finite, GameError, Result};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_JET_ORDER: usize = 1;

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_jet_order() -> usize {
    DEFAULT_JET_ORDER
}

/// A runnable interactive system: dynamics, initial condition and the
/// synthetic policies of every player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSetup {
    pub dynamics: DynamicsSpec,
    pub initial: SystemState,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_jet_order")]
    pub jet_order: usize,
    pub nominal: Vec<NominalPolicy>,
    pub feedback: Vec<FeedbackPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coalitions: Option<CoalitionSpec>,
}

impl GameSetup {
    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        let d = self.dynamics.dims;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GameError::Invalid("dt must be positive".into()));
        }
        check_dim("initial state", d.state, self.initial.phi.len())?;
        check_dim("initial intention field", d.field, self.initial.xi.len())?;
        check_finite("initial state", &self.initial.phi)?;
        check_finite("initial intention field", &self.initial.xi)?;
        check_dim("nominal policies", d.players, self.nominal.len())?;
        check_dim("feedback policies", d.players, self.feedback.len())?;
        for p in &self.nominal {
            p.validate(d.state, d.control)?;
        }
        for p in &self.feedback {
            p.validate(d.state, d.field, d.control)?;
        }
        match &self.coalitions {
            Some(c) => {
                c.validate(d.players)?;
                check_dim("coalition control slots", d.actuators, c.coalitions.len())?;
            }
            None => check_dim("actuated control slots", d.players, d.actuators)?,
        }
        Ok(())
    }

    pub fn players(&self) -> usize {
        self.dynamics.dims.players
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.dims.control
    }

    pub fn time_of(&self, tick: usize) -> f64 {
        self.t0 + tick as f64 * self.dt
    }
}

/// Number of steps covering `horizon`; it must be a positive multiple of dt.
pub fn ticks_for_horizon(horizon: f64, dt: f64) -> Result<usize> {
    let ratio = horizon / dt;
    let n = ratio.round();
    if !(n >= 1.0) || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(GameError::Invalid(format!(
            "horizon {horizon} is not a positive multiple of dt {dt}"
        )));
    }
    Ok(n as usize)
}

/// Everything recorded at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSample {
    pub tick: usize,
    pub t: f64,
    pub phi: Vec<f64>,
    pub xi: Vec<f64>,
    pub pure: Vec<Vec<f64>>,
    pub realized: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coalition: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub t0: f64,
    pub seed: u64,
    pub jet_order: usize,
    pub samples: Vec<TickSample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn states(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.phi.clone()).collect()
    }

    /// Jets at every tick, from the same backward stencil the engine uses.
    pub fn jets(&self) -> Vec<Jet> {
        jets_for_states(&self.states(), self.jet_order, self.dt)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("trajectory serializes")
    }
}

/// Supplies the pure controls for the current tick.
pub trait ControlSource {
    fn controls(&mut self, engine: &Engine) -> Result<Vec<Vec<f64>>>;
}

/// Plays every player's nominal policy.
#[derive(Debug, Default, Clone, Copy)]
pub struct NominalSource;

impl ControlSource for NominalSource {
    fn controls(&mut self, engine: &Engine) -> Result<Vec<Vec<f64>>> {
        Ok(engine.nominal_controls())
    }
}

impl<F> ControlSource for F
where
    F: FnMut(&Engine) -> Result<Vec<Vec<f64>>>,
{
    fn controls(&mut self, engine: &Engine) -> Result<Vec<Vec<f64>>> {
        self(engine)
    }
}

pub struct Engine {
    setup: GameSetup,
    state: SystemState,
    tick: usize,
    seed: u64,
    history: JetHistory,
    feedback_states: Vec<FeedbackState>,
    rng: ChaCha8Rng,
    pending: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

impl Engine {
    pub fn new(setup: GameSetup, seed: u64) -> Result<Self> {
        setup.validate()?;
        let state = setup.initial.clone();
        let mut history = JetHistory::new(setup.jet_order, setup.dt);
        history.push(&state.phi);
        let feedback_states = setup
            .feedback
            .iter()
            .map(|p| p.initial_state(setup.dynamics.dims.state))
            .collect();
        Ok(Self {
            state,
            tick: 0,
            seed,
            history,
            feedback_states,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
            setup,
        })
    }

    pub fn setup(&self) -> &GameSetup {
        &self.setup
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.setup.time_of(self.tick)
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn jet(&self) -> Jet {
        self.history.jet()
    }

    pub fn nominal_controls(&self) -> Vec<Vec<f64>> {
        let t = self.time();
        self.setup
            .nominal
            .iter()
            .map(|p| p.pure_control(t, self.setup.dt, &self.state.phi, self.setup.control_dim()))
            .collect()
    }

    /// Realizes `pure` at the current tick and records the sample. The
    /// controls stay pending until [`Engine::advance`].
    pub fn act(&mut self, pure: Vec<Vec<f64>>) -> Result<TickSample> {
        let d = self.setup.dynamics.dims;
        check_dim("pure controls", d.players, pure.len())?;
        for u in &pure {
            check_dim("pure control vector", d.control, u.len())?;
            check_finite("pure control", u)?;
        }
        let jet = self.history.jet();
        let t = self.time();
        let mut realized = Vec::with_capacity(d.players);
        for (i, policy) in self.setup.feedback.iter().enumerate() {
            let ctx = PolicyContext {
                tick: self.tick,
                t,
                dt: self.setup.dt,
                pure: &pure[i],
                jet: &jet,
                xi: &self.state.xi,
            };
            let u = policy.realize(&ctx, &mut self.feedback_states[i], &mut self.rng)?;
            check_dim("realized control", d.control, u.len())?;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(GameError::Diverged { tick: self.tick });
            }
            realized.push(u);
        }
        let coalition = match &self.setup.coalitions {
            Some(spec) => Some(coalition_control(spec, &pure, &jet)?),
            None => None,
        };
        let actuated = coalition.clone().unwrap_or_else(|| realized.clone());
        let sample = TickSample {
            tick: self.tick,
            t,
            phi: self.state.phi.clone(),
            xi: self.state.xi.clone(),
            pure: pure.clone(),
            realized,
            coalition,
        };
        self.pending = Some((actuated, pure));
        Ok(sample)
    }

    /// Integrates one tick with the pending controls.
    pub fn advance(&mut self) -> Result<()> {
        let (actuated, pure) = self
            .pending
            .take()
            .ok_or_else(|| GameError::Invalid("advance called before act".into()))?;
        let inputs = ControlInputs { actuated: &actuated, pure: &pure };
        self.state = rk4_step(&self.setup.dynamics, &self.state, &inputs, self.setup.dt, self.tick)?;
        self.tick += 1;
        self.history.push(&self.state.phi);
        Ok(())
    }

    pub fn step(&mut self, pure: Vec<Vec<f64>>) -> Result<TickSample> {
        let sample = self.act(pure)?;
        self.advance()?;
        Ok(sample)
    }

    pub fn dims(&self) -> super::dynamics::Dims {
        self.setup.dynamics.dims()
    }
}

/// Runs `setup` for `horizon` seconds with its nominal policies.
pub fn simulate(setup: &GameSetup, horizon: f64, seed: u64) -> Result<Trajectory> {
    simulate_with(setup, &mut NominalSource, horizon, seed)
}

/// Runs `setup` for `horizon` seconds drawing pure controls from `source`.
/// The trajectory holds `horizon/dt + 1` samples, endpoints included.
pub fn simulate_with(
    setup: &GameSetup,
    source: &mut dyn ControlSource,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    let steps = ticks_for_horizon(horizon, setup.dt)?;
    let mut engine = Engine::new(setup.clone(), seed)?;
    let mut samples = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let pure = source.controls(&engine)?;
        samples.push(engine.act(pure)?);
        if j < steps {
            engine.advance()?;
        }
    }
    Ok(Trajectory { dt: setup.dt, t0: setup.t0, seed, jet_order: setup.jet_order, samples })
}
