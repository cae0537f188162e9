//! Observer-dependent object with a hidden figure that only appears when
//! several observers dwell in the same target cell.
//!
//! Observer i steers a view `wᵢ ∈ ℝ²` toward a pointer `pᵢ` (the pure
//! control): `ẇᵢ = uᵢ = k·(pᵢ − wᵢ)`. The shared object relaxes toward the
//! mean view. The declared representation `u = u° + b₀ + B·ε` with
//! `b₀ = −u° − k·w` and `B = k·I` makes ε̂ the observer's pointer.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::spec::{ScenarioSpec, SCENARIO_SCHEMA_VERSION};
use crate::epsilon::cells::{CellComplex, CellId};
use crate::epsilon::representation::{AffineBasis, EpsilonRepresentation, Feature};
use crate::error::{check_dim, GameError, Result};
use crate::game::dynamics::{Dims, DynamicsSpec, Term};
use crate::game::engine::{simulate_with, Engine, GameSetup, DEFAULT_DT, DEFAULT_JET_ORDER};
use crate::game::integrator::SystemState;
use crate::game::policy::{FeedbackPolicy, NominalPolicy, Schedule};
use crate::verbal::functionals::FunctionalSpec;

pub const VIEW_GAIN: f64 = 4.0;
/// Version of [`single_user_library`]; bump when scripts change.
pub const SCRIPT_LIBRARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub observers: usize,
    /// Per-observer grid over the 2-D pointer space.
    pub cells: CellComplex,
    pub targets: Vec<CellId>,
    pub dwell: f64,
    pub dt: f64,
    #[serde(default = "default_min_observers")]
    pub min_observers: usize,
}

fn default_min_observers() -> usize {
    2
}

impl FigureSpec {
    pub fn validate(&self, players: usize) -> Result<()> {
        check_dim("figure observers", players, self.observers)?;
        self.cells.validate()?;
        if !(self.dwell > 0.0 && self.dwell.is_finite()) {
            return Err(GameError::Invalid("dwell time must be positive".into()));
        }
        if self.targets.is_empty() {
            return Err(GameError::Invalid("figure needs at least one target cell".into()));
        }
        for t in &self.targets {
            check_dim("target cell id", self.cells.dim(), t.len())?;
        }
        if self.min_observers < 2 {
            return Err(GameError::Invalid("the figure predicate needs at least two observers".into()));
        }
        Ok(())
    }

    /// Co-located ticks needed before the figure shows: `⌈τ/dt⌉`.
    pub fn required_ticks(&self) -> usize {
        ((self.dwell / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Center of a target cell, for scripts.
    pub fn center(&self, id: &[i64]) -> Vec<f64> {
        (0..self.cells.dim())
            .map(|a| {
                let (lo, hi) = self.cells.cell_bounds(id, a);
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Whether enough distinct observers share one target cell this tick.
    pub fn colocated(&self, per_observer: &[Option<&[f64]>]) -> bool {
        self.targets.iter().any(|target| {
            per_observer
                .iter()
                .filter(|e| e.is_some_and(|x| &self.cells.cell_of(x).0 == target))
                .count()
                >= self.min_observers
        })
    }
}

/// Operational trace of the figure: object, views and the visibility flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureState {
    pub object: Vec<f64>,
    pub views: Vec<Vec<f64>>,
    pub visible: bool,
    pub dwell_ticks: usize,
}

impl FigureState {
    pub fn from_phi(observers: usize, phi: &[f64]) -> Self {
        Self {
            object: phi[2 * observers..2 * observers + 2].to_vec(),
            views: (0..observers).map(|i| phi[2 * i..2 * i + 2].to_vec()).collect(),
            visible: false,
            dwell_ticks: 0,
        }
    }
}

/// Dwell counter over successive ticks.
#[derive(Debug, Clone)]
pub struct FigureMonitor {
    spec: FigureSpec,
    required: usize,
    count: usize,
    visible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureUpdate {
    pub visible: bool,
    pub became_visible: bool,
    pub dwell_ticks: usize,
}

impl FigureMonitor {
    pub fn new(spec: FigureSpec) -> Self {
        let required = spec.required_ticks();
        Self { spec, required, count: 0, visible: false }
    }

    pub fn spec(&self) -> &FigureSpec {
        &self.spec
    }

    /// Feeds one tick's concatenated ε̂ (absent during warm-up).
    pub fn update(&mut self, epsilon: Option<&[f64]>) -> FigureUpdate {
        let d = self.spec.cells.dim();
        let per: Vec<Option<&[f64]>> = match epsilon {
            Some(e) => e.chunks(d).map(Some).collect(),
            None => vec![None; self.spec.observers],
        };
        let was = self.visible;
        if self.spec.colocated(&per) {
            self.count += 1;
        } else {
            self.count = 0;
        }
        self.visible = self.count >= self.required;
        FigureUpdate { visible: self.visible, became_visible: self.visible && !was, dwell_ticks: self.count }
    }
}

/// Figure scenario with `observers` players, dwell `dwell` seconds and the
/// given target cells of a 3×3 grid over `[−1.5, 1.5]²`.
pub fn build_iavr_figure(observers: usize, dwell: f64, targets: Vec<CellId>) -> Result<ScenarioSpec> {
    if observers == 0 {
        return Err(GameError::Invalid("at least one observer is required".into()));
    }
    let n = observers;
    let dims = Dims { state: 2 * n + 2, field: 0, players: n, actuators: n, control: 2 };
    let mut dynamics = DynamicsSpec::zero(dims);
    for i in 0..n {
        for k in 0..2 {
            dynamics = dynamics
                .state_coeff(2 * i + k, Term::Actuated { slot: i, k }, 1.0)
                .state_coeff(2 * n + k, Term::Phi(2 * i + k), 1.0 / n as f64);
        }
    }
    for k in 0..2 {
        dynamics = dynamics.state_coeff(2 * n + k, Term::Phi(2 * n + k), -1.0);
    }
    let state_dim = dims.state;
    let mut representations = Vec::new();
    let mut feedback = Vec::new();
    for i in 0..n {
        let mut estimate = AffineBasis::zeros(state_dim, DEFAULT_JET_ORDER, 2, 2);
        let mut realize = AffineBasis::zeros(state_dim, DEFAULT_JET_ORDER, 2, 1);
        for k in 0..2 {
            let view = Feature::Jet { order: 0, k: 2 * i + k };
            estimate = estimate
                .entry(k, k, Feature::One, VIEW_GAIN)
                .offset_entry(k, Feature::Pure(k), -1.0)
                .offset_entry(k, view, -VIEW_GAIN);
            realize = realize
                .offset_entry(k, Feature::Pure(k), VIEW_GAIN - 1.0)
                .offset_entry(k, view, -VIEW_GAIN);
        }
        representations.push(EpsilonRepresentation::affine(estimate));
        feedback.push(FeedbackPolicy::Planted {
            representation: EpsilonRepresentation::affine(realize),
            epsilon: Schedule::constant(vec![0.0]),
            noise_std: 0.0,
        });
    }
    let per_observer = CellComplex::uniform(vec![-1.5, -1.5], vec![1.5, 1.5], vec![3, 3], 0.05)?;
    let figure = FigureSpec { observers: n, cells: per_observer.clone(), targets, dwell, dt: DEFAULT_DT, min_observers: 2 };
    figure.validate(n)?;
    let setup = GameSetup {
        dynamics,
        initial: SystemState { phi: vec![0.0; state_dim], xi: vec![] },
        dt: DEFAULT_DT,
        t0: 0.0,
        jet_order: DEFAULT_JET_ORDER,
        nominal: vec![NominalPolicy::Zero; n],
        feedback,
        coalitions: None,
    };
    let cells = CellComplex::uniform(
        per_observer.lo.repeat(n),
        per_observer.hi.repeat(n),
        per_observer.counts.repeat(n),
        per_observer.hysteresis,
    )?;
    let spec = ScenarioSpec {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: "iavr-figure".into(),
        setup,
        representations,
        cells,
        functionals: FunctionalSpec::means(),
        horizon: 4.0 * dwell + 2.0,
        perception: None,
        seed: 0,
        ground_truth: Some(json!({ "required_ticks": figure.required_ticks() })),
        figure: Some(figure),
    };
    spec.validate()?;
    Ok(spec)
}

/// Result of driving a figure scenario with scripted pointers.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRun {
    pub visible: Vec<bool>,
    pub colocated_ticks: Vec<usize>,
    pub first_visible: Option<usize>,
    pub final_state: FigureState,
}

/// Plays one pointer schedule per observer through the engine.
pub fn run_figure(spec: &ScenarioSpec, pointers: &[Schedule], horizon: f64) -> Result<FigureRun> {
    let figure = spec.figure.clone().ok_or_else(|| GameError::Invalid("scenario has no figure".into()))?;
    check_dim("pointer scripts", spec.players(), pointers.len())?;
    let mut setup = spec.setup.clone();
    setup.nominal = pointers.iter().map(|s| NominalPolicy::Scheduled { schedule: s.clone() }).collect();
    let mut source = |e: &Engine| Ok(e.nominal_controls());
    let trajectory = simulate_with(&setup, &mut source, horizon, spec.seed)?;
    let estimator = spec.estimator();
    let mut monitor = FigureMonitor::new(figure.clone());
    let mut visible = Vec::with_capacity(trajectory.len());
    let mut colocated_ticks = Vec::new();
    let mut first_visible = None;
    for (sample, jet) in trajectory.samples.iter().zip(trajectory.jets()) {
        let eps = estimator.estimate(sample, &jet)?.map(|e| e.epsilon);
        let update = monitor.update(eps.as_deref());
        if update.dwell_ticks > 0 {
            colocated_ticks.push(sample.tick);
        }
        if update.became_visible && first_visible.is_none() {
            first_visible = Some(sample.tick);
        }
        visible.push(update.visible);
    }
    let last = trajectory.samples.last().expect("non-empty trajectory");
    let mut final_state = FigureState::from_phi(figure.observers, &last.phi);
    final_state.visible = *visible.last().unwrap_or(&false);
    final_state.dwell_ticks = colocated_ticks.len();
    Ok(FigureRun { visible, colocated_ticks, first_visible, final_state })
}

/// Finite scripted pointer policies for a single observer.
pub fn single_user_library(figure: &FigureSpec, horizon: f64) -> Vec<(String, Schedule)> {
    let target = figure.center(&figure.targets[0]);
    let counts = &figure.cells.counts;
    let centers: Vec<Vec<f64>> = (0..counts[0] as i64)
        .flat_map(|a| (0..counts[1] as i64).map(move |b| vec![a, b]))
        .map(|id| figure.center(&id))
        .collect();
    let tau = figure.dwell;
    let mut lib = vec![
        ("rest".to_string(), Schedule::constant(vec![0.0, 0.0])),
        ("hold-target".to_string(), Schedule::constant(target.clone())),
        ("enter-late".to_string(), Schedule::from_pairs([(0.0, vec![0.0, 0.0]), (1.0, target.clone())])),
        (
            "visit-and-leave".to_string(),
            Schedule::from_pairs([(0.0, target.clone()), (2.0 * tau, vec![0.0, 0.0])]),
        ),
    ];
    let hop = tau / 2.0;
    let blink = (0..((horizon / hop) as usize))
        .map(|k| (k as f64 * hop, if k % 2 == 0 { target.clone() } else { vec![0.0, 0.0] }));
    lib.push(("blink".to_string(), Schedule::from_pairs(blink)));
    let raster = centers.iter().enumerate().map(|(k, c)| (k as f64 * 2.0 * tau, c.clone()));
    lib.push(("raster-every-cell".to_string(), Schedule::from_pairs(raster)));
    let sweep = (0..((horizon / DEFAULT_DT) as usize / 10)).map(|k| {
        let t = k as f64 * 10.0 * DEFAULT_DT;
        (t, vec![1.4 * (0.9 * t).sin(), 1.4 * (1.3 * t).cos()])
    });
    lib.push(("lissajous".to_string(), Schedule::from_pairs(sweep)));
    lib
}

/// Two observers both pointing at the first target from `start` for `duration`.
pub fn two_user_script(figure: &FigureSpec, start: f64, duration: f64) -> Vec<Schedule> {
    let target = figure.center(&figure.targets[0]);
    let aside = [vec![-1.0, -1.0], vec![-1.0, 1.0]];
    aside
        .iter()
        .map(|home| {
            Schedule::from_pairs([
                (0.0, home.clone()),
                (start, target.clone()),
                (start + duration, home.clone()),
            ])
        })
        .collect()
}
