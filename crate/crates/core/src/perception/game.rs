//! Sets and matches: chained stages on one engine, each ending at the first
//! tick where the stop functional reaches its threshold.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::stop::{recalibrate_stop, StopCriterion};
use crate::epsilon::cells::Partition;
use crate::epsilon::representation::EpsilonRepresentation;
use crate::epsilon::trace::{EpsilonEstimator, EpsilonTrace};
use crate::error::{GameError, Result};
use crate::game::engine::{ticks_for_horizon, ControlSource, Engine, TickSample, Trajectory};
use crate::verbal::functionals::{compute_window_functionals, DialogueState, FunctionalSpec, Window};
use crate::verbal::transcript::{transcript, Transcript};

pub const DEFAULT_HORIZON_CAP: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Threshold,
    HorizonCap,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRecord {
    pub index: usize,
    pub start_tick: usize,
    pub end_tick: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub initial_phi: Vec<f64>,
    pub final_phi: Vec<f64>,
    pub omega_start: Vec<f64>,
    pub threshold: f64,
    /// F at ticks `start_tick..=end_tick`.
    pub f_trace: Vec<f64>,
    pub reason: StopReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_detail: Option<String>,
}

impl SetRecord {
    pub fn duration_ticks(&self) -> usize {
        self.end_tick - self.start_tick
    }

    /// For threshold stops: F < F₀ before the end tick and F ≥ F₀ at it.
    pub fn satisfies_first_crossing(&self) -> bool {
        if self.reason != StopReason::Threshold {
            return true;
        }
        let (last, before) = self.f_trace.split_last().expect("F trace is never empty");
        *last >= self.threshold && before.iter().all(|f| *f < self.threshold)
    }
}

/// How many sets a match may run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetLimit {
    Count { sets: usize },
    /// Runs until the wall-clock cap, for live sessions.
    OpenEnded { wall_clock_secs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchEnd {
    SetLimit,
    WallClock,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub criterion: StopCriterion,
    pub functionals: FunctionalSpec,
    pub representations: Vec<EpsilonRepresentation>,
    /// ω before the first set.
    pub initial_omega: Vec<f64>,
    #[serde(default = "default_cap")]
    pub horizon_cap: f64,
    pub limit: SetLimit,
}

fn default_cap() -> f64 {
    DEFAULT_HORIZON_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub sets: Vec<SetRecord>,
    /// One per set with at least one tick, tagged by set index.
    pub states: Vec<DialogueState>,
    pub transcript: Transcript,
    pub end: MatchEnd,
    pub final_criterion: StopCriterion,
}

impl MatchRecord {
    /// Perception-mode partition: one interval per set with a dialogue state.
    pub fn partition(&self, t0: f64, dt: f64) -> Partition {
        let nonempty: Vec<&SetRecord> =
            self.sets.iter().filter(|s| self.states.iter().any(|st| st.index == s.index)).collect();
        let end = nonempty.last().map_or(0, |s| s.end_tick);
        Partition::from_boundaries(
            nonempty.iter().map(|s| s.start_tick).collect(),
            t0,
            dt,
            end,
            nonempty.iter().map(|s| vec![s.index as i64]).collect(),
        )
    }

    /// Whether every junction carries the state over bit-exactly.
    pub fn chained(&self) -> bool {
        self.sets.windows(2).all(|w| {
            w[0].end_tick == w[1].start_tick
                && w[0].final_phi.len() == w[1].initial_phi.len()
                && w[0].final_phi.iter().zip(&w[1].initial_phi).all(|(a, b)| a.to_bits() == b.to_bits())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub record: MatchRecord,
    pub trajectory: Trajectory,
    pub epsilon: EpsilonTrace,
    /// F of the set acting at each tick.
    pub f_values: Vec<f64>,
    pub set_of_tick: Vec<usize>,
}

/// Hooks for streaming a match as it runs.
pub trait MatchObserver {
    fn on_tick(&mut self, _sample: &TickSample, _epsilon: Option<&[f64]>, _f: f64, _set: usize) {}
    /// Called once the set's end tick has been reported through `on_tick`.
    fn on_set_end(&mut self, _record: &SetRecord, _state: Option<&DialogueState>) {}
}

impl MatchObserver for () {}

/// Samples and ε̂ of the ticks a set acted on.
#[derive(Debug, Clone, Default)]
pub struct SetTicks {
    pub samples: Vec<TickSample>,
    pub epsilon: Vec<Option<Vec<f64>>>,
    pub f: Vec<f64>,
}

/// Runs one set on `engine` from its current tick.
pub fn run_set(
    engine: &mut Engine,
    index: usize,
    criterion: &StopCriterion,
    omega_prev: &[f64],
    estimator: &EpsilonEstimator,
    source: &mut dyn ControlSource,
    cap_ticks: usize,
    observer: &mut dyn MatchObserver,
) -> Result<(SetRecord, SetTicks)> {
    let start_tick = engine.tick();
    let t_start = engine.time();
    let initial_phi = engine.state().phi.clone();
    let mut ticks = SetTicks::default();
    let mut f_trace = Vec::new();
    let mut abort_detail = None;
    let reason = loop {
        let f = criterion
            .evaluate(omega_prev, &engine.state().phi)
            .map_err(|e| GameError::Evaluation { tick: engine.tick(), reason: e.to_string() })?;
        f_trace.push(f);
        if f >= criterion.threshold {
            break StopReason::Threshold;
        }
        if engine.tick() - start_tick >= cap_ticks {
            break StopReason::HorizonCap;
        }
        let pure = match source.controls(engine) {
            Ok(p) => p,
            Err(e @ GameError::Disconnected { .. }) => {
                abort_detail = Some(e.to_string());
                break StopReason::Aborted;
            }
            Err(e) => return Err(e),
        };
        let jet = engine.jet();
        let sample = engine.act(pure)?;
        let eps = estimator.estimate(&sample, &jet)?.map(|e| e.epsilon);
        observer.on_tick(&sample, eps.as_deref(), f, index);
        engine.advance()?;
        ticks.samples.push(sample);
        ticks.epsilon.push(eps);
        ticks.f.push(f);
    };
    let record = SetRecord {
        index,
        start_tick,
        end_tick: engine.tick(),
        t_start,
        t_end: engine.time(),
        initial_phi,
        final_phi: engine.state().phi.clone(),
        omega_start: omega_prev.to_vec(),
        threshold: criterion.threshold,
        f_trace,
        reason,
        abort_detail,
    };
    Ok((record, ticks))
}

fn set_window(record: &SetRecord, ticks: &SetTicks, dt: f64) -> Window {
    Window {
        start_tick: record.start_tick,
        end_tick: record.end_tick - 1,
        dt,
        t_start: record.t_start,
        phi: ticks.samples.iter().map(|s| s.phi.clone()).collect(),
        epsilon: ticks.epsilon.clone(),
        pure: ticks.samples.iter().map(|s| s.pure.concat()).collect(),
        label: format!("set-{}", record.index),
        cell: None,
    }
}

fn in_set(index: usize, context: &str) -> impl Fn(GameError) -> GameError + '_ {
    move |e| GameError::InSet { set: index, context: context.to_string(), source: Box::new(e) }
}

/// Defers set-end events until the end tick itself has been reported.
struct Deferred<'a> {
    inner: &'a mut dyn MatchObserver,
    pending: Vec<(SetRecord, Option<DialogueState>)>,
}

impl Deferred<'_> {
    fn flush(&mut self) {
        for (r, s) in self.pending.drain(..) {
            self.inner.on_set_end(&r, s.as_ref());
        }
    }
}

impl MatchObserver for Deferred<'_> {
    fn on_tick(&mut self, sample: &TickSample, epsilon: Option<&[f64]>, f: f64, set: usize) {
        self.inner.on_tick(sample, epsilon, f, set);
        self.flush();
    }
}

/// Chains sets on `engine` until the limit, recalibrating F after each.
pub fn run_match(
    engine: &mut Engine,
    config: &MatchConfig,
    source: &mut dyn ControlSource,
    observer: &mut dyn MatchObserver,
) -> Result<MatchOutcome> {
    config.criterion.validate()?;
    config.functionals.validate()?;
    let setup = engine.setup().clone();
    let cap_ticks = ticks_for_horizon(config.horizon_cap, setup.dt)?;
    let estimator = EpsilonEstimator::new(config.representations.clone());
    let (max_sets, wall_cap) = match config.limit {
        SetLimit::Count { sets } if sets >= 1 => (sets, None),
        SetLimit::Count { .. } => return Err(GameError::Invalid("set limit must be at least 1".into())),
        SetLimit::OpenEnded { wall_clock_secs } if wall_clock_secs > 0.0 => {
            (usize::MAX, Some(Duration::from_secs_f64(wall_clock_secs)))
        }
        SetLimit::OpenEnded { .. } => return Err(GameError::Invalid("wall-clock cap must be positive".into())),
    };
    let started = Instant::now();
    let start_tick = engine.tick();

    let mut observer = Deferred { inner: observer, pending: Vec::new() };
    let mut criterion = config.criterion.clone();
    let mut omega = config.initial_omega.clone();
    let mut sets = Vec::new();
    let mut states = Vec::new();
    let mut all = SetTicks::default();
    let mut set_of_tick = Vec::new();
    let mut end = MatchEnd::SetLimit;

    for index in 0..max_sets {
        if wall_cap.is_some_and(|cap| started.elapsed() >= cap) {
            end = MatchEnd::WallClock;
            break;
        }
        let (record, ticks) = run_set(engine, index, &criterion, &omega, &estimator, source, cap_ticks, &mut observer)
            .map_err(in_set(index, "set failed"))?;
        let state = if ticks.samples.is_empty() {
            None
        } else {
            let window = set_window(&record, &ticks, setup.dt);
            match compute_window_functionals(&window, &config.functionals, index) {
                Ok(s) => Some(s),
                // An aborted set may end before any functional is defined.
                Err(GameError::Empty(_) | GameError::UnderDetermined { .. }) if record.reason == StopReason::Aborted => {
                    None
                }
                Err(e) => return Err(in_set(index, "window functionals")(e)),
            }
        };
        if let Some(s) = &state {
            omega = s.omega.clone();
        }
        criterion = recalibrate_stop(&criterion, &omega).map_err(in_set(index, "recalibration"))?;
        let aborted = record.reason == StopReason::Aborted;
        set_of_tick.extend(std::iter::repeat_n(index, ticks.samples.len()));
        all.samples.extend(ticks.samples);
        all.epsilon.extend(ticks.epsilon);
        all.f.extend(ticks.f);
        observer.pending.push((record.clone(), state.clone()));
        sets.push(record);
        states.extend(state);
        if aborted {
            end = MatchEnd::Aborted;
            break;
        }
    }

    // The last end tick has no set of its own; record it with the controls
    // that would have been played there.
    let last = sets.last().expect("at least one set ran");
    let final_f = *last.f_trace.last().expect("F trace is never empty");
    let last_index = last.index;
    let pure = match source.controls(engine) {
        Ok(p) => p,
        Err(GameError::Disconnected { .. }) => engine.nominal_controls(),
        Err(e) => return Err(e),
    };
    let jet = engine.jet();
    let sample = engine.act(pure)?;
    let eps = estimator.estimate(&sample, &jet)?.map(|e| e.epsilon);
    observer.on_tick(&sample, eps.as_deref(), final_f, last_index);
    all.samples.push(sample);
    all.epsilon.push(eps);
    all.f.push(final_f);
    set_of_tick.push(last_index);

    let record = MatchRecord {
        transcript: Transcript::default(),
        sets,
        states,
        end,
        final_criterion: criterion,
    };
    let partition = record.partition(setup.t0, setup.dt);
    let transcript = transcript(&partition, &record.states)?;
    let record = MatchRecord { transcript, ..record };
    let trajectory = Trajectory {
        dt: setup.dt,
        t0: setup.time_of(start_tick),
        seed: engine.seed(),
        jet_order: setup.jet_order,
        samples: all.samples,
    };
    let epsilon = EpsilonTrace::from_values(trajectory.t0, setup.dt, all.epsilon);
    Ok(MatchOutcome { record, trajectory, epsilon, f_values: all.f, set_of_tick })
}
