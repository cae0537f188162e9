//! The session loop: one engine, one ordered event stream.

use std::cell::RefCell;
use std::path::PathBuf;
use std::rc::Rc;

use ifgame_core::epsilon::{CellComplex, CellTracker, EpsilonTrace, Partition};
use ifgame_core::game::{ticks_for_horizon, ControlSource, Engine, NominalSource, TickSample, Trajectory};
use ifgame_core::perception::{run_match, MatchEnd, MatchObserver, MatchRecord, SetLimit, SetRecord};
use ifgame_core::scenarios::{FigureMonitor, ScenarioSpec};
use ifgame_core::verbal::{
    compute_window_functionals, fit_recursion, verbalizability_score, DialogueState, Window,
    DEFAULT_VERBALIZABLE_THRESHOLD,
};
use ifgame_core::GameError;

use crate::config::{Mode, SessionConfig};
use crate::error::{Result, ServiceError};
use crate::log::{
    EventSink, FigureLine, Header, LogLine, SessionEnd, SetBoundaryLine, SetSummary, Summary, TickLine, UtteranceLine,
    LOG_SCHEMA_VERSION,
};
use crate::source::SharedSink;

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub trajectory: Trajectory,
    pub epsilon: EpsilonTrace,
    pub record: Option<MatchRecord>,
    pub partition: Partition,
    pub states: Vec<DialogueState>,
    pub summary: Summary,
}

pub fn shared(sink: impl EventSink + 'static) -> SharedSink {
    Rc::new(RefCell::new(Box::new(sink)))
}

/// Builds the header for a new session.
pub fn header_for(config: &SessionConfig, spec: &ScenarioSpec) -> Header {
    Header {
        schema_version: LOG_SCHEMA_VERSION,
        session_id: config.session_id(spec),
        mode: config.mode,
        seed: spec.seed,
        config_hash: spec.config_hash(),
        sets: config.sets,
        horizon: config.horizon,
        scenario: spec.clone(),
    }
}

/// Log path inside the configured directory.
pub fn log_path(config: &SessionConfig, header: &Header) -> PathBuf {
    config.log_dir().join(format!("{}.jsonl", header.session_id))
}

struct Emitter {
    sink: SharedSink,
    figure: Option<FigureMonitor>,
    figure_tick: Option<usize>,
    utterances: usize,
    error: Option<ServiceError>,
}

impl Emitter {
    fn emit(&mut self, line: LogLine) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.sink.borrow_mut().emit(&line) {
            self.error = Some(e);
        }
    }

    fn flush(&mut self) {
        if self.error.is_none() {
            if let Err(e) = self.sink.borrow_mut().flush() {
                self.error = Some(e);
            }
        }
    }

    fn tick(&mut self, sample: &TickSample, epsilon: Option<&[f64]>, f: Option<f64>, set: Option<usize>) {
        self.emit(LogLine::Tick(TickLine {
            tick: sample.tick,
            t: sample.t,
            phi: sample.phi.clone(),
            xi: sample.xi.clone(),
            u0: sample.pure.clone(),
            u: sample.realized.clone(),
            epsilon_hat: epsilon.map(<[f64]>::to_vec),
            f,
            set_index: set,
        }));
        if let Some(monitor) = &mut self.figure {
            let update = monitor.update(epsilon);
            if update.became_visible {
                self.figure_tick.get_or_insert(sample.tick);
                self.emit(LogLine::FigureVisible(FigureLine {
                    tick: sample.tick,
                    t: sample.t,
                    dwell_ticks: update.dwell_ticks,
                }));
            }
        }
    }

    fn utterance(&mut self, state: &DialogueState, window: (usize, usize, f64)) {
        self.emit(LogLine::Utterance(UtteranceLine {
            index: self.utterances,
            start_tick: window.0,
            end_tick: window.1,
            t: window.2,
            label: state.label.clone(),
            omega: state.omega.clone(),
            v: state.v.clone(),
        }));
        self.utterances += 1;
    }

    fn check(&mut self) -> Result<()> {
        match self.error.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl MatchObserver for Emitter {
    fn on_tick(&mut self, sample: &TickSample, epsilon: Option<&[f64]>, f: f64, set: usize) {
        self.tick(sample, epsilon, Some(f), Some(set));
    }

    fn on_set_end(&mut self, record: &SetRecord, state: Option<&DialogueState>) {
        self.emit(LogLine::SetBoundary(SetBoundaryLine {
            set_index: record.index,
            start_tick: record.start_tick,
            end_tick: record.end_tick,
            t_end: record.t_end,
            reason: record.reason,
            threshold: record.threshold,
            omega_start: record.omega_start.clone(),
            omega: state.map(|s| s.omega.clone()),
        }));
        if let Some(s) = state {
            self.utterance(s, (record.start_tick, record.end_tick - 1, record.t_start));
        }
        self.flush();
    }
}

fn windows_of(trajectory: &Trajectory, trace: &EpsilonTrace, partition: &Partition, labels: &[String]) -> Result<Vec<Window>> {
    partition
        .ranges()
        .into_iter()
        .zip(labels)
        .map(|((a, b), label)| Ok(Window::from_range(trajectory, trace, a, b, label.clone(), None)?))
        .collect()
}

fn score_of(states: &[DialogueState], windows: &[Window]) -> (Option<f64>, Option<bool>) {
    match fit_recursion(states, windows) {
        Ok(model) => {
            let s = verbalizability_score(&model);
            (Some(s), Some(s >= DEFAULT_VERBALIZABLE_THRESHOLD))
        }
        Err(_) => (None, None),
    }
}

fn window_of(samples: &[TickSample], epsilon: &[Option<Vec<f64>>], dt: f64, label: String) -> Window {
    Window {
        start_tick: samples[0].tick,
        end_tick: samples[samples.len() - 1].tick,
        dt,
        t_start: samples[0].t,
        phi: samples.iter().map(|s| s.phi.clone()).collect(),
        epsilon: epsilon.to_vec(),
        pure: samples.iter().map(|s| s.pure.concat()).collect(),
        label,
        cell: None,
    }
}

/// Runs the scenario in the header, drawing controls from `source` and
/// writing every event to `sink`, header first and summary last.
pub fn run_session(header: &Header, source: &mut dyn ControlSource, sink: SharedSink) -> Result<SessionOutcome> {
    let spec = &header.scenario;
    spec.validate()?;
    sink.borrow_mut().emit(&LogLine::Header(header.clone()))?;
    let mut emitter = Emitter {
        sink: sink.clone(),
        figure: spec.figure.clone().map(FigureMonitor::new),
        figure_tick: None,
        utterances: 0,
        error: None,
    };
    let mut engine = Engine::new(spec.setup.clone(), spec.seed)?;
    let outcome = if spec.perception.is_some() {
        run_match_session(header, &mut engine, source, &mut emitter)?
    } else {
        run_plain_session(header, &mut engine, source, &mut emitter)?
    };
    emitter.emit(LogLine::Summary(outcome.summary.clone()));
    emitter.flush();
    emitter.check()?;
    Ok(outcome)
}

fn run_match_session(
    header: &Header,
    engine: &mut Engine,
    source: &mut dyn ControlSource,
    emitter: &mut Emitter,
) -> Result<SessionOutcome> {
    let spec = &header.scenario;
    let config = spec.match_config(header.sets.map(|sets| SetLimit::Count { sets }))?;
    let out = run_match(engine, &config, source, emitter)?;
    emitter.check()?;
    let record = out.record;
    let partition = record.partition(spec.setup.t0, spec.setup.dt);
    let labels: Vec<String> = record.states.iter().map(|s| s.label.clone()).collect();
    let windows = windows_of(&out.trajectory, &out.epsilon, &partition, &labels)?;
    let (score, verbalizable) = score_of(&record.states, &windows);
    let summary = Summary {
        ticks: out.trajectory.len(),
        end: match record.end {
            MatchEnd::SetLimit => SessionEnd::SetLimit,
            MatchEnd::WallClock => SessionEnd::WallClock,
            MatchEnd::Aborted => SessionEnd::Aborted,
        },
        sets: record
            .sets
            .iter()
            .map(|s| SetSummary {
                index: s.index,
                start_tick: s.start_tick,
                end_tick: s.end_tick,
                reason: s.reason,
                duration_ticks: s.duration_ticks(),
            })
            .collect(),
        utterances: emitter.utterances,
        score,
        verbalizable,
        figure_visible_tick: emitter.figure_tick,
    };
    Ok(SessionOutcome {
        trajectory: out.trajectory,
        epsilon: out.epsilon,
        states: record.states.clone(),
        record: Some(record),
        partition,
        summary,
    })
}

fn run_plain_session(
    header: &Header,
    engine: &mut Engine,
    source: &mut dyn ControlSource,
    emitter: &mut Emitter,
) -> Result<SessionOutcome> {
    let spec = &header.scenario;
    let setup = spec.setup.clone();
    let steps = ticks_for_horizon(header.horizon.unwrap_or(spec.horizon), setup.dt)?;
    let estimator = spec.estimator();
    let mut tracker = CellTracker::new(spec.cells.clone())?;
    let mut samples: Vec<TickSample> = Vec::with_capacity(steps + 1);
    let mut epsilon: Vec<Option<Vec<f64>>> = Vec::with_capacity(steps + 1);
    let mut boundaries = vec![0usize];
    let mut cells = Vec::new();
    let mut states = Vec::new();
    let mut clamped = Vec::new();
    let mut aborted = false;

    for j in 0..=steps {
        let pure = match source.controls(engine) {
            Ok(p) => p,
            Err(GameError::Disconnected { .. }) => {
                aborted = true;
                engine.nominal_controls()
            }
            Err(e) => return Err(e.into()),
        };
        let jet = engine.jet();
        let sample = engine.act(pure)?;
        let eps = estimator.estimate(&sample, &jet)?.map(|e| e.epsilon);
        emitter.tick(&sample, eps.as_deref(), None, None);
        let mut entered = None;
        if let Some(x) = &eps {
            let obs = tracker.observe(x)?;
            if obs.clamped {
                clamped.push(j);
            }
            entered = obs.entered;
        }
        samples.push(sample);
        epsilon.push(eps);
        if cells.is_empty() {
            if let Some(c) = tracker.current() {
                cells.push(c.clone());
            }
        }
        if let Some(cell) = entered {
            let from = *boundaries.last().expect("partition starts at tick 0");
            let label = CellComplex::label(cells.last().expect("open interval has a cell"));
            let window = window_of(&samples[from..j], &epsilon[from..j], setup.dt, label);
            let state = compute_window_functionals(&window, &spec.functionals, states.len())?;
            emitter.utterance(&state, (from, j - 1, setup.time_of(from)));
            states.push(state);
            boundaries.push(j);
            cells.push(cell);
        }
        emitter.check()?;
        if aborted {
            break;
        }
        if j < steps {
            engine.advance()?;
        }
    }
    let end_tick = samples.len();
    if let Some(cell) = cells.last() {
        let from = *boundaries.last().expect("partition starts at tick 0");
        let window = window_of(&samples[from..], &epsilon[from..], setup.dt, CellComplex::label(cell));
        let state = compute_window_functionals(&window, &spec.functionals, states.len())?;
        emitter.utterance(&state, (from, end_tick - 1, setup.time_of(from)));
        states.push(state);
    }
    emitter.check()?;

    let trajectory = Trajectory { dt: setup.dt, t0: setup.t0, seed: engine.seed(), jet_order: setup.jet_order, samples };
    let trace = EpsilonTrace::from_values(setup.t0, setup.dt, epsilon);
    let mut partition = Partition::from_boundaries(boundaries, setup.t0, setup.dt, end_tick, cells);
    partition.clamped = clamped;
    let labels: Vec<String> = states.iter().map(|s| s.label.clone()).collect();
    let windows = windows_of(&trajectory, &trace, &partition, &labels)?;
    let (score, verbalizable) = score_of(&states, &windows);
    let summary = Summary {
        ticks: trajectory.len(),
        end: if aborted { SessionEnd::Aborted } else { SessionEnd::Completed },
        sets: Vec::new(),
        utterances: emitter.utterances,
        score,
        verbalizable,
        figure_visible_tick: emitter.figure_tick,
    };
    Ok(SessionOutcome { trajectory, epsilon: trace, record: None, partition, states, summary })
}

/// Runs a synthetic session headless and writes its log file.
pub fn run_synthetic(config: &SessionConfig) -> Result<(PathBuf, SessionOutcome)> {
    if config.mode != Mode::Synthetic {
        return Err(ServiceError::Config("headless runs are synthetic only".into()));
    }
    let spec = config.scenario()?;
    let header = header_for(config, &spec);
    let path = log_path(config, &header);
    let sink = shared(crate::log::FileSink::create(&path)?);
    let outcome = run_session(&header, &mut NominalSource, sink)?;
    Ok((path, outcome))
}
