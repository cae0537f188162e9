//! Offline analysis of a recorded trajectory: ε̂, partition, dialogue
//! states, recursion fit and relations among ε̂ components.

use ifgame_core::epsilon::{
    detect_cell_transitions, find_correlation_integrals, BasisSpec, CorrelationIntegral, EpsilonRepresentation,
    EpsilonTrace, Partition, DEFAULT_RELATION_TOLERANCE,
};
use ifgame_core::game::{TickSample, Trajectory};
use ifgame_core::perception::{MatchRecord, SetRecord};
use ifgame_core::scenarios::ScenarioSpec;
use ifgame_core::verbal::{
    compute_window_functionals, fit_recursion, transcript, verbalizability_score, windows_for_partition,
    DialogueState, RecursionModel, Transcript, DEFAULT_VERBALIZABLE_THRESHOLD,
};
use ifgame_core::GameError;
use serde::Serialize;

use crate::error::{Result, ServiceError};
use crate::log::{LogLine, ParsedLog, SetBoundaryLine};

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub epsilon: EpsilonTrace,
    pub partition: Partition,
    pub states: Vec<DialogueState>,
    pub transcript: Transcript,
    #[serde(skip)]
    pub model: Option<RecursionModel>,
    pub score: Option<f64>,
    pub verbalizable: Option<bool>,
    pub relations: Vec<CorrelationIntegral>,
}

/// Spans `(index, start_tick, end_tick)` of the sets that produced a dialogue state.
pub fn set_spans(record: &MatchRecord) -> Vec<(usize, usize, usize)> {
    record
        .sets
        .iter()
        .filter(|s: &&SetRecord| record.states.iter().any(|st| st.index == s.index))
        .map(|s| (s.index, s.start_tick, s.end_tick))
        .collect()
}

/// The same spans as recorded in a log.
pub fn logged_set_spans(log: &ParsedLog) -> Vec<(usize, usize, usize)> {
    log.lines
        .iter()
        .filter_map(|l| match l {
            LogLine::SetBoundary(SetBoundaryLine { set_index, start_tick, end_tick, omega: Some(_), .. }) => {
                Some((*set_index, *start_tick, *end_tick))
            }
            _ => None,
        })
        .collect()
}

/// Rebuilds the trajectory from the tick lines of a log.
pub fn trajectory_from_log(log: &ParsedLog) -> Trajectory {
    let setup = &log.header.scenario.setup;
    Trajectory {
        dt: setup.dt,
        t0: setup.t0,
        seed: log.header.seed,
        jet_order: setup.jet_order,
        samples: log
            .ticks()
            .map(|t| TickSample {
                tick: t.tick,
                t: t.t,
                phi: t.phi.clone(),
                xi: t.xi.clone(),
                pure: t.u0.clone(),
                realized: t.u.clone(),
                coalition: None,
            })
            .collect(),
    }
}

/// Analyzes `trajectory` under `representations`. With set spans the
/// partition follows the sets; otherwise it follows cell transitions.
pub fn analyze(
    spec: &ScenarioSpec,
    trajectory: &Trajectory,
    sets: Option<&[(usize, usize, usize)]>,
    representations: &[EpsilonRepresentation],
) -> Result<Analysis> {
    if trajectory.is_empty() {
        return Err(GameError::Empty("trajectory".into()).into());
    }
    let epsilon = ifgame_core::epsilon::epsilon_trace(trajectory, representations)?;
    let partition = match sets {
        Some(spans) => {
            let end = spans.last().map_or(0, |s| s.2).min(trajectory.len());
            let nonempty: Vec<_> = spans.iter().filter(|s| s.2 > s.1 && s.1 < end).collect();
            Partition::from_boundaries(
                nonempty.iter().map(|s| s.1).collect(),
                trajectory.t0,
                trajectory.dt,
                end,
                nonempty.iter().map(|s| vec![s.0 as i64]).collect(),
            )
        }
        None => {
            if epsilon.dim().is_some_and(|d| d != spec.cells.dim()) {
                return Err(ServiceError::Config(format!(
                    "representations give ε of dimension {} but the cell complex has {}",
                    epsilon.dim().unwrap_or(0),
                    spec.cells.dim()
                )));
            }
            detect_cell_transitions(&epsilon, &spec.cells)?
        }
    };
    let windows = windows_for_partition(trajectory, &epsilon, &partition)?;
    let mut states = Vec::with_capacity(windows.len());
    for (i, w) in windows.iter().enumerate() {
        let index = match sets {
            Some(_) => partition.cells[i][0] as usize,
            None => i,
        };
        states.push(compute_window_functionals(w, &spec.functionals, index)?);
    }
    let transcript = transcript(&partition, &states)?;
    let model = fit_recursion(&states, &windows).ok();
    let score = model.as_ref().map(verbalizability_score);
    let relations = match epsilon.dim() {
        Some(d) if d >= 2 => {
            find_correlation_integrals(std::slice::from_ref(&epsilon), None, &BasisSpec::affine(d), DEFAULT_RELATION_TOLERANCE)
                .unwrap_or_default()
        }
        _ => Vec::new(),
    };
    Ok(Analysis {
        epsilon,
        partition,
        states,
        transcript,
        model,
        score,
        verbalizable: score.map(|s| s >= DEFAULT_VERBALIZABLE_THRESHOLD),
        relations,
    })
}

/// Analysis of a log under its own scenario, or under replacement representations.
pub fn analyze_log(log: &ParsedLog, representations: Option<&[EpsilonRepresentation]>) -> Result<Analysis> {
    let spec = &log.header.scenario;
    let trajectory = trajectory_from_log(log);
    let spans = logged_set_spans(log);
    let sets = spec.perception.as_ref().map(|_| spans.as_slice());
    analyze(spec, &trajectory, sets, representations.unwrap_or(&spec.representations))
}
