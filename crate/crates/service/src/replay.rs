//! Deterministic replay: re-run a logged session from its header and its
//! logged controls, then compare the regenerated tick lines byte for byte.

use std::cell::RefCell;
use std::rc::Rc;

use ifgame_core::epsilon::EpsilonRepresentation;
use ifgame_core::scenarios::ScenarioSpec;

use crate::analysis::{analyze, set_spans, Analysis};
use crate::error::{Result, ServiceError};
use crate::log::{EventSink, LogLine, ParsedLog};
use crate::session::{run_session, shared, SessionOutcome};
use crate::source::LoggedSource;

/// Collects serialized lines behind a shared handle.
#[derive(Debug, Clone, Default)]
pub struct CollectSink(pub Rc<RefCell<Vec<String>>>);

impl EventSink for CollectSink {
    fn emit(&mut self, line: &LogLine) -> Result<()> {
        self.0.borrow_mut().push(line.to_json());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplayResult {
    /// Every compared tick line matched and, for a complete log, the tick
    /// counts agree.
    pub identical: bool,
    pub mismatch_tick: Option<usize>,
    /// Last complete tick of a truncated log; only the prefix was compared.
    pub partial_last_tick: Option<usize>,
    /// Whether the regenerated summary equals the logged one, if any.
    pub summary_match: Option<bool>,
    pub lines: Vec<String>,
    pub outcome: SessionOutcome,
    /// Present when replacement representations were supplied.
    pub analysis: Option<Analysis>,
}

pub fn replay(
    log: &ParsedLog,
    scenario: Option<&ScenarioSpec>,
    representations: Option<&[EpsilonRepresentation]>,
) -> Result<ReplayResult> {
    let header = &log.header;
    let recorded = header.scenario.config_hash();
    if recorded != header.config_hash {
        return Err(ServiceError::HashMismatch { logged: header.config_hash.clone(), provided: recorded });
    }
    if header.seed != header.scenario.seed {
        return Err(ServiceError::Log(format!(
            "header seed {} differs from the scenario seed {}",
            header.seed, header.scenario.seed
        )));
    }
    if let Some(spec) = scenario {
        let provided = spec.config_hash();
        if provided != header.config_hash {
            return Err(ServiceError::HashMismatch { logged: header.config_hash.clone(), provided });
        }
    }

    let collected = CollectSink::default();
    let sink = shared(collected.clone());
    let spec = &header.scenario;
    let mut source = LoggedSource::new(
        log.controls().cloned(),
        log.disconnects().next().cloned(),
        sink.clone(),
        header.mode.humans(spec.players()),
        spec.setup.control_dim(),
    );
    let outcome = run_session(header, &mut source, sink)?;
    let lines = collected.0.borrow().clone();

    let replayed: Vec<&String> = lines.iter().filter(|l| l.starts_with("{\"type\":\"tick\"")).collect();
    let complete = log.truncated_at_line.is_none() && log.has_summary;
    let mismatch = log
        .tick_text
        .iter()
        .zip(&replayed)
        .position(|(a, b)| a != *b)
        .or_else(|| (log.tick_text.len() > replayed.len()).then_some(replayed.len()));
    let mismatch_tick = mismatch.map(|i| match log.ticks().nth(i) {
        Some(t) => t.tick,
        None => i,
    });
    let identical = mismatch.is_none() && (!complete || log.tick_text.len() == replayed.len());
    let summary_match = log.summary().map(|s| {
        serde_json::to_value(s).ok() == serde_json::to_value(&outcome.summary).ok()
    });
    let analysis = match representations {
        Some(reps) => {
            let spans = outcome.record.as_ref().map(set_spans);
            Some(analyze(spec, &outcome.trajectory, spans.as_deref(), reps)?)
        }
        None => None,
    };
    Ok(ReplayResult {
        identical,
        mismatch_tick,
        partial_last_tick: if complete { None } else { log.last_tick() },
        summary_match,
        lines,
        outcome,
        analysis,
    })
}
