//! JSONL session log, schema version 1. The same objects travel as
//! websocket text frames.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use ifgame_core::perception::StopReason;
use ifgame_core::scenarios::ScenarioSpec;
use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::error::{Result, ServiceError};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub session_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub scenario: ScenarioSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickLine {
    pub tick: usize,
    pub t: f64,
    pub phi: Vec<f64>,
    pub xi: Vec<f64>,
    pub u0: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub epsilon_hat: Option<Vec<f64>>,
    #[serde(rename = "F")]
    pub f: Option<f64>,
    pub set_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLine {
    pub tick_applied: usize,
    pub player: usize,
    /// Client timestamp.
    pub t: f64,
    pub u0: Vec<f64>,
    pub late: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetBoundaryLine {
    pub set_index: usize,
    pub start_tick: usize,
    pub end_tick: usize,
    pub t_end: f64,
    pub reason: StopReason,
    pub threshold: f64,
    pub omega_start: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceLine {
    pub index: usize,
    pub start_tick: usize,
    pub end_tick: usize,
    pub t: f64,
    pub label: String,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureLine {
    pub tick: usize,
    pub t: f64,
    pub dwell_ticks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisconnectLine {
    pub tick: usize,
    pub player: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub index: usize,
    pub start_tick: usize,
    pub end_tick: usize,
    pub reason: StopReason,
    pub duration_ticks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionEnd {
    Completed,
    SetLimit,
    WallClock,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ticks: usize,
    pub end: SessionEnd,
    pub sets: Vec<SetSummary>,
    pub utterances: usize,
    pub score: Option<f64>,
    pub verbalizable: Option<bool>,
    pub figure_visible_tick: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LogLine {
    Header(Header),
    Tick(TickLine),
    Control(ControlLine),
    SetBoundary(SetBoundaryLine),
    Utterance(UtteranceLine),
    FigureVisible(FigureLine),
    Disconnect(DisconnectLine),
    Summary(Summary),
}

impl LogLine {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log line serializes")
    }

    pub fn is_tick(&self) -> bool {
        matches!(self, Self::Tick(_))
    }
}

/// Where session events go: a log file, websocket clients, memory.
pub trait EventSink {
    fn emit(&mut self, line: &LogLine) -> Result<()>;
    /// Called at set boundaries and at the end of the session.
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Keeps every serialized line, for replay and tests.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub lines: Vec<String>,
}

impl EventSink for MemorySink {
    fn emit(&mut self, line: &LogLine) -> Result<()> {
        self.lines.push(line.to_json());
        Ok(())
    }
}

/// Append-only JSONL file; refuses to overwrite an existing log.
pub struct FileSink {
    out: BufWriter<File>,
}

impl FileSink {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().write(true).create_new(true).open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                ServiceError::SessionExists(path.display().to_string())
            } else {
                e.into()
            }
        })?;
        Ok(Self { out: BufWriter::new(file) })
    }
}

impl EventSink for FileSink {
    fn emit(&mut self, line: &LogLine) -> Result<()> {
        self.out.write_all(line.to_json().as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Sends every line to several sinks.
pub struct Tee(pub Vec<Box<dyn EventSink + Send>>);

impl EventSink for Tee {
    fn emit(&mut self, line: &LogLine) -> Result<()> {
        self.0.iter_mut().try_for_each(|s| s.emit(line))
    }

    fn flush(&mut self) -> Result<()> {
        self.0.iter_mut().try_for_each(|s| s.flush())
    }
}

/// A parsed log. Parsing stops at the first incomplete or malformed line.
#[derive(Debug, Clone)]
pub struct ParsedLog {
    pub header: Header,
    pub lines: Vec<LogLine>,
    /// Raw text of each tick line, in order.
    pub tick_text: Vec<String>,
    /// Set when parsing stopped before the end of the input.
    pub truncated_at_line: Option<usize>,
    pub has_summary: bool,
}

impl ParsedLog {
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = None;
        let mut lines = Vec::new();
        let mut tick_text = Vec::new();
        let mut truncated_at_line = None;
        let ends_cleanly = text.is_empty() || text.ends_with('\n');
        let raw: Vec<&str> = text.lines().collect();
        for (i, l) in raw.iter().enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            let last_partial = i + 1 == raw.len() && !ends_cleanly;
            let parsed: std::result::Result<LogLine, _> = serde_json::from_str(l);
            let line = match parsed {
                Ok(line) if !last_partial => line,
                _ => {
                    truncated_at_line = Some(i + 1);
                    break;
                }
            };
            match (&line, &header) {
                (LogLine::Header(h), None) => header = Some(h.clone()),
                (_, None) => return Err(ServiceError::Log("first line must be the header".into())),
                (LogLine::Header(_), Some(_)) => return Err(ServiceError::Log("duplicate header".into())),
                (LogLine::Tick(_), _) => tick_text.push(l.to_string()),
                _ => {}
            }
            lines.push(line);
        }
        let header = header.ok_or_else(|| ServiceError::Log("log has no header".into()))?;
        if header.schema_version != LOG_SCHEMA_VERSION {
            return Err(ServiceError::Log(format!("unsupported log schema version {}", header.schema_version)));
        }
        let has_summary = lines.iter().any(|l| matches!(l, LogLine::Summary(_)));
        Ok(Self { header, lines, tick_text, truncated_at_line, has_summary })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn ticks(&self) -> impl Iterator<Item = &TickLine> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Tick(t) => Some(t),
            _ => None,
        })
    }

    pub fn controls(&self) -> impl Iterator<Item = &ControlLine> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Control(c) => Some(c),
            _ => None,
        })
    }

    pub fn disconnects(&self) -> impl Iterator<Item = &DisconnectLine> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Disconnect(d) => Some(d),
            _ => None,
        })
    }

    pub fn summary(&self) -> Option<&Summary> {
        self.lines.iter().find_map(|l| match l {
            LogLine::Summary(s) => Some(s),
            _ => None,
        })
    }

    pub fn last_tick(&self) -> Option<usize> {
        self.ticks().last().map(|t| t.tick)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ifgame_core::scenarios::builtin;

    fn header() -> Header {
        let scenario = builtin("relay", 0).unwrap();
        Header {
            schema_version: LOG_SCHEMA_VERSION,
            session_id: "s".into(),
            mode: Mode::Synthetic,
            seed: 0,
            config_hash: scenario.config_hash(),
            sets: None,
            horizon: None,
            scenario,
        }
    }

    fn tick(j: usize) -> LogLine {
        LogLine::Tick(TickLine {
            tick: j,
            t: j as f64 * 0.01,
            phi: vec![0.1 * j as f64],
            xi: vec![],
            u0: vec![vec![1.0]],
            u: vec![vec![1.0]],
            epsilon_hat: None,
            f: Some(-1.0),
            set_index: Some(0),
        })
    }

    fn text(lines: &[LogLine]) -> String {
        lines.iter().map(|l| l.to_json() + "\n").collect()
    }

    #[test]
    fn lines_are_tagged_by_type() {
        assert!(tick(3).to_json().starts_with("{\"type\":\"tick\",\"tick\":3,"));
        assert!(tick(3).to_json().contains("\"F\":-1.0"));
        assert!(tick(0).is_tick());
    }

    #[test]
    fn parse_keeps_tick_text_verbatim() {
        let lines = [LogLine::Header(header()), tick(0), tick(1)];
        let log = ParsedLog::parse(&text(&lines)).unwrap();
        assert_eq!(log.tick_text, vec![tick(0).to_json(), tick(1).to_json()]);
        assert_eq!(log.last_tick(), Some(1));
        assert!(!log.has_summary);
        assert_eq!(log.truncated_at_line, None);
    }

    #[test]
    fn unterminated_last_line_is_dropped() {
        let full = text(&[LogLine::Header(header()), tick(0), tick(1)]);
        let log = ParsedLog::parse(&full[..full.len() - 1]).unwrap();
        assert_eq!(log.last_tick(), Some(0));
        assert_eq!(log.truncated_at_line, Some(3));
    }

    #[test]
    fn header_must_come_first() {
        let bad = text(&[tick(0), LogLine::Header(header())]);
        assert!(matches!(ParsedLog::parse(&bad), Err(ServiceError::Log(_))));
        assert!(matches!(ParsedLog::parse(""), Err(ServiceError::Log(_))));
    }

    #[test]
    fn unknown_schema_is_rejected() {
        let mut h = header();
        h.schema_version = LOG_SCHEMA_VERSION + 1;
        assert!(matches!(ParsedLog::parse(&text(&[LogLine::Header(h)])), Err(ServiceError::Log(_))));
    }
}
