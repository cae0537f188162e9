//! Control sources for live sessions and for replaying logs.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::mpsc::{Receiver, TryRecvError};
use std::time::{Duration, Instant};

use ifgame_core::game::{ControlSource, Engine};
use ifgame_core::GameError;

use crate::log::{ControlLine, DisconnectLine, EventSink, LogLine};

pub type SharedSink = Rc<RefCell<Box<dyn EventSink>>>;

/// Messages from connection handlers to the session loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Join { player: usize },
    Control { player: usize, t: f64, u0: Vec<f64> },
    Leave { player: usize },
}

fn emit(sink: &SharedSink, line: LogLine) -> Result<(), GameError> {
    sink.borrow_mut().emit(&line).map_err(|e| GameError::Invalid(format!("log write failed: {e}")))
}

/// A control timestamped before the previous tick boundary is late.
pub fn is_late(timestamp: f64, engine: &Engine) -> bool {
    timestamp < engine.time() - engine.setup().dt - 1e-12
}

/// Drains queued commands at each tick boundary and holds the latest
/// control of every player until it is replaced.
pub struct LiveSource {
    rx: Receiver<Command>,
    sink: SharedSink,
    held: Vec<Vec<f64>>,
    humans: usize,
    /// Controls received while waiting, applied at the first tick.
    early: Vec<Command>,
    realtime: bool,
    started: Option<Instant>,
    disconnected: Option<usize>,
}

impl LiveSource {
    /// Players `0..humans` are driven over the socket; the rest play nominally.
    pub fn new(rx: Receiver<Command>, sink: SharedSink, humans: usize, control_dim: usize, realtime: bool) -> Self {
        Self { rx, sink, held: vec![vec![0.0; control_dim]; humans], humans, early: Vec::new(), realtime, started: None, disconnected: None }
    }

    /// Blocks until `players` distinct players have joined.
    pub fn wait_for_players(&mut self, players: usize) -> Result<(), GameError> {
        let mut joined = vec![false; players];
        while !joined.iter().all(|j| *j) {
            match self.rx.recv() {
                Ok(Command::Join { player }) if player < players => joined[player] = true,
                Ok(Command::Leave { player }) if player < players => {
                    joined[player] = false;
                    self.early.retain(|c| !matches!(c, Command::Control { player: p, .. } if *p == player));
                }
                Ok(c @ Command::Control { .. }) => self.early.push(c),
                Ok(_) => {}
                Err(_) => return Err(GameError::Disconnected { player: joined.iter().position(|j| !j).unwrap_or(0) }),
            }
        }
        Ok(())
    }

    fn pace(&mut self, engine: &Engine) {
        if !self.realtime {
            return;
        }
        let start = *self.started.get_or_insert_with(Instant::now);
        let due = start + Duration::from_secs_f64(engine.tick() as f64 * engine.setup().dt);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
    }
}

impl ControlSource for LiveSource {
    fn controls(&mut self, engine: &Engine) -> Result<Vec<Vec<f64>>, GameError> {
        if let Some(player) = self.disconnected {
            return Err(GameError::Disconnected { player });
        }
        self.pace(engine);
        let mut early = std::mem::take(&mut self.early).into_iter();
        loop {
            let next = match early.next() {
                Some(c) => Ok(c),
                None => self.rx.try_recv(),
            };
            match next {
                Ok(Command::Control { player, t, u0 }) => {
                    if player >= self.held.len() || u0.len() != self.held[player].len() {
                        continue;
                    }
                    let line = ControlLine { tick_applied: engine.tick(), player, t, u0: u0.clone(), late: is_late(t, engine) };
                    emit(&self.sink, LogLine::Control(line))?;
                    self.held[player] = u0;
                }
                Ok(Command::Leave { player }) if self.disconnected.is_none() => {
                    self.disconnected = Some(player);
                    emit(&self.sink, LogLine::Disconnect(DisconnectLine { tick: engine.tick(), player }))?;
                    break;
                }
                Ok(_) => {}
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => break,
            }
        }
        match self.disconnected {
            Some(player) => Err(GameError::Disconnected { player }),
            None => Ok(merge(&self.held, self.humans, engine)),
        }
    }
}

fn merge(held: &[Vec<f64>], humans: usize, engine: &Engine) -> Vec<Vec<f64>> {
    let mut pure = engine.nominal_controls();
    pure[..humans].clone_from_slice(&held[..humans]);
    pure
}

/// Re-applies logged controls and disconnects at their recorded ticks.
pub struct LoggedSource {
    controls: BTreeMap<usize, Vec<ControlLine>>,
    disconnect: Option<DisconnectLine>,
    sink: SharedSink,
    held: Vec<Vec<f64>>,
    humans: usize,
    emitted_through: Option<usize>,
}

impl LoggedSource {
    pub fn new(
        controls: impl IntoIterator<Item = ControlLine>,
        disconnect: Option<DisconnectLine>,
        sink: SharedSink,
        humans: usize,
        control_dim: usize,
    ) -> Self {
        let mut by_tick: BTreeMap<usize, Vec<ControlLine>> = BTreeMap::new();
        for c in controls {
            by_tick.entry(c.tick_applied).or_default().push(c);
        }
        Self { controls: by_tick, disconnect, sink, held: vec![vec![0.0; control_dim]; humans], humans, emitted_through: None }
    }
}

impl ControlSource for LoggedSource {
    fn controls(&mut self, engine: &Engine) -> Result<Vec<Vec<f64>>, GameError> {
        let tick = engine.tick();
        if self.emitted_through.is_none_or(|t| t < tick) {
            self.emitted_through = Some(tick);
            for c in self.controls.remove(&tick).unwrap_or_default() {
                if c.player < self.held.len() {
                    self.held[c.player] = c.u0.clone();
                }
                emit(&self.sink, LogLine::Control(c))?;
            }
            if let Some(d) = self.disconnect.as_ref().filter(|d| d.tick == tick) {
                emit(&self.sink, LogLine::Disconnect(d.clone()))?;
            }
        }
        match &self.disconnect {
            Some(d) if d.tick <= tick => Err(GameError::Disconnected { player: d.player }),
            _ => Ok(merge(&self.held, self.humans, engine)),
        }
    }
}
