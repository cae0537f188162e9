//! Box-grid cell complex over ε-space and hysteretic transition detection.
//!
//! The current cell is left only when ε̂ exits that cell's box inflated by
//! `hysteresis · width` on every side; the new cell is then the plain cell of
//! the sample. Boundary times are the first ticks spent in the new cell.

use serde::{Deserialize, Serialize};

use super::trace::EpsilonTrace;
use crate::error::{check_dim, GameError, Result};

pub const DEFAULT_HYSTERESIS: f64 = 0.05;

pub type CellId = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellComplex {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(default = "default_hysteresis")]
    pub hysteresis: f64,
}

fn default_hysteresis() -> f64 {
    DEFAULT_HYSTERESIS
}

impl CellComplex {
    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>, hysteresis: f64) -> Result<Self> {
        let c = Self { lo, hi, counts, hysteresis };
        c.validate()?;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("complex upper bounds", self.lo.len(), self.hi.len())?;
        check_dim("complex cell counts", self.lo.len(), self.counts.len())?;
        if self.lo.is_empty() {
            return Err(GameError::Invalid("cell complex needs at least one axis".into()));
        }
        for a in 0..self.dim() {
            if self.counts[a] == 0 || !(self.hi[a] > self.lo[a]) {
                return Err(GameError::Invalid(format!("axis {a} has an empty range or no cells")));
            }
        }
        if !(0.0..0.5).contains(&self.hysteresis) {
            return Err(GameError::Invalid("hysteresis must lie in [0, 0.5)".into()));
        }
        Ok(())
    }

    pub fn width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.counts[axis] as f64
    }

    /// Cell of `x`; out-of-box coordinates are clamped and reported.
    pub fn cell_of(&self, x: &[f64]) -> (CellId, bool) {
        let mut clamped = false;
        let id = (0..self.dim())
            .map(|a| {
                if x[a] < self.lo[a] || x[a] > self.hi[a] {
                    clamped = true;
                }
                let raw = ((x[a] - self.lo[a]) / self.width(a)).floor();
                raw.clamp(0.0, (self.counts[a] - 1) as f64) as i64
            })
            .collect();
        (id, clamped)
    }

    pub fn cell_bounds(&self, id: &[i64], axis: usize) -> (f64, f64) {
        let w = self.width(axis);
        let lo = self.lo[axis] + id[axis] as f64 * w;
        (lo, lo + w)
    }

    /// Whether `x` lies in cell `id` inflated by the hysteresis margin.
    /// Edge cells extend to infinity on their outer side.
    pub fn holds(&self, id: &[i64], x: &[f64]) -> bool {
        (0..self.dim()).all(|a| {
            let (lo, hi) = self.cell_bounds(id, a);
            let margin = self.hysteresis * self.width(a);
            let lo_ok = id[a] == 0 || x[a] >= lo - margin;
            let hi_ok = id[a] as usize == self.counts[a] - 1 || x[a] < hi + margin;
            lo_ok && hi_ok
        })
    }

    pub fn label(id: &[i64]) -> String {
        let parts: Vec<String> = id.iter().map(i64::to_string).collect();
        format!("cell[{}]", parts.join(","))
    }
}

/// A-posteriori partition of the tick grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Boundary ticks `t₀ < t₁ < …`; `ticks[0]` is the trace start.
    pub ticks: Vec<usize>,
    pub times: Vec<f64>,
    /// Occupied cell per interval.
    pub cells: Vec<CellId>,
    /// One past the last tick covered.
    pub end_tick: usize,
    /// Ticks whose ε̂ fell outside the complex and was clamped.
    #[serde(default)]
    pub clamped: Vec<usize>,
}

impl Partition {
    pub fn intervals(&self) -> usize {
        self.ticks.len()
    }

    /// Tick ranges `[start, end)` of every interval.
    pub fn ranges(&self) -> Vec<(usize, usize)> {
        (0..self.ticks.len())
            .map(|i| (self.ticks[i], self.ticks.get(i + 1).copied().unwrap_or(self.end_tick)))
            .collect()
    }

    /// Partition whose boundaries are given directly, e.g. set starts.
    pub fn from_boundaries(ticks: Vec<usize>, t0: f64, dt: f64, end_tick: usize, labels: Vec<CellId>) -> Self {
        let times = ticks.iter().map(|&j| t0 + j as f64 * dt).collect();
        Self { ticks, times, cells: labels, end_tick, clamped: Vec::new() }
    }
}

/// Online form of the transition rule: feed ε̂ samples in tick order.
#[derive(Debug, Clone)]
pub struct CellTracker {
    complex: CellComplex,
    current: Option<CellId>,
}

/// What one observation did to the tracker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellObservation {
    /// The new cell when this sample opens an interval after the first.
    pub entered: Option<CellId>,
    pub clamped: bool,
}

impl CellTracker {
    pub fn new(complex: CellComplex) -> Result<Self> {
        complex.validate()?;
        Ok(Self { complex, current: None })
    }

    pub fn current(&self) -> Option<&CellId> {
        self.current.as_ref()
    }

    pub fn observe(&mut self, x: &[f64]) -> Result<CellObservation> {
        check_dim("ε sample", self.complex.dim(), x.len())?;
        let (id, clamped) = self.complex.cell_of(x);
        let entered = match &self.current {
            None => {
                self.current = Some(id);
                None
            }
            Some(current) if self.complex.holds(current, x) => None,
            Some(_) => {
                self.current = Some(id.clone());
                Some(id)
            }
        };
        Ok(CellObservation { entered, clamped })
    }
}

pub fn detect_cell_transitions(trace: &EpsilonTrace, complex: &CellComplex) -> Result<Partition> {
    let mut tracker = CellTracker::new(complex.clone())?;
    if trace.is_empty() || trace.present().next().is_none() {
        return Err(GameError::Empty("ε trace".into()));
    }
    let mut ticks = vec![0];
    let mut cells: Vec<CellId> = Vec::new();
    let mut clamped = Vec::new();
    for (j, x) in trace.present() {
        let obs = tracker.observe(x)?;
        if obs.clamped {
            clamped.push(j);
        }
        if let Some(id) = obs.entered {
            ticks.push(j);
            cells.push(id);
        } else if cells.is_empty() {
            cells.push(tracker.current().expect("first sample sets the cell").clone());
        }
    }
    let times = ticks.iter().map(|&j| trace.time_of(j)).collect();
    Ok(Partition { ticks, times, cells, end_tick: trace.len(), clamped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_1d(values: &[f64]) -> EpsilonTrace {
        EpsilonTrace::from_values(0.0, 0.1, values.iter().map(|v| Some(vec![*v])).collect())
    }

    fn two_cells(h: f64) -> CellComplex {
        CellComplex::uniform(vec![0.0], vec![2.0], vec![2], h).unwrap()
    }

    #[test]
    fn constant_trace_is_one_interval() {
        let p = detect_cell_transitions(&trace_1d(&[0.3; 20]), &two_cells(0.05)).unwrap();
        assert_eq!(p.ticks, vec![0]);
        assert_eq!(p.cells, vec![vec![0]]);
        assert_eq!(p.ranges(), vec![(0, 20)]);
    }

    #[test]
    fn threshold_crossing_without_margin() {
        let p = detect_cell_transitions(&trace_1d(&[0.1, 0.4, 0.9, 1.2]), &two_cells(0.0)).unwrap();
        assert_eq!(p.ticks, vec![0, 3]);
        assert_eq!(p.cells, vec![vec![0], vec![1]]);
    }

    #[test]
    fn warm_up_gap_keeps_trace_start() {
        let mut t = trace_1d(&[0.0, 1.5, 1.5]);
        t.values[0] = None;
        let p = detect_cell_transitions(&t, &two_cells(0.05)).unwrap();
        assert_eq!(p.ticks, vec![0]);
        assert_eq!(p.cells, vec![vec![1]]);
    }

    #[test]
    fn out_of_box_samples_clamp() {
        let p = detect_cell_transitions(&trace_1d(&[0.5, 7.0]), &two_cells(0.0)).unwrap();
        assert_eq!(p.cells.last().unwrap(), &vec![1]);
        assert_eq!(p.clamped, vec![1]);
    }

    #[test]
    fn empty_trace_errors() {
        assert!(detect_cell_transitions(&trace_1d(&[]), &two_cells(0.0)).is_err());
    }

    #[test]
    fn invalid_hysteresis_rejected() {
        assert!(CellComplex::uniform(vec![0.0], vec![1.0], vec![1], 0.5).is_err());
        assert!(CellComplex::uniform(vec![0.0], vec![1.0], vec![0], 0.1).is_err());
    }
}
