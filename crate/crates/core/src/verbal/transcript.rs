//! Transcripts: the partition rendered as a sequence of typed utterances.

use serde::{Deserialize, Serialize};

use super::functionals::DialogueState;
use crate::epsilon::cells::{CellId, Partition};
use crate::error::{check_dim, GameError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: usize,
    pub start_tick: usize,
    pub t: f64,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellId>,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub utterances: Vec<Utterance>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for u in &self.utterances {
            out.push_str(&serde_json::to_string(u).expect("utterance serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let utterances = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| GameError::Invalid(format!("bad utterance line: {e}"))))
            .collect::<Result<_>>()?;
        Ok(Self { utterances })
    }
}

pub fn transcript(partition: &Partition, states: &[DialogueState]) -> Result<Transcript> {
    check_dim("dialogue states per interval", partition.intervals(), states.len())?;
    let utterances = states
        .iter()
        .enumerate()
        .map(|(i, s)| Utterance {
            index: i,
            start_tick: partition.ticks[i],
            t: partition.times[i],
            label: s.label.clone(),
            cell: partition.cells.get(i).cloned(),
            omega: s.omega.clone(),
            v: s.v.clone(),
        })
        .collect();
    Ok(Transcript { utterances })
}
