//! Per-tick CSV and a JSON summary for a session log.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::analysis::{analyze_log, Analysis};
use crate::error::{Result, ServiceError};
use crate::log::ParsedLog;

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub rows: usize,
}

fn interval_of(analysis: &Analysis, tick: usize) -> Option<usize> {
    analysis.partition.ranges().iter().position(|&(a, b)| a <= tick && tick < b)
}

/// Writes `<stem>.csv` and `<stem>.summary.json` into `out_dir`.
pub fn write_report(log: &ParsedLog, out_dir: &Path) -> Result<ReportFiles> {
    let analysis = analyze_log(log, None)?;
    std::fs::create_dir_all(out_dir)?;
    let stem = &log.header.session_id;
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let summary_path = out_dir.join(format!("{stem}.summary.json"));

    let eps_dim = analysis.epsilon.dim().unwrap_or(0);
    let omega_dim = analysis.states.first().map_or(0, |s| s.omega.len());
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|e| ServiceError::Log(e.to_string()))?;
    let mut head = vec!["tick".to_string(), "t".into(), "F".into(), "set_index".into()];
    head.extend((0..eps_dim).map(|k| format!("eps_{k}")));
    head.extend((0..omega_dim).map(|k| format!("omega_{k}")));
    writer.write_record(&head).map_err(|e| ServiceError::Log(e.to_string()))?;

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut rows = 0;
    for line in log.ticks() {
        let mut row = vec![
            line.tick.to_string(),
            line.t.to_string(),
            opt(line.f),
            line.set_index.map(|s| s.to_string()).unwrap_or_default(),
        ];
        match &line.epsilon_hat {
            Some(e) => row.extend(e.iter().map(f64::to_string)),
            None => row.extend(std::iter::repeat_n(String::new(), eps_dim)),
        }
        match interval_of(&analysis, line.tick).map(|i| &analysis.states[i].omega) {
            Some(w) => row.extend(w.iter().map(f64::to_string)),
            None => row.extend(std::iter::repeat_n(String::new(), omega_dim)),
        }
        writer.write_record(&row).map_err(|e| ServiceError::Log(e.to_string()))?;
        rows += 1;
    }
    writer.flush()?;

    let summary = json!({
        "session_id": log.header.session_id,
        "config_hash": log.header.config_hash,
        "ticks": rows,
        "complete": log.has_summary && log.truncated_at_line.is_none(),
        "logged_summary": log.summary(),
        "partition_ticks": analysis.partition.ticks,
        "utterances": analysis.transcript.utterances,
        "score": analysis.score,
        "verbalizable": analysis.verbalizable,
        "relations": analysis.relations,
    });
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(ReportFiles { csv: csv_path, summary: summary_path, rows })
}
