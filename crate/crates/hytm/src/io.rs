//! File formats: history and schedule JSON lines, metrics JSON.
//!
//! A history file is a sequence of histories. Each starts with a header
//! record carrying `"format": "hytm-history"` and is followed by one event
//! record per line. A schedule file holds one step per line, optionally
//! preceded by a `"format": "hytm-schedule"` header.

use std::collections::BTreeMap;
use std::io::Write;

use hytm_core::history::ObjectInfo;
use hytm_core::metrics::{PathAggregate, TxMetrics};
use hytm_core::schedule::Step;
use hytm_core::{Algorithm, Event, History, Schedule, TxId};
use serde::{Deserialize, Serialize};

use crate::config::CheckKind;
use crate::error::CliError;

pub const HISTORY_FORMAT: &str = "hytm-history";
pub const SCHEDULE_FORMAT: &str = "hytm-schedule";
pub const METRICS_FORMAT: &str = "hytm-metrics";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryHeader {
    pub format: String,
    pub version: u32,
    pub algorithm: Algorithm,
    pub n_tobjects: u32,
    pub capacity: usize,
    pub iteration: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<TxId, String>,
    pub objects: Vec<ObjectInfo>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRecord {
    pub header: HistoryHeader,
    pub history: History,
}

fn to_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("history records serialize")
}

/// Appends one history to `w`.
pub fn write_history(w: &mut dyn Write, rec: &HistoryRecord) -> std::io::Result<()> {
    writeln!(w, "{}", to_line(&rec.header))?;
    for e in &rec.history.events {
        writeln!(w, "{}", to_line(e))?;
    }
    Ok(())
}

pub fn histories_to_string(recs: &[HistoryRecord]) -> String {
    let mut buf = Vec::new();
    for r in recs {
        write_history(&mut buf, r).expect("writing to memory");
    }
    String::from_utf8(buf).expect("json is utf-8")
}

fn is_header(line: &str, format: &str) -> Result<bool, serde_json::Error> {
    let v: serde_json::Value = serde_json::from_str(line)?;
    Ok(v.get("format").and_then(|f| f.as_str()) == Some(format))
}

pub fn read_histories(text: &str) -> Result<Vec<HistoryRecord>, CliError> {
    let mut out: Vec<HistoryRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| CliError::Format(format!("history line {}: {e}", i + 1));
        if is_header(line, HISTORY_FORMAT).map_err(bad)? {
            let header: HistoryHeader = serde_json::from_str(line).map_err(bad)?;
            if header.version != FORMAT_VERSION {
                return Err(CliError::Format(format!(
                    "history line {}: unsupported version {}",
                    i + 1,
                    header.version
                )));
            }
            let history = History::new(header.objects.clone());
            out.push(HistoryRecord { header, history });
        } else {
            let event: Event = serde_json::from_str(line).map_err(bad)?;
            let cur = out
                .last_mut()
                .ok_or_else(|| CliError::Format(format!("history line {}: event before any header", i + 1)))?;
            cur.history.events.push(event);
        }
    }
    for r in &out {
        r.history
            .transactions()
            .map_err(|e| CliError::Format(format!("iteration {}: {e}", r.header.iteration)))?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ScheduleHeader {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

pub fn read_schedule(text: &str) -> Result<Schedule, CliError> {
    let mut schedule = Schedule::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| CliError::Format(format!("schedule line {}: {e}", i + 1));
        if is_header(line, SCHEDULE_FORMAT).map_err(bad)? {
            let h: ScheduleHeader = serde_json::from_str(line).map_err(bad)?;
            if h.version != FORMAT_VERSION {
                return Err(CliError::Format(format!("schedule line {}: unsupported version {}", i + 1, h.version)));
            }
            schedule.seed = h.seed;
        } else {
            let step: Step = serde_json::from_str(line).map_err(bad)?;
            schedule.steps.push(step);
        }
    }
    Ok(schedule)
}

pub fn schedule_to_string(s: &Schedule) -> String {
    let mut out = to_line(&ScheduleHeader {
        format: SCHEDULE_FORMAT.into(),
        version: FORMAT_VERSION,
        seed: s.seed,
    });
    out.push('\n');
    for step in &s.steps {
        out.push_str(&to_line(step));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u32,
    #[serde(flatten)]
    pub metrics: TxMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: CheckKind,
    pub passed: bool,
    pub histories: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub format: String,
    pub version: u32,
    pub algorithm: Algorithm,
    pub histories: usize,
    pub aggregate: Vec<PathAggregate>,
    pub checks: Vec<CheckSummary>,
    pub transactions: Vec<IterationMetrics>,
}

pub fn read_metrics(text: &str) -> Result<MetricsDoc, CliError> {
    let doc: MetricsDoc = serde_json::from_str(text).map_err(|e| CliError::Format(format!("metrics: {e}")))?;
    if doc.format != METRICS_FORMAT || doc.version != FORMAT_VERSION {
        return Err(CliError::Format(format!(
            "metrics: expected format `{METRICS_FORMAT}` version {FORMAT_VERSION}"
        )));
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hytm_core::{run_to_completion, Path, SimConfig};

    fn sample() -> HistoryRecord {
        let mut s = Schedule::new();
        s.begin(1, 1, Path::Slow).write(1, 0, 3).commit(1);
        let cfg = SimConfig::new(Algorithm::Progressive, 1);
        let history = run_to_completion(cfg, &s).unwrap();
        HistoryRecord {
            header: HistoryHeader {
                format: HISTORY_FORMAT.into(),
                version: FORMAT_VERSION,
                algorithm: cfg.algorithm,
                n_tobjects: 1,
                capacity: cfg.capacity,
                iteration: 0,
                seed: None,
                scenario: None,
                labels: [(TxId(1), "W".to_string())].into(),
                objects: history.objects.clone(),
            },
            history,
        }
    }

    #[test]
    fn history_round_trip() {
        let recs = vec![sample(), sample()];
        let text = histories_to_string(&recs);
        assert_eq!(read_histories(&text).unwrap(), recs);
    }

    #[test]
    fn schedule_round_trip() {
        let mut s = Schedule::new();
        s.begin(1, 1, Path::Fast).read(1, 0).commit(1);
        s.seed = Some(4);
        assert_eq!(read_schedule(&schedule_to_string(&s)).unwrap(), s);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(read_histories("{\"seq\":0,\"tx\":1,\"kind\":\"invoke\",\"op\":{\"op\":\"try_commit\"}}").is_err());
        assert!(read_histories("not json").is_err());
        assert!(read_schedule("{\"step\":\"jump\"}").is_err());
        assert_eq!(read_histories("").unwrap(), vec![]);
    }
}
