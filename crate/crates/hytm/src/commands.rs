//! The `run`, `scenario` and `report` verbs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path as FsPath;

use hytm_core::checker::{check, DepReason, Outcome, Property, Verdict};
use hytm_core::metrics::{aggregate, audit_footprint, audit_invisible_reads, audit_progress, tx_metrics, Condition, PathAggregate, Violation};
use hytm_core::runtime::tx_label;
use hytm_core::scenario::{self, Scenario};
use hytm_core::{gen_random_schedule, Algorithm, FuzzParams, History, Path, Runtime, Schedule, SimConfig, TxId, TxStatus};
use serde::Serialize;

use crate::config::{CheckKind, RunConfig, ScheduleSource};
use crate::error::CliError;
use crate::io::{
    histories_to_string, read_histories, read_metrics, read_schedule, CheckSummary, HistoryHeader,
    HistoryRecord, IterationMetrics, MetricsDoc, FORMAT_VERSION, HISTORY_FORMAT, METRICS_FORMAT,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Failure lines printed per check before the rest are summarized.
const SHOWN_FAILURES: usize = 10;

struct Job {
    config: SimConfig,
    schedule: Schedule,
    iteration: u32,
    scenario: Option<String>,
    labels: BTreeMap<TxId, String>,
}

fn scenario_job(cfg: &RunConfig, name: &str) -> Result<Job, CliError> {
    let sc = scenario::by_name(name).map_err(|e| CliError::Config(e.to_string()))?;
    let mut config = sc.config;
    if let Some(a) = cfg.algorithm {
        config.algorithm = a;
    }
    Ok(Job {
        config,
        schedule: sc.schedule,
        iteration: 0,
        scenario: Some(sc.name.into()),
        labels: sc.labels,
    })
}

fn jobs(cfg: &RunConfig) -> Result<Vec<Job>, CliError> {
    let sim = || {
        SimConfig::new(cfg.algorithm.expect("validated"), cfg.n_tobjects.expect("validated"))
            .with_capacity(cfg.capacity)
    };
    let single = |schedule: Schedule| Job {
        config: sim(),
        schedule,
        iteration: 0,
        scenario: None,
        labels: BTreeMap::new(),
    };
    Ok(match &cfg.schedule {
        ScheduleSource::Inline { steps } => vec![single(Schedule {
            steps: steps.clone(),
            seed: None,
        })],
        ScheduleSource::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            vec![single(read_schedule(&text)?)]
        }
        ScheduleSource::Scenario { name } => vec![scenario_job(cfg, name)?],
        ScheduleSource::Fuzz(f) => (0..f.iterations)
            .map(|i| {
                let params = FuzzParams {
                    seed: f.seed.wrapping_add(u64::from(i)),
                    n_txns: f.n_txns,
                    n_tobjects: cfg.n_tobjects.expect("validated"),
                    ops_per_txn: f.ops_per_txn,
                    fast_fraction: f.fast_fraction,
                };
                let schedule = gen_random_schedule(params).map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Job {
                    iteration: i,
                    ..single(schedule)
                })
            })
            .collect::<Result<_, CliError>>()?,
    })
}

fn execute(job: Job) -> Result<HistoryRecord, CliError> {
    let mut rt = Runtime::new(job.config).map_err(|e| CliError::Config(e.to_string()))?;
    rt.run(&job.schedule)
        .map_err(|e| CliError::Config(format!("iteration {}: {e}", job.iteration)))?;
    let history = rt.into_history();
    Ok(HistoryRecord {
        header: HistoryHeader {
            format: HISTORY_FORMAT.into(),
            version: FORMAT_VERSION,
            algorithm: job.config.algorithm,
            n_tobjects: job.config.n_tobjects,
            capacity: job.config.capacity,
            iteration: job.iteration,
            seed: job.schedule.seed,
            scenario: job.scenario,
            labels: job.labels,
            objects: history.objects.clone(),
        },
        history,
    })
}

/// Runs every schedule the config describes.
pub fn execute_config(cfg: &RunConfig) -> Result<Vec<HistoryRecord>, CliError> {
    jobs(cfg)?.into_iter().map(execute).collect()
}

fn dep(reason: &DepReason) -> String {
    match reason {
        DepReason::RealTime => "rt".into(),
        DepReason::ReadsFrom { tobj } => format!("wr {tobj}"),
        DepReason::AntiDependency { tobj } => format!("rw {tobj}"),
    }
}

/// One-line rendering of a verdict, using scenario labels where present.
pub fn render_verdict(v: &Verdict, labels: &BTreeMap<TxId, String>) -> String {
    let l = |t: TxId| tx_label(labels, t);
    match &v.outcome {
        Outcome::Pass { witness, .. } => format!(
            "{}: PASS, serialization {}",
            v.property,
            witness.iter().map(|&t| l(t)).collect::<Vec<_>>().join(" ")
        ),
        Outcome::Fail {
            cycle,
            forced_commits,
            note,
        } => {
            let what = match v.property {
                Property::Opacity => "NOT opaque",
                Property::StrictSerializability => "NOT strictly serializable",
            };
            let mut s = format!("{}: FAIL, {what}; {note}", v.property);
            if let Some(first) = cycle.first() {
                s.push_str(&format!("; cycle {}", l(first.from)));
                for d in cycle {
                    s.push_str(&format!(" -[{}]-> {}", dep(&d.reason), l(d.to)));
                }
            }
            for &(p, r) in forced_commits {
                s.push_str(&format!("; {} must commit ({} read its write)", l(p), l(r)));
            }
            s
        }
    }
}

fn violations_of(algorithm: Algorithm, kind: CheckKind, h: &History) -> Result<Vec<Violation>, CliError> {
    let malformed = |e: hytm_core::history::HistoryError| CliError::Format(e.to_string());
    Ok(match kind {
        CheckKind::Progress => match algorithm {
            Algorithm::Progressive => audit_progress(h, Condition::Progressive, None).map_err(malformed)?,
            Algorithm::Constant => {
                let mut v = audit_progress(h, Condition::Progressive, Some(Path::Slow)).map_err(malformed)?;
                v.extend(audit_progress(h, Condition::Sequential, Some(Path::Fast)).map_err(malformed)?);
                v
            }
            Algorithm::Naive => audit_progress(h, Condition::Sequential, None).map_err(malformed)?,
        },
        CheckKind::InvisibleReads => audit_invisible_reads(h, None).map_err(malformed)?,
        CheckKind::Footprint => audit_footprint(h, algorithm).map_err(malformed)?,
        CheckKind::Opacity | CheckKind::StrictSerializability => unreachable!(),
    })
}

/// Evaluates one check on one history: `Ok(None)` on pass, a failure line
/// otherwise.
fn run_check(kind: CheckKind, rec: &HistoryRecord, limit: usize) -> Result<Option<String>, CliError> {
    let h = &rec.history;
    let labels = &rec.header.labels;
    let property = match kind {
        CheckKind::Opacity => Some(Property::Opacity),
        CheckKind::StrictSerializability => Some(Property::StrictSerializability),
        _ => None,
    };
    if let Some(p) = property {
        let v = check(h, p, limit)
            .map_err(|e| CliError::Config(format!("iteration {}: checker refused: {e}", rec.header.iteration)))?;
        return Ok((!v.passed()).then(|| render_verdict(&v, labels)));
    }
    let v = violations_of(rec.header.algorithm, kind, h)?;
    Ok((!v.is_empty()).then(|| {
        v.iter()
            .map(|x| format!("{}: {}", tx_label(labels, x.tx), x.clause))
            .collect::<Vec<_>>()
            .join("; ")
    }))
}

fn metrics_doc(algorithm: Algorithm, recs: &[HistoryRecord], checks: Vec<CheckSummary>) -> Result<MetricsDoc, CliError> {
    let mut transactions = Vec::new();
    for r in recs {
        for m in tx_metrics(&r.history).map_err(|e| CliError::Format(e.to_string()))? {
            transactions.push(IterationMetrics {
                iteration: r.header.iteration,
                metrics: m,
            });
        }
    }
    Ok(MetricsDoc {
        format: METRICS_FORMAT.into(),
        version: FORMAT_VERSION,
        algorithm,
        histories: recs.len(),
        aggregate: aggregate(transactions.iter().map(|t| &t.metrics)),
        checks,
        transactions,
    })
}

fn write_file(path: &FsPath, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn w(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::io(FsPath::new("<stdout>"), e))
}

pub fn cmd_run(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let recs = execute_config(cfg)?;
    let algorithm = recs
        .first()
        .map(|r| r.header.algorithm)
        .or(cfg.algorithm)
        .expect("at least one history or an algorithm");
    if let Some(path) = &cfg.outputs.history {
        write_file(path, &histories_to_string(&recs))?;
    }
    let mut summaries = Vec::new();
    for &kind in &cfg.checks {
        let mut failures = Vec::new();
        for r in &recs {
            if let Some(f) = run_check(kind, r, cfg.limit)? {
                failures.push(format!("iteration {}: {f}", r.header.iteration));
            }
        }
        summaries.push(CheckSummary {
            check: kind,
            passed: failures.is_empty(),
            histories: recs.len(),
            failures,
        });
    }
    let doc = metrics_doc(algorithm, &recs, summaries)?;
    w(out, format!("{algorithm}: {} histories", recs.len()))?;
    for s in &doc.checks {
        if s.passed {
            w(out, format!("{}: PASS ({} histories)", s.check, s.histories))?;
        } else {
            w(out, format!("{}: FAIL ({} of {} histories)", s.check, s.failures.len(), s.histories))?;
            for f in s.failures.iter().take(SHOWN_FAILURES) {
                w(out, format!("  {f}"))?;
            }
            if s.failures.len() > SHOWN_FAILURES {
                w(out, format!("  ... {} more", s.failures.len() - SHOWN_FAILURES))?;
            }
        }
    }
    if cfg.checks.contains(&CheckKind::Footprint) {
        let fast = &doc.aggregate[0];
        w(
            out,
            format!(
                "max fast-path footprint: {} (read-only {}, write-only {}, mean {:.3})",
                fast.max_footprint, fast.max_footprint_read_only, fast.max_footprint_write_only, fast.mean_footprint
            ),
        )?;
    }
    if let Some(path) = &cfg.outputs.metrics {
        let text = serde_json::to_string_pretty(&doc).expect("metrics serialize");
        write_file(path, &(text + "\n"))?;
    }
    Ok(if doc.checks.iter().all(|s| s.passed) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    })
}

pub fn cmd_scenario(name: &str, history: Option<&FsPath>, out: &mut dyn Write) -> Result<i32, CliError> {
    let sc: Scenario = scenario::by_name(name).map_err(|e| CliError::Config(e.to_string()))?;
    let report = sc.run().map_err(|e| CliError::Config(e.to_string()))?;
    w(out, format!("scenario {}: {}", sc.name, sc.summary))?;
    for d in &report.details {
        w(out, format!("  {d}"))?;
    }
    if let Some(v) = &report.verdict {
        w(out, format!("  {}", render_verdict(v, &sc.labels)))?;
    }
    w(out, format!("assertion {}", if report.holds { "holds" } else { "VIOLATED" }))?;
    if let Some(path) = history {
        let rec = HistoryRecord {
            header: HistoryHeader {
                format: HISTORY_FORMAT.into(),
                version: FORMAT_VERSION,
                algorithm: sc.config.algorithm,
                n_tobjects: sc.config.n_tobjects,
                capacity: sc.config.capacity,
                iteration: 0,
                seed: None,
                scenario: Some(sc.name.into()),
                labels: sc.labels.clone(),
                objects: report.history.objects.clone(),
            },
            history: report.history,
        };
        write_file(path, &histories_to_string(&[rec]))?;
    }
    Ok(if report.holds { EXIT_PASS } else { EXIT_FAIL })
}

#[derive(Serialize)]
struct TxRow {
    tx: TxId,
    label: String,
    path: Option<Path>,
    status: &'static str,
    footprint: usize,
    abort_class: Option<hytm_core::AbortClass>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum VerdictEntry {
    Verdict(Verdict),
    Refused { property: Property, refused: String },
}

#[derive(Serialize)]
struct HistorySummary {
    iteration: u32,
    algorithm: Algorithm,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    transactions: Vec<TxRow>,
    verdicts: Vec<VerdictEntry>,
}

#[derive(Serialize)]
struct ReportDoc {
    histories: Vec<HistorySummary>,
    aggregate: Vec<PathAggregate>,
}

fn status_name(s: TxStatus) -> &'static str {
    match s {
        TxStatus::Committed => "committed",
        TxStatus::Aborted(_) => "aborted",
        TxStatus::Live => "live",
        TxStatus::Pending => "pending",
    }
}

fn summarize(rec: &HistoryRecord, limit: usize) -> Result<HistorySummary, CliError> {
    let h = &rec.history;
    let malformed = |e: hytm_core::history::HistoryError| CliError::Format(e.to_string());
    let metrics = tx_metrics(h).map_err(malformed)?;
    let records = h.transactions().map_err(malformed)?;
    let transactions = records
        .iter()
        .zip(&metrics)
        .map(|(r, m)| TxRow {
            tx: r.id,
            label: tx_label(&rec.header.labels, r.id),
            path: r.path,
            status: status_name(r.status()),
            footprint: m.distinct_metadata_accessed,
            abort_class: m.abort_class,
        })
        .collect();
    let verdicts = [Property::Opacity, Property::StrictSerializability]
        .into_iter()
        .map(|p| match check(h, p, limit) {
            Ok(v) => VerdictEntry::Verdict(v),
            Err(e) => VerdictEntry::Refused {
                property: p,
                refused: e.to_string(),
            },
        })
        .collect();
    Ok(HistorySummary {
        iteration: rec.header.iteration,
        algorithm: rec.header.algorithm,
        scenario: rec.header.scenario.clone(),
        transactions,
        verdicts,
    })
}

fn aggregate_table(out: &mut dyn Write, agg: &[PathAggregate]) -> Result<(), CliError> {
    w(out, format!("{:<5} {:>6} {:>9} {:>8} {:>9} {:>9} {:>10}", "path", "txns", "committed", "max-fp", "mean-fp", "ro-max-fp", "wo-max-fp"))?;
    for a in agg.iter().filter(|a| a.transactions > 0) {
        w(
            out,
            format!(
                "{:<5} {:>6} {:>9} {:>8} {:>9.3} {:>9} {:>10}",
                a.path, a.transactions, a.committed, a.max_footprint, a.mean_footprint, a.max_footprint_read_only, a.max_footprint_write_only
            ),
        )?;
    }
    Ok(())
}

pub fn cmd_report(
    history: &FsPath,
    metrics: Option<&FsPath>,
    json: bool,
    limit: usize,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(history).map_err(|e| CliError::io(history, e))?;
    let recs = read_histories(&text)?;
    let aggregate_rows = match metrics {
        Some(p) => read_metrics(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?.aggregate,
        None => {
            let mut all = Vec::new();
            for r in &recs {
                all.extend(tx_metrics(&r.history).map_err(|e| CliError::Format(e.to_string()))?);
            }
            aggregate(&all)
        }
    };
    let summaries = recs.iter().map(|r| summarize(r, limit)).collect::<Result<Vec<_>, _>>()?;
    if json {
        let doc = ReportDoc {
            histories: summaries,
            aggregate: aggregate_rows,
        };
        w(out, serde_json::to_string_pretty(&doc).expect("report serializes"))?;
        return Ok(EXIT_PASS);
    }
    for (s, r) in summaries.iter().zip(&recs) {
        let title = match &s.scenario {
            Some(name) => format!("scenario {name}"),
            None => format!("iteration {}", s.iteration),
        };
        w(out, format!("{title} ({}, {} t-objects)", s.algorithm, r.header.n_tobjects))?;
        w(out, format!("{:<8} {:<5} {:<10} {:>9}  {}", "tx", "path", "status", "footprint", "abort"))?;
        for t in &s.transactions {
            w(
                out,
                format!(
                    "{:<8} {:<5} {:<10} {:>9}  {}",
                    t.label,
                    t.path.map_or("-".to_string(), |p| p.to_string()),
                    t.status,
                    t.footprint,
                    t.abort_class.map_or("-".to_string(), |c| c.to_string())
                ),
            )?;
        }
        for v in &s.verdicts {
            match v {
                VerdictEntry::Verdict(v) => w(out, render_verdict(v, &r.header.labels))?,
                VerdictEntry::Refused { property, refused } => w(out, format!("{property}: refused, {refused}"))?,
            }
        }
        w(out, "")?;
    }
    aggregate_table(out, &aggregate_rows)?;
    Ok(EXIT_PASS)
}
