//! Output files. Every file is written to a temporary sibling and renamed
//! into place, so a reader never sees a half-written artifact.
//!
//! Floats are printed in shortest round-trip form, which makes equal runs
//! byte-identical.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;
use twinfuse_core::{CycleRecord, Forecast, Metric, ScenarioReport, Transition, UniformTrace, TRIAD};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRANSITIONS_FILE: &str = "transitions.csv";
pub const FORECAST_FILE: &str = "forecast.csv";

/// Paths of the files written by one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub trace: Option<PathBuf>,
    pub metrics: PathBuf,
    pub transitions: Option<PathBuf>,
    pub forecast: Option<PathBuf>,
}

/// Write `contents` to `path` via temp file + rename in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    cycle_index: u64,
    start_index: usize,
    timestamps: Vec<u64>,
    statuses: [&'static str; TRIAD],
    sources: [&'static str; TRIAD],
    rows: [Vec<Option<f64>>; TRIAD],
    flags: &'a [Vec<bool>; TRIAD],
    elementwise: &'a [f64],
    composite: f64,
    participation: usize,
}

impl<'a> From<&'a CycleRecord> for TraceLine<'a> {
    fn from(r: &'a CycleRecord) -> Self {
        TraceLine {
            cycle_index: r.cycle_index,
            start_index: r.start_index,
            timestamps: r.timestamps.iter().map(|t| t.seconds()).collect(),
            statuses: r.statuses.map(|s| s.name()),
            sources: r.sources.map(|s| s.name()),
            rows: std::array::from_fn(|s| r.rows[s].iter().map(|x| x.value()).collect()),
            flags: r.flags.rows(),
            elementwise: &r.elementwise,
            composite: r.composite,
            participation: r.participation,
        }
    }
}

pub fn trace_jsonl(cycles: &[CycleRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for record in cycles {
        serde_json::to_writer(&mut out, &TraceLine::from(record)).expect("trace records serialize");
        out.push(b'\n');
    }
    out
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn opt_sensor(sensor: Option<usize>) -> String {
    sensor.map(|s| s.to_string()).unwrap_or_default()
}

pub fn metrics_csv(metrics: &[Metric], failure_cycle: Option<u64>) -> Vec<u8> {
    let mut rows: Vec<Vec<String>> = metrics
        .iter()
        .map(|m| vec![m.name.clone(), opt_sensor(m.sensor), fmt_f64(m.value)])
        .collect();
    if let Some(c) = failure_cycle {
        rows.push(vec!["total_failure_cycle".into(), String::new(), c.to_string()]);
    }
    csv_bytes(&["metric", "sensor", "value"], rows)
}

pub fn transitions_csv(transitions: &[Transition]) -> Vec<u8> {
    csv_bytes(
        &["cycle", "sensor", "from", "to", "reason"],
        transitions.iter().map(|t| {
            vec![
                t.cycle.to_string(),
                t.sensor.to_string(),
                t.from.name().into(),
                t.to.name().into(),
                t.reason.name().into(),
            ]
        }),
    )
}

/// `timestamp,truth,forecast`; truth is empty where the reading is missing.
pub fn forecast_csv(forecast: &Forecast, truth: &UniformTrace) -> Vec<u8> {
    csv_bytes(
        &["timestamp", "truth", "forecast"],
        forecast
            .timestamps
            .iter()
            .zip(&forecast.values)
            .zip(truth.readings())
            .map(|((t, f), r)| {
                vec![
                    t.seconds().to_string(),
                    r.value().map(fmt_f64).unwrap_or_default(),
                    fmt_f64(*f),
                ]
            }),
    )
}

/// Write the three scenario files into `dir`.
pub fn write_run(dir: &Path, report: &ScenarioReport) -> io::Result<RunArtifacts> {
    std::fs::create_dir_all(dir)?;
    let artifacts = RunArtifacts {
        trace: Some(dir.join(TRACE_FILE)),
        metrics: dir.join(METRICS_FILE),
        transitions: Some(dir.join(TRANSITIONS_FILE)),
        forecast: None,
    };
    write_atomic(artifacts.trace.as_deref().unwrap(), &trace_jsonl(&report.cycles))?;
    write_atomic(
        &artifacts.metrics,
        &metrics_csv(&report.metrics, report.failure_cycle()),
    )?;
    write_atomic(
        artifacts.transitions.as_deref().unwrap(),
        &transitions_csv(&report.transitions),
    )?;
    Ok(artifacts)
}
