//! Scenario runner for `twinfuse-core`: config files, mote-log ingestion,
//! synthetic generators, artifact writers and the `twinfuse` commands.

pub mod artifacts;
pub mod config;
pub mod ingest;
pub mod synth;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use twinfuse_core::{
    fit, fusion_cycle, run_scenario, tracking_duration, validate_config, FusionState, Metric, ScenarioConfig,
    ScenarioError, Threshold, Timestamp, TriadWindow, TRIAD,
};

use artifacts::{forecast_csv, metrics_csv, write_atomic, write_run, RunArtifacts, FORECAST_FILE, METRICS_FILE};
use config::{load, ConfigFileError};

/// Environment variable capping the number of scenarios run concurrently.
pub const MAX_WORKERS_ENV: &str = "TWINFUSE_MAX_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("total failure at cycle {cycle}; partial artifacts written to {}", dir.display())]
    TotalFailure { cycle: u64, dir: PathBuf },
    #[error("fusion demo mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::TotalFailure { .. } => 3,
            CliError::Io(_) | CliError::Mismatch(_) => 1,
        }
    }
}

impl From<ConfigFileError> for CliError {
    fn from(e: ConfigFileError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Run one scenario config and write its artifacts into `out`.
pub fn cmd_run(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<RunArtifacts, CliError> {
    let loaded = load(config_path)?;
    let cfg = loaded.scenario(seed)?;
    let traces = loaded.traces(cfg.twin.train_len + cfg.run_len)?;
    let report = run_scenario(&cfg, &traces.sensors, traces.truth.as_deref()).map_err(|e| match e {
        ScenarioError::Config(_) | ScenarioError::TooShort { .. } | ScenarioError::Fault { .. } => {
            CliError::Usage(format!("{}: {e}", config_path.display()))
        }
        other => CliError::Io(format!("{}: {other}", config_path.display())),
    })?;
    let written = write_run(out, &report).map_err(io_error(out))?;
    match report.failure_cycle() {
        Some(cycle) => Err(CliError::TotalFailure {
            cycle,
            dir: out.to_owned(),
        }),
        None => Ok(written),
    }
}

/// Output directory per config: `out` itself for a single config, otherwise
/// `out/<file stem>`.
pub fn output_dirs(configs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>, CliError> {
    if configs.len() == 1 {
        return Ok(vec![out.to_owned()]);
    }
    let mut dirs = Vec::with_capacity(configs.len());
    for c in configs {
        let stem = c
            .file_stem()
            .ok_or_else(|| CliError::Usage(format!("{}: config path has no file name", c.display())))?;
        let dir = out.join(stem);
        if dirs.contains(&dir) {
            return Err(CliError::Usage(format!(
                "two configs share the stem {:?}; their outputs would collide",
                stem
            )));
        }
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Run several configs on at most `max_workers` threads. Results come back
/// in input order.
pub fn cmd_run_many(
    configs: &[PathBuf],
    out: &Path,
    seed: Option<u64>,
    max_workers: usize,
) -> Result<Vec<Result<RunArtifacts, CliError>>, CliError> {
    let dirs = output_dirs(configs, out)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunArtifacts, CliError>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    let workers = max_workers.clamp(1, configs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let result = cmd_run(&configs[i], &dirs[i], seed);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(result);
            });
        }
    });
    Ok(results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every config was run"))
        .collect())
}

const DEMO_S1: [f64; 5] = [7., 8., 8., 7., 6.];
const DEMO_S2: [f64; 5] = [6., 7., 8., 8., 7.];
const DEMO_S2_FAULTED: [f64; 5] = [6., 0., 0., 8., 7.];
const DEMO_S3: [f64; 5] = [7., 6., 7., 8., 8.];
const DEMO_TOL: f64 = 1e-9;

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

/// Two fusion cycles on the worked example: a clean cycle, then a cycle in
/// which Sensor-2 reads 0 at positions 1 and 2.
pub fn cmd_fusion_demo(out: &mut impl Write) -> Result<(), CliError> {
    let threshold = Threshold::absolute(3.0);
    let w1 = TriadWindow::from_values([&DEMO_S1, &DEMO_S2, &DEMO_S3]).expect("equal rows");
    let w2 = TriadWindow::from_values([&DEMO_S1, &DEMO_S2_FAULTED, &DEMO_S3]).expect("equal rows");
    let (c1, state) = fusion_cycle(&w1, &FusionState::default(), threshold).expect("clean cycle fuses");
    let (c2, _) = fusion_cycle(&w2, &state, threshold).expect("corrected cycle fuses");
    let corrected = c2.corrected[1].as_deref().unwrap_or_default();
    let write = |out: &mut dyn Write, text: String| -> Result<(), CliError> {
        writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
    };
    write(out, format!("cycle 1 elementwise: {}", join(&c1.elementwise)))?;
    write(
        out,
        format!("cycle 1 composite: {:.2} ({})", c1.composite, c1.composite),
    )?;
    write(
        out,
        format!(
            "cycle 2 flagged Sensor-2 positions: {:?}",
            flagged_positions(&c2.flags.rows()[1])
        ),
    )?;
    write(out, format!("cycle 2 corrected Sensor-2: {}", join(corrected)))?;
    write(out, format!("cycle 2 elementwise: {}", join(&c2.elementwise)))?;
    write(
        out,
        format!("cycle 2 composite: {:.2} ({})", c2.composite, c2.composite),
    )?;

    let mut problems = Vec::new();
    if (c1.composite - 7.2).abs() > DEMO_TOL {
        problems.push(format!("cycle 1 composite {} != 7.2", c1.composite));
    }
    if (c2.composite - 7.16).abs() > DEMO_TOL {
        problems.push(format!("cycle 2 composite {} != 7.16", c2.composite));
    }
    let expected_row = [6., 7.2, 7.2, 8., 7.];
    if corrected.len() != 5
        || corrected
            .iter()
            .zip(expected_row)
            .any(|(a, b)| (a - b).abs() > DEMO_TOL)
    {
        problems.push(format!(
            "corrected Sensor-2 row [{}] != [6, 7.2, 7.2, 8, 7]",
            join(corrected)
        ));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Mismatch(problems.join("; ")))
    }
}

fn flagged_positions(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect()
}

/// Fit a twin on `train_len` readings of one sensor, forecast `horizon`
/// steps and compare with that sensor's held-out readings.
pub fn cmd_twin_eval(config_path: &Path, out: &Path) -> Result<RunArtifacts, CliError> {
    let loaded = load(config_path)?;
    let usage = |msg: String| CliError::Usage(format!("{}: {msg}", config_path.display()));
    let eval = loaded
        .file
        .eval
        .clone()
        .ok_or_else(|| usage("[eval] section with horizon and tolerance is required".into()))?;
    if eval.sensor >= TRIAD {
        return Err(usage(format!("eval.sensor must be 0, 1 or 2, got {}", eval.sensor)));
    }
    if eval.horizon == 0 {
        return Err(usage("eval.horizon must be ≥ 1".into()));
    }
    if !(eval.tolerance.is_finite() && eval.tolerance >= 0.0) {
        return Err(usage("eval.tolerance must be finite and ≥ 0".into()));
    }
    let settings = loaded.file.twin.settings();
    validate_config(ScenarioConfig {
        twin: settings,
        ..ScenarioConfig::default()
    })
    .map_err(|e| usage(e.to_string()))?;

    let train_len = settings.train_len;
    let traces = loaded.traces(train_len + eval.horizon)?;
    let trace = &traces.sensors[eval.sensor];
    let history = trace.slice(0, train_len);
    let truth = trace.slice(train_len, train_len + eval.horizon);
    let twin = fit(&history, &settings).map_err(|e| usage(format!("twin fit failed: {e}")))?;
    let timestamps: Vec<Timestamp> = truth.timestamps().collect();
    let forecast = twin.predict(&timestamps);

    let errors: Vec<f64> = forecast
        .values
        .iter()
        .zip(truth.readings())
        .filter_map(|(f, r)| r.value().map(|v| f - v))
        .collect();
    let n = errors.len().max(1) as f64;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let tracking = tracking_duration(&forecast, &truth, eval.tolerance).expect("forecast built on truth grid");

    let metric = |name: &str, value: f64| Metric {
        name: name.into(),
        sensor: Some(eval.sensor),
        value,
    };
    let metrics = [
        metric("mae", mae),
        metric("rmse", rmse),
        metric("tracking_duration_s", tracking as f64),
    ];
    std::fs::create_dir_all(out).map_err(io_error(out))?;
    let artifacts = RunArtifacts {
        trace: None,
        metrics: out.join(METRICS_FILE),
        transitions: None,
        forecast: Some(out.join(FORECAST_FILE)),
    };
    let forecast_path = artifacts.forecast.as_deref().expect("set above");
    write_atomic(forecast_path, &forecast_csv(&forecast, &truth)).map_err(io_error(forecast_path))?;
    write_atomic(&artifacts.metrics, &metrics_csv(&metrics, None)).map_err(io_error(&artifacts.metrics))?;
    Ok(artifacts)
}
