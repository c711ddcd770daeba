//! Cycle-by-cycle simulation of a triad with digital-twin substitution.
//!
//! Each cycle covers one tumbling window of `lookback_n` grid points after the
//! twin training span. Within a cycle:
//!
//! 1. due repair events bring sensors back as `Live` with a cold twin;
//! 2. the window is assembled from physical readings (`Live`), twin
//!    forecasts (`TwinSubstituted`) or nothing (`Dropped`, `UnderRepair`);
//! 3. the detector runs against the last composite. With three rows, every
//!    flagged `Live` sensor with a warm twin is swapped for that twin. With
//!    two rows, any flag makes the cycle pick one row uniformly at random
//!    (seeded) and retire the other as `UnderRepair`. With a single row, a
//!    flag is a total failure;
//! 4. the window is fused;
//! 5. a substituted twin flagged in `patience` consecutive cycles is
//!    `Dropped` from the next cycle on;
//! 6. `Live` sensors feed their unflagged readings to their twins.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detector::{check, divergence_event, AnomalyFlags};
use crate::faults::{inject, repair_index, FaultError, FaultSpec};
use crate::fusion::{fusion_cycle, FusionError, FusionState};
use crate::model::{
    align_triads, validate_config, AlignError, ConfigError, Reading, ScenarioConfig, Timestamp, TriadWindow,
    UniformTrace, TRIAD,
};
use crate::twin::{fit_points, tracking_duration, Forecast, TwinModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorStatus {
    Live,
    TwinSubstituted,
    Dropped,
    UnderRepair,
}

impl SensorStatus {
    pub const fn name(self) -> &'static str {
        match self {
            SensorStatus::Live => "live",
            SensorStatus::TwinSubstituted => "twin_substituted",
            SensorStatus::Dropped => "dropped",
            SensorStatus::UnderRepair => "under_repair",
        }
    }

    /// Edges of the lifecycle graph, self-loops included.
    pub fn can_become(self, to: SensorStatus) -> bool {
        use SensorStatus::*;
        self == to
            || matches!(
                (self, to),
                (Live, TwinSubstituted)
                    | (TwinSubstituted, Dropped)
                    | (TwinSubstituted, Live)
                    | (Dropped, Live)
                    | (Live, UnderRepair)
                    | (TwinSubstituted, UnderRepair)
                    | (UnderRepair, Live)
            )
    }

    pub const fn participates(self) -> bool {
        matches!(self, SensorStatus::Live | SensorStatus::TwinSubstituted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowSource {
    Physical,
    Twin,
    Excluded,
}

impl RowSource {
    pub const fn name(self) -> &'static str {
        match self {
            RowSource::Physical => "physical",
            RowSource::Twin => "twin",
            RowSource::Excluded => "excluded",
        }
    }

    fn of(status: SensorStatus) -> RowSource {
        match status {
            SensorStatus::Live => RowSource::Physical,
            SensorStatus::TwinSubstituted => RowSource::Twin,
            SensorStatus::Dropped | SensorStatus::UnderRepair => RowSource::Excluded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionReason {
    Anomaly,
    Divergence,
    RandomSelection,
    Repair,
}

impl TransitionReason {
    pub const fn name(self) -> &'static str {
        match self {
            TransitionReason::Anomaly => "anomaly",
            TransitionReason::Divergence => "divergence",
            TransitionReason::RandomSelection => "random_selection",
            TransitionReason::Repair => "repair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub cycle: u64,
    pub sensor: usize,
    pub from: SensorStatus,
    pub to: SensorStatus,
    pub reason: TransitionReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle_index: u64,
    /// Grid index of the first window position.
    pub start_index: usize,
    pub timestamps: Vec<Timestamp>,
    /// Statuses in effect while the cycle was fused.
    pub statuses: [SensorStatus; TRIAD],
    pub sources: [RowSource; TRIAD],
    /// Readings as presented to fusion, before auto-correction.
    pub rows: [Vec<Reading>; TRIAD],
    pub flags: AnomalyFlags,
    pub elementwise: Vec<f64>,
    pub composite: f64,
    pub participation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub sensor: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    /// No trustworthy row was left at this cycle; later cycles were not run.
    TotalFailure {
        cycle: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub cycles: Vec<CycleRecord>,
    pub transitions: Vec<Transition>,
    pub metrics: Vec<Metric>,
    pub outcome: Outcome,
}

impl ScenarioReport {
    pub fn failure_cycle(&self) -> Option<u64> {
        match self.outcome {
            Outcome::Completed => None,
            Outcome::TotalFailure { cycle } => Some(cycle),
        }
    }

    pub fn metric(&self, name: &str, sensor: Option<usize>) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.name == name && m.sensor == sensor)
            .map(|m| m.value)
    }

    /// Replay the transition log from all-`Live` and check that every edge is
    /// legal and that the replayed statuses match each cycle record.
    /// Divergence drops are decided after fusion, so they apply after the
    /// cycle's own statuses are compared.
    pub fn replay_is_consistent(&self) -> bool {
        let mut status = [SensorStatus::Live; TRIAD];
        let apply = |t: &Transition, status: &mut [SensorStatus; TRIAD]| {
            let ok = status[t.sensor] == t.from && t.from != t.to && t.from.can_become(t.to);
            status[t.sensor] = t.to;
            ok
        };
        let mut next = 0;
        for record in &self.cycles {
            let c = record.cycle_index;
            let pending = |t: &&Transition| t.cycle < c || (t.cycle == c && t.reason != TransitionReason::Divergence);
            while let Some(t) = self.transitions.get(next).filter(pending) {
                if !apply(t, &mut status) {
                    return false;
                }
                next += 1;
            }
            if record.statuses != status {
                return false;
            }
            while let Some(t) = self.transitions.get(next).filter(|t| t.cycle == c) {
                if !apply(t, &mut status) {
                    return false;
                }
                next += 1;
            }
        }
        self.transitions[next..].iter().all(|t| apply(t, &mut status))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("traces have {got} grid points, scenario needs twin_train_len + run_len = {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("fault {index}: {source}")]
    Fault { index: usize, source: FaultError },
    #[error("ground truth has {got} points, traces have {expected}")]
    TruthLength { got: usize, expected: usize },
}

#[derive(Debug, Clone)]
enum TwinSlot {
    Warm(TwinModel),
    /// Collecting readings until a full training window is available.
    Cold(Vec<(Timestamp, f64)>),
}

/// Readings for one cycle, taken from the physical trace, the twin forecast
/// or nowhere depending on each sensor's source.
pub fn assemble_window(
    sources: [RowSource; TRIAD],
    physical: [&[Reading]; TRIAD],
    twins: [Option<&TwinModel>; TRIAD],
    timestamps: &[Timestamp],
) -> TriadWindow {
    let rows = core::array::from_fn(|s| match sources[s] {
        RowSource::Physical => physical[s].to_vec(),
        RowSource::Twin => {
            let model = twins[s].expect("twin source requires a fitted model");
            model
                .predict(timestamps)
                .values
                .into_iter()
                .map(Reading::present)
                .collect()
        }
        RowSource::Excluded => vec![Reading::MISSING; timestamps.len()],
    });
    let active = sources.map(|s| s != RowSource::Excluded);
    TriadWindow::with_active(timestamps.to_vec(), rows, active).expect("rows match timestamps")
}

/// Per-fault seed for intermittent draws.
pub fn fault_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// ChaCha8 stream used for random row selection.
const SELECTION_STREAM: u64 = 1;

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    faulted: [UniformTrace; TRIAD],
    status: [SensorStatus; TRIAD],
    twins: [TwinSlot; TRIAD],
    divergence: [Vec<AnomalyFlags>; TRIAD],
    transitions: Vec<Transition>,
    rng: ChaCha8Rng,
}

impl Run<'_> {
    fn transition(&mut self, cycle: u64, sensor: usize, to: SensorStatus, reason: TransitionReason) {
        let from = self.status[sensor];
        debug_assert!(from.can_become(to), "{from:?} -> {to:?}");
        self.status[sensor] = to;
        if to == SensorStatus::TwinSubstituted {
            self.divergence[sensor].clear();
        }
        self.transitions.push(Transition {
            cycle,
            sensor,
            from,
            to,
            reason,
        });
    }

    fn warm_twin(&mut self, sensor: usize) -> Option<&TwinModel> {
        match &mut self.twins[sensor] {
            TwinSlot::Warm(model) => {
                // a failed refit keeps the previous fit
                let _ = model.refresh();
                Some(model)
            }
            TwinSlot::Cold(_) => None,
        }
    }

    fn feed_twin(&mut self, sensor: usize, t: Timestamp, value: f64) {
        let settings = self.cfg.twin;
        let interval = self.faulted[sensor].interval_s();
        match &mut self.twins[sensor] {
            TwinSlot::Warm(model) => {
                let _ = model.observe(t, value);
            }
            TwinSlot::Cold(points) => {
                points.push((t, value));
                if points.len() >= settings.train_len {
                    if let Ok(model) = fit_points(points, interval, t, &settings) {
                        self.twins[sensor] = TwinSlot::Warm(model);
                    }
                }
            }
        }
    }
}

/// Run the full lifecycle over three clean traces. `truth`, when given, is
/// the noiseless signal used for the fused-output metrics; otherwise the
/// per-point mean of the clean traces is used.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    clean: &[UniformTrace; TRIAD],
    truth: Option<&[f64]>,
) -> Result<ScenarioReport, ScenarioError> {
    let cfg = &validate_config(cfg.clone())?;
    let n = cfg.lookback_n;
    let train_len = cfg.twin.train_len;
    align_triads(&clean[0], &clean[1], &clean[2], n)?;
    let len = clean[0].len();
    let needed = train_len + cfg.run_len;
    if len < needed {
        return Err(ScenarioError::TooShort { needed, got: len });
    }
    if let Some(truth) = truth {
        if truth.len() != len {
            return Err(ScenarioError::TruthLength {
                got: truth.len(),
                expected: len,
            });
        }
    }
    let interval = clean[0].interval_s();

    // fault episodes, cut short by repair when configured
    let episodes: Vec<(usize, FaultSpec)> = cfg
        .fault_specs
        .iter()
        .map(|f| {
            let mut spec = f.spec;
            if let Some(after) = cfg.repair_after_s {
                let repaired = repair_index(&spec, after, interval);
                spec.duration = spec.duration.min(repaired - spec.start_idx);
            }
            (f.sensor, spec)
        })
        .collect();
    let mut faulted = clean.clone();
    for (index, (sensor, spec)) in episodes.iter().enumerate() {
        let (out, _) = inject(&faulted[*sensor], spec, fault_seed(cfg.seed, index))
            .map_err(|source| ScenarioError::Fault { index, source })?;
        faulted[*sensor] = out;
    }
    let mut repairs: Vec<(usize, usize)> = match cfg.repair_after_s {
        Some(after) => cfg
            .fault_specs
            .iter()
            .map(|f| (repair_index(&f.spec, after, interval), f.sensor))
            .collect(),
        None => Vec::new(),
    };
    repairs.sort_unstable();

    let twins = core::array::from_fn(|s| {
        let history = faulted[s].slice(0, train_len);
        let points: Vec<_> = history.present_points().collect();
        let through = history.timestamp_at(train_len - 1);
        match fit_points(&points, interval, through, &cfg.twin) {
            Ok(model) => TwinSlot::Warm(model),
            Err(_) => TwinSlot::Cold(points),
        }
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SELECTION_STREAM);
    let mut run = Run {
        cfg,
        faulted,
        status: [SensorStatus::Live; TRIAD],
        twins,
        divergence: Default::default(),
        transitions: Vec::new(),
        rng,
    };

    let mut state = FusionState::default();
    let mut cycles = Vec::new();
    let mut outcome = Outcome::Completed;
    let mut next_repair = 0;

    for cycle in 0..(cfg.run_len / n) as u64 {
        let start = train_len + cycle as usize * n;
        let timestamps: Vec<Timestamp> = (start..start + n).map(|i| run.faulted[0].timestamp_at(i)).collect();

        while next_repair < repairs.len() && repairs[next_repair].0 <= start {
            let sensor = repairs[next_repair].1;
            if run.status[sensor] != SensorStatus::Live {
                run.transition(cycle, sensor, SensorStatus::Live, TransitionReason::Repair);
                run.twins[sensor] = TwinSlot::Cold(Vec::new());
            }
            next_repair += 1;
        }

        for s in 0..TRIAD {
            if run.status[s] == SensorStatus::TwinSubstituted {
                run.warm_twin(s);
            }
        }
        let mut window = {
            let sources = run.status.map(RowSource::of);
            let physical = core::array::from_fn(|s| &run.faulted[s].readings()[start..start + n]);
            let twins = core::array::from_fn(|s| match &run.twins[s] {
                TwinSlot::Warm(m) => Some(m),
                TwinSlot::Cold(_) => None,
            });
            assemble_window(sources, physical, twins, &timestamps)
        };

        let pre = check(&window, state.last_composite, cfg.threshold);
        let participating: Vec<usize> = (0..TRIAD).filter(|&s| window.is_active(s)).collect();
        let anomalous: Vec<usize> = participating.iter().copied().filter(|&s| pre.any_flagged(s)).collect();
        match participating.len() {
            0 => {
                outcome = Outcome::TotalFailure { cycle };
                break;
            }
            1 if !anomalous.is_empty() => {
                outcome = Outcome::TotalFailure { cycle };
                break;
            }
            2 if !anomalous.is_empty() => {
                let keep = participating[run.rng.random_range(0..2)];
                let retire = participating.iter().copied().find(|&s| s != keep).unwrap();
                run.transition(
                    cycle,
                    retire,
                    SensorStatus::UnderRepair,
                    TransitionReason::RandomSelection,
                );
                window.set_active(retire, false);
                window.set_row(retire, vec![Reading::MISSING; n]);
            }
            _ => {
                for &s in &anomalous {
                    if run.status[s] != SensorStatus::Live {
                        continue;
                    }
                    if let Some(model) = run.warm_twin(s) {
                        let forecast = model.predict(&timestamps);
                        window.set_row(s, forecast.values.into_iter().map(Reading::present).collect());
                        run.transition(cycle, s, SensorStatus::TwinSubstituted, TransitionReason::Anomaly);
                    }
                }
            }
        }

        let statuses = run.status;
        let (out, next) = match fusion_cycle(&window, &state, cfg.threshold) {
            Ok(v) => v,
            Err(FusionError::Unfusable | FusionError::NoParticipants) => {
                outcome = Outcome::TotalFailure { cycle };
                break;
            }
        };
        state = next;

        for s in 0..TRIAD {
            match run.status[s] {
                SensorStatus::TwinSubstituted => {
                    run.divergence[s].push(out.flags.clone());
                    if divergence_event(&run.divergence[s], s, cfg.patience) {
                        run.transition(cycle, s, SensorStatus::Dropped, TransitionReason::Divergence);
                    }
                }
                SensorStatus::Live => {
                    for (j, reading) in window.row(s).iter().enumerate() {
                        if let (Some(v), false) = (reading.value(), out.flags.is_flagged(s, j)) {
                            run.feed_twin(s, timestamps[j], v);
                        }
                    }
                }
                SensorStatus::Dropped | SensorStatus::UnderRepair => {}
            }
        }

        cycles.push(CycleRecord {
            cycle_index: cycle,
            start_index: start,
            sources: statuses.map(RowSource::of),
            statuses,
            participation: window.participation(),
            rows: window.rows().clone(),
            timestamps,
            flags: out.flags,
            elementwise: out.elementwise,
            composite: out.composite,
        });
    }

    let truth: Vec<Option<f64>> = match truth {
        Some(t) => t.iter().copied().map(Some).collect(),
        None => (0..len)
            .map(|i| {
                let vals: Vec<f64> = clean.iter().filter_map(|t| t.readings()[i].value()).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect(),
    };
    let metrics = compute_metrics(cfg, clean, &truth, &cycles, &episodes);

    Ok(ScenarioReport {
        cycles,
        transitions: run.transitions,
        metrics,
        outcome,
    })
}

#[derive(Default)]
struct ErrorStats {
    abs: f64,
    sq: f64,
    n: usize,
}

impl ErrorStats {
    fn push(&mut self, err: f64) {
        self.abs += libm::fabs(err);
        self.sq += err * err;
        self.n += 1;
    }

    fn mae(&self) -> Option<f64> {
        (self.n > 0).then(|| self.abs / self.n as f64)
    }

    fn rmse(&self) -> Option<f64> {
        (self.n > 0).then(|| libm::sqrt(self.sq / self.n as f64))
    }
}

fn compute_metrics(
    cfg: &ScenarioConfig,
    clean: &[UniformTrace; TRIAD],
    truth: &[Option<f64>],
    cycles: &[CycleRecord],
    episodes: &[(usize, FaultSpec)],
) -> Vec<Metric> {
    let mut metrics = Vec::new();
    let mut push = |name: String, sensor: Option<usize>, value: Option<f64>| {
        if let Some(value) = value {
            metrics.push(Metric { name, sensor, value });
        }
    };

    let fused_points = || {
        cycles.iter().flat_map(|c| {
            c.elementwise
                .iter()
                .enumerate()
                .map(move |(j, v)| (c.start_index + j, *v))
        })
    };
    let mut overall = ErrorStats::default();
    for (i, v) in fused_points() {
        if let Some(t) = truth[i] {
            overall.push(v - t);
        }
    }
    push("cycles".into(), None, Some(cycles.len() as f64));
    push("fused_rmse".into(), None, overall.rmse());
    for (index, (sensor, spec)) in episodes.iter().enumerate() {
        let mut stats = ErrorStats::default();
        for (i, v) in fused_points().filter(|(i, _)| spec.contains(*i)) {
            if let Some(t) = truth[i] {
                stats.push(v - t);
            }
        }
        push(format!("fused_rmse.fault{index}"), Some(*sensor), stats.rmse());
    }

    for (sensor, clean_trace) in clean.iter().enumerate() {
        let mut span = 0usize;
        let mut k = 0usize;
        while k < cycles.len() {
            if cycles[k].sources[sensor] != RowSource::Twin {
                k += 1;
                continue;
            }
            let first = k;
            while k < cycles.len() && cycles[k].sources[sensor] == RowSource::Twin {
                k += 1;
            }
            let spans = &cycles[first..k];
            let mut timestamps = Vec::new();
            let mut values = Vec::new();
            let mut stats = ErrorStats::default();
            for c in spans {
                for (j, r) in c.rows[sensor].iter().enumerate() {
                    let v = r.value().unwrap_or(f64::NAN);
                    timestamps.push(c.timestamps[j]);
                    values.push(v);
                    if let Some(t) = clean_trace.readings()[c.start_index + j].value() {
                        stats.push(v - t);
                    }
                }
            }
            let from = spans[0].start_index;
            let to = spans[spans.len() - 1].start_index + cfg.lookback_n;
            // cycles of a span are contiguous, so the forecast lies on the trace grid
            let tracking = tracking_duration(
                &Forecast { timestamps, values },
                &clean_trace.slice(from, to),
                cfg.tracking_tol,
            )
            .ok()
            .map(|d| d as f64);
            push(format!("twin_mae.span{span}"), Some(sensor), stats.mae());
            push(format!("twin_rmse.span{span}"), Some(sensor), stats.rmse());
            push(format!("twin_tracking_s.span{span}"), Some(sensor), tracking);
            span += 1;
        }
    }
    metrics
}
