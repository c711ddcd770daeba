//! Shared domain types: grid timestamps, readings, uniform traces, triad
//! windows and the scenario configuration with its validation rules.

use alloc::vec::Vec;
use core::fmt;

use crate::faults::{FaultKind, FaultSpec, SoftMode};

/// Integer seconds since an arbitrary epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn seconds(self) -> u64 {
        self.0
    }

    /// Signed distance `self - origin` in seconds.
    pub fn offset_from(self, origin: Timestamp) -> i64 {
        self.0 as i64 - origin.0 as i64
    }

    pub const fn add_secs(self, secs: u64) -> Timestamp {
        Timestamp(self.0 + secs)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One sensor sample. An absent reading carries no value at all.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reading(Option<f64>);

impl Reading {
    pub const MISSING: Reading = Reading(None);

    pub const fn present(value: f64) -> Self {
        Reading(Some(value))
    }

    pub const fn is_present(&self) -> bool {
        self.0.is_some()
    }

    pub const fn value(&self) -> Option<f64> {
        self.0
    }

    /// Bitwise equality, so that NaN-free comparisons of injected traces are exact.
    pub fn same_as(&self, other: &Reading) -> bool {
        match (self.0, other.0) {
            (Some(a), Some(b)) => a.to_bits() == b.to_bits(),
            (None, None) => true,
            _ => false,
        }
    }
}

impl From<f64> for Reading {
    fn from(value: f64) -> Self {
        Reading::present(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorKind {
    Temperature,
    Humidity,
    Light,
    Voltage,
    Synthetic,
}

impl SensorKind {
    pub const fn name(self) -> &'static str {
        match self {
            SensorKind::Temperature => "temperature",
            SensorKind::Humidity => "humidity",
            SensorKind::Light => "light",
            SensorKind::Voltage => "voltage",
            SensorKind::Synthetic => "synthetic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "temperature" => SensorKind::Temperature,
            "humidity" => SensorKind::Humidity,
            "light" => SensorKind::Light,
            "voltage" => SensorKind::Voltage,
            "synthetic" => SensorKind::Synthetic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("interval_s must be positive")]
    ZeroInterval,
    #[error("trace has no readings")]
    Empty,
}

/// A per-sensor series sampled on a fixed grid `start + i * interval_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformTrace {
    sensor_id: u32,
    kind: SensorKind,
    start: Timestamp,
    interval_s: u64,
    readings: Vec<Reading>,
}

impl UniformTrace {
    pub fn new(
        sensor_id: u32,
        kind: SensorKind,
        start: Timestamp,
        interval_s: u64,
        readings: Vec<Reading>,
    ) -> Result<Self, TraceError> {
        if interval_s == 0 {
            return Err(TraceError::ZeroInterval);
        }
        if readings.is_empty() {
            return Err(TraceError::Empty);
        }
        Ok(UniformTrace {
            sensor_id,
            kind,
            start,
            interval_s,
            readings,
        })
    }

    /// Convenience constructor for fully present data.
    pub fn from_values(
        sensor_id: u32,
        kind: SensorKind,
        start: Timestamp,
        interval_s: u64,
        values: &[f64],
    ) -> Result<Self, TraceError> {
        Self::new(
            sensor_id,
            kind,
            start,
            interval_s,
            values.iter().copied().map(Reading::present).collect(),
        )
    }

    pub fn sensor_id(&self) -> u32 {
        self.sensor_id
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn interval_s(&self) -> u64 {
        self.interval_s
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn readings(&self) -> &[Reading] {
        &self.readings
    }

    pub fn timestamp_at(&self, index: usize) -> Timestamp {
        self.start.add_secs(index as u64 * self.interval_s)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        (0..self.len()).map(move |i| self.timestamp_at(i))
    }

    /// Present `(timestamp, value)` pairs in grid order.
    pub fn present_points(&self) -> impl Iterator<Item = (Timestamp, f64)> + '_ {
        self.readings
            .iter()
            .enumerate()
            .filter_map(move |(i, r)| r.value().map(|v| (self.timestamp_at(i), v)))
    }

    /// Sub-trace over `[from, to)`. Panics if the range is empty or out of bounds.
    pub fn slice(&self, from: usize, to: usize) -> UniformTrace {
        assert!(from < to && to <= self.len(), "slice {from}..{to} of {}", self.len());
        UniformTrace {
            sensor_id: self.sensor_id,
            kind: self.kind,
            start: self.timestamp_at(from),
            interval_s: self.interval_s,
            readings: self.readings[from..to].to_vec(),
        }
    }

    pub fn with_readings(&self, readings: Vec<Reading>) -> UniformTrace {
        assert_eq!(readings.len(), self.readings.len());
        UniformTrace {
            readings,
            ..self.clone()
        }
    }

    /// Same readings with every timestamp moved by `delta_s` seconds.
    pub fn shifted(&self, delta_s: u64) -> UniformTrace {
        UniformTrace {
            start: self.start.add_secs(delta_s),
            ..self.clone()
        }
    }

    pub fn same_grid(&self, other: &UniformTrace) -> bool {
        self.start == other.start && self.interval_s == other.interval_s && self.len() == other.len()
    }
}

/// Number of sensors in a triad.
pub const TRIAD: usize = 3;

/// Look-back window over a triad: three rows of `N` readings sharing timestamps.
/// Rows whose `active` flag is false do not participate in detection or fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct TriadWindow {
    timestamps: Vec<Timestamp>,
    rows: [Vec<Reading>; TRIAD],
    active: [bool; TRIAD],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WindowError {
    #[error("window length must be at least 1")]
    Empty,
    #[error("row {row} has {got} readings, expected {expected}")]
    RowLength { row: usize, got: usize, expected: usize },
}

impl TriadWindow {
    pub fn new(timestamps: Vec<Timestamp>, rows: [Vec<Reading>; TRIAD]) -> Result<Self, WindowError> {
        Self::with_active(timestamps, rows, [true; TRIAD])
    }

    pub fn with_active(
        timestamps: Vec<Timestamp>,
        rows: [Vec<Reading>; TRIAD],
        active: [bool; TRIAD],
    ) -> Result<Self, WindowError> {
        if timestamps.is_empty() {
            return Err(WindowError::Empty);
        }
        for (row, values) in rows.iter().enumerate() {
            if values.len() != timestamps.len() {
                return Err(WindowError::RowLength {
                    row,
                    got: values.len(),
                    expected: timestamps.len(),
                });
            }
        }
        Ok(TriadWindow {
            timestamps,
            rows,
            active,
        })
    }

    /// Build a fully present window from plain values; handy for the worked
    /// examples and tests.
    pub fn from_values(rows: [&[f64]; TRIAD]) -> Result<Self, WindowError> {
        let n = rows[0].len();
        let timestamps = (0..n as u64).map(Timestamp).collect();
        let rows = rows.map(|r| r.iter().copied().map(Reading::present).collect());
        Self::new(timestamps, rows)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn row(&self, sensor: usize) -> &[Reading] {
        &self.rows[sensor]
    }

    pub fn rows(&self) -> &[Vec<Reading>; TRIAD] {
        &self.rows
    }

    pub fn is_active(&self, sensor: usize) -> bool {
        self.active[sensor]
    }

    pub fn active(&self) -> [bool; TRIAD] {
        self.active
    }

    pub fn participation(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn set_row(&mut self, sensor: usize, readings: Vec<Reading>) {
        assert_eq!(readings.len(), self.len());
        self.rows[sensor] = readings;
    }

    pub fn set_active(&mut self, sensor: usize, active: bool) {
        self.active[sensor] = active;
    }

    /// Same window with rows reordered so that new row `i` is old row `order[i]`.
    pub fn permuted(&self, order: [usize; TRIAD]) -> TriadWindow {
        TriadWindow {
            timestamps: self.timestamps.clone(),
            rows: order.map(|i| self.rows[i].clone()),
            active: order.map(|i| self.active[i]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Deviation compared against the threshold value itself.
    Absolute,
    /// Deviation compared against `value * |reference|`.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub mode: ThresholdMode,
}

impl Threshold {
    pub const fn absolute(value: f64) -> Self {
        Threshold {
            value,
            mode: ThresholdMode::Absolute,
        }
    }

    pub const fn relative(value: f64) -> Self {
        Threshold {
            value,
            mode: ThresholdMode::Relative,
        }
    }

    /// Maximum admissible deviation around `reference`.
    pub fn tolerance(&self, reference: f64) -> f64 {
        match self.mode {
            ThresholdMode::Absolute => self.value,
            ThresholdMode::Relative => self.value * reference.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwinKind {
    AdditiveSeasonal,
    Kalman,
    Naive,
}

impl TwinKind {
    pub const fn name(self) -> &'static str {
        match self {
            TwinKind::AdditiveSeasonal => "additive_seasonal",
            TwinKind::Kalman => "kalman",
            TwinKind::Naive => "naive",
        }
    }
}

/// Everything that determines a twin fit besides the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinSettings {
    pub kind: TwinKind,
    /// Capacity of the trailing training window, in grid points.
    pub train_len: usize,
    pub seasonal_period_s: u64,
    pub fourier_order_k: usize,
    /// Kalman process variance; derived from the training data when `None`.
    pub kalman_q: Option<f64>,
    /// Kalman observation variance; derived from the training data when `None`.
    pub kalman_r: Option<f64>,
}

impl Default for TwinSettings {
    fn default() -> Self {
        TwinSettings {
            kind: TwinKind::AdditiveSeasonal,
            // four days of one-minute points
            train_len: 4 * 1440,
            seasonal_period_s: 86_400,
            fourier_order_k: 3,
            kalman_q: None,
            kalman_r: None,
        }
    }
}

/// A fault episode bound to one of the three sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultAssignment {
    pub sensor: usize,
    pub spec: FaultSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub lookback_n: usize,
    pub threshold: Threshold,
    /// Consecutive flagged cycles before a substituted twin is dropped.
    pub patience: usize,
    pub twin: TwinSettings,
    pub fault_specs: Vec<FaultAssignment>,
    pub repair_after_s: Option<u64>,
    pub seed: u64,
    pub run_len: usize,
    /// Tolerance used when reporting twin tracking durations.
    pub tracking_tol: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            lookback_n: 5,
            threshold: Threshold::absolute(3.0),
            patience: 2,
            twin: TwinSettings::default(),
            fault_specs: Vec::new(),
            repair_after_s: None,
            seed: 0,
            run_len: 1440,
            tracking_tol: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("lookback_n must be ≥ 1")]
    LookbackZero,
    #[error("threshold must be a positive finite number, got {0}")]
    Threshold(f64),
    #[error("patience must be ≥ 1")]
    PatienceZero,
    #[error("twin_train_len must be ≥ 1")]
    TrainLenZero,
    #[error("seasonal_period_s must be positive")]
    PeriodZero,
    #[error("fourier_order_k must be ≥ 1")]
    OrderZero,
    #[error("train length too short for K: twin_train_len {train_len} < 2·{order_k}+2")]
    TrainTooShortForOrder { train_len: usize, order_k: usize },
    #[error("kalman_{name} must be positive and finite, got {value}")]
    KalmanVariance { name: &'static str, value: f64 },
    #[error("run_len must be ≥ 1")]
    RunLenZero,
    #[error("repair_after_s must be positive")]
    RepairZero,
    #[error("tracking_tol must be a positive finite number, got {0}")]
    TrackingTol(f64),
    #[error("fault {index}: sensor index {sensor} is not in {{0,1,2}}")]
    FaultSensor { index: usize, sensor: usize },
    #[error("fault {index}: duration must be ≥ 1")]
    FaultDuration { index: usize },
    #[error("fault {index}: probability {p} is not in (0,1)")]
    FaultProbability { index: usize, p: f64 },
    #[error("fault {index}: soft-mode parameter must be finite")]
    FaultParameter { index: usize },
}

fn positive_finite(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Check every configuration invariant and hand the config back untouched.
pub fn validate_config(cfg: ScenarioConfig) -> Result<ScenarioConfig, ConfigError> {
    if cfg.lookback_n == 0 {
        return Err(ConfigError::LookbackZero);
    }
    if !positive_finite(cfg.threshold.value) {
        return Err(ConfigError::Threshold(cfg.threshold.value));
    }
    if cfg.patience == 0 {
        return Err(ConfigError::PatienceZero);
    }
    let twin = &cfg.twin;
    if twin.train_len == 0 {
        return Err(ConfigError::TrainLenZero);
    }
    if twin.seasonal_period_s == 0 {
        return Err(ConfigError::PeriodZero);
    }
    if twin.fourier_order_k == 0 {
        return Err(ConfigError::OrderZero);
    }
    if twin.kind == TwinKind::AdditiveSeasonal && twin.train_len < 2 * twin.fourier_order_k + 2 {
        return Err(ConfigError::TrainTooShortForOrder {
            train_len: twin.train_len,
            order_k: twin.fourier_order_k,
        });
    }
    for (name, value) in [("q", twin.kalman_q), ("r", twin.kalman_r)] {
        if let Some(value) = value {
            if !positive_finite(value) {
                return Err(ConfigError::KalmanVariance { name, value });
            }
        }
    }
    if cfg.run_len == 0 {
        return Err(ConfigError::RunLenZero);
    }
    if cfg.repair_after_s == Some(0) {
        return Err(ConfigError::RepairZero);
    }
    if !positive_finite(cfg.tracking_tol) {
        return Err(ConfigError::TrackingTol(cfg.tracking_tol));
    }
    for (index, fault) in cfg.fault_specs.iter().enumerate() {
        if fault.sensor >= TRIAD {
            return Err(ConfigError::FaultSensor {
                index,
                sensor: fault.sensor,
            });
        }
        let spec = &fault.spec;
        if spec.duration == 0 {
            return Err(ConfigError::FaultDuration { index });
        }
        let mode = match spec.kind {
            FaultKind::Hard => None,
            FaultKind::Soft(mode) | FaultKind::Transient(mode) => Some(mode),
            FaultKind::Intermittent { p, mode } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(ConfigError::FaultProbability { index, p });
                }
                Some(mode)
            }
        };
        let param = match mode {
            Some(SoftMode::Stuck(v)) | Some(SoftMode::Offset(v)) | Some(SoftMode::Scale(v)) => v,
            None => 0.0,
        };
        if !param.is_finite() {
            return Err(ConfigError::FaultParameter { index });
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlignError {
    #[error("trace {index} does not share the grid of trace 0 (start, interval or length differ)")]
    Misaligned { index: usize },
    #[error("lookback must be ≥ 1")]
    ZeroLookback,
}

/// Tumbling look-back windows over three aligned traces. A trailing partial
/// window is dropped.
#[derive(Debug, Clone)]
pub struct TriadWindows<'a> {
    traces: [&'a UniformTrace; TRIAD],
    lookback: usize,
    next: usize,
}

impl Iterator for TriadWindows<'_> {
    type Item = TriadWindow;

    fn next(&mut self) -> Option<TriadWindow> {
        let from = self.next;
        let to = from + self.lookback;
        if to > self.traces[0].len() {
            return None;
        }
        self.next = to;
        let timestamps = (from..to).map(|i| self.traces[0].timestamp_at(i)).collect();
        let rows = self.traces.map(|t| t.readings()[from..to].to_vec());
        Some(TriadWindow {
            timestamps,
            rows,
            active: [true; TRIAD],
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.traces[0].len() - self.next) / self.lookback;
        (left, Some(left))
    }
}

impl ExactSizeIterator for TriadWindows<'_> {}

pub fn align_triads<'a>(
    a: &'a UniformTrace,
    b: &'a UniformTrace,
    c: &'a UniformTrace,
    lookback: usize,
) -> Result<TriadWindows<'a>, AlignError> {
    if lookback == 0 {
        return Err(AlignError::ZeroLookback);
    }
    for (index, t) in [(1, b), (2, c)] {
        if !a.same_grid(t) {
            return Err(AlignError::Misaligned { index });
        }
    }
    Ok(TriadWindows {
        traces: [a, b, c],
        lookback,
        next: 0,
    })
}
