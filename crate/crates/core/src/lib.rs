//! Fault-tolerant triplicated sensing with forecasting digital twins.
//!
//! The crate is `no_std` and needs only `alloc`. It provides the domain
//! types ([`model`]), grid resampling ([`resample`]), fault injection
//! ([`faults`]), forecasting twins ([`twin`]), the composite-reference
//! anomaly detector ([`detector`]), the TMR fusion block ([`fusion`]) and
//! the cycle-by-cycle lifecycle simulation ([`orchestrator`]).

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod detector;
pub mod faults;
pub mod fusion;
pub mod model;
pub mod orchestrator;
pub mod resample;
pub mod twin;

pub use detector::{check, divergence_event, AnomalyFlags};
pub use faults::{inject, repair_index, FaultKind, FaultMask, FaultSpec, SoftMode};
pub use fusion::{auto_correct, fuse, fusion_cycle, FusionError, FusionOutput, FusionState};
pub use model::{
    align_triads, validate_config, ConfigError, FaultAssignment, Reading, ScenarioConfig, SensorKind, Threshold,
    ThresholdMode, Timestamp, TriadWindow, TwinKind, TwinSettings, UniformTrace, TRIAD,
};
pub use orchestrator::{
    assemble_window, run_scenario, CycleRecord, Metric, Outcome, RowSource, ScenarioError, ScenarioReport,
    SensorStatus, Transition, TransitionReason,
};
pub use resample::{resample, Grid, ResamplePolicy};
pub use twin::{fit, tracking_duration, Forecast, TwinError, TwinModel};
