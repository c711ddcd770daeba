//! Injection of the four sensor fault classes into a clean trace.
//!
//! * hard: the sensor stops responding, readings become absent;
//! * soft: every reading in the window is corrupted by a [`SoftMode`];
//! * intermittent: each step in the window is corrupted independently with
//!   probability `p`;
//! * transient: a short soft episode that then vanishes.
//!
//! Intermittent draws come from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded
//! with `seed_from_u64(seed)`, one `random_bool(p)` per window step in order.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Reading, UniformTrace};

/// How a soft fault corrupts a present reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoftMode {
    Stuck(f64),
    Offset(f64),
    Scale(f64),
}

impl SoftMode {
    pub fn apply(self, value: f64) -> f64 {
        match self {
            SoftMode::Stuck(v) => v,
            SoftMode::Offset(d) => value + d,
            SoftMode::Scale(f) => value * f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultKind {
    Hard,
    Soft(SoftMode),
    Intermittent { p: f64, mode: SoftMode },
    Transient(SoftMode),
}

impl FaultKind {
    pub const fn name(&self) -> &'static str {
        match self {
            FaultKind::Hard => "hard",
            FaultKind::Soft(_) => "soft",
            FaultKind::Intermittent { .. } => "intermittent",
            FaultKind::Transient(_) => "transient",
        }
    }
}

/// A fault episode over grid indices `[start_idx, start_idx + duration)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub start_idx: usize,
    pub duration: usize,
}

impl FaultSpec {
    pub const fn hard(start_idx: usize, duration: usize) -> Self {
        FaultSpec {
            kind: FaultKind::Hard,
            start_idx,
            duration,
        }
    }

    pub const fn soft(start_idx: usize, duration: usize, mode: SoftMode) -> Self {
        FaultSpec {
            kind: FaultKind::Soft(mode),
            start_idx,
            duration,
        }
    }

    pub const fn transient(start_idx: usize, duration: usize, mode: SoftMode) -> Self {
        FaultSpec {
            kind: FaultKind::Transient(mode),
            start_idx,
            duration,
        }
    }

    pub const fn intermittent(start_idx: usize, duration: usize, p: f64, mode: SoftMode) -> Self {
        FaultSpec {
            kind: FaultKind::Intermittent { p, mode },
            start_idx,
            duration,
        }
    }

    pub const fn end_idx(&self) -> usize {
        self.start_idx + self.duration
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.start_idx && index < self.end_idx()
    }
}

/// Ground truth of where the emitted trace deviates from the clean one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultMask {
    flags: Vec<bool>,
}

impl FaultMask {
    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FaultError {
    #[error("fault window {start}..{end} exceeds trace length {len}")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("intermittent probability {0} is not in (0,1)")]
    Probability(f64),
    #[error("soft-mode parameter is not finite")]
    Parameter,
}

pub fn inject(trace: &UniformTrace, spec: &FaultSpec, seed: u64) -> Result<(UniformTrace, FaultMask), FaultError> {
    let len = trace.len();
    if spec.end_idx() > len {
        return Err(FaultError::OutOfBounds {
            start: spec.start_idx,
            end: spec.end_idx(),
            len,
        });
    }
    let mode = match spec.kind {
        FaultKind::Hard => None,
        FaultKind::Soft(m) | FaultKind::Transient(m) => Some(m),
        FaultKind::Intermittent { p, mode } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(FaultError::Probability(p));
            }
            Some(mode)
        }
    };
    if let Some(SoftMode::Stuck(v) | SoftMode::Offset(v) | SoftMode::Scale(v)) = mode {
        if !v.is_finite() {
            return Err(FaultError::Parameter);
        }
    }

    let mut readings = trace.readings().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for reading in &mut readings[spec.start_idx..spec.end_idx()] {
        *reading = match spec.kind {
            FaultKind::Hard => Reading::MISSING,
            FaultKind::Soft(m) | FaultKind::Transient(m) => corrupt(*reading, m),
            FaultKind::Intermittent { p, mode } => {
                if rng.random_bool(p) {
                    corrupt(*reading, mode)
                } else {
                    *reading
                }
            }
        };
    }
    let flags = trace
        .readings()
        .iter()
        .zip(&readings)
        .map(|(clean, out)| !clean.same_as(out))
        .collect();
    Ok((trace.with_readings(readings), FaultMask { flags }))
}

// An absent reading stays absent; a soft fault cannot conjure a response.
fn corrupt(reading: Reading, mode: SoftMode) -> Reading {
    match reading.value() {
        Some(v) => Reading::present(mode.apply(v)),
        None => Reading::MISSING,
    }
}

/// Grid index from which the physical sensor counts as restored.
pub fn repair_index(spec: &FaultSpec, repair_after_s: u64, interval_s: u64) -> usize {
    spec.start_idx + repair_after_s.div_ceil(interval_s) as usize
}
