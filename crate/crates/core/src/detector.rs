//! Composite-reference anomaly detector.

use alloc::vec::Vec;

use crate::model::{Threshold, TriadWindow, TRIAD};

/// Per-sensor, per-position anomaly flags for one window. Rows of inactive
/// sensors are all false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalyFlags {
    flags: [Vec<bool>; TRIAD],
}

impl AnomalyFlags {
    pub fn clean(len: usize) -> Self {
        AnomalyFlags {
            flags: core::array::from_fn(|_| alloc::vec![false; len]),
        }
    }

    pub fn row(&self, sensor: usize) -> &[bool] {
        &self.flags[sensor]
    }

    pub fn rows(&self) -> &[Vec<bool>; TRIAD] {
        &self.flags
    }

    pub fn is_flagged(&self, sensor: usize, position: usize) -> bool {
        self.flags[sensor][position]
    }

    pub fn any_flagged(&self, sensor: usize) -> bool {
        self.flags[sensor].iter().any(|f| *f)
    }

    pub fn summary(&self) -> [bool; TRIAD] {
        core::array::from_fn(|s| self.any_flagged(s))
    }

    pub fn count(&self) -> usize {
        self.flags.iter().flatten().filter(|f| **f).count()
    }

    /// True when every flag set here is also set in `other`.
    pub fn is_subset_of(&self, other: &AnomalyFlags) -> bool {
        self.flags
            .iter()
            .flatten()
            .zip(other.flags.iter().flatten())
            .all(|(a, b)| !*a || *b)
    }
}

/// Flag absent readings always, and present readings whose deviation from
/// `reference` is strictly greater than the threshold.
pub fn check(window: &TriadWindow, reference: Option<f64>, threshold: Threshold) -> AnomalyFlags {
    let tolerance = reference.map(|r| (r, threshold.tolerance(r)));
    let flags = core::array::from_fn(|sensor| {
        let active = window.is_active(sensor);
        window
            .row(sensor)
            .iter()
            .map(|reading| {
                active
                    && match (reading.value(), tolerance) {
                        (None, _) => true,
                        (Some(x), Some((r, tol))) => libm::fabs(x - r) > tol,
                        (Some(_), None) => false,
                    }
            })
            .collect()
    });
    AnomalyFlags { flags }
}

/// True iff `sensor` has at least one flag in each of the last `patience` cycles.
pub fn divergence_event(history: &[AnomalyFlags], sensor: usize, patience: usize) -> bool {
    patience >= 1
        && history.len() >= patience
        && history[history.len() - patience..]
            .iter()
            .all(|f| f.any_flagged(sensor))
}
