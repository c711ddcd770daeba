//! Resampling of irregular `(seconds, value)` observations onto a uniform grid.

use alloc::vec::Vec;

use crate::model::{Reading, SensorKind, Timestamp, TraceError, UniformTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResamplePolicy {
    /// Last observation carried forward.
    #[default]
    Locf,
    /// Linear interpolation between the bracketing observations; flat after
    /// the last observation.
    Linear,
}

/// Grid placement of a resampled trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub start: Timestamp,
    pub interval_s: u64,
    pub len: usize,
}

/// Place time-sorted observations on `grid`. Grid points before the first
/// observation are absent.
pub fn resample(
    pairs: &[(f64, f64)],
    grid: Grid,
    policy: ResamplePolicy,
    sensor_id: u32,
    kind: SensorKind,
) -> Result<UniformTrace, TraceError> {
    if grid.interval_s == 0 {
        return Err(TraceError::ZeroInterval);
    }
    let mut readings = Vec::with_capacity(grid.len);
    // index of the first observation strictly after the current grid point
    let mut after = 0usize;
    for i in 0..grid.len {
        let t = (grid.start.seconds() + i as u64 * grid.interval_s) as f64;
        while after < pairs.len() && pairs[after].0 <= t {
            after += 1;
        }
        let reading = if after == 0 {
            Reading::MISSING
        } else {
            let (t0, v0) = pairs[after - 1];
            match (policy, pairs.get(after)) {
                (ResamplePolicy::Linear, Some(&(t1, v1))) if t0 < t => {
                    Reading::present(v0 + (t - t0) / (t1 - t0) * (v1 - v0))
                }
                _ => Reading::present(v0),
            }
        };
        readings.push(reading);
    }
    UniformTrace::new(sensor_id, kind, grid.start, grid.interval_s, readings)
}
