//! Synthetic trace generators used by scenario configs.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use twinfuse_core::{SensorKind, Timestamp, UniformTrace, TRIAD};

/// Noise-free signal shape; `t` is absolute seconds on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Constant {
        value: f64,
    },
    Linear {
        intercept: f64,
        slope: f64,
    },
    Sinusoid {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        period_s: f64,
        #[serde(default)]
        phase_s: f64,
    },
    LineSinusoid {
        intercept: f64,
        slope: f64,
        amplitude: f64,
        period_s: f64,
    },
    /// `base` until `start_s`, then one `step` higher every `every_s`
    /// seconds, for `count` steps.
    Steps {
        base: f64,
        step: f64,
        start_s: f64,
        every_s: f64,
        count: u32,
    },
}

impl Generator {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Generator::Constant { value } => value,
            Generator::Linear { intercept, slope } => intercept + slope * t,
            Generator::Sinusoid {
                offset,
                amplitude,
                period_s,
                phase_s,
            } => offset + amplitude * (TAU * (t + phase_s) / period_s).sin(),
            Generator::LineSinusoid {
                intercept,
                slope,
                amplitude,
                period_s,
            } => intercept + slope * t + amplitude * (TAU * t / period_s).sin(),
            Generator::Steps {
                base,
                step,
                start_s,
                every_s,
                count,
            } => {
                if t < start_s {
                    base
                } else {
                    let k = ((t - start_s) / every_s).floor() + 1.0;
                    base + step * k.min(f64::from(count))
                }
            }
        }
    }
}

/// Three noisy copies of one signal plus the noiseless signal itself.
/// Sensor `s` draws Gaussian noise from ChaCha8 seeded with `noise_seed`
/// on stream `s`.
pub fn generate_triad(
    generator: &Generator,
    start: Timestamp,
    interval_s: u64,
    len: usize,
    noise_sd: f64,
    noise_seed: u64,
) -> ([UniformTrace; TRIAD], Vec<f64>) {
    let truth: Vec<f64> = (0..len)
        .map(|i| generator.eval((start.seconds() + i as u64 * interval_s) as f64))
        .collect();
    let traces = std::array::from_fn(|s| {
        let mut values = truth.clone();
        if noise_sd > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            rng.set_stream(s as u64);
            let normal = Normal::new(0.0, noise_sd).expect("finite positive sd");
            for v in &mut values {
                *v += normal.sample(&mut rng);
            }
        }
        UniformTrace::from_values(s as u32, SensorKind::Synthetic, start, interval_s, &values)
            .expect("positive interval and length")
    });
    (traces, truth)
}
