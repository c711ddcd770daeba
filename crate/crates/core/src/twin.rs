//! Forecasting digital twins.
//!
//! A twin keeps a bounded trailing window of present readings from its
//! physical sensor and a fitted forecaster over that window:
//!
//! * [`TwinKind::AdditiveSeasonal`]: least squares on
//!   `y(t) = a + b·τ + Σₖ cₖ cos(2πkφ) + dₖ sin(2πkφ)` where `τ` is seconds
//!   since the first window timestamp and `φ = (τ mod P) / P`;
//! * [`TwinKind::Kalman`]: a local-level (random walk plus noise) filter;
//! * [`TwinKind::Naive`]: the last value, or the mean profile of the last full
//!   seasonal period when the window spans one.
//!
//! Timestamps enter every model only as offsets from the window origin, so
//! fits and forecasts do not depend on where the epoch sits.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use crate::model::{Timestamp, TwinKind, TwinSettings, UniformTrace};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TwinError {
    #[error("underdetermined fit: {present} present readings, need at least {needed}")]
    Underdetermined { present: usize, needed: usize },
    #[error("regression design is rank deficient (readings alias the seasonal harmonics)")]
    RankDeficient,
    #[error("reading at {got} is not after {last}")]
    OutOfOrder { got: Timestamp, last: Timestamp },
    #[error("forecast and truth grids are not aligned")]
    Misaligned,
}

/// Fitted trend plus Fourier seasonality.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveModel {
    pub origin: Timestamp,
    pub period_s: u64,
    /// Value at `origin`.
    pub intercept: f64,
    /// Value per second.
    pub slope: f64,
    /// `(cₖ, dₖ)` for `k = 1..=K`.
    pub harmonics: Vec<(f64, f64)>,
    /// Residual standard deviation on the training window.
    pub sigma: f64,
}

impl AdditiveModel {
    pub fn eval(&self, t: Timestamp) -> f64 {
        let tau = t.offset_from(self.origin);
        let mut y = self.intercept + self.slope * tau as f64;
        let phase = phase(tau, self.period_s);
        for (k, (c, d)) in self.harmonics.iter().enumerate() {
            let arg = TAU * (k + 1) as f64 * phase;
            y += c * libm::cos(arg) + d * libm::sin(arg);
        }
        y
    }
}

fn phase(tau: i64, period_s: u64) -> f64 {
    tau.rem_euclid(period_s as i64) as f64 / period_s as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanModel {
    pub level: f64,
    pub variance: f64,
    pub q: f64,
    pub r: f64,
}

impl KalmanModel {
    /// Advance `steps` grid steps with no observation.
    pub fn predict_steps(&mut self, steps: u64) {
        self.variance += self.q * steps as f64;
    }

    /// Measurement update; returns the gain used.
    pub fn observe(&mut self, y: f64) -> f64 {
        let gain = self.variance / (self.variance + self.r);
        self.level += gain * (y - self.level);
        self.variance *= 1.0 - gain;
        gain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveModel {
    pub last: f64,
    pub origin: Timestamp,
    pub interval_s: u64,
    pub period_s: u64,
    /// Mean reading per phase bin over the last full period, if the window spans one.
    pub profile: Option<Vec<Option<f64>>>,
}

impl NaiveModel {
    pub fn eval(&self, t: Timestamp) -> f64 {
        let Some(profile) = &self.profile else {
            return self.last;
        };
        let tau = t.offset_from(self.origin).rem_euclid(self.period_s as i64) as u64;
        profile[(tau / self.interval_s) as usize].unwrap_or(self.last)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TwinState {
    Additive(AdditiveModel),
    Kalman(KalmanModel),
    Naive(NaiveModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub timestamps: Vec<Timestamp>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinModel {
    settings: TwinSettings,
    interval_s: u64,
    window: VecDeque<(Timestamp, f64)>,
    fitted_through: Timestamp,
    state: TwinState,
    stale: bool,
}

/// Minimum present readings for a fit under `settings`.
pub fn required_points(settings: &TwinSettings) -> usize {
    match settings.kind {
        TwinKind::AdditiveSeasonal => 2 * settings.fourier_order_k + 2,
        TwinKind::Kalman | TwinKind::Naive => 1,
    }
}

/// Fit on the trailing `train_len` present readings of `history`.
pub fn fit(history: &UniformTrace, settings: &TwinSettings) -> Result<TwinModel, TwinError> {
    let points: Vec<_> = history.present_points().collect();
    let fitted_through = history.timestamp_at(history.len() - 1);
    fit_points(&points, history.interval_s(), fitted_through, settings)
}

/// Fit on time-sorted present readings from a grid with step `interval_s`.
pub fn fit_points(
    points: &[(Timestamp, f64)],
    interval_s: u64,
    fitted_through: Timestamp,
    settings: &TwinSettings,
) -> Result<TwinModel, TwinError> {
    let skip = points.len().saturating_sub(settings.train_len);
    let window: VecDeque<_> = points[skip..].iter().copied().collect();
    let needed = required_points(settings);
    if window.len() < needed {
        return Err(TwinError::Underdetermined {
            present: window.len(),
            needed,
        });
    }
    let state = build_state(&window, interval_s, settings)?;
    Ok(TwinModel {
        settings: *settings,
        interval_s,
        window,
        fitted_through,
        state,
        stale: false,
    })
}

fn build_state(
    window: &VecDeque<(Timestamp, f64)>,
    interval_s: u64,
    settings: &TwinSettings,
) -> Result<TwinState, TwinError> {
    Ok(match settings.kind {
        TwinKind::AdditiveSeasonal => TwinState::Additive(fit_additive(window, settings)?),
        TwinKind::Kalman => TwinState::Kalman(run_kalman(window, interval_s, settings)),
        TwinKind::Naive => TwinState::Naive(fit_naive(window, interval_s, settings)),
    })
}

fn fit_additive(window: &VecDeque<(Timestamp, f64)>, settings: &TwinSettings) -> Result<AdditiveModel, TwinError> {
    let k = settings.fourier_order_k;
    let period_s = settings.seasonal_period_s;
    let origin = window[0].0;
    let rows = window.len();
    let cols = 2 * k + 2;
    // time column scaled to [0, 1] for conditioning
    let span = window[rows - 1].0.offset_from(origin).max(1) as f64;

    let design = DMatrix::from_fn(rows, cols, |i, j| {
        let tau = window[i].0.offset_from(origin);
        match j {
            0 => 1.0,
            1 => tau as f64 / span,
            _ => {
                let arg = TAU * ((j - 2) / 2 + 1) as f64 * phase(tau, period_s);
                if (j - 2) % 2 == 0 {
                    libm::cos(arg)
                } else {
                    libm::sin(arg)
                }
            }
        }
    });
    let y = DVector::from_iterator(rows, window.iter().map(|p| p.1));

    let qr = design.clone().qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * max_diag) {
        return Err(TwinError::RankDeficient);
    }
    let qty = qr.q().transpose() * &y;
    let coef = r.solve_upper_triangular(&qty).ok_or(TwinError::RankDeficient)?;

    let residual = &y - &design * &coef;
    let dof = rows.saturating_sub(cols).max(1);
    let sigma = libm::sqrt(residual.norm_squared() / dof as f64);

    Ok(AdditiveModel {
        origin,
        period_s,
        intercept: coef[0],
        slope: coef[1] / span,
        harmonics: (0..k).map(|h| (coef[2 + 2 * h], coef[3 + 2 * h])).collect(),
        sigma,
    })
}

/// Sample variance of first differences between consecutive window entries.
fn diff_variance(window: &VecDeque<(Timestamp, f64)>) -> f64 {
    let diffs: Vec<f64> = window
        .iter()
        .zip(window.iter().skip(1))
        .map(|(a, b)| b.1 - a.1)
        .collect();
    if diffs.len() < 2 {
        return 0.0;
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (diffs.len() - 1) as f64
}

const MIN_VARIANCE: f64 = 1e-12;

fn run_kalman(window: &VecDeque<(Timestamp, f64)>, interval_s: u64, settings: &TwinSettings) -> KalmanModel {
    let r = settings
        .kalman_r
        .unwrap_or_else(|| diff_variance(window).max(MIN_VARIANCE));
    let q = settings.kalman_q.unwrap_or(r / 10.0);
    let mut model = KalmanModel {
        level: window[0].1,
        variance: r,
        q,
        r,
    };
    for (prev, cur) in window.iter().zip(window.iter().skip(1)) {
        model.predict_steps(cur.0.offset_from(prev.0) as u64 / interval_s);
        model.observe(cur.1);
    }
    model
}

fn fit_naive(window: &VecDeque<(Timestamp, f64)>, interval_s: u64, settings: &TwinSettings) -> NaiveModel {
    let period_s = settings.seasonal_period_s;
    let origin = window[0].0;
    let (last_t, last) = window[window.len() - 1];
    let spans_period = last_t.offset_from(origin) as u64 + interval_s >= period_s;
    let profile = spans_period.then(|| {
        let bins = period_s.div_ceil(interval_s) as usize;
        let mut sums = vec![(0.0f64, 0usize); bins];
        for &(t, v) in window.iter().rev() {
            if last_t.offset_from(t) as u64 >= period_s {
                break;
            }
            let tau = t.offset_from(origin).rem_euclid(period_s as i64) as u64;
            let slot = &mut sums[(tau / interval_s) as usize];
            slot.0 += v;
            slot.1 += 1;
        }
        sums.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)).collect()
    });
    NaiveModel {
        last,
        origin,
        interval_s,
        period_s,
        profile,
    }
}

impl TwinModel {
    pub fn settings(&self) -> &TwinSettings {
        &self.settings
    }

    pub fn kind(&self) -> TwinKind {
        self.settings.kind
    }

    pub fn state(&self) -> &TwinState {
        &self.state
    }

    pub fn fitted_through(&self) -> Timestamp {
        self.fitted_through
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &(Timestamp, f64)> {
        self.window.iter()
    }

    /// True when readings were absorbed by [`observe`](Self::observe) since the last refit.
    pub fn is_stale(&self) -> bool {
        self.stale
    }

    pub fn predict(&self, timestamps: &[Timestamp]) -> Forecast {
        let values = timestamps
            .iter()
            .map(|&t| match &self.state {
                TwinState::Additive(m) => m.eval(t),
                TwinState::Kalman(m) => m.level,
                TwinState::Naive(m) => m.eval(t),
            })
            .collect();
        Forecast {
            timestamps: timestamps.to_vec(),
            values,
        }
    }

    /// Absorb a healthy reading into the window. The Kalman filter steps
    /// immediately; regression-style twins defer their refit to
    /// [`refresh`](Self::refresh).
    pub fn observe(&mut self, t: Timestamp, value: f64) -> Result<(), TwinError> {
        if t <= self.fitted_through {
            return Err(TwinError::OutOfOrder {
                got: t,
                last: self.fitted_through,
            });
        }
        let last_obs = self.window.back().map(|p| p.0);
        if self.window.len() == self.settings.train_len {
            self.window.pop_front();
        }
        self.window.push_back((t, value));
        self.fitted_through = t;
        match &mut self.state {
            TwinState::Kalman(m) => {
                if let Some(prev) = last_obs {
                    m.predict_steps(t.offset_from(prev) as u64 / self.interval_s);
                }
                m.observe(value);
            }
            _ => self.stale = true,
        }
        Ok(())
    }

    /// Refit a stale regression-style twin over its current window.
    pub fn refresh(&mut self) -> Result<(), TwinError> {
        if self.stale {
            self.state = build_state(&self.window, self.interval_s, &self.settings)?;
            self.stale = false;
        }
        Ok(())
    }

    /// One streaming step: the returned model has absorbed `(t, value)` and
    /// is fully refit.
    pub fn update(&self, t: Timestamp, value: f64) -> Result<TwinModel, TwinError> {
        let mut next = self.clone();
        next.observe(t, value)?;
        next.refresh()?;
        Ok(next)
    }
}

/// Length in seconds of the longest forecast prefix that stays within `tol`
/// of every present truth reading.
pub fn tracking_duration(forecast: &Forecast, truth: &UniformTrace, tol: f64) -> Result<u64, TwinError> {
    let aligned = forecast.timestamps.len() == truth.len()
        && forecast.values.len() == truth.len()
        && forecast
            .timestamps
            .iter()
            .enumerate()
            .all(|(i, t)| *t == truth.timestamp_at(i));
    if !aligned {
        return Err(TwinError::Misaligned);
    }
    let steps = forecast
        .values
        .iter()
        .zip(truth.readings())
        .take_while(|(f, r)| r.value().is_none_or(|v| libm::fabs(*f - v) <= tol))
        .count();
    Ok(steps as u64 * truth.interval_s())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Reading, SensorKind};
    use proptest::prelude::*;

    const DAY: u64 = 86_400;

    fn settings(kind: TwinKind, k: usize) -> TwinSettings {
        TwinSettings {
            kind,
            train_len: 2 * 1440,
            seasonal_period_s: DAY,
            fourier_order_k: k,
            kalman_q: None,
            kalman_r: None,
        }
    }

    fn generated(start: u64, len: usize, f: impl Fn(f64) -> f64) -> UniformTrace {
        let values: Vec<f64> = (0..len).map(|i| f((start + 60 * i as u64) as f64)).collect();
        UniformTrace::from_values(0, SensorKind::Synthetic, Timestamp(start), 60, &values).unwrap()
    }

    fn horizon(from: u64, len: usize) -> Vec<Timestamp> {
        (0..len as u64).map(|i| Timestamp(from + 60 * i)).collect()
    }

    fn line_sine(t: f64) -> f64 {
        20.0 + 1e-5 * t + 2.5 * libm::sin(TAU * t / DAY as f64) - 0.7 * libm::cos(2.0 * TAU * t / DAY as f64)
    }

    #[test]
    fn constant_series_fits_flat() {
        let m = fit(&generated(0, 200, |_| 7.0), &settings(TwinKind::AdditiveSeasonal, 1)).unwrap();
        let TwinState::Additive(a) = m.state() else {
            unreachable!()
        };
        assert!((a.intercept - 7.0).abs() < 1e-9);
        assert!(a.slope.abs() < 1e-12);
        assert!(a.harmonics.iter().all(|(c, d)| c.abs() < 1e-9 && d.abs() < 1e-9));
        let f = m.predict(&horizon(200 * 60, 50));
        assert!(f.values.iter().all(|v| (v - 7.0).abs() < 1e-9));
    }

    #[test]
    fn line_is_continued() {
        let m = fit(
            &generated(0, 300, |t| 2.0 + 0.5 * t),
            &settings(TwinKind::AdditiveSeasonal, 1),
        )
        .unwrap();
        let ts = horizon(300 * 60, 500);
        for (t, v) in ts.iter().zip(m.predict(&ts).values) {
            assert!((v - (2.0 + 0.5 * t.0 as f64)).abs() < 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn sinusoid_is_reproduced() {
        let gen = |t: f64| libm::sin(TAU * t / DAY as f64);
        let m = fit(&generated(0, 1440, gen), &settings(TwinKind::AdditiveSeasonal, 1)).unwrap();
        let ts = horizon(1440 * 60, 1440);
        for (t, v) in ts.iter().zip(m.predict(&ts).values) {
            assert!((v - gen(t.0 as f64)).abs() < 1e-6);
        }
    }

    #[test]
    fn line_plus_harmonics_one_day_ahead() {
        let m = fit(&generated(0, 2880, line_sine), &settings(TwinKind::AdditiveSeasonal, 3)).unwrap();
        let ts = horizon(2880 * 60, 1440);
        let f = m.predict(&ts);
        for (t, v) in ts.iter().zip(&f.values) {
            assert!((v - line_sine(t.0 as f64)).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_points_is_underdetermined() {
        let mut trace = generated(0, 10, |t| t);
        let readings: Vec<Reading> = (0..10)
            .map(|i| if i < 4 { Reading::present(1.0) } else { Reading::MISSING })
            .collect();
        trace = trace.with_readings(readings);
        let err = fit(&trace, &settings(TwinKind::AdditiveSeasonal, 2)).unwrap_err();
        assert_eq!(err, TwinError::Underdetermined { present: 4, needed: 6 });
    }

    #[test]
    fn aliased_sampling_is_rank_deficient() {
        // one sample per period makes every harmonic constant
        let values = [1.0; 12];
        let trace = UniformTrace::from_values(0, SensorKind::Synthetic, Timestamp(0), DAY, &values).unwrap();
        assert_eq!(
            fit(&trace, &settings(TwinKind::AdditiveSeasonal, 1)).unwrap_err(),
            TwinError::RankDeficient
        );
    }

    #[test]
    fn kalman_on_constant_forecasts_constant() {
        let m = fit(&generated(0, 100, |_| 3.25), &settings(TwinKind::Kalman, 1)).unwrap();
        assert!(m.predict(&horizon(6000, 10)).values.iter().all(|v| *v == 3.25));
    }

    #[test]
    fn update_matches_refit_below_capacity() {
        let history = generated(0, 400, line_sine);
        let s = settings(TwinKind::AdditiveSeasonal, 3);
        let updated = fit(&history, &s).unwrap().update(Timestamp(400 * 60), 21.5).unwrap();
        let direct = fit(
            &generated(0, 401, line_sine).with_readings({
                let mut r = history.readings().to_vec();
                r.push(Reading::present(21.5));
                r
            }),
            &s,
        )
        .unwrap();
        let (TwinState::Additive(a), TwinState::Additive(b)) = (updated.state(), direct.state()) else {
            unreachable!()
        };
        assert!((a.intercept - b.intercept).abs() < 1e-9);
        assert!((a.slope - b.slope).abs() < 1e-9);
        for (x, y) in a.harmonics.iter().zip(&b.harmonics) {
            assert!((x.0 - y.0).abs() < 1e-9 && (x.1 - y.1).abs() < 1e-9);
        }
    }

    #[test]
    fn window_is_bounded() {
        let mut s = settings(TwinKind::Naive, 1);
        s.train_len = 10;
        let mut m = fit(&generated(0, 30, |t| t), &s).unwrap();
        assert_eq!(m.window().len(), 10);
        m.observe(Timestamp(30 * 60), 1.0).unwrap();
        assert_eq!(m.window().len(), 10);
        assert_eq!(m.window().next().unwrap().0, Timestamp(21 * 60));
    }

    // One local-level step from v = 2, q = 0.5, r = 1 with y equal to the level:
    // prior variance 2.5, gain 2.5 / 3.5, posterior 2.5 · (1 − 2.5/3.5) = 2.5/3.5.
    #[test]
    fn kalman_step_at_level_keeps_level_and_shrinks_variance() {
        let mut s = settings(TwinKind::Kalman, 1);
        s.kalman_q = Some(0.5);
        s.kalman_r = Some(1.0);
        let mut m = fit(&generated(0, 1, |_| 4.0), &s).unwrap();
        if let TwinState::Kalman(k) = &mut m.state {
            k.variance = 2.0;
        }
        let next = m.update(Timestamp(60), 4.0).unwrap();
        let TwinState::Kalman(k) = next.state() else {
            unreachable!()
        };
        assert_eq!(k.level, 4.0);
        assert!((k.variance - 2.5 / 3.5).abs() < 1e-15);
        assert!(k.variance < 2.0);
    }

    #[test]
    fn older_reading_is_rejected() {
        let m = fit(&generated(0, 20, |t| t), &settings(TwinKind::Kalman, 1)).unwrap();
        assert_eq!(
            m.update(Timestamp(60), 1.0).unwrap_err(),
            TwinError::OutOfOrder {
                got: Timestamp(60),
                last: Timestamp(19 * 60)
            }
        );
    }

    #[test]
    fn naive_repeats_last_period() {
        let mut s = settings(TwinKind::Naive, 1);
        s.seasonal_period_s = 600;
        let m = fit(&generated(0, 25, |t| (t / 60.0) % 10.0), &s).unwrap();
        let ts = horizon(25 * 60, 10);
        let f = m.predict(&ts);
        let expected: Vec<f64> = (25..35).map(|i| (i % 10) as f64).collect();
        assert_eq!(f.values, expected);
    }

    fn forecast_of(values: &[f64]) -> Forecast {
        Forecast {
            timestamps: horizon(0, values.len()),
            values: values.to_vec(),
        }
    }

    #[test]
    fn tracking_full_zero_and_partial() {
        let truth_vals: Vec<f64> = (0..150).map(|i| (i as f64).sin()).collect();
        let truth = UniformTrace::from_values(0, SensorKind::Synthetic, Timestamp(0), 60, &truth_vals).unwrap();
        assert_eq!(
            tracking_duration(&forecast_of(&truth_vals), &truth, 0.1).unwrap(),
            150 * 60
        );

        let mut off = truth_vals.clone();
        off[0] += 1.0;
        assert_eq!(tracking_duration(&forecast_of(&off), &truth, 0.1).unwrap(), 0);

        let tol = 0.1;
        let mut late: Vec<f64> = truth_vals.clone();
        for v in &mut late[100..] {
            *v += 10.0 * tol;
        }
        assert_eq!(tracking_duration(&forecast_of(&late), &truth, tol).unwrap(), 100 * 60);
    }

    #[test]
    fn tracking_requires_alignment() {
        let truth = UniformTrace::from_values(0, SensorKind::Synthetic, Timestamp(60), 60, &[1.0, 2.0]).unwrap();
        assert_eq!(
            tracking_duration(&forecast_of(&[1.0, 2.0]), &truth, 1.0).unwrap_err(),
            TwinError::Misaligned
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn exact_when_generator_in_span(
            a in -50.0f64..50.0, b in -1e-4f64..1e-4,
            c1 in -5.0f64..5.0, d1 in -5.0f64..5.0, c2 in -2.0f64..2.0,
            start in 0u64..1_000_000,
        ) {
            let gen = |t: f64| {
                let p = TAU * (t - start as f64) / DAY as f64;
                a + b * (t - start as f64) + c1 * libm::cos(p) + d1 * libm::sin(p) + c2 * libm::cos(2.0 * p)
            };
            let m = fit(&generated(start, 600, gen), &settings(TwinKind::AdditiveSeasonal, 2)).unwrap();
            let TwinState::Additive(model) = m.state() else { unreachable!() };
            prop_assert!(model.sigma < 1e-9);
        }

        #[test]
        fn sigma_positive_when_fit_inexact(noise_at in 10usize..590, bump in 0.5f64..5.0) {
            let mut values: Vec<f64> = (0..600).map(|i| 3.0 + 0.01 * i as f64).collect();
            values[noise_at] += bump;
            let trace = UniformTrace::from_values(0, SensorKind::Synthetic, Timestamp(0), 60, &values).unwrap();
            let m = fit(&trace, &settings(TwinKind::AdditiveSeasonal, 1)).unwrap();
            let TwinState::Additive(model) = m.state() else { unreachable!() };
            prop_assert!(model.sigma > 1e-6);
        }

        #[test]
        fn epoch_shift_invariance(
            delta in 0u64..10_000_000,
            kind in prop_oneof![Just(TwinKind::AdditiveSeasonal), Just(TwinKind::Kalman), Just(TwinKind::Naive)],
            seed in 0u64..1000,
        ) {
            let gen = |t: f64| line_sine(t) + libm::sin(seed as f64 + t * 0.37);
            let base = generated(0, 1500, gen);
            let s = settings(kind, 3);
            let ts = horizon(1500 * 60, 60);
            let shifted_ts: Vec<Timestamp> = ts.iter().map(|t| t.add_secs(delta)).collect();
            let f0 = fit(&base, &s).unwrap().predict(&ts);
            let f1 = fit(&base.shifted(delta), &s).unwrap().predict(&shifted_ts);
            prop_assert_eq!(f0.values, f1.values);
        }

        #[test]
        fn kalman_gain_is_convex(obs in proptest::collection::vec(-100.0f64..100.0, 2..50)) {
            let trace = UniformTrace::from_values(0, SensorKind::Synthetic, Timestamp(0), 60, &obs[..1]).unwrap();
            let mut s = settings(TwinKind::Kalman, 1);
            s.kalman_q = Some(0.3);
            s.kalman_r = Some(2.0);
            let mut m = fit(&trace, &s).unwrap();
            for (i, y) in obs.iter().enumerate().skip(1) {
                let TwinState::Kalman(before) = *m.state() else { unreachable!() };
                m = m.update(Timestamp(60 * i as u64), *y).unwrap();
                let TwinState::Kalman(after) = *m.state() else { unreachable!() };
                let (lo, hi) = if before.level < *y { (before.level, *y) } else { (*y, before.level) };
                prop_assert!(after.level >= lo - 1e-9 && after.level <= hi + 1e-9);
            }
        }

        #[test]
        fn tighter_tolerance_never_tracks_longer(
            errs in proptest::collection::vec(-3.0f64..3.0, 1..80),
            tol_a in 0.01f64..3.0, tol_b in 0.01f64..3.0,
        ) {
            let truth = UniformTrace::from_values(0, SensorKind::Synthetic, Timestamp(0), 60, &vec![0.0; errs.len()]).unwrap();
            let f = forecast_of(&errs);
            let (lo, hi) = if tol_a < tol_b { (tol_a, tol_b) } else { (tol_b, tol_a) };
            prop_assert!(tracking_duration(&f, &truth, lo).unwrap() <= tracking_duration(&f, &truth, hi).unwrap());
        }
    }
}
