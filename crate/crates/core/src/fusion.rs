//! TMR data fusion with composite-value auto-correction.
//!
//! Each cycle takes a look-back window, replaces flagged or missing readings
//! with the previous cycle's composite, averages the participating sensors
//! position by position, and averages those position means into the new
//! composite.

use alloc::vec::Vec;

use crate::detector::{check, AnomalyFlags};
use crate::model::{Threshold, TriadWindow, TRIAD};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FusionState {
    pub last_composite: Option<f64>,
    pub cycle_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub elementwise: Vec<f64>,
    pub composite: f64,
    /// Values actually fused; `None` for rows that did not participate.
    pub corrected: [Option<Vec<f64>>; TRIAD],
    pub flags: AnomalyFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FusionError {
    #[error("every reading is flagged and no previous composite exists")]
    Unfusable,
    #[error("no sensor participates in the window")]
    NoParticipants,
}

/// Replacement values for this cycle: unflagged present readings pass
/// through, everything else takes the last composite (or, on a first cycle,
/// the grand mean of the unflagged present readings).
pub fn auto_correct(
    window: &TriadWindow,
    flags: &AnomalyFlags,
    state: &FusionState,
) -> Result<[Option<Vec<f64>>; TRIAD], FusionError> {
    if window.participation() == 0 {
        return Err(FusionError::NoParticipants);
    }
    let usable = |sensor: usize, j: usize| -> Option<f64> {
        if flags.is_flagged(sensor, j) {
            None
        } else {
            window.row(sensor)[j].value()
        }
    };
    let replacement = match state.last_composite {
        Some(c) => c,
        None => {
            let (sum, n) = (0..TRIAD)
                .filter(|&s| window.is_active(s))
                .flat_map(|s| (0..window.len()).filter_map(move |j| usable(s, j)))
                .fold((0.0, 0usize), |(sum, n), v| (sum + v, n + 1));
            if n == 0 {
                return Err(FusionError::Unfusable);
            }
            sum / n as f64
        }
    };
    Ok(core::array::from_fn(|s| {
        window
            .is_active(s)
            .then(|| (0..window.len()).map(|j| usable(s, j).unwrap_or(replacement)).collect())
    }))
}

/// Position-wise mean over rows, then the mean of those means.
///
/// Panics if `rows` is empty or the rows differ in length.
pub fn fuse<R: AsRef<[f64]>>(rows: &[R]) -> (Vec<f64>, f64) {
    assert!(!rows.is_empty(), "fuse needs at least one row");
    let n = rows[0].as_ref().len();
    assert!(n > 0, "fuse needs at least one position");
    let elementwise: Vec<f64> = (0..n).map(|j| mean(rows.iter().map(|r| r.as_ref()[j]))).collect();
    let composite = mean(elementwise.iter().copied());
    (elementwise, composite)
}

/// Arithmetic mean taken relative to the first value, so equal inputs
/// return that value bit for bit.
fn mean(mut values: impl Iterator<Item = f64>) -> f64 {
    let first = values.next().expect("non-empty");
    let (sum, count) = values.fold((0.0, 1usize), |(sum, count), v| (sum + (v - first), count + 1));
    first + sum / count as f64
}

/// One complete fusion cycle: detect against the last composite, correct, fuse.
pub fn fusion_cycle(
    window: &TriadWindow,
    state: &FusionState,
    threshold: Threshold,
) -> Result<(FusionOutput, FusionState), FusionError> {
    let flags = check(window, state.last_composite, threshold);
    let corrected = auto_correct(window, &flags, state)?;
    let rows: Vec<&[f64]> = corrected.iter().flatten().map(Vec::as_slice).collect();
    let (elementwise, composite) = fuse(&rows);
    let next = FusionState {
        last_composite: Some(composite),
        cycle_index: state.cycle_index + 1,
    };
    Ok((
        FusionOutput {
            elementwise,
            composite,
            corrected,
            flags,
        },
        next,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Reading, Timestamp};
    use alloc::vec;
    use proptest::prelude::*;

    const S1: [f64; 5] = [7., 8., 8., 7., 6.];
    const S2: [f64; 5] = [6., 7., 8., 8., 7.];
    const S2_FAULTED: [f64; 5] = [6., 0., 0., 8., 7.];
    const S3: [f64; 5] = [7., 6., 7., 8., 8.];

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn clean_worked_example() {
        let (e, c) = fuse(&[S1, S2, S3]);
        let expected = [20. / 3., 7., 23. / 3., 23. / 3., 7.];
        assert!(e.iter().zip(expected).all(|(a, b)| close(*a, b)));
        assert!(close(c, 7.2));
    }

    #[test]
    fn corrected_worked_example() {
        let (e, c) = fuse(&[S1, [6., 7.2, 7.2, 8., 7.], S3]);
        let expected = [20. / 3., 21.2 / 3., 7.4, 23. / 3., 7.];
        assert!(e.iter().zip(expected).all(|(a, b)| close(*a, b)));
        assert!(close(c, 7.16));
    }

    #[test]
    fn identical_rows_fuse_to_themselves() {
        let (e, c) = fuse(&[[2.5; 4], [2.5; 4], [2.5; 4]]);
        assert_eq!(e, vec![2.5; 4]);
        assert_eq!(c, 2.5);
    }

    fn faulted_window() -> (TriadWindow, AnomalyFlags) {
        let w = TriadWindow::from_values([&S1, &S2_FAULTED, &S3]).unwrap();
        let flags = check(&w, Some(7.2), Threshold::absolute(3.0));
        (w, flags)
    }

    #[test]
    fn flagged_positions_take_last_composite() {
        let (w, flags) = faulted_window();
        let state = FusionState {
            last_composite: Some(7.2),
            cycle_index: 1,
        };
        let corrected = auto_correct(&w, &flags, &state).unwrap();
        assert_eq!(corrected[1].as_deref(), Some(&[6., 7.2, 7.2, 8., 7.][..]));
        assert_eq!(corrected[0].as_deref(), Some(&S1[..]));
    }

    #[test]
    fn no_flags_pass_through() {
        let w = TriadWindow::from_values([&S1, &S2, &S3]).unwrap();
        let corrected = auto_correct(&w, &AnomalyFlags::clean(5), &FusionState::default()).unwrap();
        assert_eq!(corrected, [Some(S1.to_vec()), Some(S2.to_vec()), Some(S3.to_vec())]);
    }

    #[test]
    fn bootstrap_uses_unflagged_grand_mean() {
        let (w, flags) = faulted_window();
        let corrected = auto_correct(&w, &flags, &FusionState::default()).unwrap();
        // 15 readings minus the two flagged zeros
        let unflagged: f64 = S1.iter().chain(&S3).sum::<f64>() + 6. + 8. + 7.;
        assert_eq!(unflagged, 93.0);
        let bootstrap = unflagged / 13.0;
        let row = corrected[1].as_ref().unwrap();
        assert!(close(row[1], bootstrap) && close(row[2], bootstrap));
        assert!((bootstrap - 7.1538).abs() < 1e-4);
    }

    #[test]
    fn all_flagged_without_history_is_unfusable() {
        let w = TriadWindow::new(
            vec![Timestamp(0)],
            [vec![Reading::MISSING], vec![Reading::MISSING], vec![Reading::MISSING]],
        )
        .unwrap();
        let err = fusion_cycle(&w, &FusionState::default(), Threshold::absolute(1.0)).unwrap_err();
        assert_eq!(err, FusionError::Unfusable);
        let state = FusionState {
            last_composite: Some(3.0),
            cycle_index: 4,
        };
        let (out, next) = fusion_cycle(&w, &state, Threshold::absolute(1.0)).unwrap();
        assert_eq!(out.composite, 3.0);
        assert_eq!(next.cycle_index, 5);
    }

    #[test]
    fn two_worked_cycles() {
        let th = Threshold::absolute(3.0);
        let first = TriadWindow::from_values([&S1, &S2, &S3]).unwrap();
        let (out1, state) = fusion_cycle(&first, &FusionState::default(), th).unwrap();
        assert!(close(out1.composite, 7.2));
        assert_eq!(state.cycle_index, 1);
        let (w, _) = faulted_window();
        let (out2, state) = fusion_cycle(&w, &state, th).unwrap();
        assert!(close(out2.composite, 7.16));
        assert_eq!(out2.flags.summary(), [false, true, false]);
        assert_eq!(state.last_composite, Some(out2.composite));
    }

    #[test]
    fn constant_windows_are_a_fixed_point() {
        let w = TriadWindow::from_values([&[4.25; 5], &[4.25; 5], &[4.25; 5]]).unwrap();
        let mut state = FusionState::default();
        for _ in 0..20 {
            let (out, next) = fusion_cycle(&w, &state, Threshold::absolute(0.5)).unwrap();
            assert_eq!(out.composite, 4.25);
            state = next;
        }
    }

    #[test]
    fn excluded_row_reduces_fusion_width() {
        let mut w = TriadWindow::from_values([&S1, &S2, &S3]).unwrap();
        w.set_active(2, false);
        let (out, _) = fusion_cycle(&w, &FusionState::default(), Threshold::absolute(3.0)).unwrap();
        let expected = (S1.iter().sum::<f64>() + S2.iter().sum::<f64>()) / 10.0;
        assert!(close(out.composite, expected));
        assert!(out.corrected[2].is_none());
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=10).prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, n), 3))
    }

    fn window_of(rows: &[Vec<f64>]) -> TriadWindow {
        TriadWindow::from_values([&rows[0], &rows[1], &rows[2]]).unwrap()
    }

    proptest! {
        #[test]
        fn composite_is_grand_mean(rows in matrix()) {
            let (_, c) = fuse(&rows);
            let all: Vec<f64> = rows.iter().flatten().copied().collect();
            prop_assert!((c - all.iter().sum::<f64>() / all.len() as f64).abs() < 1e-9);
        }

        #[test]
        fn fusion_is_row_permutation_invariant(rows in matrix(), reference in proptest::option::of(-100.0f64..100.0)) {
            let w = window_of(&rows);
            let state = FusionState { last_composite: reference, cycle_index: 0 };
            let th = Threshold::absolute(30.0);
            let base = fusion_cycle(&w, &state, th);
            for order in [[0, 2, 1], [1, 0, 2], [2, 1, 0]] {
                let other = fusion_cycle(&w.permuted(order), &state, th);
                match (&base, &other) {
                    (Ok((a, _)), Ok((b, _))) => {
                        prop_assert!((a.composite - b.composite).abs() < 1e-12);
                        for (x, y) in a.elementwise.iter().zip(&b.elementwise) {
                            prop_assert!((x - y).abs() < 1e-12);
                        }
                    }
                    (Err(a), Err(b)) => prop_assert_eq!(a, b),
                    _ => prop_assert!(false, "permutation changed outcome"),
                }
            }
        }

        #[test]
        fn composite_bounded_by_corrected(rows in matrix(), reference in proptest::option::of(-100.0f64..100.0), t in 1.0f64..80.0) {
            let state = FusionState { last_composite: reference, cycle_index: 0 };
            if let Ok((out, _)) = fusion_cycle(&window_of(&rows), &state, Threshold::absolute(t)) {
                let vals = out.corrected.iter().flatten().flatten();
                let lo = vals.clone().fold(f64::INFINITY, |a, b| a.min(*b));
                let hi = vals.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
                prop_assert!(out.composite >= lo - 1e-9 && out.composite <= hi + 1e-9);
                for (j, e) in out.elementwise.iter().enumerate() {
                    let col: Vec<f64> = out.corrected.iter().flatten().map(|r| r[j]).collect();
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(*e >= lo - 1e-9 && *e <= hi + 1e-9);
                }
            }
        }

        // Oracle: fuse the clean window directly and compare.
        #[test]
        fn single_sensor_corruption_is_masked(
            rows in (1usize..=6).prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(5.0f64..10.0, n), 3)),
            victim in 0usize..3,
            positions in proptest::collection::vec(any::<bool>(), 6),
            spike in prop_oneof![-1000.0f64..-100.0, 100.0f64..1000.0],
            last in 5.0f64..10.0,
        ) {
            let n = rows[0].len();
            let mut corrupted = rows.clone();
            let mut flagged = Vec::new();
            for j in 0..n {
                if positions[j] {
                    corrupted[victim][j] = spike;
                    flagged.push(j);
                }
            }
            let state = FusionState { last_composite: Some(last), cycle_index: 3 };
            // band of width 6 around `last` contains every clean reading
            let (out, _) = fusion_cycle(&window_of(&corrupted), &state, Threshold::absolute(6.0)).unwrap();
            prop_assert_eq!(out.flags.count(), flagged.len());
            let (_, clean) = fuse(&rows);
            let bound: f64 = flagged.iter().map(|&j| (last - rows[victim][j]).abs()).sum::<f64>() / (3 * n) as f64;
            let max_bound = flagged.len() as f64 * flagged.iter().map(|&j| (last - rows[victim][j]).abs()).fold(0.0, f64::max) / (3 * n) as f64;
            prop_assert!((out.composite - clean).abs() <= bound + 1e-9);
            prop_assert!(bound <= max_bound + 1e-12);
        }

        #[test]
        fn cycles_are_deterministic(rows in matrix(), reference in proptest::option::of(-100.0f64..100.0)) {
            let w = window_of(&rows);
            let state = FusionState { last_composite: reference, cycle_index: 2 };
            let a = fusion_cycle(&w, &state, Threshold::absolute(10.0));
            let b = fusion_cycle(&w, &state, Threshold::absolute(10.0));
            prop_assert_eq!(a, b);
        }
    }
}
