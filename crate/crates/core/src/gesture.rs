//! Gesture segmentation at velocity zero-crossings.

use crate::corpus::TrajectoryId;
use crate::scalar::{count, Scalar};
use crate::signal::SmoothedTrajectory;

pub const DEFAULT_MIN_SAMPLES: usize = 5;
/// mm/s
pub const DEFAULT_MIN_PEAK_VELOCITY: f64 = 1.0;

/// A unidirectional movement between two velocity zero-crossings.
///
/// `start_idx..=end_idx` indexes into the source trajectory; the series
/// fields hold exactly that slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureSegment<F> {
    pub source: TrajectoryId,
    pub gesture_index: usize,
    pub start_idx: usize,
    pub end_idx: usize,
    pub positions: Vec<F>,
    pub velocity: Vec<F>,
    pub acceleration: Vec<F>,
    pub sample_rate: F,
    /// Time of the first sample of the segment.
    pub t_start: F,
}

impl<F: Scalar> GestureSegment<F> {
    /// A stand-alone segment from series that were computed elsewhere
    /// (e.g. analytic derivatives of a simulated gesture).
    pub fn from_series(
        source: TrajectoryId,
        positions: Vec<F>,
        velocity: Vec<F>,
        acceleration: Vec<F>,
        sample_rate: F,
    ) -> Self {
        let end_idx = positions.len().saturating_sub(1);
        GestureSegment {
            source,
            gesture_index: 0,
            start_idx: 0,
            end_idx,
            positions,
            velocity,
            acceleration,
            sample_rate,
            t_start: F::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn t_end(&self) -> F {
        self.t_start + count::<F>(self.len().saturating_sub(1)) / self.sample_rate
    }

    pub fn peak_speed(&self) -> F {
        self.velocity.iter().fold(F::zero(), |m, v| m.max(v.abs()))
    }
}

fn sign<F: Scalar>(v: F) -> i8 {
    if v > F::zero() {
        1
    } else if v < F::zero() {
        -1
    } else {
        0
    }
}

/// Boundary indices: the first and last sample, every exact zero (runs of
/// zeros collapse to their first index), and the last index before each
/// strict sign change. Strictly increasing.
pub fn find_zero_crossings<F: Scalar>(velocity: &[F]) -> Vec<usize> {
    let n = velocity.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![0];
    for i in 0..n {
        let s = sign(velocity[i]);
        let hit = if s == 0 { i == 0 || sign(velocity[i - 1]) != 0 } else { i + 1 < n && sign(velocity[i + 1]) == -s };
        if hit && *out.last().unwrap() != i {
            out.push(i);
        }
    }
    if *out.last().unwrap() != n - 1 {
        out.push(n - 1);
    }
    out
}

/// Splits a smoothed trajectory into gestures. Segments shorter than
/// `min_samples` or slower than `min_peak_vel` throughout are dropped; the
/// survivors are numbered 0, 1, 2, ... in time order.
pub fn segment_gestures<F: Scalar>(
    traj: &SmoothedTrajectory<F>,
    min_samples: usize,
    min_peak_vel: F,
) -> Vec<GestureSegment<F>> {
    let min_samples = min_samples.max(3);
    let bounds = find_zero_crossings(&traj.velocity);
    let rate = traj.base.sample_rate;

    bounds
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|&(start, end)| end - start + 1 >= min_samples)
        .filter(|&(start, end)| traj.velocity[start..=end].iter().any(|v| v.abs() >= min_peak_vel))
        .enumerate()
        .map(|(gesture_index, (start, end))| GestureSegment {
            source: traj.base.id.clone(),
            gesture_index,
            start_idx: start,
            end_idx: end,
            positions: traj.smoothed_positions[start..=end].to_vec(),
            velocity: traj.velocity[start..=end].to_vec(),
            acceleration: traj.acceleration[start..=end].to_vec(),
            sample_rate: rate,
            t_start: traj.base.time(start),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Channel, Modality, TrajectoryRecord};
    use crate::signal::{dct_smooth, SmoothedTrajectory};
    use std::f64::consts::PI;

    fn id() -> TrajectoryId {
        TrajectoryId::new("s", "w", Modality::Us, Channel::TDy, 0)
    }

    fn unsmoothed(rate: f64, x: Vec<f64>) -> SmoothedTrajectory<f64> {
        SmoothedTrajectory::unsmoothed(TrajectoryRecord::new(id(), rate, 0.0, x).unwrap()).unwrap()
    }

    #[test]
    fn sine_velocity_boundaries() {
        let v: Vec<f64> = (0..=150).map(|i| (2.0 * PI * i as f64 / 100.0).sin()).collect();
        let b = find_zero_crossings(&v);
        assert_eq!(b.len(), 4);
        for (found, expected) in b.iter().zip([0.0, 0.5, 1.0, 1.5]) {
            assert!((*found as f64 - expected * 100.0).abs() <= 1.0, "{b:?}");
        }
    }

    #[test]
    fn single_signed_velocity_has_virtual_bounds_only() {
        assert_eq!(find_zero_crossings(&[1.0, 2.0, 0.5, 3.0]), vec![0, 3]);
    }

    #[test]
    fn zero_runs_collapse() {
        assert_eq!(find_zero_crossings(&[0.0; 6]), vec![0, 5]);
        assert_eq!(find_zero_crossings(&[1.0, 0.0, 0.0, 0.0, -1.0, -2.0]), vec![0, 1, 5]);
    }

    #[test]
    fn monotone_oscillator_motion_is_one_segment() {
        // critically damped release from rest, x = 10 (1 - (1 + wt) e^{-wt})
        let w = 15.0;
        let x: Vec<f64> = (0..60)
            .map(|i| {
                let t = i as f64 / 100.0;
                10.0 * (1.0 - (1.0 + w * t) * (-w * t).exp())
            })
            .collect();
        let segs = segment_gestures(&unsmoothed(100.0, x), 5, 1.0);
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start_idx, segs[0].end_idx), (0, 59));
    }

    #[test]
    fn two_velocity_peaks_give_two_segments() {
        // rise then fall: one velocity peak in each direction, zero at t = 0.5
        let rate = 100.0;
        let x: Vec<f64> = (0..100).map(|i| 3.0 * (1.0 - (2.0 * PI * i as f64 / rate).cos())).collect();
        let traj = dct_smooth(&TrajectoryRecord::new(id(), rate, 0.0, x).unwrap(), 5).unwrap();
        let segs = segment_gestures(&traj, 5, 1.0);
        assert_eq!(segs.len(), 2, "{:?}", segs.iter().map(|s| (s.start_idx, s.end_idx)).collect::<Vec<_>>());
        assert_eq!(segs[0].gesture_index, 0);
        assert_eq!(segs[1].gesture_index, 1);
        assert!(segs[0].end_idx <= segs[1].start_idx);
    }

    #[test]
    fn flat_signal_has_no_segments() {
        assert!(segment_gestures(&unsmoothed(81.0, vec![3.0; 30]), 5, 1.0).is_empty());
    }

    #[test]
    fn short_segments_dropped() {
        // velocity alternates sign every 3 samples
        let x: Vec<f64> =
            (0..30).map(|i| if (i / 3) % 2 == 0 { (i % 3) as f64 } else { 3.0 - (i % 3) as f64 } * 10.0).collect();
        let segs = segment_gestures(&unsmoothed(100.0, x), 5, 1.0);
        assert!(segs.iter().all(|s| s.len() >= 5));
    }

    #[test]
    fn segment_count_invariant_under_translation() {
        let x: Vec<f64> = (0..200).map(|i| 5.0 * (i as f64 * 0.07).sin()).collect();
        let a = segment_gestures(&unsmoothed(100.0, x.clone()), 5, 1.0);
        let b = segment_gestures(&unsmoothed(100.0, x.iter().map(|v| v + 123.0).collect()), 5, 1.0);
        assert_eq!(a.len(), b.len());
        for s in &a {
            let interior = &s.velocity[1..s.len() - 1];
            assert!(!(interior.iter().any(|&v| v > 0.0) && interior.iter().any(|&v| v < 0.0)));
        }
    }
}
