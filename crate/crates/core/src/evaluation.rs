//! KITTI-style relative trajectory errors over fixed path lengths, and
//! timing summaries.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::rotation_angle;
use crate::pipeline::Trajectory;
use crate::{Error, Result};

/// Segment lengths in meters: 100, 150, …, 800.
pub const DEFAULT_LENGTHS: [f64; 15] = [
    100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0, 550.0, 600.0, 650.0, 700.0, 750.0, 800.0,
];

/// Lengths for short sequences: 5, 10, 50, 100, 150, …, 400 cm, in meters.
pub const SHORT_LENGTHS: [f64; 10] = [0.05, 0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentError {
    pub start: usize,
    /// Requested path length in meters.
    pub length: f64,
    /// Translation error as a fraction of `length`.
    pub translation: f64,
    /// Rotation error in radians per meter.
    pub rotation: f64,
}

/// Cumulative ground-truth path length at every frame.
pub fn path_distances(trajectory: &Trajectory) -> Vec<f64> {
    let mut out = Vec::with_capacity(trajectory.len());
    let mut acc = 0.0;
    for (k, p) in trajectory.poses.iter().enumerate() {
        if k > 0 {
            acc += (p.translation - trajectory.poses[k - 1].translation).norm();
        }
        out.push(acc);
    }
    out
}

/// Errors of every segment starting at frames `0, step, 2·step, …` with
/// the given lengths, sorted by `(start, length)`.
///
/// A segment ends at the first frame whose ground-truth distance from the
/// start reaches the length; segments running past the end are skipped.
pub fn segment_errors(estimated: &Trajectory, ground_truth: &Trajectory, lengths: &[f64], step: usize) -> Result<Vec<SegmentError>> {
    if step == 0 {
        return Err(Error::InvalidConfig("segment step must be positive"));
    }
    if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidConfig("segment lengths must be positive"));
    }
    if estimated.len() != ground_truth.len() {
        return Err(Error::DimensionMismatch {
            expected: ground_truth.len(),
            got: estimated.len(),
        });
    }
    let mut sorted_lengths = lengths.to_vec();
    sorted_lengths.sort_by(f64::total_cmp);
    sorted_lengths.dedup();
    let dist = path_distances(ground_truth);
    let gt = &ground_truth.poses;
    let est = &estimated.poses;
    let mut out = Vec::new();
    for start in (0..gt.len()).step_by(step) {
        for &length in &sorted_lengths {
            let Some(end) = (start..gt.len()).find(|&j| dist[j] - dist[start] >= length) else {
                continue;
            };
            let rel_gt = gt[start].inverse() * gt[end];
            let rel_est = est[start].inverse() * est[end];
            let e = rel_gt.inverse() * rel_est;
            out.push(SegmentError {
                start,
                length,
                translation: e.translation.norm() / length,
                rotation: rotation_angle(&e.rotation) / length,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthSummary {
    pub length: f64,
    pub segments: usize,
    pub translation: f64,
    pub rotation: f64,
}

/// Averages of a segment list. Both averaging orders are kept: the mean
/// over all segments, and the mean of the per-length means. Means of an
/// empty list are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_length: Vec<LengthSummary>,
    pub segments: usize,
    pub segment_mean_translation: f64,
    pub segment_mean_rotation: f64,
    pub length_mean_translation: f64,
    pub length_mean_rotation: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl EvalReport {
    pub fn from_segments(segments: &[SegmentError]) -> Self {
        let mut lengths: Vec<f64> = segments.iter().map(|s| s.length).collect();
        lengths.sort_by(f64::total_cmp);
        lengths.dedup();
        let per_length: Vec<LengthSummary> = lengths
            .iter()
            .map(|&length| {
                let of = || segments.iter().filter(move |s| s.length == length);
                LengthSummary {
                    length,
                    segments: of().count(),
                    translation: mean(of().map(|s| s.translation)),
                    rotation: mean(of().map(|s| s.rotation)),
                }
            })
            .collect();
        Self {
            segments: segments.len(),
            segment_mean_translation: mean(segments.iter().map(|s| s.translation)),
            segment_mean_rotation: mean(segments.iter().map(|s| s.rotation)),
            length_mean_translation: mean(per_length.iter().map(|l| l.translation)),
            length_mean_rotation: mean(per_length.iter().map(|l| l.rotation)),
            per_length,
        }
    }
}

/// Summary statistics of one stage's timings, in the samples' unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingStats {
    pub samples: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn timing_report(samples: &[f64]) -> Result<TimingStats> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("timing report needs at least one sample"));
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let m = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / n as f64;
    Ok(TimingStats {
        samples: n,
        mean: m,
        median,
        std: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use nalgebra::{Matrix3, Vector3, Vector6};
    use proptest::prelude::*;

    fn straight(frames: usize, scale: f64) -> Trajectory {
        Trajectory {
            poses: (0..frames)
                .map(|k| Pose::from_translation(Vector3::new(0.0, 0.0, scale * k as f64)))
                .collect(),
        }
    }

    fn yaw(angle: f64) -> Matrix3<f64> {
        *nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), angle).matrix()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let t = straight(900, 1.0);
        let segs = segment_errors(&t, &t, &DEFAULT_LENGTHS, 1).unwrap();
        assert!(!segs.is_empty());
        assert!(segs.iter().all(|s| s.translation == 0.0 && s.rotation == 0.0));
    }

    #[test]
    fn scale_drift_is_one_percent_everywhere() {
        let gt = straight(801, 1.0);
        let est = straight(801, 1.01);
        let segs = segment_errors(&est, &gt, &DEFAULT_LENGTHS, 1).unwrap();
        // Starts 0..=800−L for each length L.
        let expected: usize = DEFAULT_LENGTHS.iter().map(|l| 801 - *l as usize).sum();
        assert_eq!(segs.len(), expected);
        for s in &segs {
            assert!((s.translation - 0.01).abs() < 1e-11, "{s:?}");
            assert_eq!(s.rotation, 0.0);
        }
        let report = EvalReport::from_segments(&segs);
        assert_eq!(report.per_length.len(), DEFAULT_LENGTHS.len());
        assert!((report.segment_mean_translation - 0.01).abs() < 1e-11);
        assert!((report.length_mean_translation - 0.01).abs() < 1e-11);
    }

    #[test]
    fn yaw_drift_gives_constant_rotation_rate() {
        let gt = straight(801, 1.0);
        let est = Trajectory {
            poses: gt
                .poses
                .iter()
                .enumerate()
                .map(|(k, p)| Pose::new(yaw(1e-4 * k as f64), p.translation))
                .collect(),
        };
        let segs = segment_errors(&est, &gt, &DEFAULT_LENGTHS, 10).unwrap();
        for s in &segs {
            assert!((s.rotation - 1e-4).abs() < 1e-10, "{s:?}");
        }
    }

    #[test]
    fn step_and_length_validation() {
        let t = straight(10, 1.0);
        assert!(matches!(segment_errors(&t, &t, &[1.0], 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(segment_errors(&t, &t, &[0.0], 1), Err(Error::InvalidConfig(_))));
        assert!(matches!(
            segment_errors(&straight(9, 1.0), &t, &[1.0], 1),
            Err(Error::DimensionMismatch { .. })
        ));
        // Step 1 visits every start that has room for the segment.
        let starts: Vec<usize> = segment_errors(&t, &t, &[2.0], 1).unwrap().iter().map(|s| s.start).collect();
        assert_eq!(starts, (0..8).collect::<Vec<_>>());
        let starts: Vec<usize> = segment_errors(&t, &t, &[2.0], 3).unwrap().iter().map(|s| s.start).collect();
        assert_eq!(starts, alloc::vec![0, 3, 6]);
    }

    #[test]
    fn short_sequences_yield_no_segments() {
        let t = straight(50, 1.0);
        let segs = segment_errors(&t, &t, &DEFAULT_LENGTHS, 1).unwrap();
        assert!(segs.is_empty());
        let r = EvalReport::from_segments(&segs);
        assert!(r.segment_mean_translation.is_nan());
        assert!(r.per_length.is_empty());
    }

    #[test]
    fn output_is_sorted_by_start_then_length() {
        let t = straight(40, 1.0);
        let segs = segment_errors(&t, &t, &[20.0, 5.0, 10.0], 1).unwrap();
        assert!(segs.windows(2).all(|w| (w[0].start, w[0].length) < (w[1].start, w[1].length)));
    }

    #[test]
    fn averaging_orders_differ_on_uneven_counts() {
        let segs = [
            SegmentError {
                start: 0,
                length: 1.0,
                translation: 0.1,
                rotation: 0.0,
            },
            SegmentError {
                start: 1,
                length: 1.0,
                translation: 0.1,
                rotation: 0.0,
            },
            SegmentError {
                start: 0,
                length: 2.0,
                translation: 0.4,
                rotation: 0.0,
            },
        ];
        let r = EvalReport::from_segments(&segs);
        assert!((r.segment_mean_translation - 0.2).abs() < 1e-15);
        assert!((r.length_mean_translation - 0.25).abs() < 1e-15);
    }

    #[test]
    fn timing_statistics() {
        let t = timing_report(&[4.0]).unwrap();
        assert_eq!((t.mean, t.median, t.std), (4.0, 4.0, 0.0));
        let t = timing_report(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert_eq!(t.mean, 4.0);
        assert_eq!(t.median, 2.5);
        assert!((t.std - 12.5f64.sqrt()).abs() < 1e-12);
        assert!(timing_report(&[]).is_err());
    }

    fn wandering(seed: u64, frames: usize) -> Trajectory {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let motions: Vec<Pose> = (0..frames - 1)
            .map(|_| {
                Pose::exp(&Vector6::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(0.5..1.5),
                    rng.random_range(-0.02..0.02),
                    rng.random_range(-0.02..0.02),
                    rng.random_range(-0.02..0.02),
                ))
            })
            .collect();
        Trajectory::from_motions(&motions)
    }

    proptest! {
        #[test]
        fn invariant_to_a_shared_rigid_transform(seed in 0u64..1000, twist in proptest::array::uniform6(-2.0f64..2.0)) {
            let gt = wandering(seed, 60);
            let est = wandering(seed + 1, 60);
            let g = Pose::exp(&Vector6::from(twist));
            let moved = |t: &Trajectory| Trajectory { poses: t.poses.iter().map(|p| g * *p).collect() };
            let a = segment_errors(&est, &gt, &[5.0, 10.0, 20.0], 1).unwrap();
            let b = segment_errors(&moved(&est), &moved(&gt), &[5.0, 10.0, 20.0], 1).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!((x.start, x.length), (y.start, y.length));
                prop_assert!((x.translation - y.translation).abs() < 1e-9);
                prop_assert!((x.rotation - y.rotation).abs() < 1e-9);
            }
        }

        #[test]
        fn segment_mean_is_the_exact_mean(seed in 0u64..1000) {
            let gt = wandering(seed, 40);
            let est = wandering(seed + 7, 40);
            let segs = segment_errors(&est, &gt, &[5.0, 10.0], 2).unwrap();
            let r = EvalReport::from_segments(&segs);
            let sum: f64 = segs.iter().map(|s| s.translation).sum();
            prop_assert_eq!(r.segment_mean_translation, sum / segs.len() as f64);
            prop_assert_eq!(r.per_length.iter().map(|l| l.segments).sum::<usize>(), segs.len());
        }
    }
}
