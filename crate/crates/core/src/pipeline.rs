//! Frame-to-frame stereo odometry: weighting, robust initialization,
//! refinement and pose chaining.

use alloc::vec::Vec;

use crate::correspondence::Correspondence;
use crate::geometry::{Pose, StereoCalibration};
use crate::noise::{NoiseModel, SqrtInformation};
use crate::refinement::{refine, RefinementScope, Termination};
use crate::robust_init::{erode_init, hypothesize_and_test, Hypothesis, InitConfig, DEFAULT_ERODE_SCALE};
use crate::{Error, Result};

/// Weight of a feature at horizontal coordinate `ul`: features near the
/// principal point count more.
pub fn viso2_weight(ul: f64, u0: f64) -> f64 {
    1.0 / ((ul - u0).abs() / u0 + 0.05)
}

/// Correspondences between frames `frame_index − 1` and `frame_index`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FramePair {
    pub frame_index: usize,
    pub correspondences: Vec<Correspondence>,
}

/// Camera-to-world poses, frame 0 at the identity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
}

impl Trajectory {
    /// Chains motions `X_k` (frame `k−1` points into frame `k`):
    /// `P_k = P_{k−1} · X_k⁻¹`.
    pub fn from_motions(motions: &[Pose]) -> Self {
        let mut poses = Vec::with_capacity(motions.len() + 1);
        let mut current = Pose::identity();
        poses.push(current);
        for m in motions {
            current = current * m.inverse();
            poses.push(current);
        }
        Self { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Motion `X_k` between frames `k−1` and `k`.
    pub fn motion(&self, k: usize) -> Pose {
        self.poses[k].inverse() * self.poses[k - 1]
    }
}

/// Source of monotonic time in nanoseconds.
pub trait Clock: Sync {
    fn now_ns(&self) -> u64;
}

/// Clock that always reads zero, for deterministic runs without timing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ns(&self) -> u64 {
        0
    }
}

/// Initializer choice.
#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    Consensus(InitConfig),
    Erode { scale: f64, threshold: f64, seed: u64 },
}

impl Initializer {
    pub fn name(&self) -> &'static str {
        match self {
            Initializer::Consensus(c) => c.model.name(),
            Initializer::Erode { .. } => "erode",
        }
    }

    pub fn erode(threshold: f64) -> Self {
        Initializer::Erode {
            scale: DEFAULT_ERODE_SCALE,
            threshold,
            seed: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Initializer::Consensus(c) => c.seed,
            Initializer::Erode { seed, .. } => *seed,
        }
    }

    fn with_seed(&self, seed: u64) -> Self {
        match self {
            Initializer::Consensus(c) => Initializer::Consensus(InitConfig { seed, ..c.clone() }),
            Initializer::Erode { scale, threshold, .. } => Initializer::Erode {
                scale: *scale,
                threshold: *threshold,
                seed,
            },
        }
    }

    fn run(&self, data: &[Correspondence], calib: &StereoCalibration) -> Result<Hypothesis> {
        match self {
            Initializer::Consensus(c) => hypothesize_and_test(data, calib, c),
            Initializer::Erode { scale, threshold, .. } => erode_init(data, calib, *scale, *threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub initializer: Initializer,
    pub scope: RefinementScope,
    /// Apply [`viso2_weight`] to scoring and refinement.
    pub weighting: bool,
    /// Refine with the initializer's own cost instead of the Gaussian cost
    /// on inliers (structure scopes only; the noise scope is always Cauchy).
    pub robust_refinement: bool,
}

impl PipelineConfig {
    pub fn new(initializer: Initializer, scope: RefinementScope) -> Self {
        Self {
            initializer,
            scope,
            weighting: false,
            robust_refinement: false,
        }
    }

    fn refinement_model(&self) -> NoiseModel {
        match self.scope {
            RefinementScope::MotionStructureNoise => NoiseModel::Cauchy(SqrtInformation::identity(6)),
            _ if self.robust_refinement => match &self.initializer {
                Initializer::Consensus(c) => c.model.clone(),
                Initializer::Erode { scale, threshold, .. } => NoiseModel::Erode {
                    scale: *scale,
                    threshold: *threshold,
                },
            },
            _ => NoiseModel::Gaussian,
        }
    }
}

/// Per-pair outcome. Times are clock differences in nanoseconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairDiagnostics {
    pub frame_index: usize,
    pub correspondences: usize,
    pub inliers: usize,
    pub threshold: f64,
    pub init_score: f64,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub degenerate_samples: usize,
    /// Error that made the pair fall back to the identity motion.
    pub failure: Option<Error>,
    pub init_ns: u64,
    pub refine_ns: u64,
}

/// Mixes a run seed with a frame index into an independent per-pair seed.
pub fn pair_seed(seed: u64, frame_index: usize) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed ^ (frame_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Estimates the motion of one pair: weight, initialize, refine on inliers.
pub fn process_pair(pair: &FramePair, calib: &StereoCalibration, config: &PipelineConfig, clock: &dyn Clock) -> Result<(Pose, PairDiagnostics)> {
    let mut diag = PairDiagnostics {
        frame_index: pair.frame_index,
        correspondences: pair.correspondences.len(),
        ..PairDiagnostics::default()
    };
    let data: Vec<Correspondence> = pair
        .correspondences
        .iter()
        .map(|c| {
            let w = if config.weighting {
                viso2_weight(c.measurement.cur.ul, calib.u0)
            } else {
                1.0
            };
            c.with_weight(w)
        })
        .collect();
    let t0 = clock.now_ns();
    let hypothesis = config.initializer.run(&data, calib)?;
    let t1 = clock.now_ns();
    diag.init_ns = t1.saturating_sub(t0);
    diag.inliers = hypothesis.inlier_count();
    diag.threshold = hypothesis.adaptive_threshold;
    diag.init_score = hypothesis.score;
    diag.degenerate_samples = hypothesis.degenerate_samples;
    let inliers: Vec<Correspondence> = hypothesis.inliers(&data).copied().collect();
    let result = refine(config.scope, &hypothesis.pose, &inliers, calib, &config.refinement_model())?;
    diag.refine_ns = clock.now_ns().saturating_sub(t1);
    diag.initial_cost = result.initial_cost;
    diag.final_cost = result.final_cost;
    diag.iterations = result.iterations;
    diag.termination = Some(result.termination);
    Ok((result.pose, diag))
}

/// Like [`process_pair`] with the initializer seed derived from the frame
/// index; failures yield the identity motion and a flagged diagnostic.
pub fn process_pair_or_identity(pair: &FramePair, calib: &StereoCalibration, config: &PipelineConfig, clock: &dyn Clock) -> (Pose, PairDiagnostics) {
    let seeded = PipelineConfig {
        initializer: config.initializer.with_seed(pair_seed(config.initializer.seed(), pair.frame_index)),
        ..config.clone()
    };
    match process_pair(pair, calib, &seeded, clock) {
        Ok(r) => r,
        Err(e) => (
            Pose::identity(),
            PairDiagnostics {
                frame_index: pair.frame_index,
                correspondences: pair.correspondences.len(),
                failure: Some(e),
                ..PairDiagnostics::default()
            },
        ),
    }
}

/// Chains per-pair motions into a trajectory with one pose per frame.
/// Pairs must be ordered by frame index, starting at frame 1.
pub fn process_sequence(
    pairs: &[FramePair],
    calib: &StereoCalibration,
    config: &PipelineConfig,
    clock: &dyn Clock,
) -> (Trajectory, Vec<PairDiagnostics>) {
    let (motions, diags): (Vec<_>, Vec<_>) = pairs.iter().map(|p| process_pair_or_identity(p, calib, config, clock)).unzip();
    (Trajectory::from_motions(&motions), diags)
}
