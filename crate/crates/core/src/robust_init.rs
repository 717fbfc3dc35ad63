//! Robust initialization: hypothesize-and-test over minimal samples, or a
//! single robust descent from the identity.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::correspondence::Correspondence;
use crate::geometry::{pnp_minimal, PnpCorrespondence, Pose, StereoCalibration};
use crate::noise::{
    amlesac_estimate, min_log_nfa, mixture_cost, mlesac_estimate_gamma, rho, Covariance, ErrorVec, LogFactorials, MixtureParams, NoiseModel,
};
use crate::refinement::{motion_error, refine, RefinementScope, Termination};
use crate::{Error, Result};

/// Correspondences per minimal sample.
pub const MIN_SAMPLE_SIZE: usize = 4;
/// Error norm assigned to points that fall behind the camera.
pub const BEHIND_CAMERA_ERROR: f64 = 1e6;
pub const DEFAULT_ITERATIONS: usize = 1000;
/// Inlier threshold for models without one of their own, in pixels.
pub const DEFAULT_INLIER_THRESHOLD: f64 = 2.79;

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub iterations: usize,
    pub model: NoiseModel,
    pub seed: u64,
    /// Inlier threshold for MLESAC, AMLESAC, Gaussian and Cauchy scoring.
    pub inlier_threshold: f64,
}

impl InitConfig {
    pub fn new(model: NoiseModel, seed: u64) -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            model,
            seed,
            inlier_threshold: DEFAULT_INLIER_THRESHOLD,
        }
    }

    pub fn with_iterations(self, iterations: usize) -> Self {
        Self { iterations, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1"));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidConfig("inlier threshold must be positive"));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub pose: Pose,
    /// Lower is better; log-NFA for AC-RANSAC, weighted cost otherwise.
    pub score: f64,
    pub inlier_mask: Vec<bool>,
    /// Threshold that produced the mask, in pixels.
    pub adaptive_threshold: f64,
    /// Iteration that produced the pose (0 for ERODE).
    pub iteration: usize,
    pub degenerate_samples: usize,
    /// Inlier ratio estimated for the winning hypothesis (MLESAC, AMLESAC).
    pub inlier_ratio: Option<f64>,
    /// Covariance estimated for the winning hypothesis (AMLESAC).
    pub covariance: Option<Covariance>,
}

impl Hypothesis {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }

    pub fn inliers<'a>(&'a self, correspondences: &'a [Correspondence]) -> impl Iterator<Item = &'a Correspondence> + 'a {
        correspondences.iter().zip(&self.inlier_mask).filter(|(_, &m)| m).map(|(c, _)| c)
    }
}

/// Current-frame errors of every correspondence under `pose`.
pub fn reprojection_errors(pose: &Pose, correspondences: &[Correspondence], calib: &StereoCalibration) -> Vec<ErrorVec> {
    correspondences
        .iter()
        .map(|c| match motion_error(pose, &c.point, &c.measurement.cur, calib) {
            Ok(e) => ErrorVec::from3(&e),
            Err(_) => ErrorVec::with_norm(BEHIND_CAMERA_ERROR),
        })
        .collect()
}

/// Indices of the minimal sample drawn at `iteration`; depends only on the
/// seed, the iteration and the number of correspondences.
pub fn sample_indices(seed: u64, iteration: usize, n: usize) -> [usize; MIN_SAMPLE_SIZE] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    let v = rand::seq::index::sample(&mut rng, n, MIN_SAMPLE_SIZE);
    [v.index(0), v.index(1), v.index(2), v.index(3)]
}

struct Score {
    value: f64,
    inlier_ratio: Option<f64>,
    covariance: Option<Covariance>,
    threshold: Option<f64>,
    valid: bool,
}

struct Scorer<'a> {
    config: &'a InitConfig,
    weights: Vec<f64>,
    table: Option<LogFactorials>,
}

impl Scorer<'_> {
    fn weighted(&self, errors: &[ErrorVec], f: impl Fn(&ErrorVec) -> f64) -> f64 {
        errors.iter().zip(&self.weights).map(|(e, w)| w * f(e)).sum()
    }

    fn score(&self, errors: &[ErrorVec]) -> Result<Score> {
        let plain = |value| Score {
            value,
            inlier_ratio: None,
            covariance: None,
            threshold: None,
            valid: true,
        };
        Ok(match &self.config.model {
            NoiseModel::Mlesac(p) => {
                let gamma = mlesac_estimate_gamma(errors, &p.covariance, p.outlier_volume, p.inlier_ratio);
                Score {
                    inlier_ratio: Some(gamma),
                    ..plain(self.weighted(errors, |e| mixture_cost(p, e.as_slice(), gamma)))
                }
            }
            NoiseModel::Amlesac(p) => {
                let (gamma, cov) = amlesac_estimate(errors, &p.covariance, p.outlier_volume, p.inlier_ratio)?;
                let fitted = MixtureParams {
                    covariance: cov,
                    ..p.clone()
                };
                Score {
                    inlier_ratio: Some(gamma),
                    ..plain(self.weighted(errors, |e| mixture_cost(&fitted, e.as_slice(), gamma)))
                }
                .with_covariance(fitted.covariance)
            }
            NoiseModel::AcRansac(p) => {
                let mut norms: Vec<f64> = errors.iter().map(ErrorVec::norm).collect();
                norms.sort_by(f64::total_cmp);
                let table = self.table.as_ref().expect("table built for a-contrario scoring");
                let best = min_log_nfa(table, &norms, p.sample_size, p.dim, p.alpha0)?;
                Score {
                    threshold: Some(best.threshold),
                    valid: best.log_nfa <= p.epsilon.ln(),
                    ..plain(best.log_nfa)
                }
            }
            model => plain(self.weighted(errors, |e| rho(model, e))),
        })
    }
}

impl Score {
    fn with_covariance(self, c: Covariance) -> Self {
        Self { covariance: Some(c), ..self }
    }
}

fn inlier_mask(errors: &[ErrorVec], threshold: f64, inclusive: bool) -> Vec<bool> {
    errors
        .iter()
        .map(|e| if inclusive { e.norm() <= threshold } else { e.norm() < threshold })
        .collect()
}

/// Draws `config.iterations` minimal samples, solves each, scores every
/// correspondence under the configured model and keeps the lowest score
/// (first found on ties).
pub fn hypothesize_and_test(correspondences: &[Correspondence], calib: &StereoCalibration, config: &InitConfig) -> Result<Hypothesis> {
    config.validate()?;
    let n = correspondences.len();
    if n < MIN_SAMPLE_SIZE {
        return Err(Error::InsufficientCorrespondences {
            got: n,
            need: MIN_SAMPLE_SIZE,
        });
    }
    let ac = match &config.model {
        NoiseModel::AcRansac(p) => {
            if n <= p.sample_size {
                return Err(Error::InsufficientCorrespondences {
                    got: n,
                    need: p.sample_size + 1,
                });
            }
            Some(p)
        }
        _ => None,
    };
    let scorer = Scorer {
        config,
        weights: correspondences.iter().map(|c| c.weight).collect(),
        table: ac.map(|_| LogFactorials::new(n)),
    };
    let mut degenerate = 0;
    let mut best: Option<(usize, Pose, Score)> = None;
    let mut best_invalid: Option<f64> = None;
    for it in 0..config.iterations {
        let idx = sample_indices(config.seed, it, n);
        let sample = idx.map(|i| {
            let c = &correspondences[i];
            PnpCorrespondence {
                point: c.point,
                pixel: (c.measurement.cur.ul, c.measurement.cur.v),
            }
        });
        let pose = match pnp_minimal(&sample, calib) {
            Ok(candidates) if !candidates.is_empty() => candidates[0].pose,
            _ => {
                degenerate += 1;
                continue;
            }
        };
        let errors = reprojection_errors(&pose, correspondences, calib);
        let score = scorer.score(&errors)?;
        if !score.value.is_finite() {
            continue;
        }
        if !score.valid {
            best_invalid = Some(best_invalid.map_or(score.value, |b: f64| b.min(score.value)));
            continue;
        }
        if best.as_ref().is_none_or(|(_, _, b)| score.value < b.value) {
            best = Some((it, pose, score));
        }
    }
    let Some((iteration, pose, score)) = best else {
        if let (Some(p), Some(log_nfa)) = (ac, best_invalid) {
            return Err(Error::NoValidModel {
                log_nfa,
                log_epsilon: p.epsilon.ln(),
            });
        }
        return Err(Error::AllHypothesesDegenerate);
    };
    let errors = reprojection_errors(&pose, correspondences, calib);
    let (threshold, inclusive) = match score.threshold {
        Some(t) => (t, true),
        None => (config.model.threshold().unwrap_or(config.inlier_threshold), false),
    };
    Ok(Hypothesis {
        pose,
        score: score.value,
        inlier_mask: inlier_mask(&errors, threshold, inclusive),
        adaptive_threshold: threshold,
        iteration,
        degenerate_samples: degenerate,
        inlier_ratio: score.inlier_ratio,
        covariance: score.covariance,
    })
}

pub const DEFAULT_ERODE_SCALE: f64 = 2.0;

/// Robust motion-only descent from the identity under the Pseudo-Huber
/// cost of scale `b`; inliers are errors below `threshold`.
pub fn erode_init(correspondences: &[Correspondence], calib: &StereoCalibration, b: f64, threshold: f64) -> Result<Hypothesis> {
    let model = NoiseModel::Erode { scale: b, threshold };
    model.validate()?;
    if correspondences.len() < MIN_SAMPLE_SIZE {
        return Err(Error::InsufficientCorrespondences {
            got: correspondences.len(),
            need: MIN_SAMPLE_SIZE,
        });
    }
    let result = match refine(RefinementScope::MotionOnly, &Pose::identity(), correspondences, calib, &model) {
        Ok(r) => r,
        Err(Error::NonFiniteCost) => return Err(Error::OptimizerDiverged),
        Err(e) => return Err(e),
    };
    let stuck = matches!(result.termination, Termination::Stalled | Termination::RankDeficient)
        && result.gradient_norm > 1e-6 * (1.0 + result.final_cost.abs());
    if stuck || !result.final_cost.is_finite() {
        return Err(Error::OptimizerDiverged);
    }
    let errors = reprojection_errors(&result.pose, correspondences, calib);
    Ok(Hypothesis {
        pose: result.pose,
        score: result.final_cost,
        inlier_mask: inlier_mask(&errors, threshold, false),
        adaptive_threshold: threshold,
        iteration: 0,
        degenerate_samples: 0,
        inlier_ratio: None,
        covariance: None,
    })
}
