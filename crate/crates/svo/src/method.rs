//! Command-line names of initializers and refinement scopes, and their
//! translation into a pipeline configuration.

use std::fmt;

use serde::{Deserialize, Serialize};
use svo_core::geometry::StereoCalibration;
use svo_core::noise::{alpha0_stereo, AcRansacParams, Covariance, MixtureParams, NoiseModel};
use svo_core::pipeline::{Initializer, PipelineConfig};
use svo_core::refinement::RefinementScope;
use svo_core::robust_init::{InitConfig, DEFAULT_ERODE_SCALE, DEFAULT_INLIER_THRESHOLD, DEFAULT_ITERATIONS, MIN_SAMPLE_SIZE};

use crate::config::RunSection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ransac,
    Msac,
    Mlesac,
    Amlesac,
    AcRansac,
    Erode,
}

impl Method {
    pub const ALL: [Method; 6] = [Self::Ransac, Self::Msac, Self::Mlesac, Self::Amlesac, Self::AcRansac, Self::Erode];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ransac => "ransac",
            Self::Msac => "msac",
            Self::Mlesac => "mlesac",
            Self::Amlesac => "amlesac",
            Self::AcRansac => "ac-ransac",
            Self::Erode => "erode",
        }
    }

    /// Hypothesize-and-test methods; ERODE is a single descent.
    pub fn is_sampling(self) -> bool {
        self != Self::Erode
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Motion,
    Ba,
    BaNoise,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Self::Motion, Self::Ba, Self::BaNoise];

    pub fn refinement(self) -> RefinementScope {
        match self {
            Self::Motion => RefinementScope::MotionOnly,
            Self::Ba => RefinementScope::MotionStructure,
            Self::BaNoise => RefinementScope::MotionStructureNoise,
        }
    }

    pub fn name(self) -> &'static str {
        self.refinement().name()
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Method parameters; `None` takes the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
pub struct MethodParams {
    /// Inlier threshold T in pixels (2.79 by default; 2 is the other common choice).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Hypotheses per pair for sampling methods [default: 1000].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Inlier noise σ in pixels for MLESAC and AMLESAC [default: 1].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// NFA threshold ε for AC-RANSAC [default: 1].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Pseudo-Huber scale b for ERODE [default: 2].
    #[arg(long)]
    pub erode_scale: Option<f64>,
    /// Weight features by their distance to the principal point.
    #[arg(long)]
    pub weighting: bool,
    /// Refine with the initializer's robust cost instead of the Gaussian cost.
    #[arg(long)]
    pub robust_refinement: bool,
}

impl MethodParams {
    /// Fills unset values from a config file section.
    pub fn with_defaults_from(mut self, run: &RunSection) -> Self {
        self.threshold = self.threshold.or(run.threshold);
        self.iterations = self.iterations.or(run.iterations);
        self.sigma = self.sigma.or(run.sigma);
        self.epsilon = self.epsilon.or(run.epsilon);
        self.erode_scale = self.erode_scale.or(run.erode_scale);
        self.weighting |= run.weighting.unwrap_or(false);
        self.robust_refinement |= run.robust_refinement.unwrap_or(false);
        self
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(DEFAULT_INLIER_THRESHOLD)
    }

    pub fn iterations(&self) -> usize {
        self.iterations.unwrap_or(DEFAULT_ITERATIONS)
    }
}

pub fn noise_model(method: Method, params: &MethodParams, calib: &StereoCalibration) -> svo_core::Result<NoiseModel> {
    let t = params.threshold();
    let mixture = || {
        let sigma = params.sigma.unwrap_or(1.0);
        MixtureParams::new(Covariance::isotropic(3, sigma * sigma)?, calib.domain_volume(), 0.5)
    };
    let model = match method {
        Method::Ransac => NoiseModel::Ransac { threshold: t },
        Method::Msac => NoiseModel::Msac { threshold: t },
        Method::Mlesac => NoiseModel::Mlesac(mixture()?),
        Method::Amlesac => NoiseModel::Amlesac(mixture()?),
        Method::AcRansac => NoiseModel::AcRansac(AcRansacParams {
            alpha0: alpha0_stereo(calib),
            epsilon: params.epsilon.unwrap_or(1.0),
            sample_size: MIN_SAMPLE_SIZE,
            dim: 3,
        }),
        Method::Erode => NoiseModel::Erode {
            scale: params.erode_scale.unwrap_or(DEFAULT_ERODE_SCALE),
            threshold: t,
        },
    };
    model.validate()?;
    Ok(model)
}

pub fn pipeline_config(
    method: Method,
    scope: Scope,
    params: &MethodParams,
    calib: &StereoCalibration,
    seed: u64,
) -> svo_core::Result<PipelineConfig> {
    let initializer = match noise_model(method, params, calib)? {
        NoiseModel::Erode { scale, threshold } => Initializer::Erode { scale, threshold, seed },
        model => {
            let init = InitConfig {
                inlier_threshold: params.threshold(),
                ..InitConfig::new(model, seed).with_iterations(params.iterations())
            };
            init.validate()?;
            Initializer::Consensus(init)
        }
    };
    Ok(PipelineConfig {
        weighting: params.weighting,
        robust_refinement: params.robust_refinement,
        ..PipelineConfig::new(initializer, scope.refinement())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::ValueEnum;

    #[test]
    fn names_match_value_names() {
        for m in Method::ALL {
            assert_eq!(Method::from_str(m.name(), false).unwrap(), m);
            assert_eq!(
                pipeline_config(m, Scope::Motion, &MethodParams::default(), &StereoCalibration::kitti_like(), 0)
                    .unwrap()
                    .initializer
                    .name(),
                m.name()
            );
        }
        for s in Scope::ALL {
            assert_eq!(Scope::from_str(s.name(), false).unwrap(), s);
        }
    }

    #[test]
    fn defaults() {
        let p = MethodParams::default();
        assert_eq!(p.threshold(), 2.79);
        assert_eq!(p.iterations(), 1000);
        let cfg = pipeline_config(
            Method::Msac,
            Scope::Ba,
            &MethodParams { threshold: Some(2.0), ..p },
            &StereoCalibration::kitti_like(),
            3,
        )
        .unwrap();
        match cfg.initializer {
            Initializer::Consensus(c) => {
                assert_eq!(c.model, NoiseModel::Msac { threshold: 2.0 });
                assert_eq!(c.seed, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let calib = StereoCalibration::kitti_like();
        let bad = MethodParams {
            threshold: Some(-1.0),
            ..MethodParams::default()
        };
        assert!(pipeline_config(Method::Ransac, Scope::Motion, &bad, &calib, 0).is_err());
        let zero = MethodParams {
            iterations: Some(0),
            ..MethodParams::default()
        };
        assert!(pipeline_config(Method::Msac, Scope::Motion, &zero, &calib, 0).is_err());
    }
}
