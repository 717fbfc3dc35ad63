//! Costs as functions of the squared (whitened) error norm `s`, with the
//! first derivative used for iterative re-weighting.

use crate::noise::{pseudo_huber, Covariance, NoiseModel, SqrtInformation};
use crate::Result;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    Quadratic,
    Cauchy,
    PseudoHuber {
        b: f64,
    },
    Truncated {
        t2: f64,
    },
    /// `−log(exp(a − s/2) + exp(c))` for a Gaussian/uniform mixture.
    Mixture {
        log_inlier: f64,
        log_outlier: f64,
    },
}

impl Kernel {
    pub fn rho(&self, s: f64) -> f64 {
        match *self {
            Kernel::Quadratic => s,
            Kernel::Cauchy => s.ln_1p(),
            Kernel::PseudoHuber { b } => pseudo_huber(s, b),
            Kernel::Truncated { t2 } => s.min(t2),
            Kernel::Mixture { log_inlier, log_outlier } => -crate::noise::log_sum_exp(log_inlier - 0.5 * s, log_outlier),
        }
    }

    /// `dρ/ds`.
    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Kernel::Quadratic => 1.0,
            Kernel::Cauchy => 1.0 / (1.0 + s),
            Kernel::PseudoHuber { b } => 1.0 / (1.0 + s / (b * b)).sqrt(),
            Kernel::Truncated { t2 } => {
                if s < t2 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Mixture { log_inlier, log_outlier } => {
                let li = log_inlier - 0.5 * s;
                0.5 * (li - crate::noise::log_sum_exp(li, log_outlier)).exp()
            }
        }
    }
}

/// Kernel and whitening for refining under `model` with `dim`-dimensional
/// errors. RANSAC and AC-RANSAC have no useful gradient and refine with the
/// Gaussian cost on their inliers.
pub(crate) fn kernel_for(model: &NoiseModel, dim: usize) -> Result<(Kernel, Option<SqrtInformation>)> {
    Ok(match model {
        NoiseModel::Gaussian | NoiseModel::Ransac { .. } | NoiseModel::AcRansac(_) => (Kernel::Quadratic, None),
        NoiseModel::Msac { threshold } => (Kernel::Truncated { t2: threshold * threshold }, None),
        NoiseModel::Erode { scale, .. } => (Kernel::PseudoHuber { b: *scale }, None),
        NoiseModel::Cauchy(l) => {
            check_dim(l.dim(), dim)?;
            (Kernel::Cauchy, Some(l.clone()))
        }
        NoiseModel::Mlesac(p) | NoiseModel::Amlesac(p) => {
            let cov = lift(&p.covariance, dim)?;
            let d = dim as f64;
            let log_inlier = p.inlier_ratio.ln() - 0.5 * (d * (2.0 * core::f64::consts::PI).ln() + cov.log_det());
            let log_outlier = (1.0 - p.inlier_ratio).ln() - outlier_volume(p.outlier_volume, p.covariance.dim(), dim).ln();
            (Kernel::Mixture { log_inlier, log_outlier }, Some(SqrtInformation::from_covariance(&cov)?))
        }
    })
}

fn check_dim(have: usize, want: usize) -> Result<()> {
    if have != want {
        return Err(crate::Error::DimensionMismatch { expected: want, got: have });
    }
    Ok(())
}

/// A 3×3 covariance used for two-view errors applies to both frames.
fn lift(cov: &Covariance, dim: usize) -> Result<Covariance> {
    if cov.dim() == dim {
        return Ok(cov.clone());
    }
    if cov.dim() * 2 == dim {
        let n = cov.dim();
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (n, n)).copy_from(cov.matrix());
        m.view_mut((n, n), (n, n)).copy_from(cov.matrix());
        return Covariance::new(m);
    }
    Err(crate::Error::DimensionMismatch {
        expected: dim,
        got: cov.dim(),
    })
}

fn outlier_volume(volume: f64, from: usize, to: usize) -> f64 {
    if from == to {
        volume
    } else {
        volume * volume
    }
}
