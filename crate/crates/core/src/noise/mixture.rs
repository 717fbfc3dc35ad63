//! EM estimation of the inlier ratio (and, for AMLESAC, the inlier
//! covariance) of a Gaussian/uniform mixture.

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use super::model::{log_sum_exp, Covariance, ErrorVec};
use crate::Result;

pub const EM_TOLERANCE: f64 = 1e-6;
pub const EM_MAX_ITERATIONS: usize = 100;
/// Smallest eigenvalue allowed in a re-estimated covariance, in pixels².
pub const COVARIANCE_FLOOR: f64 = 1e-4;

fn responsibility(cov: &Covariance, log_outlier_density: f64, gamma: f64, e: &[f64]) -> f64 {
    let li = gamma.ln() + cov.log_density(e);
    let lo = (1.0 - gamma).ln() + log_outlier_density;
    let total = log_sum_exp(li, lo);
    if total == f64::NEG_INFINITY {
        return 0.0;
    }
    (li - total).exp()
}

/// Inlier ratio of the MLESAC mixture by fixed-point EM from `gamma0`.
pub fn mlesac_estimate_gamma(errors: &[ErrorVec], cov: &Covariance, volume: f64, gamma0: f64) -> f64 {
    if errors.is_empty() {
        return gamma0.clamp(0.0, 1.0);
    }
    let log_outlier = -volume.ln();
    let mut gamma = gamma0.clamp(0.0, 1.0);
    for _ in 0..EM_MAX_ITERATIONS {
        let sum: f64 = errors.iter().map(|e| responsibility(cov, log_outlier, gamma, e.as_slice())).sum();
        let next = (sum / errors.len() as f64).clamp(0.0, 1.0);
        let delta = (next - gamma).abs();
        gamma = next;
        if delta < EM_TOLERANCE {
            break;
        }
    }
    gamma
}

/// Joint EM over the inlier ratio and the inlier covariance.
pub fn amlesac_estimate(errors: &[ErrorVec], cov0: &Covariance, volume: f64, gamma0: f64) -> Result<(f64, Covariance)> {
    let mut gamma = gamma0.clamp(0.0, 1.0);
    let mut cov = cov0.clone();
    if errors.is_empty() {
        return Ok((gamma, cov));
    }
    let dim = cov.dim();
    let log_outlier = -volume.ln();
    let mut resp = alloc::vec![0.0; errors.len()];
    for _ in 0..EM_MAX_ITERATIONS {
        for (r, e) in resp.iter_mut().zip(errors) {
            *r = responsibility(&cov, log_outlier, gamma, e.as_slice());
        }
        let mass: f64 = resp.iter().sum();
        let next = (mass / errors.len() as f64).clamp(0.0, 1.0);
        if mass > 0.0 {
            let mut scatter = DMatrix::<f64>::zeros(dim, dim);
            for (r, e) in resp.iter().zip(errors) {
                let v = e.as_slice();
                for i in 0..dim {
                    for j in 0..dim {
                        scatter[(i, j)] += r * v[i] * v[j];
                    }
                }
            }
            cov = Covariance::new(floor_eigenvalues(scatter / mass))?;
        }
        let delta = (next - gamma).abs();
        gamma = next;
        if delta < EM_TOLERANCE {
            break;
        }
    }
    Ok((gamma, cov))
}

fn floor_eigenvalues(m: DMatrix<f64>) -> DMatrix<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let mut eig = sym.symmetric_eigen();
    for v in eig.eigenvalues.iter_mut() {
        *v = v.max(COVARIANCE_FLOOR);
    }
    let r = eig.recompose();
    (&r + r.transpose()) * 0.5
}
