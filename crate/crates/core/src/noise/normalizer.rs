//! Turning costs into densities: `p(e) = exp(−ρ(e)) / ∫ exp(−ρ(x)) dx`, and
//! the total cost of a set of errors.

use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use super::model::{pseudo_huber, rho, ErrorVec, NoiseModel};
use crate::{Error, Result};

/// Region over which a cost is normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Unbounded,
    /// Ball of the given volume centred on zero.
    Volume(f64),
    /// Ball of the given radius centred on zero. For the Cauchy model the
    /// ball is taken in whitened coordinates, `‖L x‖ ≤ radius`.
    Ball {
        radius: f64,
    },
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) / libm::tgamma(h + 1.0)
}

/// Surface area of the unit sphere in `d` dimensions.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Regularized lower incomplete gamma `P(d/2, x)` for integer `d ≥ 1`.
pub fn regularized_gamma_half(d: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if d.is_multiple_of(2) {
        let a = d / 2;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..a {
            term *= x / k as f64;
            sum += term;
        }
        1.0 - (-x).exp() * sum
    } else {
        let mut p = libm::erf(x.sqrt());
        let mut a = 0.5;
        while a < d as f64 / 2.0 {
            p -= (a * x.ln() - x - libm::lgamma(a + 1.0)).exp();
            a += 1.0;
        }
        p.clamp(0.0, 1.0)
    }
}

/// `∫₀ᴿ rⁿ / (1 + r²) dr`.
fn cauchy_radial_integral(n: usize, r: f64) -> f64 {
    match n {
        0 => r.atan(),
        1 => 0.5 * (r * r).ln_1p(),
        _ => r.powi(n as i32 - 1) / (n - 1) as f64 - cauchy_radial_integral(n - 2, r),
    }
}

/// Composite Simpson rule for `∫ₐᵇ f`.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn resolve_radius(domain: Domain, d: usize) -> Option<f64> {
    match domain {
        Domain::Unbounded => None,
        Domain::Volume(v) => Some((v / unit_ball_volume(d)).powf(1.0 / d as f64)),
        Domain::Ball { radius } => Some(radius),
    }
}

/// `log ∫ exp(−ρ(x)) dx` over `domain` in `dim` dimensions.
///
/// RANSAC and MSAC only normalize over a bounded domain. The MLESAC
/// mixture is normalized over its own outlier volume and returns 0.
pub fn log_normalizer(model: &NoiseModel, dim: usize, domain: Domain) -> Result<f64> {
    let d = dim as f64;
    let radius = resolve_radius(domain, dim);
    let ball = |r: f64| unit_ball_volume(dim) * r.powi(dim as i32);
    let value = match model {
        NoiseModel::Gaussian | NoiseModel::AcRansac(_) => match radius {
            None => return Ok(0.5 * d * PI.ln()),
            Some(r) => PI.powf(0.5 * d) * regularized_gamma_half(dim, r * r),
        },
        NoiseModel::Ransac { threshold } => {
            let r = radius.ok_or(Error::NonNormalizable)?;
            let inner = ball(threshold.min(r));
            inner + (ball(r) - inner) * (-1.0f64).exp()
        }
        NoiseModel::Msac { threshold } => {
            let r = radius.ok_or(Error::NonNormalizable)?;
            let t = threshold.min(r);
            PI.powf(0.5 * d) * regularized_gamma_half(dim, t * t) + (ball(r) - ball(t)) * (-threshold * threshold).exp()
        }
        NoiseModel::Mlesac(_) | NoiseModel::Amlesac(_) => return Ok(0.0),
        NoiseModel::Erode { scale, .. } => {
            let b = *scale;
            let upper = match radius {
                Some(r) => r,
                // ρ reaches 100 nats here; the tail beyond is negligible.
                None => b * ((1.0 + 50.0 / (b * b)).powi(2) - 1.0).sqrt(),
            };
            let radial = simpson(|r| r.powi(dim as i32 - 1) * (-pseudo_huber(r * r, b)).exp(), 0.0, upper, 20_000);
            if dim == 1 {
                2.0 * radial
            } else {
                unit_sphere_area(dim) * radial
            }
        }
        NoiseModel::Cauchy(l) => {
            let r = match domain {
                Domain::Unbounded => return Err(Error::NonNormalizable),
                Domain::Ball { radius } => radius,
                Domain::Volume(v) => (v * (0.5 * l.log_det_information()).exp() / unit_ball_volume(dim)).powf(1.0 / d),
            };
            let shell = if dim == 1 { 2.0 } else { unit_sphere_area(dim) };
            let log_whitened = (shell * cauchy_radial_integral(dim - 1, r)).ln();
            return Ok(log_whitened - 0.5 * l.log_det_information());
        }
    };
    Ok(value.ln())
}

/// Density corresponding to cost `rho_value` given the log-normalizer.
pub fn prob_of_cost(rho_value: f64, log_normalizer: f64) -> Result<f64> {
    if !log_normalizer.is_finite() {
        return Err(Error::NonNormalizable);
    }
    Ok((-rho_value - log_normalizer).exp())
}

/// Data and normalization parts of the negative log-likelihood, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub data_cost: f64,
    pub normalization_cost: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(data_cost: f64, normalization_cost: f64) -> Self {
        Self {
            data_cost,
            normalization_cost,
            total: data_cost + normalization_cost,
        }
    }
}

/// Per-unit-weight normalization term as reported by [`total_cost`].
///
/// For the Cauchy model this is the covariance-dependent part
/// `log|Σ| / (d + 1)`, the only part that varies during refinement. Models
/// that need a bounded domain (RANSAC, MSAC) report 0.
pub fn normalization_per_weight(model: &NoiseModel, dim: usize) -> f64 {
    match model {
        NoiseModel::Cauchy(l) => -l.log_det_information() / (dim as f64 + 1.0),
        NoiseModel::Ransac { .. } | NoiseModel::Msac { .. } => 0.0,
        _ => log_normalizer(model, dim, Domain::Unbounded).unwrap_or(0.0),
    }
}

/// `Σ wᵢ ρ(eᵢ)` plus the normalization term scaled by the total weight
/// (the count `N` when every weight is 1).
pub fn total_cost(model: &NoiseModel, errors: &[ErrorVec], weights: &[f64]) -> Result<CostBreakdown> {
    if errors.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: errors.len(),
            got: weights.len(),
        });
    }
    let dim = match model {
        NoiseModel::Cauchy(l) => l.dim(),
        _ => errors.first().map_or(3, ErrorVec::dim),
    };
    let mut data = 0.0;
    let mut weight_sum = 0.0;
    for (e, &w) in errors.iter().zip(weights) {
        data += w * rho(model, e);
        weight_sum += w;
    }
    Ok(CostBreakdown::new(data, weight_sum * normalization_per_weight(model, dim)))
}
