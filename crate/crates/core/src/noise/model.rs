use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::{Error, Result};

/// Reprojection error of one correspondence: 3 components for motion-only
/// errors `(ul, ur, v)` of the current frame, 6 for two-view errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorVec {
    comps: [f64; 6],
    dim: u8,
}

impl ErrorVec {
    pub fn new(components: &[f64]) -> Result<Self> {
        match components.len() {
            3 | 6 => {
                let mut comps = [0.0; 6];
                comps[..components.len()].copy_from_slice(components);
                Ok(Self {
                    comps,
                    dim: components.len() as u8,
                })
            }
            got => Err(Error::DimensionMismatch { expected: 3, got }),
        }
    }

    pub fn from3(v: &Vector3<f64>) -> Self {
        Self {
            comps: [v.x, v.y, v.z, 0.0, 0.0, 0.0],
            dim: 3,
        }
    }

    pub fn from6(v: [f64; 6]) -> Self {
        Self { comps: v, dim: 6 }
    }

    /// Error of dimension 3 with the given norm, along the first axis.
    pub fn with_norm(norm: f64) -> Self {
        Self::from3(&Vector3::new(norm, 0.0, 0.0))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.comps[..self.dim()]
    }

    #[inline]
    pub fn squared_norm(&self) -> f64 {
        self.as_slice().iter().map(|x| x * x).sum()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        out.comps.iter_mut().for_each(|c| *c *= s);
        out
    }
}

/// Symmetric positive-definite covariance with its inverse and log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl Covariance {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidModel("covariance must be a non-empty square matrix"));
        }
        if (&matrix - matrix.transpose()).amax() > 1e-9 * matrix.amax().max(1.0) {
            return Err(Error::InvalidModel("covariance must be symmetric"));
        }
        let chol = matrix
            .clone()
            .cholesky()
            .ok_or(Error::InvalidModel("covariance must be positive-definite"))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            inverse: chol.inverse(),
            matrix,
            log_det,
        })
    }

    /// `σ² · I` in `dim` dimensions.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidModel("standard deviation must be positive"));
        }
        Self::new(DMatrix::identity(dim, dim) * (sigma * sigma))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `eᵀ Σ⁻¹ e`.
    pub fn mahalanobis_sq(&self, e: &[f64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(e.len(), n);
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.inverse[(i, j)] * e[j];
            }
            acc += e[i] * row;
        }
        acc
    }

    /// Log-density of the zero-mean normal distribution at `e`.
    pub fn log_density(&self, e: &[f64]) -> f64 {
        let d = self.dim() as f64;
        -0.5 * self.mahalanobis_sq(e) - 0.5 * (d * (2.0 * core::f64::consts::PI).ln() + self.log_det)
    }
}

/// Square root `L` of an information matrix, `Σ⁻¹ = Lᵀ L`, with `L`
/// lower-triangular and a positive diagonal.
///
/// As a parameter vector it is packed row by row over the lower triangle,
/// diagonal entries stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtInformation {
    l: DMatrix<f64>,
}

impl SqrtInformation {
    pub fn new(l: DMatrix<f64>) -> Result<Self> {
        if !l.is_square() || l.nrows() == 0 {
            return Err(Error::InvalidModel("square-root information must be square"));
        }
        for i in 0..l.nrows() {
            if !(l[(i, i)] > 0.0) {
                return Err(Error::InvalidModel("square-root information needs a positive diagonal"));
            }
            for j in i + 1..l.ncols() {
                if l[(i, j)] != 0.0 {
                    return Err(Error::InvalidModel("square-root information must be lower-triangular"));
                }
            }
        }
        Ok(Self { l })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            l: DMatrix::identity(dim, dim),
        }
    }

    /// `L = chol(Σ⁻¹)ᵀ`-style factor for a given covariance.
    pub fn from_covariance(cov: &Covariance) -> Result<Self> {
        let info = cov.inverse().clone();
        let info = (&info + info.transpose()) * 0.5;
        // Lᵀ L = Σ⁻¹ with L lower-triangular: reverse the index order so a
        // standard (lower) Cholesky factor gives the required shape.
        let n = info.nrows();
        let flipped = DMatrix::from_fn(n, n, |i, j| info[(n - 1 - i, n - 1 - j)]);
        let c = flipped.cholesky().ok_or(Error::InvalidModel("covariance must be positive-definite"))?.l();
        // With P the reversal permutation, info = (P C P)(P C P)ᵀ, so
        // L = P Cᵀ P is lower-triangular and Lᵀ L = info.
        let l = DMatrix::from_fn(n, n, |i, j| c[(n - 1 - j, n - 1 - i)]);
        Self::new(l)
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn param_count(&self) -> usize {
        Self::param_count_for(self.dim())
    }

    pub fn param_count_for(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// `L e`.
    pub fn whiten(&self, e: &[f64]) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |i, _| (0..=i).map(|j| self.l[(i, j)] * e[j]).sum())
    }

    /// `eᵀ Σ⁻¹ e = ‖L e‖²`.
    pub fn mahalanobis_sq(&self, e: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..=i {
                row += self.l[(i, j)] * e[j];
            }
            acc += row * row;
        }
        acc
    }

    /// `log |Σ⁻¹| = 2 Σⱼ log Lⱼⱼ`.
    pub fn log_det_information(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `Σ = (Lᵀ L)⁻¹`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let info = self.l.transpose() * &self.l;
        info.try_inverse()
            .unwrap_or_else(|| DMatrix::from_element(self.dim(), self.dim(), f64::NAN))
    }

    pub fn to_params(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(self.param_count());
        for i in 0..n {
            for j in 0..=i {
                let v = self.l[(i, j)];
                out.push(if i == j { v.ln() } else { v });
            }
        }
        out
    }

    pub fn from_params(dim: usize, params: &[f64]) -> Result<Self> {
        let expected = Self::param_count_for(dim);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        let mut l = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for i in 0..dim {
            for j in 0..=i {
                l[(i, j)] = if i == j { params[k].exp() } else { params[k] };
                k += 1;
            }
        }
        Self::new(l)
    }

    /// Index of entry `(i, j)`, `j ≤ i`, in the packed parameter vector.
    #[inline]
    pub fn param_index(i: usize, j: usize) -> usize {
        i * (i + 1) / 2 + j
    }
}

/// Parameters shared by MLESAC and AMLESAC: Gaussian inliers with
/// covariance `Σ` mixed with uniform outliers over a domain of volume `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub covariance: Covariance,
    pub outlier_volume: f64,
    pub inlier_ratio: f64,
}

impl MixtureParams {
    pub fn new(covariance: Covariance, outlier_volume: f64, inlier_ratio: f64) -> Result<Self> {
        let p = Self {
            covariance,
            outlier_volume,
            inlier_ratio,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.outlier_volume > 0.0) {
            return Err(Error::InvalidModel("outlier volume must be positive"));
        }
        if !(0.0..=1.0).contains(&self.inlier_ratio) {
            return Err(Error::InvalidModel("inlier ratio must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// A-contrario parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcRansacParams {
    /// Probability that a background correspondence has an error of at
    /// most one pixel.
    pub alpha0: f64,
    /// Largest NFA for which a model is considered meaningful.
    pub epsilon: f64,
    pub sample_size: usize,
    pub dim: usize,
}

/// Feature noise model. Each variant fixes a cost `ρ(e)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Zero below the threshold, one above.
    Ransac {
        threshold: f64,
    },
    /// Squared error truncated at the squared threshold.
    Msac {
        threshold: f64,
    },
    Mlesac(MixtureParams),
    /// MLESAC whose covariance is re-estimated per hypothesis.
    Amlesac(MixtureParams),
    /// Scored per hypothesis through the number of false alarms; as a
    /// per-correspondence cost it behaves like [`NoiseModel::Gaussian`].
    AcRansac(AcRansacParams),
    /// Pseudo-Huber kernel of scale `b`; `threshold` classifies inliers.
    Erode {
        scale: f64,
        threshold: f64,
    },
    Gaussian,
    Cauchy(SqrtInformation),
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Ransac { threshold } | NoiseModel::Msac { threshold } => {
                if !(*threshold > 0.0) {
                    return Err(Error::InvalidModel("threshold must be positive"));
                }
            }
            NoiseModel::Mlesac(p) | NoiseModel::Amlesac(p) => p.validate()?,
            NoiseModel::AcRansac(p) => {
                if !(p.alpha0 > 0.0 && p.alpha0 < 1.0) {
                    return Err(Error::InvalidModel("alpha0 must lie in (0, 1)"));
                }
                if !(p.epsilon > 0.0) {
                    return Err(Error::InvalidModel("epsilon must be positive"));
                }
            }
            NoiseModel::Erode { scale, threshold } => {
                if !(*scale > 0.0 && *threshold > 0.0) {
                    return Err(Error::InvalidModel("pseudo-Huber scale and threshold must be positive"));
                }
            }
            NoiseModel::Gaussian | NoiseModel::Cauchy(_) => {}
        }
        Ok(())
    }

    /// Short lowercase name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Ransac { .. } => "ransac",
            NoiseModel::Msac { .. } => "msac",
            NoiseModel::Mlesac(_) => "mlesac",
            NoiseModel::Amlesac(_) => "amlesac",
            NoiseModel::AcRansac(_) => "ac-ransac",
            NoiseModel::Erode { .. } => "erode",
            NoiseModel::Gaussian => "gaussian",
            NoiseModel::Cauchy(_) => "cauchy",
        }
    }

    /// Fixed inlier threshold, if the model carries one.
    pub fn threshold(&self) -> Option<f64> {
        match self {
            NoiseModel::Ransac { threshold } | NoiseModel::Msac { threshold } => Some(*threshold),
            NoiseModel::Erode { threshold, .. } => Some(*threshold),
            _ => None,
        }
    }
}

/// `2b² (√(1 + s/b²) − 1)` for squared norm `s`.
#[inline]
pub fn pseudo_huber(s: f64, b: f64) -> f64 {
    let b2 = b * b;
    let x = s / b2;
    // √(1+x) − 1 = x / (√(1+x) + 1) avoids cancellation for small x.
    2.0 * b2 * x / ((1.0 + x).sqrt() + 1.0)
}

/// Negative log of the MLESAC mixture density.
pub fn mixture_cost(params: &MixtureParams, e: &[f64], inlier_ratio: f64) -> f64 {
    let log_inlier = inlier_ratio.ln() + params.covariance.log_density(e);
    let log_outlier = (1.0 - inlier_ratio).ln() - params.outlier_volume.ln();
    -log_sum_exp(log_inlier, log_outlier)
}

#[inline]
pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Cost `ρ(e)` of a single error under `model`, in nats.
pub fn rho(model: &NoiseModel, e: &ErrorVec) -> f64 {
    let s = e.squared_norm();
    match model {
        NoiseModel::Ransac { threshold } => {
            if s < threshold * threshold {
                0.0
            } else {
                1.0
            }
        }
        NoiseModel::Msac { threshold } => s.min(threshold * threshold),
        NoiseModel::Mlesac(p) | NoiseModel::Amlesac(p) => mixture_cost(p, e.as_slice(), p.inlier_ratio),
        NoiseModel::Erode { scale, .. } => pseudo_huber(s, *scale),
        NoiseModel::Gaussian | NoiseModel::AcRansac(_) => s,
        NoiseModel::Cauchy(l) => (1.0 + l.mahalanobis_sq(e.as_slice())).ln(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(norm: f64) -> ErrorVec {
        ErrorVec::with_norm(norm)
    }

    fn mlesac() -> NoiseModel {
        NoiseModel::Mlesac(MixtureParams::new(Covariance::isotropic(3, 1.0).unwrap(), 1241.0 * 376.0 * 128.0, 0.5).unwrap())
    }

    #[test]
    fn zero_error_costs_nothing() {
        let zero = e(0.0);
        for m in [
            NoiseModel::Ransac { threshold: 2.0 },
            NoiseModel::Msac { threshold: 2.0 },
            NoiseModel::Erode { scale: 2.0, threshold: 2.79 },
            NoiseModel::Gaussian,
            NoiseModel::Cauchy(SqrtInformation::identity(3)),
        ] {
            assert_eq!(rho(&m, &zero), 0.0, "{}", m.name());
        }
    }

    #[test]
    fn msac_truncates_at_threshold_squared() {
        let m = NoiseModel::Msac { threshold: 2.0 };
        assert_eq!(rho(&m, &e(3.0)), 4.0);
        assert_eq!(rho(&m, &e(1.5)), 2.25);
    }

    #[test]
    fn ransac_step() {
        let m = NoiseModel::Ransac { threshold: 2.0 };
        assert_eq!(rho(&m, &e(1.999)), 0.0);
        assert_eq!(rho(&m, &e(2.0)), 1.0);
    }

    #[test]
    fn pseudo_huber_hand_value() {
        let v = rho(&NoiseModel::Erode { scale: 2.0, threshold: 2.79 }, &e(2.0));
        assert!((v - 8.0 * (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((v - 3.3137).abs() < 1e-4);
    }

    #[test]
    fn pseudo_huber_limits() {
        let b: f64 = 2.0;
        let small = b / 100.0;
        assert!((pseudo_huber(small * small, b) / (small * small) - 1.0).abs() < 1e-3);
        let large = 1000.0 * b;
        assert!((pseudo_huber(large * large, b) / (2.0 * b * large) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn cauchy_uses_information_matrix() {
        let mut l = DMatrix::identity(3, 3);
        l[(0, 0)] = 2.0;
        let m = NoiseModel::Cauchy(SqrtInformation::new(l).unwrap());
        let v = rho(&m, &e(1.5));
        assert!((v - (1.0f64 + 9.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn mlesac_minimum_is_finite_constant() {
        let m = mlesac();
        let at_zero = rho(&m, &e(0.0));
        let expected = -(0.5 * (2.0 * core::f64::consts::PI).powf(-1.5) + 0.5 / (1241.0 * 376.0 * 128.0)).ln();
        assert!((at_zero - expected).abs() < 1e-12);
    }

    #[test]
    fn sqrt_information_round_trips_covariance() {
        let cov = DMatrix::from_row_slice(3, 3, &[4.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.25]);
        let cov = Covariance::new(cov).unwrap();
        let l = SqrtInformation::from_covariance(&cov).unwrap();
        assert!((l.covariance() - cov.matrix()).amax() < 1e-12);
        let p = l.to_params();
        let back = SqrtInformation::from_params(3, &p).unwrap();
        assert!((back.matrix() - l.matrix()).amax() < 1e-15);
        assert!((l.log_det_information() + cov.log_det()).abs() < 1e-12);
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(NoiseModel::Msac { threshold: 0.0 }.validate().is_err());
        assert!(MixtureParams::new(Covariance::isotropic(3, 1.0).unwrap(), 1.0, 1.5).is_err());
        assert!(Covariance::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(ErrorVec::new(&[1.0, 2.0]).is_err());
    }

    fn models() -> [NoiseModel; 6] {
        [
            NoiseModel::Ransac { threshold: 2.0 },
            NoiseModel::Msac { threshold: 2.79 },
            mlesac(),
            NoiseModel::Erode { scale: 2.0, threshold: 2.79 },
            NoiseModel::Gaussian,
            NoiseModel::Cauchy(SqrtInformation::identity(3)),
        ]
    }

    proptest! {
        #[test]
        fn costs_are_non_negative_and_non_decreasing(
            dir in prop::array::uniform3(-1.0..1.0f64),
            r1 in 0.0..50.0f64,
            dr in 0.0..50.0f64,
        ) {
            let v = Vector3::from(dir);
            prop_assume!(v.norm() > 1e-3);
            let u = v.normalize();
            let a = ErrorVec::from3(&(u * r1));
            let b = ErrorVec::from3(&(u * (r1 + dr)));
            for m in models() {
                let (ra, rb) = (rho(&m, &a), rho(&m, &b));
                prop_assert!(ra >= 0.0);
                prop_assert!(rb >= ra - 1e-12, "{} {} {}", m.name(), ra, rb);
            }
        }

        #[test]
        fn msac_matches_gaussian_below_threshold(r in 0.0..10.0f64) {
            let t = 2.79;
            let m = rho(&NoiseModel::Msac { threshold: t }, &e(r));
            let g = rho(&NoiseModel::Gaussian, &e(r));
            if r * r < t * t {
                prop_assert_eq!(m, g);
            } else {
                prop_assert_eq!(m, t * t);
            }
        }
    }
}
