//! Nonlinear refinement of the camera motion, optionally with the 3D
//! structure and the inlier noise distribution.

mod kernel;
mod lm;
mod residual;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Vector3, Vector6};

use crate::correspondence::Correspondence;
use crate::geometry::{Point3, Pose, StereoCalibration};
use crate::noise::{ErrorVec, NoiseModel, SqrtInformation};
use crate::{Error, Result};

pub(crate) use kernel::{kernel_for, Kernel};
pub use lm::Termination;
use lm::{Problem, Term};
pub use residual::{jacobian, motion_error, residual, two_view_error, LocalState};

/// Which variables are refined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefinementScope {
    /// Pose only, current-frame errors (`d = 3`), structure fixed.
    MotionOnly,
    /// Pose and points, errors in both frames (`d = 6`); frame `k−1` is
    /// fixed at the identity.
    MotionStructure,
    /// As `MotionStructure`, plus the square-root information of a Cauchy
    /// noise model.
    MotionStructureNoise,
}

impl RefinementScope {
    pub const ALL: [RefinementScope; 3] = [Self::MotionOnly, Self::MotionStructure, Self::MotionStructureNoise];

    /// Dimension of one correspondence's error.
    pub fn error_dim(self) -> usize {
        match self {
            Self::MotionOnly => 3,
            _ => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::MotionOnly => "motion",
            Self::MotionStructure => "ba",
            Self::MotionStructureNoise => "ba-noise",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementResult {
    pub pose: Pose,
    pub structure: Option<Vec<Point3>>,
    pub noise: Option<SqrtInformation>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Gradient ∞-norm at the last linearization.
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
struct BundleState {
    pose: Pose,
    points: Vec<Point3>,
    noise: Option<SqrtInformation>,
}

#[derive(Clone)]
struct TwoView<'a> {
    scope: RefinementScope,
    data: &'a [Correspondence],
    calib: &'a StereoCalibration,
    kernel: Kernel,
    /// Fixed whitening for the motion and structure scopes.
    whitening: Option<SqrtInformation>,
    weight_sum: f64,
}

impl TwoView<'_> {
    fn normalizer_factor(&self) -> f64 {
        self.weight_sum / (self.scope.error_dim() as f64 + 1.0)
    }

    fn whitening<'s>(&'s self, state: &'s BundleState) -> Option<&'s SqrtInformation> {
        state.noise.as_ref().or(self.whitening.as_ref())
    }

    fn error(&self, state: &BundleState, i: usize) -> Result<ErrorVec> {
        let c = &self.data[i];
        Ok(match self.scope {
            RefinementScope::MotionOnly => ErrorVec::from3(&motion_error(&state.pose, &state.points[i], &c.measurement.cur, self.calib)?),
            _ => ErrorVec::from6(two_view_error(&state.pose, &state.points[i], &c.measurement, self.calib)?),
        })
    }
}

fn whiten(l: Option<&SqrtInformation>, e: &[f64]) -> DVector<f64> {
    match l {
        Some(l) => l.whiten(e),
        None => DVector::from_column_slice(e),
    }
}

fn lift(l: Option<&SqrtInformation>, j: DMatrix<f64>) -> DMatrix<f64> {
    match l {
        Some(l) => l.matrix() * j,
        None => j,
    }
}

impl Problem for TwoView<'_> {
    type State = BundleState;

    fn camera_dim(&self) -> usize {
        match self.scope {
            RefinementScope::MotionStructureNoise => 6 + SqrtInformation::param_count_for(6),
            _ => 6,
        }
    }

    fn point_count(&self) -> usize {
        match self.scope {
            RefinementScope::MotionOnly => 0,
            _ => self.data.len(),
        }
    }

    fn cost(&self, state: &BundleState) -> f64 {
        let l = self.whitening(state);
        let mut total = 0.0;
        for (i, c) in self.data.iter().enumerate() {
            let Ok(e) = self.error(state, i) else {
                return f64::INFINITY;
            };
            let s = whiten(l, e.as_slice()).norm_squared();
            total += c.weight * self.kernel.rho(s);
        }
        if let Some(n) = &state.noise {
            total -= self.normalizer_factor() * n.log_det_information();
        }
        total
    }

    fn linearize(&self, state: &BundleState, terms: &mut Vec<Term>) -> Result<()> {
        let l = self.whitening(state);
        for (i, c) in self.data.iter().enumerate() {
            let m = &c.measurement;
            let local = LocalState {
                pose: state.pose,
                point: state.points[i],
                noise: None,
            };
            let raw = self.error(state, i)?;
            let u = whiten(l, raw.as_slice());
            let scale = c.weight * self.kernel.derivative(u.norm_squared());
            let (camera, structure) = match self.scope {
                RefinementScope::MotionOnly => (lift(l, jacobian(RefinementScope::MotionOnly, &local, m, self.calib)?), None),
                _ => {
                    let j = jacobian(RefinementScope::MotionStructure, &local, m, self.calib)?;
                    let pose_part = lift(l, j.columns(0, 6).into_owned());
                    let point_part = lift(l, j.columns(6, 3).into_owned());
                    let camera = match &state.noise {
                        Some(n) => {
                            let wj = residual::whitening_jacobian(n, raw.as_slice());
                            let mut full = DMatrix::zeros(6, 6 + wj.ncols());
                            full.columns_mut(0, 6).copy_from(&pose_part);
                            full.columns_mut(6, wj.ncols()).copy_from(&wj);
                            full
                        }
                        None => pose_part,
                    };
                    (camera, Some(point_part))
                }
            };
            terms.push(Term {
                point: (self.scope != RefinementScope::MotionOnly).then_some(i),
                scale,
                u,
                camera,
                structure,
            });
        }
        Ok(())
    }

    fn extra_gradient(&self, state: &BundleState, g: &mut DVector<f64>) {
        if let Some(n) = &state.noise {
            normalizer_gradient(n.dim(), self.normalizer_factor(), g, 6);
        }
    }

    fn retract(&self, state: &BundleState, dc: &DVector<f64>, dp: &[Vector3<f64>]) -> Result<BundleState> {
        let twist = Vector6::from_iterator(dc.rows(0, 6).iter().copied());
        let points = if dp.is_empty() {
            state.points.clone()
        } else {
            state.points.iter().zip(dp).map(|(p, d)| p + d).collect()
        };
        let noise = match &state.noise {
            Some(n) => Some(step_noise(n, &dc.as_slice()[6..])?),
            None => None,
        };
        Ok(BundleState {
            pose: state.pose.retract(&twist),
            points,
            noise,
        })
    }
}

/// `∂/∂θ` of `−(W/(d+1)) log|Σ⁻¹| = −(2W/(d+1)) Σ θ_jj`.
fn normalizer_gradient(dim: usize, factor: f64, g: &mut DVector<f64>, offset: usize) {
    for j in 0..dim {
        g[offset + SqrtInformation::param_index(j, j)] -= 2.0 * factor;
    }
}

fn step_noise(n: &SqrtInformation, delta: &[f64]) -> Result<SqrtInformation> {
    let mut p = n.to_params();
    for (a, d) in p.iter_mut().zip(delta) {
        *a += d;
    }
    SqrtInformation::from_params(n.dim(), &p)
}

/// Refines `pose0` on the given (inlier) correspondences, minimizing
/// `Σ wᵢ ρ(eᵢ)` plus, when the noise is refined, `(W/(d+1)) log|Σ|`.
///
/// The structure scopes require no particular model; the noise scope
/// requires [`NoiseModel::Cauchy`] with a 6×6 starting matrix.
pub fn refine(
    scope: RefinementScope,
    pose0: &Pose,
    correspondences: &[Correspondence],
    calib: &StereoCalibration,
    model: &NoiseModel,
) -> Result<RefinementResult> {
    if correspondences.len() < 4 {
        return Err(Error::InsufficientCorrespondences {
            got: correspondences.len(),
            need: 4,
        });
    }
    let dim = scope.error_dim();
    let (kernel, whitening) = kernel_for(model, dim)?;
    let (noise, whitening) = match scope {
        RefinementScope::MotionStructureNoise => match model {
            NoiseModel::Cauchy(_) => (whitening, None),
            _ => return Err(Error::InvalidModel("noise refinement needs a Cauchy model")),
        },
        _ => (None, whitening),
    };
    let problem = TwoView {
        scope,
        data: correspondences,
        calib,
        kernel,
        whitening,
        weight_sum: correspondences.iter().map(|c| c.weight).sum(),
    };
    let mut state = BundleState {
        pose: *pose0,
        points: correspondences.iter().map(|c| c.point).collect(),
        noise,
    };
    let initial_cost = problem.cost(&state);
    let mut warm_iterations = 0;
    if let Some(l) = &state.noise {
        // Settle pose and structure under the starting noise first; the joint
        // objective is unbounded below as residuals vanish, so growing L
        // from a poor pose can freeze the geometry early.
        let warm = TwoView {
            scope: RefinementScope::MotionStructure,
            whitening: Some(l.clone()),
            ..problem.clone()
        };
        let out = lm::minimize(
            &warm,
            BundleState {
                noise: None,
                ..state.clone()
            },
        )?;
        warm_iterations = out.iterations;
        state.pose = out.state.pose;
        state.points = out.state.points;
    }
    let out = lm::minimize(&problem, state)?;
    Ok(RefinementResult {
        pose: out.state.pose,
        structure: (scope != RefinementScope::MotionOnly).then_some(out.state.points),
        noise: out.state.noise,
        initial_cost,
        final_cost: out.final_cost,
        iterations: warm_iterations + out.iterations,
        termination: out.termination,
        gradient_norm: out.gradient_norm,
    })
}

/// Result of fitting the Cauchy noise to fixed errors.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFit {
    pub noise: SqrtInformation,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub termination: Termination,
}

struct NoiseOnly<'a> {
    errors: &'a [ErrorVec],
    weights: &'a [f64],
    dim: usize,
    factor: f64,
}

impl Problem for NoiseOnly<'_> {
    type State = SqrtInformation;

    fn camera_dim(&self) -> usize {
        SqrtInformation::param_count_for(self.dim)
    }

    fn point_count(&self) -> usize {
        0
    }

    fn cost(&self, l: &SqrtInformation) -> f64 {
        let data: f64 = self
            .errors
            .iter()
            .zip(self.weights)
            .map(|(e, w)| w * Kernel::Cauchy.rho(l.mahalanobis_sq(e.as_slice())))
            .sum();
        data - self.factor * l.log_det_information()
    }

    fn linearize(&self, l: &SqrtInformation, terms: &mut Vec<Term>) -> Result<()> {
        for (e, w) in self.errors.iter().zip(self.weights) {
            let u = l.whiten(e.as_slice());
            terms.push(Term {
                point: None,
                scale: w * Kernel::Cauchy.derivative(u.norm_squared()),
                u,
                camera: residual::whitening_jacobian(l, e.as_slice()),
                structure: None,
            });
        }
        Ok(())
    }

    fn extra_gradient(&self, _l: &SqrtInformation, g: &mut DVector<f64>) {
        normalizer_gradient(self.dim, self.factor, g, 0);
    }

    fn retract(&self, l: &SqrtInformation, dc: &DVector<f64>, _dp: &[Vector3<f64>]) -> Result<SqrtInformation> {
        step_noise(l, dc.as_slice())
    }
}

/// Fits the Cauchy square-root information to fixed errors, starting at
/// `initial`.
pub fn fit_cauchy_noise(errors: &[ErrorVec], weights: &[f64], initial: &SqrtInformation) -> Result<NoiseFit> {
    if errors.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: errors.len(),
            got: weights.len(),
        });
    }
    let dim = initial.dim();
    if let Some(e) = errors.iter().find(|e| e.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: e.dim() });
    }
    let problem = NoiseOnly {
        errors,
        weights,
        dim,
        factor: weights.iter().sum::<f64>() / (dim as f64 + 1.0),
    };
    let out = lm::minimize(&problem, initial.clone())?;
    Ok(NoiseFit {
        noise: out.state,
        initial_cost: out.initial_cost,
        final_cost: out.final_cost,
        iterations: out.iterations,
        termination: out.termination,
    })
}

#[cfg(test)]
mod tests;
