//! Reprojection errors and their analytic derivatives.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x6, Vector3};

use super::RefinementScope;
use crate::geometry::{hat, Point3, Pose, StereoCalibration, StereoMeasurement, StereoObservation};
use crate::noise::SqrtInformation;
use crate::{Error, Result};

/// Derivative of the stereo projection with respect to the camera-frame
/// point.
pub(crate) fn projection_jacobian(p: &Vector3<f64>, calib: &StereoCalibration) -> Result<Matrix3<f64>> {
    if p.z <= crate::geometry::stereo::MIN_DEPTH {
        return Err(Error::PointBehindCamera { depth: p.z });
    }
    let f = calib.focal;
    let iz = 1.0 / p.z;
    let iz2 = iz * iz;
    Ok(Matrix3::new(
        f * iz,
        0.0,
        -f * p.x * iz2,
        f * iz,
        0.0,
        -f * (p.x - calib.baseline) * iz2,
        0.0,
        f * iz,
        -f * p.y * iz2,
    ))
}

fn difference(z: &StereoObservation, predicted: &StereoObservation) -> Vector3<f64> {
    z.to_vector() - predicted.to_vector()
}

/// `z_cur − π(X·Y)`.
pub fn motion_error(pose: &Pose, point: &Point3, obs: &StereoObservation, calib: &StereoCalibration) -> Result<Vector3<f64>> {
    Ok(difference(obs, &calib.project(&pose.transform(point))?))
}

/// `[z_prev − π(Y); z_cur − π(X·Y)]`.
pub fn two_view_error(pose: &Pose, point: &Point3, m: &StereoMeasurement, calib: &StereoCalibration) -> Result<[f64; 6]> {
    let prev = difference(&m.prev, &calib.project(point)?);
    let cur = motion_error(pose, point, &m.cur, calib)?;
    Ok([prev.x, prev.y, prev.z, cur.x, cur.y, cur.z])
}

/// Current-frame error and its derivatives with respect to a left pose
/// increment and to the point.
pub(crate) fn motion_error_jacobian(
    pose: &Pose,
    point: &Point3,
    obs: &StereoObservation,
    calib: &StereoCalibration,
) -> Result<(Vector3<f64>, Matrix3x6<f64>, Matrix3<f64>)> {
    let p = pose.transform(point);
    let jp = projection_jacobian(&p, calib)?;
    let e = difference(obs, &calib.project(&p)?);
    let mut dp = Matrix3x6::zeros();
    dp.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    dp.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-hat(&p)));
    Ok((e, -jp * dp, -jp * pose.rotation))
}

/// Previous-frame error and its derivative with respect to the point.
pub(crate) fn prev_error_jacobian(point: &Point3, obs: &StereoObservation, calib: &StereoCalibration) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let jp = projection_jacobian(point, calib)?;
    Ok((difference(obs, &calib.project(point)?), -jp))
}

/// Derivative of `u = L e` with respect to the packed parameters of `L`.
pub(crate) fn whitening_jacobian(l: &SqrtInformation, e: &[f64]) -> DMatrix<f64> {
    let d = l.dim();
    let m = l.matrix();
    let mut j = DMatrix::zeros(d, SqrtInformation::param_count_for(d));
    for i in 0..d {
        for c in 0..=i {
            let k = SqrtInformation::param_index(i, c);
            // Diagonal entries are stored as logarithms.
            j[(i, k)] = if c == i { m[(i, i)] * e[i] } else { e[c] };
        }
    }
    j
}

/// Variables local to one correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalState {
    pub pose: Pose,
    pub point: Point3,
    /// Square-root information, used by [`RefinementScope::MotionStructureNoise`].
    pub noise: Option<SqrtInformation>,
}

impl LocalState {
    fn whitening(&self) -> Result<&SqrtInformation> {
        let l = self
            .noise
            .as_ref()
            .ok_or(Error::InvalidModel("noise scope needs a square-root information matrix"))?;
        if l.dim() != 6 {
            return Err(Error::DimensionMismatch { expected: 6, got: l.dim() });
        }
        Ok(l)
    }
}

/// Error of one correspondence in `scope`: the current-frame error for
/// motion-only refinement, both frames for the structure scopes, whitened
/// by `L` when the noise is refined.
pub fn residual(scope: RefinementScope, state: &LocalState, m: &StereoMeasurement, calib: &StereoCalibration) -> Result<DVector<f64>> {
    match scope {
        RefinementScope::MotionOnly => Ok(DVector::from_column_slice(
            motion_error(&state.pose, &state.point, &m.cur, calib)?.as_slice(),
        )),
        RefinementScope::MotionStructure => Ok(DVector::from_column_slice(&two_view_error(&state.pose, &state.point, m, calib)?)),
        RefinementScope::MotionStructureNoise => {
            let l = state.whitening()?;
            Ok(l.whiten(&two_view_error(&state.pose, &state.point, m, calib)?))
        }
    }
}

/// Analytic derivative of [`residual`]. Columns are the left pose increment
/// `(v, ω)`, then the point (structure scopes), then the packed `L`
/// parameters (noise scope).
pub fn jacobian(scope: RefinementScope, state: &LocalState, m: &StereoMeasurement, calib: &StereoCalibration) -> Result<DMatrix<f64>> {
    let (_, jpose, jpoint) = motion_error_jacobian(&state.pose, &state.point, &m.cur, calib)?;
    if scope == RefinementScope::MotionOnly {
        return Ok(DMatrix::from_iterator(3, 6, jpose.iter().copied()));
    }
    let (_, jprev) = prev_error_jacobian(&state.point, &m.prev, calib)?;
    let mut j = DMatrix::zeros(6, 9);
    j.view_mut((0, 6), (3, 3)).copy_from(&jprev);
    j.view_mut((3, 0), (3, 6)).copy_from(&jpose);
    j.view_mut((3, 6), (3, 3)).copy_from(&jpoint);
    if scope == RefinementScope::MotionStructure {
        return Ok(j);
    }
    let l = state.whitening()?;
    let e = two_view_error(&state.pose, &state.point, m, calib)?;
    let np = l.param_count();
    let mut full = DMatrix::zeros(6, 9 + np);
    full.view_mut((0, 0), (6, 9)).copy_from(&(l.matrix() * j));
    full.view_mut((0, 9), (6, np)).copy_from(&whitening_jacobian(l, &e));
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Twist;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const STEP: f64 = 1e-6;

    fn perturb(state: &LocalState, k: usize, h: f64) -> LocalState {
        let mut s = state.clone();
        if k < 6 {
            let mut t = Twist::zeros();
            t[k] = h;
            s.pose = s.pose.retract(&t);
        } else if k < 9 {
            s.point[k - 6] += h;
        } else {
            let l = s.noise.as_ref().unwrap();
            let mut p = l.to_params();
            p[k - 9] += h;
            s.noise = Some(SqrtInformation::from_params(l.dim(), &p).unwrap());
        }
        s
    }

    fn numeric(scope: RefinementScope, state: &LocalState, m: &StereoMeasurement, calib: &StereoCalibration, cols: usize) -> DMatrix<f64> {
        let rows = residual(scope, state, m, calib).unwrap().len();
        let mut j = DMatrix::zeros(rows, cols);
        for k in 0..cols {
            let plus = residual(scope, &perturb(state, k, STEP), m, calib).unwrap();
            let minus = residual(scope, &perturb(state, k, -STEP), m, calib).unwrap();
            j.set_column(k, &((plus - minus) / (2.0 * STEP)));
        }
        j
    }

    fn random_state(rng: &mut ChaCha8Rng, with_noise: bool) -> (LocalState, StereoMeasurement) {
        let calib = StereoCalibration::kitti_like();
        let w = Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3), rng.random_range(-1.5..1.5));
        let pose = Pose::new(Pose::from_rotation_vector(&w).rotation, t);
        let point = Vector3::new(rng.random_range(-8.0..8.0), rng.random_range(-2.0..2.0), rng.random_range(5.0..40.0));
        let prev = calib.project(&point).unwrap();
        let cur = calib.project(&pose.transform(&point)).unwrap();
        let jitter = |o: StereoObservation, rng: &mut ChaCha8Rng| {
            StereoObservation::new(
                o.ul + rng.random_range(-3.0..3.0),
                o.ur + rng.random_range(-3.0..3.0),
                o.v + rng.random_range(-3.0..3.0),
            )
        };
        let m = StereoMeasurement::new(jitter(prev, rng), jitter(cur, rng));
        let noise = with_noise.then(|| {
            let mut l = DMatrix::zeros(6, 6);
            for i in 0..6 {
                for j in 0..i {
                    l[(i, j)] = rng.random_range(-0.3..0.3);
                }
                l[(i, i)] = rng.random_range(0.3..2.0);
            }
            SqrtInformation::new(l).unwrap()
        });
        (LocalState { pose, point, noise }, m)
    }

    fn max_relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        // Relative to the column scale, so exact zeros do not blow up.
        let mut worst: f64 = 0.0;
        for c in 0..a.ncols() {
            let scale = b.column(c).amax().max(1e-3);
            worst = worst.max((a.column(c) - b.column(c)).amax() / scale);
        }
        worst
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let calib = StereoCalibration::kitti_like();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (scope, cols) in [
            (RefinementScope::MotionOnly, 6),
            (RefinementScope::MotionStructure, 9),
            (RefinementScope::MotionStructureNoise, 30),
        ] {
            let mut worst: f64 = 0.0;
            for _ in 0..200 {
                let (state, m) = random_state(&mut rng, scope == RefinementScope::MotionStructureNoise);
                let a = jacobian(scope, &state, &m, &calib).unwrap();
                let n = numeric(scope, &state, &m, &calib, cols);
                worst = worst.max(max_relative_error(&a, &n));
            }
            assert!(worst < 1e-5, "{scope:?}: {worst}");
        }
    }

    #[test]
    fn vertical_error_ignores_depth_motion_on_axis() {
        let calib = StereoCalibration::kitti_like();
        let state = LocalState {
            pose: Pose::identity(),
            point: Vector3::new(0.0, 0.0, 10.0),
            noise: None,
        };
        let m = StereoMeasurement::default();
        let j = jacobian(RefinementScope::MotionOnly, &state, &m, &calib).unwrap();
        assert_eq!(j[(2, 2)], 0.0);
    }

    #[test]
    fn previous_frame_rows_do_not_depend_on_pose() {
        let calib = StereoCalibration::kitti_like();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (state, m) = random_state(&mut rng, false);
        let j = jacobian(RefinementScope::MotionStructure, &state, &m, &calib).unwrap();
        assert!(j.view((0, 0), (3, 6)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn behind_camera_is_reported() {
        let calib = StereoCalibration::kitti_like();
        let state = LocalState {
            pose: Pose::from_translation(Vector3::new(0.0, 0.0, -20.0)),
            point: Vector3::new(0.0, 0.0, 10.0),
            noise: None,
        };
        let err = jacobian(RefinementScope::MotionOnly, &state, &StereoMeasurement::default(), &calib).unwrap_err();
        assert!(matches!(err, Error::PointBehindCamera { .. }));
    }
}
