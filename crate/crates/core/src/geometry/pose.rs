//! Rigid motions in SE(3) and their 6-vector tangent parameterization.
//!
//! Twists are ordered `(v, ω)`: translational part first, rotational part
//! last. Updates during optimization are applied on the left,
//! `P ← exp(δ) · P`.

use core::ops::Mul;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3, Vector6};

/// Tangent-space coordinates `(v, ω)` of a rigid motion.
pub type Twist = Vector6<f64>;

/// Below this rotation angle the series expansions are used.
const SMALL_ANGLE: f64 = 1e-5;

/// Rigid motion `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(&b)`.
#[inline]
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Returns `(sin θ / θ, (1 − cos θ) / θ², (θ − sin θ) / θ³)`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        (s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta))
    }
}

/// Rotation matrix of the rotation vector `w` (axis times angle).
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let (a, b, _) = rodrigues_coefficients(theta);
    let k = hat(w);
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector of `r`, with angle in `[0, π]`.
///
/// Goes through a quaternion so that both small angles and angles close
/// to π keep full precision.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let q: Quaternion<f64> = *UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r)).quaternion();
    let (mut w, mut v) = (q.w, q.imag());
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let n = v.norm();
    if n < 1e-300 {
        return Vector3::zeros();
    }
    let angle = 2.0 * n.atan2(w);
    v * (angle / n)
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Pure rotation by angle-axis vector `w`.
    pub fn from_rotation_vector(w: &Vector3<f64>) -> Self {
        Self {
            rotation: so3_exp(w),
            translation: Vector3::zeros(),
        }
    }

    /// Exponential map of a twist `(v, ω)`.
    pub fn exp(twist: &Twist) -> Self {
        let v = Vector3::new(twist[0], twist[1], twist[2]);
        let w = Vector3::new(twist[3], twist[4], twist[5]);
        let theta = w.norm();
        let (a, b, c) = rodrigues_coefficients(theta);
        let k = hat(&w);
        let k2 = k * k;
        let rotation = Matrix3::identity() + k * a + k2 * b;
        let left_jacobian = Matrix3::identity() + k * b + k2 * c;
        Self {
            rotation,
            translation: left_jacobian * v,
        }
    }

    /// Logarithm map; unique while the rotation angle stays below π.
    pub fn log(&self) -> Twist {
        let w = so3_log(&self.rotation);
        let theta = w.norm();
        let k = hat(&w);
        // Inverse of the left Jacobian: I − ½K + c·K².
        let c = if theta < SMALL_ANGLE {
            1.0 / 12.0 + theta * theta / 720.0
        } else {
            let (s, cos) = theta.sin_cos();
            (1.0 - theta * s / (2.0 * (1.0 - cos))) / (theta * theta)
        };
        let inv_left_jacobian = Matrix3::identity() - k * 0.5 + k * k * c;
        let v = inv_left_jacobian * self.translation;
        Twist::new(v.x, v.y, v.z, w.x, w.y, w.z)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Left-multiplicative update `exp(δ) · self`.
    pub fn retract(&self, delta: &Twist) -> Pose {
        Pose::exp(delta).compose(self)
    }

    /// Rotation angle in radians.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// Largest absolute entry of `RᵀR − I` together with `|det R − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.amax().max((self.rotation.determinant() - 1.0).abs())
    }

    /// Projects the rotation onto SO(3) (polar decomposition).
    pub fn orthonormalized(&self) -> Pose {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix3::identity();
        if (u * vt).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Pose {
            rotation: u * d * vt,
            translation: self.translation,
        }
    }

    /// Row-major top 3×4 block of `[R | t]`.
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    pub fn from_row_major_3x4(m: &[f64; 12]) -> Pose {
        Pose {
            rotation: Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]),
            translation: Vector3::new(m[3], m[7], m[11]),
        }
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;
    fn mul(self, rhs: &'a Pose) -> Pose {
        self.compose(rhs)
    }
}

/// `atan2` of the skew and trace parts, exact to rounding near zero where
/// a clamped `acos` of the trace is not.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let c = 0.5 * (r.trace() - 1.0);
    (0.5 * skew.norm()).atan2(c)
}

/// Angle of `a⁻¹ b`, computed without the trace formula's loss of
/// precision near zero.
pub fn rotation_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    so3_log(&(a.transpose() * b)).norm()
}
