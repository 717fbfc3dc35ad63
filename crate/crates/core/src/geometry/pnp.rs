//! Minimal absolute-pose solver: a three-point solver (Lambda Twist) on
//! the first non-degenerate triple of a four-point sample, with the
//! remaining point used to rank the candidates.
//!
//! Only the left image is used.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix3, Vector3};

use super::{Pose, StereoCalibration};
use crate::{Error, Result};

/// Smallest admissible triangle area for any triple of the sample, in
/// normalized image units.
pub const MIN_TRIANGLE_AREA: f64 = 1e-8;

/// A 3D point paired with its left-image pixel `(ul, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpCorrespondence {
    pub point: Vector3<f64>,
    pub pixel: (f64, f64),
}

/// Candidate pose with the left-image reprojection error of the point
/// not used to compute it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpCandidate {
    pub pose: Pose,
    pub check_error: f64,
}

const TRIPLES: [([usize; 3], usize); 4] = [([0, 1, 2], 3), ([0, 1, 3], 2), ([0, 2, 3], 1), ([1, 2, 3], 0)];

fn triangle_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)).abs()
}

/// Rejects samples in which any triple is (nearly) collinear, either in
/// the image or in the perspective projection of the 3D points.
pub fn check_sample(sample: &[PnpCorrespondence; 4], calib: &StereoCalibration) -> Result<()> {
    let mut image = [(0.0, 0.0); 4];
    let mut world = [(0.0, 0.0); 4];
    for (i, c) in sample.iter().enumerate() {
        if c.point.z <= 0.0 {
            return Err(Error::DegenerateSample);
        }
        image[i] = calib.normalize(c.pixel.0, c.pixel.1);
        world[i] = (c.point.x / c.point.z, c.point.y / c.point.z);
    }
    for (t, _) in TRIPLES {
        let ai = triangle_area(image[t[0]], image[t[1]], image[t[2]]);
        let aw = triangle_area(world[t[0]], world[t[1]], world[t[2]]);
        if !(ai > MIN_TRIANGLE_AREA && aw > MIN_TRIANGLE_AREA) {
            return Err(Error::DegenerateSample);
        }
    }
    Ok(())
}

/// Solves for the poses mapping the sample's points onto their left-image
/// observations, best candidate first.
///
/// An empty list means the three-point solver found no real solution.
pub fn pnp_minimal(sample: &[PnpCorrespondence; 4], calib: &StereoCalibration) -> Result<Vec<PnpCandidate>> {
    check_sample(sample, calib)?;
    let bearing = |c: &PnpCorrespondence| {
        let (x, y) = calib.normalize(c.pixel.0, c.pixel.1);
        Vector3::new(x, y, 1.0)
    };
    for (triple, check) in TRIPLES {
        let points = [sample[triple[0]].point, sample[triple[1]].point, sample[triple[2]].point];
        let rays = [bearing(&sample[triple[0]]), bearing(&sample[triple[1]]), bearing(&sample[triple[2]])];
        let poses = lambda_twist(&points, &rays);
        if poses.is_empty() {
            continue;
        }
        let probe = &sample[check];
        let mut candidates: Vec<PnpCandidate> = poses
            .into_iter()
            .filter_map(|pose| {
                let p = pose.transform(&probe.point);
                if p.z <= super::stereo::MIN_DEPTH {
                    return None;
                }
                let du = calib.focal * p.x / p.z + calib.u0 - probe.pixel.0;
                let dv = calib.focal * p.y / p.z + calib.v0 - probe.pixel.1;
                Some(PnpCandidate {
                    pose,
                    check_error: (du * du + dv * dv).sqrt(),
                })
            })
            .collect();
        candidates.sort_by(|a, b| a.check_error.total_cmp(&b.check_error));
        return Ok(candidates);
    }
    Ok(Vec::new())
}

/// Real roots of `x² + b x + c`, computed without cancellation.
fn quadratic_roots(b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return None;
    }
    let y = disc.sqrt();
    if b < 0.0 {
        Some((0.5 * (-b + y), 0.5 * (-b - y)))
    } else {
        Some((2.0 * c / (-b + y), 2.0 * c / (-b - y)))
    }
}

/// One root of `r³ + b r² + c r + d` with the largest derivative magnitude,
/// found by Newton iterations from a well-placed start.
fn sharpest_cubic_root(b: f64, c: f64, d: f64) -> f64 {
    let h = |r: f64| ((r + b) * r + c) * r + d;
    let dh = |r: f64| (3.0 * r + 2.0 * b) * r + c;
    let mut r0;
    if b * b >= 3.0 * c {
        let v = (b * b - 3.0 * c).sqrt();
        let t1 = (-b - v) / 3.0;
        let k = h(t1);
        if k > 0.0 {
            r0 = t1 - (-k / (3.0 * t1 + b)).sqrt();
        } else {
            let t2 = (-b + v) / 3.0;
            let k = h(t2);
            r0 = t2 + (-k / (3.0 * t2 + b)).sqrt();
            if !r0.is_finite() {
                r0 = t2 + k.abs().cbrt();
            }
        }
    } else {
        r0 = -b / 3.0;
        if dh(r0).abs() < 1e-4 {
            r0 += 1.0;
        }
    }
    for i in 0..50 {
        let fx = h(r0);
        if i >= 7 && fx.abs() < 1e-15 {
            break;
        }
        let step = fx / dh(r0);
        if !step.is_finite() {
            break;
        }
        r0 -= step;
    }
    r0
}

/// Eigen-decomposition of a symmetric 3×3 matrix known to be singular.
/// Returns eigenvectors as columns and eigenvalues `(e1, e2)` sorted by
/// decreasing magnitude; the third eigenvalue is zero.
fn singular_eigen(x: &Matrix3<f64>) -> (Matrix3<f64>, f64, f64) {
    let (m11, m12, m13) = (x[(0, 0)], x[(0, 1)], x[(0, 2)]);
    let (m22, m23, m33) = (x[(1, 1)], x[(1, 2)], x[(2, 2)]);
    let v3 = Vector3::new(m12 * m23 - m13 * m22, m13 * m12 - m23 * m11, m22 * m11 - m12 * m12);
    let v3 = v3.normalize();

    let m12_sq = m12 * m12;
    let b = -m11 - m22 - m33;
    let c = -m12_sq - m13 * m13 - m23 * m23 + m11 * (m22 + m33) + m22 * m33;
    let (mut e1, mut e2) = match quadratic_roots(b, c) {
        Some(r) => r,
        None => (-0.5 * b, -0.5 * b),
    };
    if e1.abs() < e2.abs() {
        core::mem::swap(&mut e1, &mut e2);
    }

    let mx0011 = -m11 * m22;
    let prec_0 = m12 * m23 - m13 * m22;
    let prec_1 = m12 * m13 - m11 * m23;
    let vector = |e: f64| {
        let tmp = 1.0 / (e * (m11 + m22) + mx0011 - e * e + m12_sq);
        let a1 = -(e * m13 + prec_0) * tmp;
        let a2 = -(e * m23 + prec_1) * tmp;
        let rnorm = 1.0 / (a1 * a1 + a2 * a2 + 1.0).sqrt();
        Vector3::new(a1 * rnorm, a2 * rnorm, rnorm)
    };
    let v1 = vector(e1);
    let v2 = vector(e2);
    (Matrix3::from_columns(&[v1, v2, v3]), e1, e2)
}

/// Polishes the depths `λ` against the three squared-distance constraints.
#[allow(clippy::too_many_arguments)]
fn refine_depths(lambda: Vector3<f64>, a12: f64, a13: f64, a23: f64, b12: f64, b13: f64, b23: f64) -> Vector3<f64> {
    let residual = |l: &Vector3<f64>| {
        Vector3::new(
            l.x * l.x + l.y * l.y + b12 * l.x * l.y - a12,
            l.x * l.x + l.z * l.z + b13 * l.x * l.z - a13,
            l.y * l.y + l.z * l.z + b23 * l.y * l.z - a23,
        )
    };
    let mut l = lambda;
    let mut r = residual(&l);
    for _ in 0..8 {
        if r.lp_norm(1) < 1e-14 * (a12 + a13 + a23) {
            break;
        }
        let j = Matrix3::new(
            2.0 * l.x + b12 * l.y,
            2.0 * l.y + b12 * l.x,
            0.0,
            2.0 * l.x + b13 * l.z,
            0.0,
            2.0 * l.z + b13 * l.x,
            0.0,
            2.0 * l.y + b23 * l.z,
            2.0 * l.z + b23 * l.y,
        );
        let Some(step) = j.lu().solve(&r) else {
            break;
        };
        let next = l - step;
        let rn = residual(&next);
        if rn.lp_norm(1) >= r.lp_norm(1) {
            break;
        }
        l = next;
        r = rn;
    }
    l
}

/// All poses with `λᵢ yᵢ = R xᵢ + t`, `λᵢ > 0`, for three world points
/// `xᵢ` and (unnormalized) bearing vectors `yᵢ`.
pub fn lambda_twist(points: &[Vector3<f64>; 3], rays: &[Vector3<f64>; 3]) -> Vec<Pose> {
    let [x1, x2, x3] = *points;
    let y1 = rays[0].normalize();
    let y2 = rays[1].normalize();
    let y3 = rays[2].normalize();

    let d12 = x1 - x2;
    let d13 = x1 - x3;
    let d23 = x2 - x3;
    let d12xd13 = d12.cross(&d13);
    let a12 = d12.norm_squared();
    let a13 = d13.norm_squared();
    let a23 = d23.norm_squared();

    let c12 = y1.dot(&y2);
    let c23 = y2.dot(&y3);
    let c31 = y3.dot(&y1);
    let blob = c12 * c23 * c31 - 1.0;
    let s12_sq = 1.0 - c12 * c12;
    let s23_sq = 1.0 - c23 * c23;
    let s31_sq = 1.0 - c31 * c31;
    let b12 = -2.0 * c12;
    let b13 = -2.0 * c31;
    let b23 = -2.0 * c23;

    let p3 = a13 * (a23 * s31_sq - a13 * s23_sq);
    let p2 = 2.0 * blob * a23 * a13 + a13 * (2.0 * a12 + a13) * s23_sq + a23 * (a23 - a12) * s31_sq;
    let p1 = a23 * (a13 - a23) * s12_sq - a12 * a12 * s23_sq - 2.0 * a12 * (blob * a23 + a13 * s23_sq);
    let p0 = a12 * (a12 * s23_sq - a23 * s12_sq);
    if p3.abs() < 1e-300 {
        return Vec::new();
    }
    let g = sharpest_cubic_root(p2 / p3, p1 / p3, p0 / p3);

    let d0 = Matrix3::new(
        a23 * (1.0 - g),
        -(a23 * c12),
        a23 * c31 * g,
        -(a23 * c12),
        a23 - a12 + a13 * g,
        -c23 * (a13 * g - a12),
        a23 * c31 * g,
        -c23 * (a13 * g - a12),
        g * (a13 - a23) - a12,
    );
    let (e, e1, e2) = singular_eigen(&d0);
    let ratio = (-e2 / e1).max(0.0).sqrt();

    let mut lambdas: Vec<Vector3<f64>> = Vec::with_capacity(4);
    for s in [ratio, -ratio] {
        let w2 = 1.0 / (s * e[(0, 1)] - e[(0, 0)]);
        let w0 = w2 * (e[(1, 0)] - s * e[(1, 1)]);
        let w1 = w2 * (e[(2, 0)] - s * e[(2, 1)]);
        let a = 1.0 / ((a13 - a12) * w1 * w1 - a12 * b13 * w1 - a12);
        let b = a * (a13 * b12 * w1 - a12 * b13 * w0 - 2.0 * w0 * w1 * (a12 - a13));
        let c = a * ((a13 - a12) * w0 * w0 + a13 * b12 * w0 + a13);
        let Some((tau1, tau2)) = quadratic_roots(b, c) else {
            continue;
        };
        for tau in [tau1, tau2] {
            if !(tau > 0.0) {
                continue;
            }
            let d = a23 / (tau * (b23 + tau) + 1.0);
            if !(d > 0.0) {
                continue;
            }
            let l2 = d.sqrt();
            let l3 = tau * l2;
            let l1 = w0 * l2 + w1 * l3;
            if l1 >= 0.0 && l1.is_finite() {
                lambdas.push(Vector3::new(l1, l2, l3));
            }
        }
    }

    let x_mat = Matrix3::from_columns(&[d12, d13, d12xd13]);
    let Some(x_inv) = x_mat.try_inverse() else {
        return Vec::new();
    };
    lambdas
        .into_iter()
        .filter_map(|lambda| {
            let l = refine_depths(lambda, a12, a13, a23, b12, b13, b23);
            let r1 = y1 * l.x;
            let r2 = y2 * l.y;
            let r3 = y3 * l.z;
            let yd1 = r1 - r2;
            let yd2 = r1 - r3;
            let y_mat = Matrix3::from_columns(&[yd1, yd2, yd1.cross(&yd2)]);
            let pose = Pose::new(y_mat * x_inv, Vector3::zeros());
            // Project back onto SO(3); the closed form is only orthonormal
            // up to the accuracy of the depths.
            let rotation = pose.orthonormalized().rotation;
            let translation = r1 - rotation * x1;
            let pose = Pose::new(rotation, translation);
            pose.rotation.iter().all(|v| v.is_finite()).then_some(pose)
        })
        .collect()
}
