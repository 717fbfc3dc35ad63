//! Rectified stereo camera: projection into both images and triangulation
//! from a single stereo observation.

use nalgebra::Vector3;

use super::Pose;
use crate::{Error, Result};

/// Points closer than this to the camera plane cannot be projected.
pub const MIN_DEPTH: f64 = 1e-9;

/// Intrinsics of a rectified stereo rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoCalibration {
    /// Focal length in pixels, shared by both cameras.
    pub focal: f64,
    pub u0: f64,
    pub v0: f64,
    /// Baseline in meters.
    pub baseline: f64,
    pub width: f64,
    pub height: f64,
    /// Largest disparity a match may have, in pixels.
    pub disparity_range: f64,
}

impl StereoCalibration {
    pub fn new(focal: f64, (u0, v0): (f64, f64), baseline: f64, (width, height): (f64, f64), disparity_range: f64) -> Result<Self> {
        let calib = Self {
            focal,
            u0,
            v0,
            baseline,
            width,
            height,
            disparity_range,
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) {
            return Err(Error::InvalidConfig("focal length must be positive"));
        }
        if !(self.baseline > 0.0) {
            return Err(Error::InvalidConfig("baseline must be positive"));
        }
        if !(self.disparity_range > 0.0) {
            return Err(Error::InvalidConfig("disparity range must be positive"));
        }
        if !(self.u0 > 0.0 && self.u0 < self.width) {
            return Err(Error::InvalidConfig("principal point u0 must lie inside the image"));
        }
        if !(self.v0 > 0.0 && self.v0 < self.height) {
            return Err(Error::InvalidConfig("principal point v0 must lie inside the image"));
        }
        Ok(())
    }

    /// KITTI-like rig (sequence 00 left/right grayscale cameras).
    pub fn kitti_like() -> Self {
        Self {
            focal: 718.856,
            u0: 607.1928,
            v0: 185.2157,
            baseline: 0.537_15,
            width: 1241.0,
            height: 376.0,
            disparity_range: 128.0,
        }
    }

    /// Volume of the measurement domain `width · height · disparity_range`.
    pub fn domain_volume(&self) -> f64 {
        self.width * self.height * self.disparity_range
    }

    /// Projects a point given in camera coordinates.
    pub fn project(&self, p: &Vector3<f64>) -> Result<StereoObservation> {
        if p.z <= MIN_DEPTH {
            return Err(Error::PointBehindCamera { depth: p.z });
        }
        let inv_z = 1.0 / p.z;
        Ok(StereoObservation {
            ul: self.focal * p.x * inv_z + self.u0,
            ur: self.focal * (p.x - self.baseline) * inv_z + self.u0,
            v: self.focal * p.y * inv_z + self.v0,
        })
    }

    /// Inverse of [`project`](Self::project) for one stereo observation.
    pub fn triangulate(&self, obs: &StereoObservation) -> Result<Vector3<f64>> {
        let disparity = obs.disparity();
        if !(disparity > 0.0) {
            return Err(Error::NonPositiveDisparity { disparity });
        }
        let z = self.focal * self.baseline / disparity;
        Ok(Vector3::new((obs.ul - self.u0) * z / self.focal, (obs.v - self.v0) * z / self.focal, z))
    }

    /// Normalized left-image coordinates `((ul − u0)/f, (v − v0)/f)`.
    pub fn normalize(&self, ul: f64, v: f64) -> (f64, f64) {
        ((ul - self.u0) / self.focal, (v - self.v0) / self.focal)
    }
}

/// One frame's stereo observation `(ul, ur, v)` of a rectified rig.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StereoObservation {
    pub ul: f64,
    pub ur: f64,
    pub v: f64,
}

impl StereoObservation {
    pub fn new(ul: f64, ur: f64, v: f64) -> Self {
        Self { ul, ur, v }
    }

    #[inline]
    pub fn disparity(&self) -> f64 {
        self.ul - self.ur
    }

    #[inline]
    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.ul, self.ur, self.v)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Measurements of one feature in two consecutive stereo frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StereoMeasurement {
    pub prev: StereoObservation,
    pub cur: StereoObservation,
}

impl StereoMeasurement {
    pub fn new(prev: StereoObservation, cur: StereoObservation) -> Self {
        Self { prev, cur }
    }

    /// `(ul_prev, ur_prev, v_prev, ul_cur, ur_cur, v_cur)`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.prev.ul, self.prev.ur, self.prev.v, self.cur.ul, self.cur.ur, self.cur.v]
    }

    pub fn from_array(z: &[f64; 6]) -> Self {
        Self {
            prev: StereoObservation::new(z[0], z[1], z[2]),
            cur: StereoObservation::new(z[3], z[4], z[5]),
        }
    }
}

/// Transforms `point` by `pose` and projects it into both images.
pub fn stereo_project(pose: &Pose, point: &Vector3<f64>, calib: &StereoCalibration) -> Result<StereoObservation> {
    calib.project(&pose.transform(point))
}

/// Triangulates the previous-frame part of a measurement.
pub fn triangulate(obs: &StereoObservation, calib: &StereoCalibration) -> Result<Vector3<f64>> {
    calib.triangulate(obs)
}
