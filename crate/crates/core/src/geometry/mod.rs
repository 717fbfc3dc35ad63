//! Poses, rectified stereo projection and the minimal pose solver.

mod pnp;
mod pose;
pub mod stereo;

pub use pnp::{check_sample, lambda_twist, pnp_minimal, PnpCandidate, PnpCorrespondence, MIN_TRIANGLE_AREA};
pub use pose::{hat, rotation_angle, rotation_distance, so3_exp, so3_log, Pose, Twist};
pub use stereo::{stereo_project, triangulate, StereoCalibration, StereoMeasurement, StereoObservation};

/// A 3D point in meters.
pub type Point3 = nalgebra::Vector3<f64>;
