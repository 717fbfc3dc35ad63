use crate::geometry::{Point3, StereoCalibration, StereoMeasurement};
use crate::Result;

/// Stereo measurement of one feature in frames `k−1` and `k`, its point
/// triangulated in frame `k−1`, and a non-negative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub measurement: StereoMeasurement,
    pub point: Point3,
    pub weight: f64,
}

impl Correspondence {
    /// Triangulates the previous-frame observation; weight 1.
    pub fn new(measurement: StereoMeasurement, calib: &StereoCalibration) -> Result<Self> {
        Ok(Self {
            measurement,
            point: calib.triangulate(&measurement.prev)?,
            weight: 1.0,
        })
    }

    pub fn with_weight(self, weight: f64) -> Self {
        Self { weight, ..self }
    }
}
