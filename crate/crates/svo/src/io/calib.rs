//! Calibration TOML: the seven fields of [`StereoCalibration`].
//!
//! ```toml
//! focal = 718.856
//! u0 = 607.1928
//! v0 = 185.2157
//! baseline = 0.53715
//! width = 1241.0
//! height = 376.0
//! disparity_range = 128.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use svo_core::geometry::StereoCalibration;

use crate::error::{io_error, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub focal: f64,
    pub u0: f64,
    pub v0: f64,
    pub baseline: f64,
    pub width: f64,
    pub height: f64,
    pub disparity_range: f64,
}

impl From<StereoCalibration> for CalibrationFile {
    fn from(c: StereoCalibration) -> Self {
        Self {
            focal: c.focal,
            u0: c.u0,
            v0: c.v0,
            baseline: c.baseline,
            width: c.width,
            height: c.height,
            disparity_range: c.disparity_range,
        }
    }
}

impl CalibrationFile {
    pub fn to_calibration(self) -> svo_core::Result<StereoCalibration> {
        StereoCalibration::new(
            self.focal,
            (self.u0, self.v0),
            self.baseline,
            (self.width, self.height),
            self.disparity_range,
        )
    }
}

pub fn parse_calibration(text: &str, source_name: &str) -> Result<StereoCalibration> {
    let file: CalibrationFile = toml::from_str(text).map_err(|e| Error::Config {
        source_name: source_name.to_string(),
        message: e.to_string(),
    })?;
    file.to_calibration().map_err(|e| Error::Config {
        source_name: source_name.to_string(),
        message: e.to_string(),
    })
}

pub fn read_calibration(path: &Path) -> Result<StereoCalibration> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    parse_calibration(&text, &path.display().to_string())
}

pub fn format_calibration(calib: &StereoCalibration) -> String {
    toml::to_string(&CalibrationFile::from(*calib)).expect("calibration serializes")
}

pub fn write_calibration(path: &Path, calib: &StereoCalibration) -> Result<()> {
    std::fs::write(path, format_calibration(calib)).map_err(io_error(path))
}
