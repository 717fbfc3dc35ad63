//! Versioned TOML run configuration.
//!
//! ```toml
//! version = 1
//!
//! [scene]                # required by `simulate`
//! points = 200
//! depth_min = 5.0
//! depth_max = 50.0
//! sigma_u = 1.0
//! sigma_v = 1.0
//! outlier_ratio = 0.3
//! translation = 1.0      # meters per frame
//! rotation_deg = 1.0     # degrees per frame
//! frames = 10
//!
//! [calibration]          # optional, KITTI-like rig when absent
//! focal = 718.856
//! # ... all seven fields, see `io::calib`
//!
//! [run]                  # optional defaults for `run` and `bench`;
//! method = "msac"        # command-line flags take precedence
//! scope = "ba"
//! threshold = 2.79
//! iterations = 1000
//! weighting = false
//! robust_refinement = false
//! sigma = 1.0
//! epsilon = 1.0
//! erode_scale = 2.0
//! ```
//!
//! Seeds are not part of the file; they come from `--seed`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use svo_core::geometry::StereoCalibration;
use svo_core::sim::SceneConfig;

use crate::error::{io_error, Error, Result};
use crate::io::calib::CalibrationFile;
use crate::method::{Method, Scope};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub points: usize,
    pub depth_min: f64,
    pub depth_max: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub outlier_ratio: f64,
    pub translation: f64,
    pub rotation_deg: f64,
    pub frames: usize,
}

impl SceneSection {
    pub fn to_scene(&self, seed: u64) -> SceneConfig {
        SceneConfig {
            points: self.points,
            depth_range: (self.depth_min, self.depth_max),
            sigma_u: self.sigma_u,
            sigma_v: self.sigma_v,
            outlier_ratio: self.outlier_ratio,
            translation: self.translation,
            rotation_deg: self.rotation_deg,
            frames: self.frames,
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub method: Option<Method>,
    pub scope: Option<Scope>,
    pub threshold: Option<f64>,
    pub iterations: Option<usize>,
    pub weighting: Option<bool>,
    pub robust_refinement: Option<bool>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub erode_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    pub scene: Option<SceneSection>,
    pub calibration: Option<CalibrationFile>,
    pub run: Option<RunSection>,
}

impl ConfigFile {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let err = |message: String| Error::Config {
            source_name: source_name.to_string(),
            message,
        };
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| err(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(err(format!("unsupported version {} (expected {CONFIG_VERSION})", cfg.version)));
        }
        if let Some(c) = cfg.calibration {
            c.to_calibration().map_err(|e| err(format!("calibration: {e}")))?;
        }
        if let Some(s) = &cfg.scene {
            s.to_scene(0).validate().map_err(|e| err(format!("scene: {e}")))?;
            if s.points == 0 {
                return Err(err("scene.points must be positive".into()));
            }
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn calibration(&self) -> StereoCalibration {
        self.calibration
            .map(|c| c.to_calibration().expect("validated on parse"))
            .unwrap_or_else(StereoCalibration::kitti_like)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
