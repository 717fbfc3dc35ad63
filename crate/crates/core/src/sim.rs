//! Synthetic stereo scenes with known motion, for testing and benchmarks.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::correspondence::Correspondence;
use crate::geometry::{Point3, Pose, StereoCalibration, StereoMeasurement, StereoObservation};
use crate::pipeline::{FramePair, Trajectory};
use crate::{Error, Result};

/// Attempts per requested point before a scene is declared empty.
const ATTEMPTS_PER_POINT: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub points: usize,
    /// Depth range in frame `k−1`, meters.
    pub depth_range: (f64, f64),
    /// Pixel noise on `ul` and `ur`.
    pub sigma_u: f64,
    /// Pixel noise on `v`.
    pub sigma_v: f64,
    pub outlier_ratio: f64,
    /// Translation per frame, meters.
    pub translation: f64,
    /// Rotation per frame, degrees.
    pub rotation_deg: f64,
    /// Number of frames of a sequence (pairs = frames − 1).
    pub frames: usize,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            points: 200,
            depth_range: (5.0, 50.0),
            sigma_u: 1.0,
            sigma_v: 1.0,
            outlier_ratio: 0.0,
            translation: 1.0,
            rotation_deg: 1.0,
            frames: 2,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn with_sigma(self, sigma: f64) -> Self {
        Self {
            sigma_u: sigma,
            sigma_v: sigma,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.outlier_ratio) {
            return Err(Error::InvalidConfig("outlier ratio must lie in [0, 1)"));
        }
        let (near, far) = self.depth_range;
        if !(near > 0.0 && far > near) {
            return Err(Error::InvalidConfig("depth range must be positive and increasing"));
        }
        if !(self.sigma_u >= 0.0 && self.sigma_v >= 0.0) {
            return Err(Error::InvalidConfig("noise sigma must be non-negative"));
        }
        if !(self.translation >= 0.0 && self.rotation_deg >= 0.0) {
            return Err(Error::InvalidConfig("motion magnitudes must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorrespondence {
    pub correspondence: Correspondence,
    pub is_outlier: bool,
    /// Noise-free point in frame `k−1`.
    pub true_point: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPair {
    pub frame_index: usize,
    pub correspondences: Vec<LabeledCorrespondence>,
    /// Ground-truth motion taking frame `k−1` points into frame `k`.
    pub motion: Pose,
}

impl SimulatedPair {
    pub fn frame_pair(&self) -> FramePair {
        FramePair {
            frame_index: self.frame_index,
            correspondences: self.correspondences.iter().map(|c| c.correspondence).collect(),
        }
    }

    pub fn outlier_mask(&self) -> Vec<bool> {
        self.correspondences.iter().map(|c| c.is_outlier).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSequence {
    pub pairs: Vec<SimulatedPair>,
    /// Camera-to-world poses, one per frame.
    pub ground_truth: Trajectory,
}

/// Generator for frame `frame_index`: independent of other frames.
pub fn frame_rng(seed: u64, frame_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index as u64);
    rng
}

/// Motion of the given magnitudes: mostly forward translation (points move
/// towards the camera) about a random rotation axis.
pub fn random_motion(rng: &mut impl Rng, translation: f64, rotation_deg: f64) -> Pose {
    let dir = Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), -1.0).normalize();
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let axis = Unit::new_normalize(Vector3::from(axis));
    let rot = Pose::from_rotation_vector(&(axis.into_inner() * rotation_deg * PI / 180.0));
    Pose::new(rot.rotation, dir * translation)
}

fn in_image(o: &StereoObservation, calib: &StereoCalibration) -> bool {
    let inside = |u: f64| (0.0..calib.width).contains(&u);
    inside(o.ul) && inside(o.ur) && (0.0..calib.height).contains(&o.v) && o.disparity() > 0.0 && o.disparity() <= calib.disparity_range
}

fn sample_visible_point(rng: &mut ChaCha8Rng, scene: &SceneConfig, calib: &StereoCalibration, motion: &Pose) -> Option<Point3> {
    let ul = rng.random_range(0.0..calib.width);
    let v = rng.random_range(0.0..calib.height);
    let z = rng.random_range(scene.depth_range.0..scene.depth_range.1);
    let p = Vector3::new((ul - calib.u0) * z / calib.focal, (v - calib.v0) * z / calib.focal, z);
    let prev = calib.project(&p).ok()?;
    let cur = calib.project(&motion.transform(&p)).ok()?;
    (in_image(&prev, calib) && in_image(&cur, calib)).then_some(p)
}

fn jitter(rng: &mut ChaCha8Rng, o: StereoObservation, nu: &Normal<f64>, nv: &Normal<f64>) -> StereoObservation {
    StereoObservation::new(o.ul + nu.sample(rng), o.ur + nu.sample(rng), o.v + nv.sample(rng))
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated")
}

/// Scene for the pair ending at frame `frame_index` under a given motion.
pub fn generate_pair_with_motion(scene: &SceneConfig, calib: &StereoCalibration, frame_index: usize, motion: Pose) -> Result<SimulatedPair> {
    scene.validate()?;
    let mut rng = frame_rng(scene.seed, frame_index);
    // Skip the draws used to pick the motion so both entry points agree.
    let _ = random_motion(&mut rng, scene.translation, scene.rotation_deg);
    build_pair(&mut rng, scene, calib, frame_index, motion)
}

/// Random pair ending at frame `frame_index` (pairs of a sequence start at
/// frame 1).
pub fn generate_pair(scene: &SceneConfig, calib: &StereoCalibration, frame_index: usize) -> Result<SimulatedPair> {
    scene.validate()?;
    let mut rng = frame_rng(scene.seed, frame_index);
    let motion = random_motion(&mut rng, scene.translation, scene.rotation_deg);
    build_pair(&mut rng, scene, calib, frame_index, motion)
}

fn build_pair(rng: &mut ChaCha8Rng, scene: &SceneConfig, calib: &StereoCalibration, frame_index: usize, motion: Pose) -> Result<SimulatedPair> {
    let nu = normal(scene.sigma_u);
    let nv = normal(scene.sigma_v);
    let mut out = Vec::with_capacity(scene.points);
    let mut attempts = 0;
    while out.len() < scene.points {
        attempts += 1;
        if attempts > ATTEMPTS_PER_POINT * scene.points.max(1) {
            return Err(Error::FrustumEmpty);
        }
        let Some(p) = sample_visible_point(rng, scene, calib, &motion) else {
            continue;
        };
        let is_outlier = rng.random::<f64>() < scene.outlier_ratio;
        let prev_true = calib.project(&p)?;
        let cur_true = calib.project(&motion.transform(&p))?;
        let prev = loop {
            let o = jitter(rng, prev_true, &nu, &nv);
            if o.disparity() > 0.0 {
                break o;
            }
        };
        let cur = if is_outlier {
            let ul = rng.random_range(0.0..calib.width);
            let d = rng.random_range(0.0..calib.disparity_range);
            StereoObservation::new(ul, ul - d, rng.random_range(0.0..calib.height))
        } else {
            jitter(rng, cur_true, &nu, &nv)
        };
        let correspondence = Correspondence::new(StereoMeasurement::new(prev, cur), calib)?;
        out.push(LabeledCorrespondence {
            correspondence,
            is_outlier,
            true_point: p,
        });
    }
    Ok(SimulatedPair {
        frame_index,
        correspondences: out,
        motion,
    })
}

/// Sequence of `scene.frames` frames with independent random motions.
pub fn generate_sequence(scene: &SceneConfig, calib: &StereoCalibration) -> Result<SimulatedSequence> {
    scene.validate()?;
    let pairs = (1..scene.frames).map(|k| generate_pair(scene, calib, k)).collect::<Result<Vec<_>>>()?;
    let motions: Vec<Pose> = pairs.iter().map(|p| p.motion).collect();
    let ground_truth = if scene.frames == 0 {
        Trajectory::default()
    } else {
        Trajectory::from_motions(&motions)
    };
    Ok(SimulatedSequence { pairs, ground_truth })
}
