//! Multi-threaded driver over frame pairs, with wall-clock timing.

use std::time::Instant;

use rayon::prelude::*;
use svo_core::geometry::{Pose, StereoCalibration};
use svo_core::pipeline::{process_pair_or_identity, Clock, FramePair, PairDiagnostics, PipelineConfig, Trajectory};
use svo_core::refinement::Termination;
use svo_core::sim::{generate_pair, SceneConfig, SimulatedPair, SimulatedSequence};

use crate::error::{Error, Result};

/// Monotonic clock measured from its creation.
#[derive(Debug, Clone, Copy)]
pub struct StdClock {
    origin: Instant,
}

impl Default for StdClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for StdClock {
    fn now_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }
}

/// Thread pool capped at `threads` workers; 0 lets rayon decide.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Config {
        source_name: "--threads".into(),
        message: e.to_string(),
    })
}

/// Estimates every pair independently and chains the motions. Results do
/// not depend on the thread count: each pair's seed derives from its index.
pub fn estimate(
    pairs: &[FramePair],
    frames: usize,
    calib: &StereoCalibration,
    config: &PipelineConfig,
    pool: &rayon::ThreadPool,
    clock: &dyn Clock,
) -> (Trajectory, Vec<PairDiagnostics>) {
    let results: Vec<(Pose, PairDiagnostics)> =
        pool.install(|| pairs.par_iter().map(|p| process_pair_or_identity(p, calib, config, clock)).collect());
    if frames == 0 {
        return (Trajectory::default(), Vec::new());
    }
    let (motions, diags): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    (Trajectory::from_motions(&motions), diags)
}

/// Same output as `svo_core::sim::generate_sequence`, frames in parallel.
pub fn simulate(scene: &SceneConfig, calib: &StereoCalibration, pool: &rayon::ThreadPool) -> Result<SimulatedSequence> {
    scene.validate()?;
    let pairs: Vec<SimulatedPair> = pool.install(|| {
        (1..scene.frames)
            .into_par_iter()
            .map(|k| generate_pair(scene, calib, k))
            .collect::<svo_core::Result<_>>()
    })?;
    let ground_truth = if scene.frames == 0 {
        Trajectory::default()
    } else {
        Trajectory::from_motions(&pairs.iter().map(|p| p.motion).collect::<Vec<_>>())
    };
    Ok(SimulatedSequence { pairs, ground_truth })
}

pub fn termination_name(t: Option<Termination>) -> &'static str {
    match t {
        None => "none",
        Some(Termination::SmallDecrease) => "small-decrease",
        Some(Termination::SmallGradient) => "small-gradient",
        Some(Termination::MaxIterations) => "max-iterations",
        Some(Termination::Stalled) => "stalled",
        Some(Termination::RankDeficient) => "rank-deficient",
    }
}

/// Per-pair diagnostics without timings, so identical runs match byte for
/// byte.
pub fn format_diagnostics(diags: &[PairDiagnostics]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "frame_index",
        "correspondences",
        "inliers",
        "threshold",
        "init_score",
        "initial_cost",
        "final_cost",
        "iterations",
        "termination",
        "degenerate_samples",
        "failure",
    ])
    .expect("in-memory write");
    for d in diags {
        wtr.write_record([
            d.frame_index.to_string(),
            d.correspondences.to_string(),
            d.inliers.to_string(),
            d.threshold.to_string(),
            d.init_score.to_string(),
            d.initial_cost.to_string(),
            d.final_cost.to_string(),
            d.iterations.to_string(),
            termination_name(d.termination).to_string(),
            d.degenerate_samples.to_string(),
            d.failure.as_ref().map(ToString::to_string).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn format_pair_timings(diags: &[PairDiagnostics]) -> String {
    let mut s = String::from("frame_index,init_ms,refine_ms\n");
    for d in diags {
        s.push_str(&format!("{},{},{}\n", d.frame_index, d.init_ns as f64 / 1e6, d.refine_ns as f64 / 1e6));
    }
    s
}
