//! Command-line interface. Every command writes its outputs and a
//! `manifest.json` into `--out`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use svo_core::evaluation::{segment_errors, timing_report, EvalReport, DEFAULT_LENGTHS};
use svo_core::geometry::StereoCalibration;
use svo_core::pipeline::{process_pair_or_identity, FramePair, PairDiagnostics};

use crate::config::{ConfigFile, RunSection};
use crate::error::{io_error, Error, Result};
use crate::io::calib::{format_calibration, CalibrationFile};
use crate::io::correspondences::{format_correspondences, implied_frames, PairMeasurements};
use crate::io::labels::{format_labels, labels_of};
use crate::io::poses::format_poses;
use crate::io::{read_calibration, read_correspondences, read_poses, to_frame_pairs};
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::method::{pipeline_config, Method, MethodParams, Scope};
use crate::report::{format_report, format_summary, format_timings, TimingRow};
use crate::runner::{estimate, format_diagnostics, format_pair_timings, simulate, thread_pool, StdClock};

pub const CORRESPONDENCES_FILE: &str = "correspondences.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.txt";
pub const LABELS_FILE: &str = "labels.csv";
pub const CALIBRATION_FILE: &str = "calib.toml";
pub const POSES_FILE: &str = "poses.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Parser)]
#[command(name = "svo", version, about = "Stereo visual odometry noise-model toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic sequence with ground truth.
    Simulate(SimulateArgs),
    /// Estimate a trajectory from a correspondence file.
    Run(RunArgs),
    /// Segment errors of an estimated trajectory against ground truth.
    Eval(EvalArgs),
    /// Time initialization and refinement stages.
    Bench(BenchArgs),
    /// Re-run the command recorded in a manifest and check its outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Versioned TOML configuration with a [scene] section.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long)]
    pub correspondences: PathBuf,
    /// Calibration TOML; otherwise the config's [calibration], otherwise a KITTI-like rig.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub scope: Option<Scope>,
    #[command(flatten)]
    pub params: MethodParams,
    /// Number of frames; defaults to the last pair index plus one.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Estimated poses (KITTI format).
    #[arg(long)]
    pub est: PathBuf,
    /// Ground-truth poses (KITTI format).
    #[arg(long)]
    pub gt: PathBuf,
    /// Segment lengths in meters [default: 100,150,...,800].
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<f64>>,
    /// Stride between segment start frames.
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    /// Method label for the report.
    #[arg(long, default_value = "-")]
    pub method: String,
    /// Scope label for the report.
    #[arg(long, default_value = "-")]
    pub scope: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub correspondences: PathBuf,
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Comma-separated methods.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub methods: Vec<Method>,
    /// Comma-separated scopes [default: all].
    #[arg(long, value_enum, value_delimiter = ',')]
    pub scopes: Vec<Scope>,
    #[command(flatten)]
    pub params: MethodParams,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 gives single-threaded timings.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(io_error(p))
}

impl Command {
    pub fn out(&self) -> &Path {
        match self {
            Command::Simulate(a) => &a.out,
            Command::Run(a) => &a.out,
            Command::Eval(a) => &a.out,
            Command::Bench(a) => &a.out,
            Command::Replay(a) => &a.out,
        }
    }

    fn set_out(&mut self, out: PathBuf) {
        match self {
            Command::Simulate(a) => a.out = out,
            Command::Run(a) => a.out = out,
            Command::Eval(a) => a.out = out,
            Command::Bench(a) => a.out = out,
            Command::Replay(a) => a.out = out,
        }
    }

    /// Copy with input paths made absolute, for the manifest.
    fn absolutized(&self) -> Result<Command> {
        let opt = |p: &Option<PathBuf>| p.as_deref().map(absolute).transpose();
        Ok(match self.clone() {
            Command::Simulate(a) => Command::Simulate(SimulateArgs {
                config: absolute(&a.config)?,
                ..a
            }),
            Command::Run(a) => Command::Run(RunArgs {
                correspondences: absolute(&a.correspondences)?,
                calib: opt(&a.calib)?,
                config: opt(&a.config)?,
                ..a
            }),
            Command::Eval(a) => Command::Eval(EvalArgs {
                est: absolute(&a.est)?,
                gt: absolute(&a.gt)?,
                ..a
            }),
            Command::Bench(a) => Command::Bench(BenchArgs {
                correspondences: absolute(&a.correspondences)?,
                calib: opt(&a.calib)?,
                config: opt(&a.config)?,
                ..a
            }),
            Command::Replay(a) => Command::Replay(ReplayArgs {
                manifest: absolute(&a.manifest)?,
                ..a
            }),
        })
    }
}

pub fn execute(command: &Command) -> Result<()> {
    let out = command.out();
    std::fs::create_dir_all(out).map_err(io_error(out))?;
    match command {
        Command::Simulate(a) => cmd_simulate(a, command),
        Command::Run(a) => cmd_run(a, command),
        Command::Eval(a) => cmd_eval(a, command),
        Command::Bench(a) => cmd_bench(a, command),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<()> {
    let path = dir.join(file);
    std::fs::write(&path, contents).map_err(io_error(&path))
}

fn cmd_simulate(a: &SimulateArgs, command: &Command) -> Result<()> {
    let started = crate::manifest::unix_ms();
    let cfg = ConfigFile::read(&a.config)?;
    let section = cfg.scene.as_ref().ok_or_else(|| Error::Config {
        source_name: a.config.display().to_string(),
        message: "missing section `scene`".into(),
    })?;
    let scene = section.to_scene(a.seed);
    let calib = cfg.calibration();
    let seq = simulate(&scene, &calib, &thread_pool(a.threads)?)?;
    let groups: Vec<PairMeasurements> = seq
        .pairs
        .iter()
        .map(|p| PairMeasurements {
            frame_index: p.frame_index,
            measurements: p.correspondences.iter().map(|c| c.correspondence.measurement).collect(),
        })
        .collect();
    write(&a.out, CORRESPONDENCES_FILE, &format_correspondences(&groups))?;
    write(&a.out, GROUND_TRUTH_FILE, &format_poses(&seq.ground_truth))?;
    write(&a.out, LABELS_FILE, &format_labels(&labels_of(&seq.pairs)))?;
    write(&a.out, CALIBRATION_FILE, &format_calibration(&calib))?;
    let mut manifest = Manifest::new(
        command.absolutized()?,
        Some(a.seed),
        json!({ "config": cfg, "frames": scene.frames }),
        started,
    );
    manifest.add_input("config", &a.config)?;
    for f in [CORRESPONDENCES_FILE, GROUND_TRUTH_FILE, LABELS_FILE, CALIBRATION_FILE] {
        manifest.add_output(&a.out, f, true)?;
    }
    manifest.write(&a.out)
}

struct Setup {
    calib: StereoCalibration,
    run: RunSection,
    pairs: Vec<FramePair>,
    frames: usize,
}

fn load(correspondences: &Path, calib: Option<&Path>, config: Option<&Path>, frames: Option<usize>) -> Result<Setup> {
    let cfg = config.map(ConfigFile::read).transpose()?;
    let calib = match (calib, &cfg) {
        (Some(p), _) => read_calibration(p)?,
        (None, Some(c)) => c.calibration(),
        (None, None) => StereoCalibration::kitti_like(),
    };
    let groups = read_correspondences(correspondences)?;
    let frames = frames.unwrap_or_else(|| implied_frames(&groups));
    let pairs = to_frame_pairs(&groups, &calib, frames)?;
    Ok(Setup {
        calib,
        run: cfg.and_then(|c| c.run).unwrap_or_default(),
        pairs,
        frames,
    })
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config {
        source_name: "command line".into(),
        message: format!("missing --{flag} (or [run].{flag} in the config)"),
    })
}

fn add_inputs(manifest: &mut Manifest, correspondences: &Path, calib: Option<&Path>, config: Option<&Path>) -> Result<()> {
    manifest.add_input("correspondences", correspondences)?;
    if let Some(p) = calib {
        manifest.add_input("calibration", p)?;
    }
    if let Some(p) = config {
        manifest.add_input("config", p)?;
    }
    Ok(())
}

fn cmd_run(a: &RunArgs, command: &Command) -> Result<()> {
    let started = crate::manifest::unix_ms();
    let setup = load(&a.correspondences, a.calib.as_deref(), a.config.as_deref(), a.frames)?;
    let method = required(a.method.or(setup.run.method), "method")?;
    let scope = required(a.scope.or(setup.run.scope), "scope")?;
    let params = a.params.clone().with_defaults_from(&setup.run);
    let config = pipeline_config(method, scope, &params, &setup.calib, a.seed)?;
    let clock = StdClock::default();
    let (trajectory, diags) = estimate(&setup.pairs, setup.frames, &setup.calib, &config, &thread_pool(a.threads)?, &clock);
    for d in diags.iter().filter(|d| d.failure.is_some()) {
        log::warn!(
            "pair {}: {}; using the identity motion",
            d.frame_index,
            d.failure.as_ref().expect("filtered")
        );
    }
    write(&a.out, POSES_FILE, &format_poses(&trajectory))?;
    write(&a.out, DIAGNOSTICS_FILE, &format_diagnostics(&diags))?;
    write(&a.out, TIMINGS_FILE, &format_pair_timings(&diags))?;
    let resolved = json!({
        "method": method,
        "scope": scope,
        "params": params,
        "calibration": CalibrationFile::from(setup.calib),
        "frames": setup.frames,
    });
    let mut manifest = Manifest::new(command.absolutized()?, Some(a.seed), resolved, started);
    add_inputs(&mut manifest, &a.correspondences, a.calib.as_deref(), a.config.as_deref())?;
    manifest.add_output(&a.out, POSES_FILE, true)?;
    manifest.add_output(&a.out, DIAGNOSTICS_FILE, true)?;
    manifest.add_output(&a.out, TIMINGS_FILE, false)?;
    manifest.write(&a.out)
}

fn cmd_eval(a: &EvalArgs, command: &Command) -> Result<()> {
    let started = crate::manifest::unix_ms();
    let est = read_poses(&a.est)?.trajectory;
    let gt = read_poses(&a.gt)?.trajectory;
    if est.len() != gt.len() {
        return Err(Error::FrameCountMismatch {
            estimated: est.len(),
            ground_truth: gt.len(),
        });
    }
    let lengths = a.lengths.clone().unwrap_or_else(|| DEFAULT_LENGTHS.to_vec());
    let segments = segment_errors(&est, &gt, &lengths, a.step)?;
    let report = EvalReport::from_segments(&segments);
    write(&a.out, REPORT_FILE, &format_report(&a.method, &a.scope, &report))?;
    write(&a.out, SUMMARY_FILE, &format_summary(&a.method, &a.scope, &report))?;
    let mut manifest = Manifest::new(command.absolutized()?, None, json!({ "lengths": lengths, "step": a.step }), started);
    manifest.add_input("estimate", &a.est)?;
    manifest.add_input("ground_truth", &a.gt)?;
    manifest.add_output(&a.out, REPORT_FILE, true)?;
    manifest.add_output(&a.out, SUMMARY_FILE, true)?;
    manifest.write(&a.out)
}

fn ms(ns: u64) -> f64 {
    ns as f64 / 1e6
}

fn cmd_bench(a: &BenchArgs, command: &Command) -> Result<()> {
    let started = crate::manifest::unix_ms();
    let setup = load(&a.correspondences, a.calib.as_deref(), a.config.as_deref(), None)?;
    let params = a.params.clone().with_defaults_from(&setup.run);
    let scopes = if a.scopes.is_empty() { Scope::ALL.to_vec() } else { a.scopes.clone() };
    let pool = thread_pool(a.threads)?;
    let clock = StdClock::default();
    let mut rows = Vec::new();
    for &method in &a.methods {
        let mut init_total = Vec::new();
        let mut per_scope = Vec::new();
        for &scope in &scopes {
            let config = pipeline_config(method, scope, &params, &setup.calib, a.seed)?;
            let diags: Vec<PairDiagnostics> = pool.install(|| {
                use rayon::prelude::*;
                setup
                    .pairs
                    .par_iter()
                    .map(|p| process_pair_or_identity(p, &setup.calib, &config, &clock).1)
                    .collect()
            });
            let ok: Vec<&PairDiagnostics> = diags.iter().filter(|d| d.failure.is_none()).collect();
            init_total.extend(ok.iter().map(|d| ms(d.init_ns)));
            per_scope.push((scope, ok.iter().map(|d| ms(d.refine_ns)).collect::<Vec<f64>>()));
        }
        if init_total.is_empty() {
            log::warn!("{method}: every pair failed; no timings");
            continue;
        }
        if method.is_sampling() {
            let n = params.iterations() as f64;
            let per_iteration: Vec<f64> = init_total.iter().map(|t| t / n).collect();
            rows.push(TimingRow {
                method: method.to_string(),
                scope: "-".into(),
                stage: "init_per_iteration".into(),
                stats: timing_report(&per_iteration)?,
            });
        }
        rows.push(TimingRow {
            method: method.to_string(),
            scope: "-".into(),
            stage: "init_total".into(),
            stats: timing_report(&init_total)?,
        });
        for (scope, samples) in per_scope {
            rows.push(TimingRow {
                method: method.to_string(),
                scope: scope.to_string(),
                stage: "refine".into(),
                stats: timing_report(&samples)?,
            });
        }
    }
    write(&a.out, TIMINGS_FILE, &format_timings(&rows))?;
    let resolved = json!({
        "methods": a.methods,
        "scopes": scopes,
        "params": params,
        "threads": a.threads,
        "calibration": CalibrationFile::from(setup.calib),
    });
    let mut manifest = Manifest::new(command.absolutized()?, Some(a.seed), resolved, started);
    add_inputs(&mut manifest, &a.correspondences, a.calib.as_deref(), a.config.as_deref())?;
    manifest.add_output(&a.out, TIMINGS_FILE, false)?;
    manifest.write(&a.out)
}

/// Re-runs the recorded command into `--out` and compares the digests of
/// every deterministic output.
fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let recorded = Manifest::read(&a.manifest)?;
    if matches!(recorded.command, Command::Replay(_)) {
        return Err(Error::Config {
            source_name: a.manifest.display().to_string(),
            message: "cannot replay a replay".into(),
        });
    }
    let mut command = recorded.command.clone();
    command.set_out(a.out.clone());
    execute(&command)?;
    let replayed = Manifest::read(&a.out.join(MANIFEST_FILE))?;
    for old in recorded.outputs.iter().filter(|o| o.deterministic) {
        let new = replayed.outputs.iter().find(|n| n.name == old.name);
        if new.map(|n| &n.sha256) != Some(&old.sha256) {
            return Err(Error::Config {
                source_name: a.manifest.display().to_string(),
                message: format!("replayed output {} differs from the recorded one", old.name),
            });
        }
    }
    Ok(())
}
