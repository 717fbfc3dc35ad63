//! KITTI odometry pose files: one line per frame, the row-major top 3×4
//! block of the camera-to-world matrix `[R | t]`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use svo_core::geometry::Pose;
use svo_core::pipeline::Trajectory;

use crate::error::{io_error, Error, Result};

/// Rotations further than this from SO(3) are re-orthonormalized.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseFile {
    pub trajectory: Trajectory,
    /// 1-based line numbers whose rotation was projected back onto SO(3).
    pub reorthonormalized: Vec<usize>,
}

pub fn parse_poses(reader: impl BufRead, source_name: &str) -> Result<PoseFile> {
    let mut out = PoseFile::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedLine {
            source_name: source_name.to_string(),
            line: line_no,
            reason: e.to_string(),
        })?;
        let malformed = |reason: String| Error::MalformedLine {
            source_name: source_name.to_string(),
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 12 {
            return Err(malformed(format!("expected 12 fields, found {}", fields.len())));
        }
        let mut m = [0.0f64; 12];
        for (slot, field) in m.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| malformed(format!("'{field}' is not a number")))?;
            if !slot.is_finite() {
                return Err(malformed(format!("'{field}' is not finite")));
            }
        }
        let mut pose = Pose::from_row_major_3x4(&m);
        if pose.orthonormality_error() > ORTHONORMALITY_TOLERANCE {
            pose = pose.orthonormalized();
            out.reorthonormalized.push(line_no);
        }
        out.trajectory.poses.push(pose);
    }
    if let Some(first) = out.reorthonormalized.first() {
        log::warn!(
            "{source_name}: re-orthonormalized {} rotation(s), first at line {first}",
            out.reorthonormalized.len()
        );
    }
    Ok(out)
}

pub fn read_poses(path: &Path) -> Result<PoseFile> {
    let file = std::fs::File::open(path).map_err(io_error(path))?;
    parse_poses(BufReader::new(file), &path.display().to_string())
}

/// Numbers use the shortest representation that parses back to the same
/// `f64`.
pub fn format_poses(trajectory: &Trajectory) -> String {
    let mut s = String::new();
    for pose in &trajectory.poses {
        let m = pose.to_row_major_3x4();
        for (i, v) in m.iter().enumerate() {
            let sep = if i == 0 { "" } else { " " };
            let _ = write!(s, "{sep}{v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_poses(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(io_error(path))?;
    file.write_all(format_poses(trajectory).as_bytes()).map_err(io_error(path))
}
