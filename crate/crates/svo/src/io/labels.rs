//! Ground-truth labels of simulated correspondences, row-aligned with the
//! correspondence file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use svo_core::sim::SimulatedPair;

use crate::error::{io_error, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub frame_index: usize,
    pub is_outlier: bool,
    /// Noise-free point in the previous frame, meters.
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub fn labels_of(pairs: &[SimulatedPair]) -> Vec<Label> {
    pairs
        .iter()
        .flat_map(|p| {
            p.correspondences.iter().map(move |c| Label {
                frame_index: p.frame_index,
                is_outlier: c.is_outlier,
                x: c.true_point.x,
                y: c.true_point.y,
                z: c.true_point.z,
            })
        })
        .collect()
}

pub fn format_labels(labels: &[Label]) -> String {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.write_record(["frame_index", "is_outlier", "x", "y", "z"]).expect("in-memory write");
    for l in labels {
        wtr.serialize(l).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn write_labels(path: &Path, labels: &[Label]) -> Result<()> {
    std::fs::write(path, format_labels(labels)).map_err(io_error(path))
}

pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let file = std::fs::File::open(path).map_err(io_error(path))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e: csv::Error| Error::MalformedLine {
            source_name: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })
}
