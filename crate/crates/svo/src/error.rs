use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: malformed line: {reason}")]
    MalformedLine { source_name: String, line: usize, reason: String },
    #[error("{source_name}: row {row}: non-positive disparity {disparity} in the {frame} frame")]
    NonPositiveDisparity {
        source_name: String,
        row: usize,
        disparity: f64,
        frame: &'static str,
    },
    #[error("{source_name}: row {row}: frame index {index} follows {previous}; indices must not decrease")]
    NonMonotoneFrames {
        source_name: String,
        row: usize,
        index: usize,
        previous: usize,
    },
    #[error("{source_name}: {message}")]
    Config { source_name: String, message: String },
    #[error("frame counts differ: estimate has {estimated}, ground truth has {ground_truth}")]
    FrameCountMismatch { estimated: usize, ground_truth: usize },
    #[error(transparent)]
    Core(#[from] svo_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
