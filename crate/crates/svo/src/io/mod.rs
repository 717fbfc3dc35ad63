//! Text file formats.

pub mod calib;
pub mod correspondences;
pub mod labels;
pub mod poses;

pub use calib::{read_calibration, write_calibration};
pub use correspondences::{read_correspondences, to_frame_pairs, write_correspondences, PairMeasurements};
pub use labels::{read_labels, write_labels, Label};
pub use poses::{read_poses, write_poses, PoseFile};
