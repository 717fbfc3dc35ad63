//! Correspondence CSV: a header row, then one row per correspondence with
//! the frame index `k` of the pair `(k−1, k)` and the six pixel
//! coordinates. Rows of one pair are contiguous and indices never decrease.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use svo_core::geometry::{StereoCalibration, StereoMeasurement, StereoObservation};
use svo_core::pipeline::FramePair;
use svo_core::Correspondence;

use crate::error::{io_error, Error, Result};

pub const HEADER: [&str; 7] = ["frame_index", "ul_prev", "ur_prev", "v_prev", "ul_cur", "ur_cur", "v_cur"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Row {
    frame_index: usize,
    ul_prev: f64,
    ur_prev: f64,
    v_prev: f64,
    ul_cur: f64,
    ur_cur: f64,
    v_cur: f64,
}

/// Raw measurements of one frame pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairMeasurements {
    pub frame_index: usize,
    pub measurements: Vec<StereoMeasurement>,
}

fn csv_error(source_name: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::MalformedLine {
        source_name: source_name.to_string(),
        line,
        reason: match e.kind() {
            csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
            _ => e.to_string(),
        },
    }
}

/// Parses the CSV. Row numbers in errors are file line numbers, the
/// header being line 1.
pub fn parse_correspondences(reader: impl Read, source_name: &str) -> Result<Vec<PairMeasurements>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source_name, e))?.clone();
    if headers.iter().ne(HEADER) {
        return Err(Error::MalformedLine {
            source_name: source_name.to_string(),
            line: 1,
            reason: format!("expected header '{}'", HEADER.join(",")),
        });
    }
    let mut pairs: Vec<PairMeasurements> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source_name, e))?;
        let row_no = record.position().map_or(0, |p| p.line() as usize);
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| csv_error(source_name, e))?;
        if row.frame_index == 0 {
            return Err(Error::MalformedLine {
                source_name: source_name.to_string(),
                line: row_no,
                reason: "frame index 0 has no previous frame".into(),
            });
        }
        let m = StereoMeasurement::new(
            StereoObservation::new(row.ul_prev, row.ur_prev, row.v_prev),
            StereoObservation::new(row.ul_cur, row.ur_cur, row.v_cur),
        );
        if let Some(v) = m.to_array().iter().find(|v| !v.is_finite()) {
            return Err(Error::MalformedLine {
                source_name: source_name.to_string(),
                line: row_no,
                reason: format!("non-finite coordinate {v}"),
            });
        }
        for (obs, frame) in [(&m.prev, "previous"), (&m.cur, "current")] {
            if !(obs.disparity() > 0.0) {
                return Err(Error::NonPositiveDisparity {
                    source_name: source_name.to_string(),
                    row: row_no,
                    disparity: obs.disparity(),
                    frame,
                });
            }
        }
        match pairs.last_mut() {
            Some(last) if last.frame_index == row.frame_index => last.measurements.push(m),
            Some(last) if last.frame_index > row.frame_index => {
                return Err(Error::NonMonotoneFrames {
                    source_name: source_name.to_string(),
                    row: row_no,
                    index: row.frame_index,
                    previous: last.frame_index,
                })
            }
            _ => pairs.push(PairMeasurements {
                frame_index: row.frame_index,
                measurements: vec![m],
            }),
        }
    }
    Ok(pairs)
}

pub fn read_correspondences(path: &Path) -> Result<Vec<PairMeasurements>> {
    let file = std::fs::File::open(path).map_err(io_error(path))?;
    parse_correspondences(file, &path.display().to_string())
}

/// Floats are written in their shortest round-trip form, so a re-read is
/// bit-exact.
pub fn format_correspondences(pairs: &[PairMeasurements]) -> String {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.write_record(HEADER).expect("in-memory write");
    for p in pairs {
        for m in &p.measurements {
            wtr.serialize(Row {
                frame_index: p.frame_index,
                ul_prev: m.prev.ul,
                ur_prev: m.prev.ur,
                v_prev: m.prev.v,
                ul_cur: m.cur.ul,
                ur_cur: m.cur.ur,
                v_cur: m.cur.v,
            })
            .expect("in-memory write");
        }
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn write_correspondences(path: &Path, pairs: &[PairMeasurements]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(io_error(path))?;
    file.write_all(format_correspondences(pairs).as_bytes()).map_err(io_error(path))
}

/// Triangulates every measurement into frame pairs `1..frames`; indices
/// without rows become empty pairs.
pub fn to_frame_pairs(groups: &[PairMeasurements], calib: &StereoCalibration, frames: usize) -> Result<Vec<FramePair>> {
    let mut pairs: Vec<FramePair> = (1..frames)
        .map(|frame_index| FramePair {
            frame_index,
            correspondences: Vec::new(),
        })
        .collect();
    for g in groups {
        let Some(slot) = pairs.get_mut(g.frame_index - 1) else {
            return Err(Error::Config {
                source_name: "correspondences".into(),
                message: format!("frame index {} exceeds the frame count {frames}", g.frame_index),
            });
        };
        slot.correspondences = g
            .measurements
            .iter()
            .map(|m| Correspondence::new(*m, calib))
            .collect::<svo_core::Result<_>>()?;
    }
    Ok(pairs)
}

/// Frame count implied by the last pair index, zero without pairs.
pub fn implied_frames(groups: &[PairMeasurements]) -> usize {
    groups.last().map_or(0, |g| g.frame_index + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Vec<PairMeasurements>> {
        parse_correspondences(s.as_bytes(), "test")
    }

    const HEAD: &str = "frame_index,ul_prev,ur_prev,v_prev,ul_cur,ur_cur,v_cur\n";

    #[test]
    fn header_only_is_zero_pairs() {
        assert!(parse(HEAD).unwrap().is_empty());
    }

    #[test]
    fn rows_group_by_frame() {
        let text = format!("{HEAD}1,10,5,3,11,6,3\n1,20,5,3,21,6,3\n3,10,5,3,11,6,3\n");
        let pairs = parse(&text).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].measurements.len(), 2);
        assert_eq!(pairs[1].frame_index, 3);
        let fp = to_frame_pairs(&pairs, &StereoCalibration::kitti_like(), implied_frames(&pairs)).unwrap();
        assert_eq!(fp.iter().map(|p| p.correspondences.len()).collect::<Vec<_>>(), vec![2, 0, 1]);
    }

    #[test]
    fn negative_disparity_names_the_row() {
        let text = format!("{HEAD}1,10,5,3,11,6,3\n1,10,12,3,11,6,3\n");
        match parse(&text) {
            Err(Error::NonPositiveDisparity { row, frame, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(frame, "previous");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decreasing_frame_index_is_rejected() {
        let text = format!("{HEAD}2,10,5,3,11,6,3\n1,10,5,3,11,6,3\n");
        assert!(matches!(
            parse(&text),
            Err(Error::NonMonotoneFrames {
                row: 3,
                index: 1,
                previous: 2,
                ..
            })
        ));
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            parse(&format!("{HEAD}1,10,5,3,11,6\n")),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(
            parse(&format!("{HEAD}1,10,x,3,11,6,3\n")),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(parse("a,b\n"), Err(Error::MalformedLine { line: 1, .. })));
        assert!(matches!(
            parse(&format!("{HEAD}0,10,5,3,11,6,3\n")),
            Err(Error::MalformedLine { line: 2, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip_is_bit_exact(rows in proptest::collection::vec(
            (1usize..4, proptest::array::uniform6(0.0f64..1000.0), 1e-6f64..100.0, 1e-6f64..100.0), 1000)) {
            let mut rows = rows;
            rows.sort_by_key(|r| r.0);
            let mut pairs: Vec<PairMeasurements> = Vec::new();
            for (k, z, dp, dc) in rows {
                let m = StereoMeasurement::new(
                    StereoObservation::new(z[0] + dp, z[0], z[1]),
                    StereoObservation::new(z[3] + dc, z[3], z[4]),
                );
                match pairs.last_mut() {
                    Some(p) if p.frame_index == k => p.measurements.push(m),
                    _ => pairs.push(PairMeasurements { frame_index: k, measurements: vec![m] }),
                }
            }
            let back = parse(&format_correspondences(&pairs)).unwrap();
            prop_assert_eq!(back.len(), pairs.len());
            for (a, b) in back.iter().zip(&pairs) {
                prop_assert_eq!(a.frame_index, b.frame_index);
                for (x, y) in a.measurements.iter().zip(&b.measurements) {
                    for (u, v) in x.to_array().iter().zip(y.to_array()) {
                        prop_assert_eq!(u.to_bits(), v.to_bits());
                    }
                }
            }
        }
    }
}
