//! Evaluation and benchmark tables.

use svo_core::evaluation::{EvalReport, TimingStats};

const RAD_TO_DEG: f64 = 180.0 / std::f64::consts::PI;

/// One row per segment length: `method,scope,length_m,t_err_pct,r_err_deg_per_m`.
pub fn format_report(method: &str, scope: &str, report: &EvalReport) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["method", "scope", "length_m", "t_err_pct", "r_err_deg_per_m"])
        .expect("in-memory write");
    for l in &report.per_length {
        wtr.write_record([
            method.to_string(),
            scope.to_string(),
            l.length.to_string(),
            (100.0 * l.translation).to_string(),
            (RAD_TO_DEG * l.rotation).to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn format_summary(method: &str, scope: &str, report: &EvalReport) -> String {
    format!(
        "method: {method}\nscope: {scope}\nsegments: {}\nlengths: {}\n\
         mean over segments: translation {} %, rotation {} deg/m\n\
         mean over lengths: translation {} %, rotation {} deg/m\n",
        report.segments,
        report.per_length.len(),
        100.0 * report.segment_mean_translation,
        RAD_TO_DEG * report.segment_mean_rotation,
        100.0 * report.length_mean_translation,
        RAD_TO_DEG * report.length_mean_rotation,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: String,
    /// `-` for initialization stages, which do not depend on the scope.
    pub scope: String,
    pub stage: String,
    pub stats: TimingStats,
}

pub fn format_timings(rows: &[TimingRow]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["method", "scope", "stage", "samples", "mean_ms", "median_ms", "std_ms"])
        .expect("in-memory write");
    for r in rows {
        wtr.write_record([
            r.method.clone(),
            r.scope.clone(),
            r.stage.clone(),
            r.stats.samples.to_string(),
            r.stats.mean.to_string(),
            r.stats.median.to_string(),
            r.stats.std.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}
