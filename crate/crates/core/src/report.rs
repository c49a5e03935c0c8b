//! CSV output for traces and aggregates.
//!
//! Floats are written with 12 significant digits in scientific notation so
//! files diff cleanly across platforms.

use std::io::Write;

use crate::bench::AggregateStats;
use crate::error::{Error, Result};
use crate::meg::TrackTrace;

/// `x` with 12 significant digits.
pub fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// `iteration, basis_label, infidelity, purity, p_true_0.., p_pred_0..`
pub fn write_trace_csv<W: Write>(writer: W, trace: &TrackTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> =
        ["iteration", "basis_label", "infidelity", "purity"].map(String::from).to_vec();
    header.extend((0..trace.dim).map(|i| format!("p_true_{i}")));
    header.extend((0..trace.dim).map(|i| format!("p_pred_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for row in &trace.rows {
        let mut fields = vec![
            row.iteration.to_string(),
            row.basis_label.clone(),
            sig12(row.infidelity),
            sig12(row.purity),
        ];
        fields.extend(row.p_true.iter().chain(&row.p_pred).map(|&p| sig12(p)));
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("write failed: {e}")))
}

/// `iteration, median, q25, q75`
pub fn write_aggregate_csv<W: Write>(writer: W, stats: &AggregateStats) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "median", "q25", "q75"]).map_err(csv_err)?;
    for k in 0..stats.iterations.len() {
        w.write_record([
            stats.iterations[k].to_string(),
            sig12(stats.median[k]),
            sig12(stats.q25[k]),
            sig12(stats.q75[k]),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("write failed: {e}")))
}
