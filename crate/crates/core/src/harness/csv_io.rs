//! One CSV per estimator trace.

use std::path::Path;

use super::{EstimateTrace, HarnessError};
use crate::numerics::Vector;
use crate::scenario::EstimatorKind;

pub fn csv_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["x", "xhat", "y", "ymeas", "vhat"] {
        h.extend((1..=4).map(|i| format!("{prefix}{i}")));
    }
    h.push("innov_norm".into());
    h
}

/// Shortest text that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Csv { path: path.display().to_string(), reason: e.to_string() }
}

pub fn write_trace_csv(trace: &EstimateTrace, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(csv_header()).map_err(|e| csv_err(path, e))?;
    for k in 0..trace.len() {
        let mut row = Vec::with_capacity(22);
        row.push(num(trace.times[k]));
        for series in [&trace.truth, &trace.estimates, &trace.outputs, &trace.measurements, &trace.attack_estimates] {
            row.extend(series[k].iter().map(|v| num(*v)));
        }
        row.push(num(trace.innovation_norms[k]));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

/// Reads a trace back. The CSV carries no separate attack column, so the
/// attack series is reconstructed as `ymeas − y` (attack plus measurement
/// noise). Runtime and divergence reason are not stored.
pub fn read_trace_csv(path: &Path, estimator: EstimatorKind) -> Result<EstimateTrace, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    if header != csv_header() {
        return Err(csv_err(path, "unexpected header"));
    }
    let mut tr = EstimateTrace {
        estimator,
        times: vec![],
        truth: vec![],
        estimates: vec![],
        outputs: vec![],
        measurements: vec![],
        attacks: vec![],
        attack_estimates: vec![],
        innovation_norms: vec![],
        cov_diag: vec![],
        diverged: None,
        runtime_s: 0.0,
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| csv_err(path, format!("row {}: {e}", line + 2)))?;
        if vals.len() != 22 {
            return Err(csv_err(path, format!("row {} has {} fields", line + 2, vals.len())));
        }
        let block = |j: usize| Vector::from_column_slice(&vals[1 + 4 * j..5 + 4 * j]);
        tr.times.push(vals[0]);
        tr.truth.push(block(0));
        tr.estimates.push(block(1));
        tr.outputs.push(block(2));
        tr.measurements.push(block(3));
        tr.attacks.push(block(3) - block(2));
        tr.attack_estimates.push(block(4));
        tr.innovation_norms.push(vals[21]);
    }
    Ok(tr)
}
