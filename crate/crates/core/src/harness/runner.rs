//! Scenario execution: one truth realization, every estimator on it.

use std::path::Path;

use super::{read_trace_csv, write_trace_csv, ComparisonReport, EstimateTrace, HarnessError};
use crate::filters::{run_kalman, KalmanKind};
use crate::observers::{self, run_observer, ObserverGains};
use crate::scenario::{simulate, EstimatorKind, Scenario, Simulation};

/// Repeats behind each reported runtime.
pub const TIMING_REPEATS: usize = 5;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub sim: Simulation,
    pub traces: Vec<EstimateTrace>,
    pub report: ComparisonReport,
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn run_once(kind: EstimatorKind, s: &Scenario, sim: &Simulation, gains: Option<&ObserverGains>) -> EstimateTrace {
    match (KalmanKind::try_from(kind), gains) {
        (Ok(k), _) => run_kalman(k, s, sim),
        (Err(_), Some(g)) => run_observer(s, sim, g),
        (Err(_), None) => unreachable!("observer gains are synthesized before running"),
    }
}

/// Runs `kinds` against one realization. Observer gains are synthesized
/// first and outside the timed loop; each reported runtime is the median
/// of `repeats` runs.
pub fn run_estimators(
    s: &Scenario,
    sim: &Simulation,
    kinds: &[EstimatorKind],
    repeats: usize,
) -> Result<Vec<EstimateTrace>, HarnessError> {
    let mut gains = Vec::new();
    for &k in kinds {
        if !k.is_kalman() {
            let g = observers::synthesize(k, s).map_err(|source| HarnessError::Synthesis { kind: k, source })?;
            gains.push((k, g));
        }
    }
    let mut traces = Vec::with_capacity(kinds.len());
    for &k in kinds {
        let g = gains.iter().find(|(gk, _)| *gk == k).map(|(_, g)| g);
        let mut trace = run_once(k, s, sim, g);
        let mut times = vec![trace.runtime_s];
        for _ in 1..repeats.max(1) {
            times.push(run_once(k, s, sim, g).runtime_s);
        }
        trace.runtime_s = median(&mut times);
        traces.push(trace);
    }
    Ok(traces)
}

/// Simulates the scenario and runs its configured estimators.
pub fn run_scenario(s: &Scenario, repeats: usize) -> Result<RunOutput, HarnessError> {
    let sim = simulate(s)?;
    let traces = run_estimators(s, &sim, &s.estimators, repeats)?;
    let report = ComparisonReport::from_traces(&s.name, &traces, s.t_end)?;
    Ok(RunOutput { scenario: s.clone(), sim, traces, report })
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

/// Writes `<estimator>.csv` for every trace and `report.txt`.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for tr in &out.traces {
        write_trace_csv(tr, &dir.join(format!("{}.csv", tr.estimator)))?;
    }
    let report = dir.join("report.txt");
    std::fs::write(&report, out.report.to_text()).map_err(|e| io_err(&report, e))
}

/// Loads every `<estimator>.csv` in `dir`, in estimator order.
pub fn read_run_dir(dir: &Path) -> Result<Vec<EstimateTrace>, HarnessError> {
    if !dir.is_dir() {
        return Err(io_err(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let mut traces = Vec::new();
    for kind in EstimatorKind::ALL {
        let p = dir.join(format!("{kind}.csv"));
        if p.is_file() {
            traces.push(read_trace_csv(&p, kind)?);
        }
    }
    if traces.is_empty() {
        return Err(HarnessError::NoTraces);
    }
    Ok(traces)
}

/// Rebuilds the comparison from a run directory. The final time is the
/// longest trace's last sample.
pub fn report_from_dir(dir: &Path) -> Result<ComparisonReport, HarnessError> {
    let traces = read_run_dir(dir)?;
    let t_end = traces.iter().filter_map(|t| t.times.last().copied()).fold(f64::NEG_INFINITY, f64::max);
    let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    ComparisonReport::from_traces(&name, &traces, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_paper_scenario;

    #[test]
    fn median_examples() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn runs_share_the_realization_and_round_trip() {
        let mut s = default_paper_scenario();
        s.t_end = 1.0;
        s.estimators = vec![EstimatorKind::Ckf, EstimatorKind::Lipschitz];
        let out = run_scenario(&s, 1).unwrap();
        assert_eq!(out.traces.len(), 2);
        assert_eq!(out.traces[0].measurements, out.traces[1].measurements);
        let dir = tempfile::tempdir().unwrap();
        write_run(&out, dir.path()).unwrap();
        let back = read_run_dir(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].estimates, out.traces[0].estimates);
        let r = report_from_dir(dir.path()).unwrap();
        assert_eq!(r.entries.len(), 2);
        assert_eq!(r.get(EstimatorKind::Ckf).unwrap().rmse_final, out.report.get(EstimatorKind::Ckf).unwrap().rmse_final);
    }

    #[test]
    fn empty_directory_has_no_traces() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_run_dir(dir.path()), Err(HarnessError::NoTraces)));
    }
}
