//! Per-estimator summaries and the comparison table.

use std::fmt::Write as _;

use super::metrics::{attack_rmse, convergence_threshold, convergence_time, rmse, FINAL_WINDOW};
use super::{EstimateTrace, HarnessError};
use crate::scenario::EstimatorKind;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    /// Divergence time, if the trace stopped early.
    pub diverged_at: Option<f64>,
    pub divergence_reason: Option<String>,
    pub rmse_full: Vec<f64>,
    /// Infinite when the trace does not reach the final window.
    pub rmse_final: Vec<f64>,
    pub threshold: Vec<f64>,
    pub convergence_time: Option<f64>,
    /// Attack-estimate RMSE per channel over the whole run.
    pub attack_rmse: Vec<f64>,
    pub runtime_s: f64,
}

impl EstimatorSummary {
    /// Final-window RMSE below threshold in every state.
    pub fn tracks(&self) -> bool {
        self.diverged_at.is_none() && self.rmse_final.iter().zip(&self.threshold).all(|(r, t)| r < t)
    }

    /// States (1-based) whose final-window RMSE misses the threshold.
    pub fn failing_states(&self) -> Vec<usize> {
        (0..self.threshold.len()).filter(|&i| !(self.rmse_final[i] < self.threshold[i])).map(|i| i + 1).collect()
    }
}

/// Summarizes one trace against thresholds derived from `truth_ref`, the
/// full-length true trajectory, over a run ending at `t_end`.
pub fn summarize(trace: &EstimateTrace, truth_ref: &[crate::Vector], t_end: f64) -> EstimatorSummary {
    let threshold = convergence_threshold(truth_ref);
    let n = threshold.len();
    let t0 = trace.times.first().copied().unwrap_or(0.0);
    let full = (t0, t_end);
    let last = ((t_end - FINAL_WINDOW).max(t0), t_end);
    let truncated = trace.diverged.is_some() || trace.times.last().is_none_or(|t| *t < t_end - 1e-9);
    let collect = |f: &dyn Fn(usize) -> Result<f64, HarnessError>| -> Vec<f64> {
        (0..n).map(|i| f(i).unwrap_or(f64::INFINITY)).collect()
    };
    let rmse_final =
        if truncated { vec![f64::INFINITY; n] } else { collect(&|i| rmse(trace, last, i)) };
    EstimatorSummary {
        estimator: trace.estimator,
        diverged_at: if truncated {
            Some(trace.diverged.as_ref().map_or_else(|| trace.times.last().copied().unwrap_or(t0), |d| d.time))
        } else {
            None
        },
        divergence_reason: trace.diverged.as_ref().map(|d| d.reason.clone()),
        rmse_full: collect(&|i| rmse(trace, full, i)),
        rmse_final,
        convergence_time: if truncated { None } else { convergence_time(trace, &threshold) },
        threshold,
        attack_rmse: collect(&|i| attack_rmse(trace, full, i)),
        runtime_s: trace.runtime_s,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub scenario: String,
    pub entries: Vec<EstimatorSummary>,
}

impl ComparisonReport {
    /// Builds a report over traces of one realization. Thresholds come from
    /// the longest trace's truth so truncated traces are judged alike.
    pub fn from_traces(scenario: &str, traces: &[EstimateTrace], t_end: f64) -> Result<Self, HarnessError> {
        let reference = traces.iter().max_by_key(|t| t.len()).ok_or(HarnessError::NoTraces)?;
        let mut entries: Vec<EstimatorSummary> = Vec::with_capacity(traces.len());
        for tr in traces {
            if entries.iter().any(|e| e.estimator == tr.estimator) {
                return Err(HarnessError::DuplicateEstimator(tr.estimator));
            }
            entries.push(summarize(tr, &reference.truth, t_end));
        }
        Ok(Self { scenario: scenario.to_string(), entries })
    }

    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.entries.iter().find(|e| e.estimator == kind)
    }

    pub fn all_diverged(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.diverged_at.is_some())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.scenario);
        if let Some(e) = self.entries.first() {
            let _ = writeln!(s, "threshold (final {FINAL_WINDOW} s RMSE): {}", fmt_vec(&e.threshold));
        }
        for e in &self.entries {
            let verdict = if e.tracks() {
                "PASS".to_string()
            } else if let Some(t) = e.diverged_at {
                format!("FAIL (diverged at t = {t:.2})")
            } else {
                format!("FAIL (states {:?})", e.failing_states())
            };
            let _ = writeln!(s, "\n[{}] {verdict}", e.estimator);
            let _ = writeln!(s, "  rmse full      {}", fmt_vec(&e.rmse_full));
            let _ = writeln!(s, "  rmse final     {}", fmt_vec(&e.rmse_final));
            let conv = e.convergence_time.map_or("never".to_string(), |t| format!("{t:.2} s"));
            let _ = writeln!(s, "  converged      {conv}");
            let _ = writeln!(s, "  attack rmse    {}", fmt_vec(&e.attack_rmse));
            let _ = writeln!(s, "  runtime        {:.6} s", e.runtime_s);
            if let Some(r) = &e.divergence_reason {
                let _ = writeln!(s, "  reason         {r}");
            }
        }
        s
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Divergence;
    use crate::numerics::Vector;

    fn trace(kind: EstimatorKind, n: usize, err: f64) -> EstimateTrace {
        let times: Vec<f64> = (0..n).map(|k| k as f64 * 0.01).collect();
        let truth: Vec<Vector> = times.iter().map(|t| Vector::from_element(2, t.sin())).collect();
        let estimates = truth.iter().map(|x| x.add_scalar(err)).collect();
        let zeros = vec![Vector::zeros(2); n];
        EstimateTrace {
            estimator: kind,
            times,
            truth: truth.clone(),
            estimates,
            outputs: truth,
            measurements: zeros.clone(),
            attacks: zeros.clone(),
            attack_estimates: zeros,
            innovation_norms: vec![0.0; n],
            cov_diag: vec![],
            diverged: None,
            runtime_s: 0.5,
        }
    }

    #[test]
    fn verdicts() {
        let good = trace(EstimatorKind::Ckf, 1001, 1e-4);
        let bad = trace(EstimatorKind::Ekf, 1001, 0.5);
        let mut gone = trace(EstimatorKind::Ukf, 300, 0.0);
        gone.diverged = Some(Divergence { time: 3.0, reason: "boom".into() });
        let r = ComparisonReport::from_traces("t", &[good, bad, gone], 10.0).unwrap();
        assert!(r.get(EstimatorKind::Ckf).unwrap().tracks());
        assert_eq!(r.get(EstimatorKind::Ekf).unwrap().failing_states(), vec![1, 2]);
        let u = r.get(EstimatorKind::Ukf).unwrap();
        assert!(!u.tracks());
        assert_eq!(u.diverged_at, Some(3.0));
        // the threshold uses the full-length truth
        assert_eq!(u.threshold, r.get(EstimatorKind::Ckf).unwrap().threshold);
        let text = r.to_text();
        assert!(text.contains("[ckf] PASS"));
        assert!(text.contains("diverged at t = 3.00"));
        assert!(!r.all_diverged());
    }

    #[test]
    fn every_estimator_once() {
        let a = trace(EstimatorKind::Ckf, 10, 0.0);
        assert!(matches!(
            ComparisonReport::from_traces("t", &[a.clone(), a], 0.09),
            Err(HarnessError::DuplicateEstimator(EstimatorKind::Ckf))
        ));
        assert!(matches!(ComparisonReport::from_traces("t", &[], 1.0), Err(HarnessError::NoTraces)));
    }
}
