//! Error metrics over trace windows.

use super::{EstimateTrace, HarnessError};
use crate::numerics::Vector;

/// Length of the closing window used for convergence checks, in seconds.
pub const FINAL_WINDOW: f64 = 2.0;
/// Fraction of a state's true peak-to-peak range allowed as final RMSE.
pub const RELATIVE_TOLERANCE: f64 = 0.05;
/// Threshold floor for near-constant states.
pub const ABSOLUTE_FLOOR: f64 = 1e-3;

/// Slack on window edges so grid points computed as `k·dt` are included.
const EDGE: f64 = 1e-9;

fn in_window(t: f64, w: (f64, f64)) -> bool {
    t >= w.0 - EDGE && t <= w.1 + EDGE
}

/// RMS of `a_i − b_i` over samples with time in `[w.0, w.1]`.
pub fn rmse_series(times: &[f64], a: &[Vector], b: &[Vector], w: (f64, f64), i: usize) -> Result<f64, HarnessError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((t, x), y) in times.iter().zip(a).zip(b) {
        if in_window(*t, w) {
            let e = x[i] - y[i];
            sum += e * e;
            n += 1;
        }
    }
    if n == 0 {
        return Err(HarnessError::EmptyWindow { start: w.0, end: w.1 });
    }
    Ok((sum / n as f64).sqrt())
}

/// State-estimate RMSE of state `i` over a window.
pub fn rmse(trace: &EstimateTrace, w: (f64, f64), i: usize) -> Result<f64, HarnessError> {
    rmse_series(&trace.times, &trace.estimates, &trace.truth, w, i)
}

/// Attack-estimate RMSE of channel `i` over a window.
pub fn attack_rmse(trace: &EstimateTrace, w: (f64, f64), i: usize) -> Result<f64, HarnessError> {
    rmse_series(&trace.times, &trace.attack_estimates, &trace.attacks, w, i)
}

/// Per-state tracking thresholds from a true trajectory.
pub fn convergence_threshold(truth: &[Vector]) -> Vec<f64> {
    let n = truth.first().map_or(0, |x| x.len());
    (0..n)
        .map(|i| {
            let lo = truth.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min);
            let hi = truth.iter().map(|x| x[i]).fold(f64::NEG_INFINITY, f64::max);
            (RELATIVE_TOLERANCE * (hi - lo)).max(ABSOLUTE_FLOOR)
        })
        .collect()
}

/// First sample time after which every state error stays below its
/// threshold until the end of the trace.
pub fn convergence_time(trace: &EstimateTrace, threshold: &[f64]) -> Option<f64> {
    let mut since = None;
    for k in 0..trace.len() {
        let e = trace.error(k);
        let inside = e.iter().zip(threshold).all(|(e, t)| e.abs() < *t);
        match (inside, since) {
            (true, None) => since = Some(trace.times[k]),
            (false, _) => since = None,
            _ => {}
        }
    }
    since
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> Vec<Vector> {
        v.iter().map(|x| Vector::from_element(1, *x)).collect()
    }

    #[test]
    fn examples() {
        let t = [0.0, 1.0, 2.0];
        let truth = series(&[0.0, 0.0, 0.0]);
        assert_eq!(rmse_series(&t, &truth, &truth, (0.0, 2.0), 0).unwrap(), 0.0);
        let offset = series(&[0.1, 0.1, 0.1]);
        assert!((rmse_series(&t, &offset, &truth, (1.0, 2.0), 0).unwrap() - 0.1).abs() < 1e-15);
        let e = series(&[1.0, 2.0, 2.0]);
        assert!((rmse_series(&t, &e, &truth, (0.0, 2.0), 0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!(matches!(rmse_series(&t, &e, &truth, (5.0, 6.0), 0), Err(HarnessError::EmptyWindow { .. })));
    }

    #[test]
    fn window_edges_tolerate_grid_rounding() {
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let a = series(&vec![1.0; 1001]);
        let b = series(&vec![0.0; 1001]);
        // 8.0 is not exactly representable as 800 * 0.01
        let n = t.iter().filter(|x| in_window(**x, (8.0, 10.0))).count();
        assert_eq!(n, 201);
        assert_eq!(rmse_series(&t, &a, &b, (8.0, 10.0), 0).unwrap(), 1.0);
    }

    #[test]
    fn thresholds_have_a_floor() {
        let truth = vec![Vector::from_column_slice(&[0.0, 5.0]), Vector::from_column_slice(&[2.0, 5.0])];
        assert_eq!(convergence_threshold(&truth), vec![0.1, ABSOLUTE_FLOOR]);
    }
}
