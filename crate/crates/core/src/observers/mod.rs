//! Deterministic observers: the unknown-input observer and the Lipschitz
//! observer, with offline gain synthesis.

pub mod gains;
pub mod lipschitz;
pub mod uio;

use std::time::Instant;
use thiserror::Error;

use crate::harness::{EstimateTrace, TraceRecorder};
use crate::lmi::LmiError;
use crate::numerics::{Matrix, NumericsError, Vector};
use crate::scenario::{EstimatorKind, Scenario, Simulation};
use crate::smib::{decomposition, LinearOutput, SmibModel};

pub use gains::{load_gains, parse_gains, save_gains, ObserverGains};
pub use lipschitz::{lipschitz_gain, lipschitz_step, lipschitz_synthesize, LipschitzGains};
pub use uio::{uio_init, uio_step, uio_synthesize, UioGains};

#[derive(Debug, Error)]
pub enum ObserverError {
    #[error("C·D has rank {rank} but D has {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("gain synthesis failed: {0}")]
    SynthesisInfeasible(#[from] LmiError),
    #[error("observer state became non-finite")]
    NonFiniteState,
    #[error("unknown-input observer state has no intermediate z")]
    MissingIntermediate,
    #[error("{0} is not an observer")]
    NotAnObserver(EstimatorKind),
    #[error("gains file line {line}: {reason}")]
    GainsFormat { line: usize, reason: String },
    #[error("gains file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    /// Intermediate state, unknown-input observer only.
    pub z: Option<Vector>,
    pub xhat: Vector,
}

/// `v̂ = y − (C x̂ + c0)`.
pub fn estimate_attack(xhat: &Vector, y: &Vector, c: &Matrix, c0: &Vector) -> Vector {
    y - (c * xhat + c0)
}

/// Synthesizes the gains `kind` needs for `scenario`.
pub fn synthesize(kind: EstimatorKind, scenario: &Scenario) -> Result<ObserverGains, ObserverError> {
    let (a, b) = decomposition(&scenario.params);
    let c = scenario.linear_output().c;
    match kind {
        EstimatorKind::Uio => {
            uio_synthesize(&a, &b, &c, Some(&scenario.d_matrix), scenario.lipschitz.gamma).map(ObserverGains::Uio)
        }
        EstimatorKind::Lipschitz => lipschitz_synthesize(&a, &c, &scenario.lipschitz).map(ObserverGains::Lipschitz),
        other => Err(ObserverError::NotAnObserver(other)),
    }
}

/// Runs an observer with precomputed gains over a simulated realization.
/// Synthesis is not part of the timed loop.
pub fn run_observer(scenario: &Scenario, sim: &Simulation, gains: &ObserverGains) -> EstimateTrace {
    let model = SmibModel::new(scenario.params, scenario.u);
    let out: &LinearOutput = &sim.linear_output;
    let mut rec = TraceRecorder::new(gains.kind(), sim);
    let ys = &sim.measurements;
    let start = Instant::now();
    let record = |rec: &mut TraceRecorder, k: usize, xhat: &Vector| {
        let vhat = estimate_attack(xhat, &ys[k], &out.c, &out.c0);
        let norm = vhat.norm();
        rec.record(k, xhat, vhat, norm)
    };
    match gains {
        ObserverGains::Lipschitz(g) => {
            let mut xhat = scenario.xhat0.to_vector();
            if record(&mut rec, 0, &xhat) {
                for k in 1..ys.len() {
                    match lipschitz_step(&xhat, g, &model, out, &ys[k - 1], scenario.dt) {
                        Ok(next) => xhat = next,
                        Err(e) => {
                            rec.diverge(k, e.to_string());
                            break;
                        }
                    }
                    if !record(&mut rec, k, &xhat) {
                        break;
                    }
                }
            }
        }
        ObserverGains::Uio(g) => {
            let mut state = uio_init(&scenario.xhat0.to_vector(), g, out, &ys[0]);
            if record(&mut rec, 0, &state.xhat) {
                for k in 1..ys.len() {
                    match uio_step(&state, g, &model, out, &ys[k - 1], &ys[k], scenario.dt) {
                        Ok(next) => state = next,
                        Err(e) => {
                            rec.diverge(k, e.to_string());
                            break;
                        }
                    }
                    if !record(&mut rec, k, &state.xhat) {
                        break;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    rec.finish(elapsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{self, default_paper_scenario, REFERENCE_X0};

    #[test]
    fn attack_estimate_examples() {
        let s = default_paper_scenario();
        let out = s.linear_output();
        let x = REFERENCE_X0.to_vector();
        let y = out.apply(&x);
        assert!(estimate_attack(&x, &y, &out.c, &out.c0).amax() == 0.0);
        let v = scenario::attack_vector(5.5);
        let est = estimate_attack(&x, &(&y + &v), &out.c, &out.c0);
        assert!((est - v).amax() < 1e-15);
    }

    #[test]
    fn filters_are_not_observers() {
        let s = default_paper_scenario();
        assert!(matches!(synthesize(EstimatorKind::Ckf, &s), Err(ObserverError::NotAnObserver(EstimatorKind::Ckf))));
    }

    #[test]
    fn lipschitz_error_decays_without_attack() {
        // the attack biases the output injection; decay is judged with it off
        let s = default_paper_scenario().with_attack(false);
        let sim = scenario::simulate(&s).unwrap();
        let g = synthesize(EstimatorKind::Lipschitz, &s).unwrap();
        let tr = run_observer(&s, &sim, &g);
        assert!(!tr.is_diverged());
        assert_eq!(tr.len(), sim.times.len());
        let window = |a: usize, b: usize| (a..b).map(|k| tr.error(k).norm()).sum::<f64>() / (b - a) as f64;
        let n = tr.len();
        assert!(window(n - 200, n) * 10.0 <= window(0, 200));
    }
}
