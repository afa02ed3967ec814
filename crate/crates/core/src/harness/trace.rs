use crate::numerics::Vector;
use crate::scenario::{EstimatorKind, Simulation};

/// State norm beyond which an estimate counts as diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub time: f64,
    pub reason: String,
}

/// Per-step record of one estimator on one realization.
///
/// All series share the time grid. On divergence every series stops at the
/// last healthy sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTrace {
    pub estimator: EstimatorKind,
    pub times: Vec<f64>,
    pub truth: Vec<Vector>,
    pub estimates: Vec<Vector>,
    /// Noise- and attack-free outputs of the true system.
    pub outputs: Vec<Vector>,
    pub measurements: Vec<Vector>,
    pub attacks: Vec<Vector>,
    pub attack_estimates: Vec<Vector>,
    pub innovation_norms: Vec<f64>,
    /// Covariance diagonal for Kalman-type filters, empty for observers.
    pub cov_diag: Vec<Vector>,
    pub diverged: Option<Divergence>,
    /// Wall-clock seconds spent in the stepping loop.
    pub runtime_s: f64,
}

impl EstimateTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged.is_some()
    }

    /// Estimation error `x̂ − x` at sample `k`.
    pub fn error(&self, k: usize) -> Vector {
        &self.estimates[k] - &self.truth[k]
    }
}

/// Collects samples while an estimator runs against a [`Simulation`].
pub struct TraceRecorder<'a> {
    sim: &'a Simulation,
    trace: EstimateTrace,
}

impl<'a> TraceRecorder<'a> {
    pub fn new(estimator: EstimatorKind, sim: &'a Simulation) -> Self {
        let n = sim.times.len();
        let trace = EstimateTrace {
            estimator,
            times: Vec::with_capacity(n),
            truth: Vec::with_capacity(n),
            estimates: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
            measurements: Vec::with_capacity(n),
            attacks: Vec::with_capacity(n),
            attack_estimates: Vec::with_capacity(n),
            innovation_norms: Vec::with_capacity(n),
            cov_diag: Vec::new(),
            diverged: None,
            runtime_s: 0.0,
        };
        Self { sim, trace }
    }

    /// Records sample `k`. Returns `false` (and marks the trace diverged)
    /// when the estimate is non-finite or blows past [`DIVERGENCE_NORM`].
    pub fn record(&mut self, k: usize, xhat: &Vector, vhat: Vector, innovation_norm: f64) -> bool {
        let norm = xhat.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            self.diverge(k, format!("state norm {norm:e}"));
            return false;
        }
        let s = self.sim;
        self.trace.times.push(s.times[k]);
        self.trace.truth.push(s.states[k].clone());
        self.trace.estimates.push(xhat.clone());
        self.trace.outputs.push(s.outputs[k].clone());
        self.trace.measurements.push(s.measurements[k].clone());
        self.trace.attacks.push(s.attacks[k].clone());
        self.trace.attack_estimates.push(vhat);
        self.trace.innovation_norms.push(innovation_norm);
        true
    }

    pub fn record_cov_diag(&mut self, diag: Vector) {
        self.trace.cov_diag.push(diag);
    }

    pub fn diverge(&mut self, k: usize, reason: impl Into<String>) {
        if self.trace.diverged.is_none() {
            self.trace.diverged = Some(Divergence { time: self.sim.times[k], reason: reason.into() });
        }
        // keep the covariance series aligned with the other series
        self.trace.cov_diag.truncate(self.trace.times.len());
    }

    pub fn finish(mut self, runtime_s: f64) -> EstimateTrace {
        self.trace.runtime_s = runtime_s;
        self.trace
    }
}
