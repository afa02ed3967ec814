//! Kalman-type estimators over a discrete-time model.

mod ckf;
mod ekf;
mod ukf;

pub use ckf::{ckf_predict, ckf_update, cubature_points};
pub use ekf::{ekf_predict, ekf_step, ekf_update, JACOBIAN_STEP};
pub use ukf::{sigma_weights, ukf_predict, ukf_step, ukf_update, SigmaWeights};

use std::time::Instant;
use thiserror::Error;

use crate::harness::trace::{EstimateTrace, TraceRecorder};
use crate::numerics::{self, Matrix, NumericsError, SqrtPolicy, Vector};
use crate::scenario::{self, EstimatorKind, MeasurementModel, Scenario, ScenarioError, Simulation, UkfParams};
use crate::smib::{LinearOutput, SmibModel};

/// Innovation covariance condition number treated as singular.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("covariance lost positive definiteness (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("innovation covariance is singular (condition number {0:e})")]
    SingularInnovation(f64),
    #[error("non-finite value in filter state")]
    NonFinite,
    #[error("{0} is not a Kalman-type filter")]
    NotAFilter(EstimatorKind),
}

impl From<NumericsError> for FilterError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::NotPositiveDefinite { index, pivot } => FilterError::NotPositiveDefinite { index, pivot },
            _ => FilterError::NonFinite,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Matrix,
}

impl GaussianBelief {
    pub fn new(mean: Vector, cov: Matrix) -> Self {
        Self { mean, cov: numerics::symmetrize(&cov) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_finite(self) -> Result<Self, FilterError> {
        if self.mean.iter().all(|v| v.is_finite()) && numerics::is_finite(&self.cov) {
            Ok(self)
        } else {
            Err(FilterError::NonFinite)
        }
    }
}

/// Result of a measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub belief: GaussianBelief,
    /// `y − ŷ` against the predicted measurement.
    pub innovation: Vector,
}

/// `x_k = f(x_{k−1}) + q`, `y_k = h(x_k) + r` with the input baked into `f`.
pub trait DiscreteModel {
    fn state_dim(&self) -> usize;
    fn transition(&self, x: &Vector) -> Vector;
    fn measure(&self, x: &Vector) -> Vector;
    fn process_cov(&self) -> &Matrix;
    fn measurement_cov(&self) -> &Matrix;
}

/// Linear-Gaussian model `x_k = F x + b`, `y = H x + c`.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    pub f: Matrix,
    pub b: Vector,
    pub h: Matrix,
    pub c: Vector,
    pub q: Matrix,
    pub r: Matrix,
}

impl DiscreteModel for LinearGaussianModel {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }
    fn transition(&self, x: &Vector) -> Vector {
        &self.f * x + &self.b
    }
    fn measure(&self, x: &Vector) -> Vector {
        &self.h * x + &self.c
    }
    fn process_cov(&self) -> &Matrix {
        &self.q
    }
    fn measurement_cov(&self) -> &Matrix {
        &self.r
    }
}

/// The machine model discretized with one RK4 step per sample.
#[derive(Debug, Clone)]
pub struct SmibDiscreteModel {
    pub model: SmibModel,
    pub dt: f64,
    /// `None` selects the nonlinear output map.
    pub output: Option<LinearOutput>,
    pub q: Matrix,
    pub r: Matrix,
}

impl SmibDiscreteModel {
    pub fn from_scenario(s: &Scenario) -> Self {
        let output = match s.measurement {
            MeasurementModel::Linear => Some(s.linear_output()),
            MeasurementModel::Nonlinear => None,
        };
        Self {
            model: SmibModel::new(s.params, s.u),
            dt: s.dt,
            output,
            q: s.q_cov.clone(),
            r: s.r_cov.clone(),
        }
    }
}

impl DiscreteModel for SmibDiscreteModel {
    fn state_dim(&self) -> usize {
        4
    }
    fn transition(&self, x: &Vector) -> Vector {
        // NaN is left in place; the next factorization reports it
        numerics::rk4_step(|_, z| self.model.drift_vec(z), x, 0.0, self.dt)
            .unwrap_or_else(|_| Vector::from_element(4, f64::NAN))
    }
    fn measure(&self, x: &Vector) -> Vector {
        match &self.output {
            Some(lin) => lin.apply(x),
            None => self.model.output_vec(x),
        }
    }
    fn process_cov(&self) -> &Matrix {
        &self.q
    }
    fn measurement_cov(&self) -> &Matrix {
        &self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KalmanKind {
    Ekf,
    Ukf,
    Ckf,
}

impl TryFrom<EstimatorKind> for KalmanKind {
    type Error = FilterError;
    fn try_from(k: EstimatorKind) -> Result<Self, Self::Error> {
        match k {
            EstimatorKind::Ekf => Ok(KalmanKind::Ekf),
            EstimatorKind::Ukf => Ok(KalmanKind::Ukf),
            EstimatorKind::Ckf => Ok(KalmanKind::Ckf),
            other => Err(FilterError::NotAFilter(other)),
        }
    }
}

impl From<KalmanKind> for EstimatorKind {
    fn from(k: KalmanKind) -> Self {
        match k {
            KalmanKind::Ekf => EstimatorKind::Ekf,
            KalmanKind::Ukf => EstimatorKind::Ukf,
            KalmanKind::Ckf => EstimatorKind::Ckf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOptions {
    pub sqrt: SqrtPolicy,
    pub ukf: UkfParams,
}

impl FilterOptions {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            sqrt: if s.sqrt_fallback { SqrtPolicy::EigenFallback } else { SqrtPolicy::Strict },
            ukf: s.ukf,
        }
    }
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self { sqrt: SqrtPolicy::Strict, ukf: UkfParams::classic(4) }
    }
}

/// One predict + update cycle. `predict = false` runs the update alone,
/// which is how the first sample is handled.
pub fn filter_step<M: DiscreteModel>(
    kind: KalmanKind,
    b: &GaussianBelief,
    model: &M,
    y: &Vector,
    opts: &FilterOptions,
    predict: bool,
) -> Result<FilterStep, FilterError> {
    match kind {
        KalmanKind::Ckf => {
            let prior = if predict { ckf_predict(b, model, opts.sqrt)? } else { b.clone() };
            ckf_update(&prior, model, y, opts.sqrt)
        }
        KalmanKind::Ukf => {
            let w = sigma_weights(b.dim(), &opts.ukf);
            let prior = if predict { ukf_predict(b, model, &w, opts.sqrt)? } else { b.clone() };
            ukf_update(&prior, model, y, &w, opts.sqrt)
        }
        KalmanKind::Ekf => {
            let prior = if predict { ekf_predict(b, model) } else { b.clone() };
            ekf_update(&prior.check_finite()?, model, y)
        }
    }
}

/// Innovation covariance inverse with the conditioning guard.
pub(crate) fn innovation_inverse(s: &Matrix) -> Result<Matrix, FilterError> {
    if !numerics::is_finite(s) {
        return Err(FilterError::NonFinite);
    }
    let cond = numerics::condition_number(s);
    if !(cond <= MAX_INNOVATION_CONDITION) {
        return Err(FilterError::SingularInnovation(cond));
    }
    numerics::inverse(s).map_err(|_| FilterError::SingularInnovation(f64::INFINITY))
}

/// Runs a Kalman-type filter over a simulated realization.
///
/// Errors and blow-ups end the trace early and are recorded as divergence.
pub fn run_kalman(kind: KalmanKind, scenario: &Scenario, sim: &Simulation) -> EstimateTrace {
    let model = SmibDiscreteModel::from_scenario(scenario);
    let opts = FilterOptions::from_scenario(scenario);
    let mut rec = TraceRecorder::new(kind.into(), sim);
    let mut belief = GaussianBelief::new(scenario.xhat0.to_vector(), scenario.p0_cov.clone());
    let start = Instant::now();
    for (k, y) in sim.measurements.iter().enumerate() {
        match filter_step(kind, &belief, &model, y, &opts, k > 0) {
            Ok(step) => {
                let vhat = y - model.measure(&step.belief.mean);
                if !rec.record(k, &step.belief.mean, vhat, step.innovation.norm()) {
                    break;
                }
                rec.record_cov_diag(step.belief.cov.diagonal());
                belief = step.belief;
            }
            Err(e) => {
                rec.diverge(k, e.to_string());
                break;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    rec.finish(elapsed)
}

/// Simulates the scenario and runs one Kalman-type filter on it.
pub fn run_filter(kind: EstimatorKind, scenario: &Scenario) -> Result<EstimateTrace, ScenarioError> {
    let kind = KalmanKind::try_from(kind).map_err(|e| ScenarioError::Validation {
        field: "estimators".into(),
        reason: e.to_string(),
    })?;
    let sim = scenario::simulate(scenario)?;
    Ok(run_kalman(kind, scenario, &sim))
}
