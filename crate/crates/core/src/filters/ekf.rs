//! Extended Kalman filter with finite-difference Jacobians.

use super::{innovation_inverse, DiscreteModel, FilterError, FilterStep, GaussianBelief};
use crate::numerics::{self, Vector};

pub const JACOBIAN_STEP: f64 = 1e-6;

pub fn ekf_predict<M: DiscreteModel>(b: &GaussianBelief, model: &M) -> GaussianBelief {
    let f = numerics::jacobian(|x| model.transition(x), &b.mean, JACOBIAN_STEP);
    GaussianBelief::new(model.transition(&b.mean), &f * &b.cov * f.transpose() + model.process_cov())
}

pub fn ekf_update<M: DiscreteModel>(prior: &GaussianBelief, model: &M, y: &Vector) -> Result<FilterStep, FilterError> {
    let h = numerics::jacobian(|x| model.measure(x), &prior.mean, JACOBIAN_STEP);
    let pht = &prior.cov * h.transpose();
    let s = &h * &pht + model.measurement_cov();
    let gain = pht * innovation_inverse(&s)?;
    let innovation = y - model.measure(&prior.mean);
    let mean = &prior.mean + &gain * &innovation;
    let cov = &prior.cov - &gain * s * gain.transpose();
    Ok(FilterStep { belief: GaussianBelief::new(mean, cov).check_finite()?, innovation })
}

pub fn ekf_step<M: DiscreteModel>(b: &GaussianBelief, model: &M, y: &Vector) -> Result<FilterStep, FilterError> {
    ekf_update(&ekf_predict(b, model).check_finite()?, model, y)
}
