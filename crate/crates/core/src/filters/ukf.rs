//! Unscented Kalman filter with the scaled `2n + 1` sigma-point set.

use super::{innovation_inverse, DiscreteModel, FilterError, FilterStep, GaussianBelief};
use crate::numerics::{self, Matrix, SqrtPolicy, Vector};
use crate::scenario::UkfParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaWeights {
    pub lambda: f64,
    pub mean0: f64,
    pub cov0: f64,
    /// Weight of every non-centre point (mean and covariance alike).
    pub rest: f64,
}

/// `λ = α²(n + κ) − n`; the centre mean weight `λ/(n + λ)` may be negative
/// and is kept as is.
pub fn sigma_weights(n: usize, p: &UkfParams) -> SigmaWeights {
    let nf = n as f64;
    let lambda = p.alpha * p.alpha * (nf + p.kappa) - nf;
    let mean0 = lambda / (nf + lambda);
    SigmaWeights { lambda, mean0, cov0: mean0 + 1.0 - p.alpha * p.alpha + p.beta, rest: 0.5 / (nf + lambda) }
}

fn sigma_points(b: &GaussianBelief, w: &SigmaWeights, policy: SqrtPolicy) -> Result<Vec<Vector>, FilterError> {
    let n = b.dim();
    let scaled = &b.cov * (n as f64 + w.lambda);
    let s = numerics::covariance_sqrt(&scaled, policy)?;
    let mut pts = Vec::with_capacity(2 * n + 1);
    pts.push(b.mean.clone());
    for sign in [1.0, -1.0] {
        for i in 0..n {
            pts.push(&b.mean + s.column(i) * sign);
        }
    }
    Ok(pts)
}

fn weighted_mean(points: &[Vector], w: &SigmaWeights) -> Vector {
    let mut m = &points[0] * w.mean0;
    for p in &points[1..] {
        m += p * w.rest;
    }
    m
}

fn weighted_cross(a: &[Vector], ma: &Vector, b: &[Vector], mb: &Vector, w: &SigmaWeights) -> Matrix {
    let mut out = (&a[0] - ma) * (&b[0] - mb).transpose() * w.cov0;
    for (x, y) in a[1..].iter().zip(&b[1..]) {
        out += (x - ma) * (y - mb).transpose() * w.rest;
    }
    out
}

pub fn ukf_predict<M: DiscreteModel>(
    b: &GaussianBelief,
    model: &M,
    w: &SigmaWeights,
    policy: SqrtPolicy,
) -> Result<GaussianBelief, FilterError> {
    let propagated: Vec<Vector> = sigma_points(b, w, policy)?.iter().map(|x| model.transition(x)).collect();
    let m = weighted_mean(&propagated, w);
    let p = weighted_cross(&propagated, &m, &propagated, &m, w) + model.process_cov();
    GaussianBelief::new(m, p).check_finite()
}

pub fn ukf_update<M: DiscreteModel>(
    prior: &GaussianBelief,
    model: &M,
    y: &Vector,
    w: &SigmaWeights,
    policy: SqrtPolicy,
) -> Result<FilterStep, FilterError> {
    let points = sigma_points(prior, w, policy)?;
    let ys: Vec<Vector> = points.iter().map(|x| model.measure(x)).collect();
    let y_hat = weighted_mean(&ys, w);
    let s = weighted_cross(&ys, &y_hat, &ys, &y_hat, w) + model.measurement_cov();
    let pxy = weighted_cross(&points, &prior.mean, &ys, &y_hat, w);
    let gain = pxy * innovation_inverse(&s)?;
    let innovation = y - &y_hat;
    let mean = &prior.mean + &gain * &innovation;
    let cov = &prior.cov - &gain * s * gain.transpose();
    Ok(FilterStep { belief: GaussianBelief::new(mean, cov).check_finite()?, innovation })
}

/// Predict then update.
pub fn ukf_step<M: DiscreteModel>(
    b: &GaussianBelief,
    model: &M,
    y: &Vector,
    params: &UkfParams,
    policy: SqrtPolicy,
) -> Result<FilterStep, FilterError> {
    let w = sigma_weights(b.dim(), params);
    let prior = ukf_predict(b, model, &w, policy)?;
    ukf_update(&prior, model, y, &w, policy)
}
