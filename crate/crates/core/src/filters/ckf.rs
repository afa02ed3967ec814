//! Cubature Kalman filter (third-degree spherical-radial rule).

use super::{innovation_inverse, DiscreteModel, FilterError, FilterStep, GaussianBelief};
use crate::numerics::{self, Matrix, SqrtPolicy, Vector};

/// The `2n` cubature points `±√n e_i`, positive axis first.
pub fn cubature_points(n: usize) -> Vec<Vector> {
    assert!(n >= 1, "cubature rule needs n >= 1");
    let r = (n as f64).sqrt();
    let mut pts = Vec::with_capacity(2 * n);
    for sign in [1.0, -1.0] {
        for i in 0..n {
            let mut p = Vector::zeros(n);
            p[i] = sign * r;
            pts.push(p);
        }
    }
    pts
}

fn spread(b: &GaussianBelief, policy: SqrtPolicy) -> Result<Vec<Vector>, FilterError> {
    let n = b.dim();
    let s = numerics::covariance_sqrt(&b.cov, policy)? * (n as f64).sqrt();
    let mut pts = Vec::with_capacity(2 * n);
    for sign in [1.0, -1.0] {
        for i in 0..n {
            pts.push(&b.mean + s.column(i) * sign);
        }
    }
    Ok(pts)
}

fn mean_of(points: &[Vector]) -> Vector {
    let mut m = Vector::zeros(points[0].len());
    for p in points {
        m += p;
    }
    m / points.len() as f64
}

/// Equally weighted cross-covariance of two point sets about their means.
fn cross(a: &[Vector], ma: &Vector, b: &[Vector], mb: &Vector) -> Matrix {
    let mut out = Matrix::zeros(ma.len(), mb.len());
    for (x, y) in a.iter().zip(b) {
        out += (x - ma) * (y - mb).transpose();
    }
    out / a.len() as f64
}

pub fn ckf_predict<M: DiscreteModel>(
    b: &GaussianBelief,
    model: &M,
    policy: SqrtPolicy,
) -> Result<GaussianBelief, FilterError> {
    let propagated: Vec<Vector> = spread(b, policy)?.iter().map(|x| model.transition(x)).collect();
    let m = mean_of(&propagated);
    let p = cross(&propagated, &m, &propagated, &m) + model.process_cov();
    GaussianBelief::new(m, p).check_finite()
}

/// Measurement update with points redrawn from the predicted belief.
pub fn ckf_update<M: DiscreteModel>(
    prior: &GaussianBelief,
    model: &M,
    y: &Vector,
    policy: SqrtPolicy,
) -> Result<FilterStep, FilterError> {
    let points = spread(prior, policy)?;
    let ys: Vec<Vector> = points.iter().map(|x| model.measure(x)).collect();
    let y_hat = mean_of(&ys);
    let s = cross(&ys, &y_hat, &ys, &y_hat) + model.measurement_cov();
    let pxy = cross(&points, &prior.mean, &ys, &y_hat);
    let gain = pxy * innovation_inverse(&s)?;
    let innovation = y - &y_hat;
    let mean = &prior.mean + &gain * &innovation;
    let cov = &prior.cov - &gain * s * gain.transpose();
    Ok(FilterStep { belief: GaussianBelief::new(mean, cov).check_finite()?, innovation })
}
