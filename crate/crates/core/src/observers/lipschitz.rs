//! Lipschitz nonlinear observer `x̂̇ = A x̂ + B u + φ(x̂, u) + L(y − C x̂ − c0)`
//! with `L = (σ/2)P⁻¹Cᵀ` from a quadratic inner-boundedness LMI.

use super::ObserverError;
use crate::lmi::{Assignment, LmiBuilder, LmiProblem, Sign, SolverOptions, VarId, DEFAULT_MARGIN};
use crate::numerics::{self, Matrix, Vector};
use crate::scenario::LipschitzConstants;
use crate::smib::{LinearOutput, SmibModel};

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzGains {
    pub l_mat: Matrix,
    pub p_mat: Matrix,
    pub eps1: f64,
    pub eps2: f64,
    pub sigma: f64,
    pub constants: LipschitzConstants,
}

struct Vars {
    p: VarId,
    eps1: VarId,
    eps2: VarId,
    sigma: VarId,
}

/// `[[AᵀP + PA + (ε1ρ + ε2μ)I − σCᵀC, P + ((φε2 − ε1)/2)I], [·ᵀ, −ε2 I]] ≺ 0`
/// over `P ≻ 0` and `ε1, ε2, σ > 0`.
fn problem(a: &Matrix, c: &Matrix, k: &LipschitzConstants) -> Result<(LmiProblem, Vars), ObserverError> {
    let n = a.nrows();
    let mut b = LmiBuilder::new();
    let vars = Vars {
        p: b.symmetric("P", n, true),
        eps1: b.scalar("eps1", Sign::Positive),
        eps2: b.scalar("eps2", Sign::Positive),
        sigma: b.scalar("sigma", Sign::Positive),
    };
    let (a, ctc, k) = (a.clone(), c.transpose() * c, *k);
    let (pv, e1, e2, sv) = (vars.p, vars.eps1, vars.eps2, vars.sigma);
    b.block("lipschitz", 2 * n, move |s: &Assignment| {
        let pm = s.matrix(pv);
        let (e1, e2, sg) = (s.scalar(e1), s.scalar(e2), s.scalar(sv));
        let id = Matrix::identity(n, n);
        let b11 = a.transpose() * &pm + &pm * &a + &id * (e1 * k.rho + e2 * k.mu) - &ctc * sg;
        let b12 = &pm + &id * ((k.varphi * e2 - e1) / 2.0);
        let mut m = Matrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&b11);
        m.view_mut((0, n), (n, n)).copy_from(&b12);
        m.view_mut((n, 0), (n, n)).copy_from(&b12.transpose());
        m.view_mut((n, n), (n, n)).copy_from(&(-&id * e2));
        m
    });
    Ok((b.build(DEFAULT_MARGIN)?, vars))
}

/// Gain formula.
pub fn lipschitz_gain(p: &Matrix, c: &Matrix, sigma: f64) -> Result<Matrix, ObserverError> {
    Ok(numerics::inverse(p)? * c.transpose() * (sigma / 2.0))
}

pub fn lipschitz_synthesize(a: &Matrix, c: &Matrix, k: &LipschitzConstants) -> Result<LipschitzGains, ObserverError> {
    lipschitz_synthesize_with(a, c, k, &SolverOptions::default())
}

pub fn lipschitz_synthesize_with(
    a: &Matrix,
    c: &Matrix,
    k: &LipschitzConstants,
    opts: &SolverOptions,
) -> Result<LipschitzGains, ObserverError> {
    let (prob, v) = problem(a, c, k)?;
    let sol = prob.solve_feasibility(opts)?;
    let p_mat = sol.assignment.matrix(v.p);
    let sigma = sol.assignment.scalar(v.sigma);
    Ok(LipschitzGains {
        l_mat: lipschitz_gain(&p_mat, c, sigma)?,
        p_mat,
        eps1: sol.assignment.scalar(v.eps1),
        eps2: sol.assignment.scalar(v.eps2),
        sigma,
        constants: *k,
    })
}

impl LipschitzGains {
    /// Certify margin of the LMI at the stored `P, ε1, ε2, σ`.
    pub fn lmi_margin(&self, a: &Matrix, c: &Matrix) -> Result<f64, ObserverError> {
        let (prob, v) = problem(a, c, &self.constants)?;
        let mut s = prob.zero_assignment();
        s.set_matrix(v.p, &self.p_mat);
        s.set_scalar(v.eps1, self.eps1);
        s.set_scalar(v.eps2, self.eps2);
        s.set_scalar(v.sigma, self.sigma);
        Ok(prob.certify(&s))
    }

    /// `max |L − (σ/2)P⁻¹Cᵀ|`.
    pub fn gain_residual(&self, c: &Matrix) -> Result<f64, ObserverError> {
        Ok((lipschitz_gain(&self.p_mat, c, self.sigma)? - &self.l_mat).amax())
    }
}

/// One RK4 step with `u` and `y` held.
pub fn lipschitz_step(
    xhat: &Vector,
    g: &LipschitzGains,
    model: &SmibModel,
    out: &LinearOutput,
    y: &Vector,
    dt: f64,
) -> Result<Vector, ObserverError> {
    let forcing = model.bu() + &g.l_mat * (y - &out.c0);
    let lc = &g.l_mat * &out.c;
    let rhs = |_: f64, x: &Vector| &model.a * x + &forcing + model.phi_vec(x) - &lc * x;
    numerics::rk4_step(rhs, xhat, 0.0, dt).map_err(|_| ObserverError::NonFiniteState)
}
