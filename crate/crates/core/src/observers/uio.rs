//! Unknown-input observer.
//!
//! Observer: `ż = N z + G u + L ỹ + M φ(x̂, u)`, `x̂ = z − E ỹ`, with
//! `ỹ = y − c0` the output with its affine offset removed. The error
//! dynamics see the unknown input only through `M·D`, which the design
//! makes zero.

use super::{ObserverError, ObserverState};
use crate::lmi::{LmiBuilder, LmiProblem, SolverOptions, DEFAULT_MARGIN};
use crate::numerics::{self, Matrix, Vector};
use crate::smib::{LinearOutput, SmibModel};

#[derive(Debug, Clone, PartialEq)]
pub struct UioGains {
    pub n_mat: Matrix,
    pub g_mat: Matrix,
    pub l_mat: Matrix,
    pub m_mat: Matrix,
    pub e_mat: Matrix,
    pub u_mat: Matrix,
    pub v_mat: Matrix,
    pub a_bar: Matrix,
    pub b_bar: Matrix,
    pub y_mat: Matrix,
    pub k_mat: Matrix,
    pub p_mat: Matrix,
    /// `Ȳ = P·Y` and `K̄ = P·K`, the LMI variables.
    pub y_bar: Matrix,
    pub k_bar: Matrix,
    pub gamma: f64,
}

/// Step 1: `U = −D(CD)†`, `V = I − (CD)(CD)†`, `Ā = (I + UC)A`, `B̄ = VCA`.
fn structure(a: &Matrix, c: &Matrix, d: Option<&Matrix>) -> Result<(Matrix, Matrix, Matrix, Matrix), ObserverError> {
    let (n, p) = (a.nrows(), c.nrows());
    let (u, v) = match d {
        Some(d) if d.ncols() > 0 => {
            let cd = c * d;
            let r = numerics::rank(&cd);
            if r < d.ncols() || numerics::rank(d) < d.ncols() {
                return Err(ObserverError::RankDeficient { rank: r, cols: d.ncols() });
            }
            let cd_pinv = numerics::pseudo_inverse(&cd);
            (-(d * &cd_pinv), Matrix::identity(p, p) - &cd * cd_pinv)
        }
        _ => (Matrix::zeros(n, p), Matrix::identity(p, p)),
    };
    let a_bar = (Matrix::identity(n, n) + &u * c) * a;
    let b_bar = &v * c * a;
    Ok((u, v, a_bar, b_bar))
}

/// The Schur-complement LMI in `P ≻ 0`, `Ȳ`, `K̄`:
///
/// ```text
/// [ Ψ11   Ψ12  (ȲB̄)ᵀ ]
/// [ Ψ12ᵀ  −I    0    ]  ≺ 0
/// [ ȲB̄    0    −I    ]
/// ```
///
/// with `Ψ11 = ĀᵀP + PĀ − CᵀK̄ᵀ − K̄C + γI` and `Ψ12 = √γ(P(I + UC) + ȲVC)`.
pub fn uio_problem(
    a_bar: &Matrix,
    b_bar: &Matrix,
    c: &Matrix,
    u: &Matrix,
    v: &Matrix,
    gamma: f64,
) -> Result<(LmiProblem, [crate::lmi::VarId; 3]), ObserverError> {
    let (n, p) = (a_bar.nrows(), c.nrows());
    let mut b = LmiBuilder::new();
    let pv = b.symmetric("P", n, true);
    let yv = b.full("Ybar", n, p);
    let kv = b.full("Kbar", n, p);
    let (a_bar, b_bar, c) = (a_bar.clone(), b_bar.clone(), c.clone());
    let iuc = Matrix::identity(n, n) + u * &c;
    let vc = v * &c;
    b.block("uio", 3 * n, move |s| {
        let pm = s.matrix(pv);
        let ym = s.matrix(yv);
        let km = s.matrix(kv);
        let psi11 = a_bar.transpose() * &pm + &pm * &a_bar - c.transpose() * km.transpose() - &km * &c
            + Matrix::identity(n, n) * gamma;
        let psi12 = (&pm * &iuc + &ym * &vc) * gamma.sqrt();
        let yb = &ym * &b_bar;
        let mut m = Matrix::zeros(3 * n, 3 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&psi11);
        m.view_mut((0, n), (n, n)).copy_from(&psi12);
        m.view_mut((n, 0), (n, n)).copy_from(&psi12.transpose());
        m.view_mut((0, 2 * n), (n, n)).copy_from(&yb.transpose());
        m.view_mut((2 * n, 0), (n, n)).copy_from(&yb);
        for i in n..3 * n {
            m[(i, i)] = -1.0;
        }
        m
    });
    Ok((b.build(DEFAULT_MARGIN)?, [pv, yv, kv]))
}

/// Synthesizes UIO gains. `d = None` (or a zero-column `D`) gives the
/// plain Luenberger-type design.
pub fn uio_synthesize(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: Option<&Matrix>,
    gamma: f64,
) -> Result<UioGains, ObserverError> {
    uio_synthesize_with(a, b, c, d, gamma, &SolverOptions::default())
}

pub fn uio_synthesize_with(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: Option<&Matrix>,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<UioGains, ObserverError> {
    let (u, v, a_bar, b_bar) = structure(a, c, d)?;
    let (problem, [pv, yv, kv]) = uio_problem(&a_bar, &b_bar, c, &u, &v, gamma)?;
    let sol = problem.solve_feasibility(opts)?;
    let p_mat = sol.assignment.matrix(pv);
    let y_bar = sol.assignment.matrix(yv);
    let k_bar = sol.assignment.matrix(kv);
    let p_inv = numerics::inverse(&p_mat)?;
    let y_mat = &p_inv * &y_bar;
    let k_mat = &p_inv * &k_bar;
    Ok(assemble(a, b, c, u, v, a_bar, b_bar, y_mat, k_mat, p_mat, y_bar, k_bar, gamma))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    u_mat: Matrix,
    v_mat: Matrix,
    a_bar: Matrix,
    b_bar: Matrix,
    y_mat: Matrix,
    k_mat: Matrix,
    p_mat: Matrix,
    y_bar: Matrix,
    k_bar: Matrix,
    gamma: f64,
) -> UioGains {
    let (n, p) = (a.nrows(), c.nrows());
    let e_mat = &u_mat + &y_mat * &v_mat;
    let m_mat = Matrix::identity(n, n) + &e_mat * c;
    let n_mat = &m_mat * a - &k_mat * c;
    let g_mat = &m_mat * b;
    let l_mat = &k_mat * (Matrix::identity(p, p) + c * &e_mat) - &m_mat * a * &e_mat;
    UioGains {
        n_mat,
        g_mat,
        l_mat,
        m_mat,
        e_mat,
        u_mat,
        v_mat,
        a_bar,
        b_bar,
        y_mat,
        k_mat,
        p_mat,
        y_bar,
        k_bar,
        gamma,
    }
}

impl UioGains {
    /// Max-abs residuals of `E = U + YV`, `M = I + EC`, `N = MA − KC`,
    /// `G = MB` and `L = K(I + CE) − MAE`.
    pub fn identity_residuals(&self, a: &Matrix, b: &Matrix, c: &Matrix) -> [f64; 5] {
        let (n, p) = (a.nrows(), c.nrows());
        let e = &self.u_mat + &self.y_mat * &self.v_mat;
        let m = Matrix::identity(n, n) + &self.e_mat * c;
        let nn = &self.m_mat * a - &self.k_mat * c;
        let g = &self.m_mat * b;
        let l = &self.k_mat * (Matrix::identity(p, p) + c * &self.e_mat) - &self.m_mat * a * &self.e_mat;
        [
            (e - &self.e_mat).amax(),
            (m - &self.m_mat).amax(),
            (nn - &self.n_mat).amax(),
            (g - &self.g_mat).amax(),
            (l - &self.l_mat).amax(),
        ]
    }

    /// `‖M·D‖∞`.
    pub fn decoupling_residual(&self, d: &Matrix) -> f64 {
        numerics::norm_inf(&(&self.m_mat * d))
    }

    /// `−λ_max` of the unreduced inequality
    /// `Ψ11 + Ψ12Ψ12ᵀ + (ȲB̄)ᵀ(ȲB̄) ≺ 0`, recomputed from the stored gains.
    pub fn original_margin(&self, c: &Matrix) -> f64 {
        let n = self.p_mat.nrows();
        let pm = &self.p_mat;
        let psi11 = self.a_bar.transpose() * pm + pm * &self.a_bar
            - c.transpose() * self.k_bar.transpose()
            - &self.k_bar * c
            + Matrix::identity(n, n) * self.gamma;
        let psi12 =
            (pm * (Matrix::identity(n, n) + &self.u_mat * c) + &self.y_bar * &self.v_mat * c) * self.gamma.sqrt();
        let yb = &self.y_bar * &self.b_bar;
        let full = psi11 + &psi12 * psi12.transpose() + yb.transpose() * yb;
        -numerics::max_eigenvalue_symmetric(&full).unwrap_or(f64::INFINITY)
    }

    /// Re-evaluates the Schur-form LMI at the stored variables through the
    /// independent certify path.
    pub fn lmi_margin(&self, c: &Matrix) -> Result<f64, ObserverError> {
        let (problem, [pv, yv, kv]) = uio_problem(&self.a_bar, &self.b_bar, c, &self.u_mat, &self.v_mat, self.gamma)?;
        let mut a = problem.zero_assignment();
        a.set_matrix(pv, &self.p_mat);
        a.set_matrix(yv, &self.y_bar);
        a.set_matrix(kv, &self.k_bar);
        Ok(problem.certify(&a))
    }

    /// Largest real part among the eigenvalues of `N`.
    pub fn n_abscissa(&self) -> f64 {
        numerics::spectral_abscissa(&self.n_mat).unwrap_or(f64::INFINITY)
    }
}

/// Starting state for a given estimate and first measurement.
pub fn uio_init(xhat0: &Vector, g: &UioGains, out: &LinearOutput, y0: &Vector) -> ObserverState {
    let y_tilde = y0 - &out.c0;
    ObserverState { z: Some(xhat0 + &g.e_mat * &y_tilde), xhat: xhat0.clone() }
}

/// One RK4 step with `u` and `y` held; returns the state at the next
/// sample, whose `x̂` uses `y_next`.
pub fn uio_step(
    s: &ObserverState,
    g: &UioGains,
    model: &SmibModel,
    out: &LinearOutput,
    y: &Vector,
    y_next: &Vector,
    dt: f64,
) -> Result<ObserverState, ObserverError> {
    let z = s.z.as_ref().ok_or(ObserverError::MissingIntermediate)?;
    let y_tilde = y - &out.c0;
    let forcing = &g.g_mat * &model.input.to_vector() + &g.l_mat * &y_tilde;
    let rhs = |_: f64, z: &Vector| {
        let xhat = z - &g.e_mat * &y_tilde;
        &g.n_mat * z + &forcing + &g.m_mat * model.phi_vec(&xhat)
    };
    let z_next = numerics::rk4_step(rhs, z, 0.0, dt).map_err(|_| ObserverError::NonFiniteState)?;
    let xhat = &z_next - &g.e_mat * (y_next - &out.c0);
    if !xhat.iter().all(|v| v.is_finite()) {
        return Err(ObserverError::NonFiniteState);
    }
    Ok(ObserverState { z: Some(z_next), xhat })
}
