//! Single-machine infinite-bus model.
//!
//! The generator is a fourth-order two-axis model with state
//! `(δ, ω, e'_q, e'_d)`. Network quantities are handled as real pairs; the
//! infinite-bus voltage sits on the real axis of the network frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::numerics::{self, Matrix, Vector};

/// Rated speed for a 60 Hz system.
pub const OMEGA0_60HZ: f64 = 120.0 * PI;

/// Finite-difference step for the output Jacobian.
pub const OUTPUT_JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmibError {
    #[error("non-finite value in the machine model")]
    NonFiniteState,
    #[error("invalid machine parameter `{0}`")]
    InvalidParams(&'static str),
    #[error("equilibrium search did not converge (residual {0:e})")]
    NoEquilibrium(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineState {
    /// rad
    pub delta: f64,
    /// rad/s
    pub omega: f64,
    /// p.u.
    pub eq_prime: f64,
    /// p.u.
    pub ed_prime: f64,
}

impl MachineState {
    pub const fn new(delta: f64, omega: f64, eq_prime: f64, ed_prime: f64) -> Self {
        Self { delta, omega, eq_prime, ed_prime }
    }

    pub fn to_vector(&self) -> Vector {
        Vector::from_column_slice(&self.to_array())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.delta, self.omega, self.eq_prime, self.ed_prime]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        assert_eq!(x.len(), 4, "machine state has four entries");
        Self::new(x[0], x[1], x[2], x[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineInput {
    /// Mechanical torque, p.u.
    pub tm: f64,
    /// Internal field voltage, p.u.
    pub efd: f64,
}

impl MachineInput {
    pub fn to_vector(&self) -> Vector {
        Vector::from_column_slice(&[self.tm, self.efd])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    pub omega0: f64,
    pub h: f64,
    pub kd: f64,
    pub td0_prime: f64,
    pub tq0_prime: f64,
    pub xd: f64,
    pub xq: f64,
    pub xd_prime: f64,
    pub xq_prime: f64,
    pub line_admittance_re: f64,
    pub line_admittance_im: f64,
    pub eq_inf: f64,
    pub s_b: f64,
    pub s_n: f64,
}

impl MachineParams {
    /// The repository's reference machine.
    ///
    /// Reactances and open-circuit time constants are the classic 2220 MVA
    /// single-machine example (Kundur, Example 3.1 / 13.2). H, K_D and x_q are
    /// our own choices: heavy damping keeps the Lipschitz-observer LMI
    /// feasible, and x_q = 1.30 keeps the post-contingency state close to an
    /// operating point of the d-axis dynamics. See README for the table.
    pub fn reference() -> Self {
        Self {
            omega0: OMEGA0_60HZ,
            h: 9.0,
            kd: 22.5,
            td0_prime: 8.0,
            tq0_prime: 1.0,
            xd: 1.81,
            xq: 1.30,
            xd_prime: 0.30,
            xq_prime: 0.65,
            line_admittance_re: 0.0,
            line_admittance_im: -1.0 / 0.95,
            eq_inf: 0.90081,
            s_b: 2220.0,
            s_n: 2220.0,
        }
    }

    pub fn validate(&self) -> Result<(), SmibError> {
        let all = [
            self.omega0,
            self.h,
            self.kd,
            self.td0_prime,
            self.tq0_prime,
            self.xd,
            self.xq,
            self.xd_prime,
            self.xq_prime,
            self.line_admittance_re,
            self.line_admittance_im,
            self.eq_inf,
            self.s_b,
            self.s_n,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(SmibError::InvalidParams("non-finite entry"));
        }
        let checks: [(bool, &'static str); 9] = [
            (self.omega0 > 0.0, "omega0"),
            (self.h > 0.0, "h"),
            (self.td0_prime > 0.0, "td0_prime"),
            (self.tq0_prime > 0.0, "tq0_prime"),
            (self.s_n > 0.0, "s_n"),
            (self.s_b > 0.0, "s_b"),
            (self.xd_prime > 0.0 && self.xd >= self.xd_prime, "xd"),
            (self.xq_prime > 0.0 && self.xq >= self.xq_prime, "xq"),
            (self.kd >= 0.0, "kd"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, name)) => Err(SmibError::InvalidParams(name)),
            None => Ok(()),
        }
    }

    fn base_ratio(&self) -> f64 {
        self.s_b / self.s_n
    }
}

/// Intermediate algebraic quantities of the network/stator chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraicBlock {
    pub psi_r: f64,
    pub psi_i: f64,
    pub i_r: f64,
    pub i_i: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub e_d: f64,
    pub e_q: f64,
    pub t_e: f64,
    pub e_r_out: f64,
    pub e_i_out: f64,
}

impl AlgebraicBlock {
    /// Measured outputs `(e_R, e_I, i_R, i_I)`.
    pub fn outputs(&self) -> [f64; 4] {
        [self.e_r_out, self.e_i_out, self.i_r, self.i_i]
    }

    fn is_finite(&self) -> bool {
        [
            self.psi_r, self.psi_i, self.i_r, self.i_i, self.i_d, self.i_q, self.e_d, self.e_q,
            self.t_e, self.e_r_out, self.e_i_out,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

fn chain(x: &[f64], p: &MachineParams) -> AlgebraicBlock {
    let (s, c) = x[0].sin_cos();
    let (x3, x4) = (x[2], x[3]);
    let psi_r = x4 * s + x3 * c;
    let psi_i = x3 * s - x4 * c;
    // I_t = ȳ (Ψ − e'_qI), complex product on real pairs
    let (g, b) = (p.line_admittance_re, p.line_admittance_im);
    let dr = psi_r - p.eq_inf;
    let i_r = g * dr - b * psi_i;
    let i_i = b * dr + g * psi_i;
    let k = p.base_ratio();
    let i_q = k * (i_i * s + i_r * c);
    let i_d = k * (i_r * s - i_i * c);
    let e_q = x3 - p.xd_prime * i_d;
    let e_d = x4 + p.xq_prime * i_q;
    let t_e = k * (e_q * i_q + e_d * i_d);
    let e_r_out = x4 * s + e_q * c;
    let e_i_out = x3 * s - e_d * c;
    AlgebraicBlock { psi_r, psi_i, i_r, i_i, i_d, i_q, e_d, e_q, t_e, e_r_out, e_i_out }
}

fn drift_raw(x: &[f64], u: &MachineInput, p: &MachineParams) -> [f64; 4] {
    let a = chain(x, p);
    [
        x[1] - p.omega0,
        p.omega0 / (2.0 * p.h) * (u.tm - a.t_e - p.kd / p.omega0 * (x[1] - p.omega0)),
        (u.efd - x[2] - (p.xd - p.xd_prime) * a.i_d) / p.td0_prime,
        (-x[3] + (p.xq - p.xq_prime) * a.i_q) / p.tq0_prime,
    ]
}

fn phi_raw(x: &[f64], p: &MachineParams) -> [f64; 4] {
    let a = chain(x, p);
    [
        -p.omega0,
        p.omega0 / (2.0 * p.h) * (-a.t_e + p.kd),
        -(p.xd - p.xd_prime) / p.td0_prime * a.i_d,
        (p.xq - p.xq_prime) / p.tq0_prime * a.i_q,
    ]
}

fn finite_or_err(v: [f64; 4]) -> Result<Vector, SmibError> {
    if v.iter().all(|e| e.is_finite()) {
        Ok(Vector::from_column_slice(&v))
    } else {
        Err(SmibError::NonFiniteState)
    }
}

pub fn algebraic_outputs(x: &MachineState, p: &MachineParams) -> Result<AlgebraicBlock, SmibError> {
    if !x.is_finite() {
        return Err(SmibError::NonFiniteState);
    }
    let a = chain(&x.to_array(), p);
    if a.is_finite() {
        Ok(a)
    } else {
        Err(SmibError::NonFiniteState)
    }
}

/// State derivative of the two-axis model.
pub fn drift(x: &MachineState, u: &MachineInput, p: &MachineParams) -> Result<Vector, SmibError> {
    finite_or_err(drift_raw(&x.to_array(), u, p))
}

/// Linear part `(A, B)` of `ẋ = A x + B u + φ(x, u)`.
pub fn decomposition(p: &MachineParams) -> (Matrix, Matrix) {
    let mut a = Matrix::zeros(4, 4);
    a[(0, 1)] = 1.0;
    a[(1, 1)] = -p.kd / (2.0 * p.h);
    a[(2, 2)] = -1.0 / p.td0_prime;
    a[(3, 3)] = -1.0 / p.tq0_prime;
    let mut b = Matrix::zeros(4, 2);
    b[(1, 0)] = p.omega0 / (2.0 * p.h);
    b[(2, 1)] = 1.0 / p.td0_prime;
    (a, b)
}

/// Nonlinear remainder of the decomposition. Independent of `u` for this
/// model; the argument is kept so callers can treat it as `φ(x, u)`.
pub fn phi(x: &MachineState, _u: &MachineInput, p: &MachineParams) -> Result<Vector, SmibError> {
    finite_or_err(phi_raw(&x.to_array(), p))
}

/// Nonlinear output map `(e_R, e_I, i_R, i_I)`.
pub fn output(x: &MachineState, p: &MachineParams) -> Result<Vector, SmibError> {
    finite_or_err(algebraic_outputs(x, p)?.outputs())
}

/// Affine measurement model `y = C x + c0` frozen at an operating state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOutput {
    pub c: Matrix,
    pub c0: Vector,
}

impl LinearOutput {
    pub fn apply(&self, x: &Vector) -> Vector {
        &self.c * x + &self.c0
    }
}

/// Central-difference Jacobian of the output map at `x_op`, plus the offset
/// that makes the affine model exact at `x_op`.
pub fn output_matrix(p: &MachineParams, x_op: &MachineState) -> LinearOutput {
    let h = |x: &Vector| Vector::from_column_slice(&chain(x.as_slice(), p).outputs());
    let xv = x_op.to_vector();
    let c = numerics::jacobian(h, &xv, OUTPUT_JACOBIAN_STEP);
    let c0 = h(&xv) - &c * &xv;
    LinearOutput { c, c0 }
}

/// Input that balances torque and field at `x`: `T_m = T_e(x)` and
/// `E_fd = e'_q + (x_d − x'_d) i_d`. The post-contingency input of the
/// reference scenario is this at `x(0)`.
pub fn balancing_input(x: &MachineState, p: &MachineParams) -> Result<MachineInput, SmibError> {
    let a = algebraic_outputs(x, p)?;
    Ok(MachineInput { tm: a.t_e, efd: x.eq_prime + (p.xd - p.xd_prime) * a.i_d })
}

/// Everything a step function needs about the machine, bundled once.
#[derive(Debug, Clone)]
pub struct SmibModel {
    pub params: MachineParams,
    pub input: MachineInput,
    pub a: Matrix,
    pub b: Matrix,
    bu: Vector,
}

impl SmibModel {
    pub fn new(params: MachineParams, input: MachineInput) -> Self {
        let (a, b) = decomposition(&params);
        let bu = &b * input.to_vector();
        Self { params, input, a, b, bu }
    }

    /// `f(x, u)` on a raw vector. NaN propagates; callers detect it.
    pub fn drift_vec(&self, x: &Vector) -> Vector {
        Vector::from_column_slice(&drift_raw(x.as_slice(), &self.input, &self.params))
    }

    pub fn phi_vec(&self, x: &Vector) -> Vector {
        Vector::from_column_slice(&phi_raw(x.as_slice(), &self.params))
    }

    /// `B u` for the held input.
    pub fn bu(&self) -> &Vector {
        &self.bu
    }

    pub fn output_vec(&self, x: &Vector) -> Vector {
        Vector::from_column_slice(&chain(x.as_slice(), &self.params).outputs())
    }
}

/// Damped Newton iteration on `drift = 0` with a finite-difference Jacobian.
pub fn equilibrium(
    p: &MachineParams,
    u: &MachineInput,
    guess: &MachineState,
) -> Result<MachineState, SmibError> {
    let model = SmibModel::new(*p, *u);
    let mut x = guess.to_vector();
    let mut r = model.drift_vec(&x);
    for _ in 0..200 {
        let res = r.norm();
        if res <= 1e-12 {
            break;
        }
        let j = numerics::jacobian(|z| model.drift_vec(z), &x, 1e-7);
        let step = j.lu().solve(&(-&r)).ok_or(SmibError::NoEquilibrium(res))?;
        let mut alpha = 1.0;
        loop {
            let trial = &x + &step * alpha;
            let rt = model.drift_vec(&trial);
            if rt.norm() < res || alpha < 1e-6 {
                x = trial;
                r = rt;
                break;
            }
            alpha *= 0.5;
        }
    }
    let res = r.norm();
    if res.is_finite() && res <= 1e-9 {
        Ok(MachineState::from_slice(x.as_slice()))
    } else {
        Err(SmibError::NoEquilibrium(res))
    }
}

/// Axis-aligned box `centre ± half_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingBox {
    pub centre: MachineState,
    pub half_width: [f64; 4],
}

impl OperatingBox {
    /// Box used for the Lipschitz probe: ±0.5 rad, ±2 rad/s, ±0.2 p.u. on
    /// both transient voltages around `centre`.
    pub fn around(centre: MachineState) -> Self {
        Self { centre, half_width: [0.5, 2.0, 0.2, 0.2] }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector {
        let c = self.centre.to_array();
        Vector::from_iterator(4, (0..4).map(|i| c[i] + self.half_width[i] * rng.random_range(-1.0..=1.0)))
    }
}

/// Monte-Carlo estimate of the Lipschitz constant of `φ` over `region`:
/// max of `‖φ(x) − φ(z)‖ / ‖x − z‖` over random pairs.
pub fn lipschitz_probe(p: &MachineParams, region: &OperatingBox, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for _ in 0..pairs {
        let x = region.sample(&mut rng);
        let z = region.sample(&mut rng);
        let dx = (&x - &z).norm();
        if dx == 0.0 {
            continue;
        }
        let a = phi_raw(x.as_slice(), p);
        let b = phi_raw(z.as_slice(), p);
        let df = (0..4).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
        best = best.max(df / dx);
    }
    best
}
