//! Independent oracles shared by unit tests.

use crate::numerics::Matrix;
use crate::smib::MachineParams;

/// Forward-mode dual number with four tangent directions.
#[derive(Clone, Copy, Debug)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; 4],
}

impl Dual {
    pub fn cst(v: f64) -> Self {
        Self { v, d: [0.0; 4] }
    }
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; 4];
        d[i] = 1.0;
        Self { v, d }
    }
    pub fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, d: std::array::from_fn(|i| self.d[i] + o.d[i]) }
    }
    pub fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, d: std::array::from_fn(|i| self.d[i] - o.d[i]) }
    }
    pub fn mul(self, o: Self) -> Self {
        Self { v: self.v * o.v, d: std::array::from_fn(|i| self.d[i] * o.v + self.v * o.d[i]) }
    }
    pub fn scale(self, k: f64) -> Self {
        Self { v: self.v * k, d: self.d.map(|x| x * k) }
    }
    pub fn sin(self) -> Self {
        let c = self.v.cos();
        Self { v: self.v.sin(), d: self.d.map(|x| x * c) }
    }
    pub fn cos(self) -> Self {
        let s = -self.v.sin();
        Self { v: self.v.cos(), d: self.d.map(|x| x * s) }
    }
}

struct Chain {
    iq: Dual,
    id: Dual,
    eq: Dual,
    ed: Dual,
    ir: Dual,
    ii: Dual,
    s: Dual,
    c: Dual,
    x3: Dual,
    x4: Dual,
}

fn chain(x: [f64; 4], p: &MachineParams) -> Chain {
    let [d1, _, x3, x4] = [0, 1, 2, 3].map(|i| Dual::var(x[i], i));
    let (s, c) = (d1.sin(), d1.cos());
    let pr = x4.mul(s).add(x3.mul(c));
    let pi = x3.mul(s).sub(x4.mul(c));
    let g = Dual::cst(p.line_admittance_re);
    let b = Dual::cst(p.line_admittance_im);
    let dr = pr.sub(Dual::cst(p.eq_inf));
    let ir = g.mul(dr).sub(b.mul(pi));
    let ii = b.mul(dr).add(g.mul(pi));
    let k = p.s_b / p.s_n;
    let iq = ii.mul(s).add(ir.mul(c)).scale(k);
    let id = ir.mul(s).sub(ii.mul(c)).scale(k);
    let eq = x3.sub(id.scale(p.xd_prime));
    let ed = x4.add(iq.scale(p.xq_prime));
    Chain { iq, id, eq, ed, ir, ii, s, c, x3, x4 }
}

/// Outputs `(e_R, e_I, i_R, i_I)` with exact derivatives.
pub fn dual_outputs(x: [f64; 4], p: &MachineParams) -> [Dual; 4] {
    let ch = chain(x, p);
    let er = ch.x4.mul(ch.s).add(ch.eq.mul(ch.c));
    let ei = ch.x3.mul(ch.s).sub(ch.ed.mul(ch.c));
    [er, ei, ch.ir, ch.ii]
}

/// Exact Jacobian of `φ` at `x`.
pub fn phi_jacobian(x: [f64; 4], p: &MachineParams) -> Matrix {
    let ch = chain(x, p);
    let k = p.s_b / p.s_n;
    let te = ch.eq.mul(ch.iq).add(ch.ed.mul(ch.id)).scale(k);
    let rows = [
        Dual::cst(-p.omega0),
        te.scale(-p.omega0 / (2.0 * p.h)),
        ch.id.scale(-(p.xd - p.xd_prime) / p.td0_prime),
        ch.iq.scale((p.xq - p.xq_prime) / p.tq0_prime),
    ];
    Matrix::from_fn(4, 4, |i, j| rows[i].d[j])
}
