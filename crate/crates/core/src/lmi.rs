//! Small LMI feasibility problems.
//!
//! A problem is a set of decision variables and symmetric blocks, each an
//! affine function of the variables, all required to satisfy
//! `block ⪯ −margin·I`. Blocks are written as ordinary closures over an
//! [`Assignment`]; [`LmiBuilder::build`] extracts the affine coefficients by
//! evaluating them at zero and at every unit vector.
//!
//! The solver is projected subgradient descent on `max_j λ_max(F_j(θ))` with
//! a Polyak step towards `−2·margin`. Sign-constrained scalars are clamped
//! and positive definite matrix variables are projected back onto the cone
//! after each step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

use crate::numerics::{self, Matrix, NumericsError};

pub const DEFAULT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmiError {
    #[error("block `{block}` is not affine in the decision variables (deviation {deviation:e})")]
    NotAffine { block: String, deviation: f64 },
    #[error("block `{block}` should be {expected}x{expected}, got {rows}x{cols}")]
    BlockShape { block: String, expected: usize, rows: usize, cols: usize },
    #[error("no strictly feasible point found (best margin {best_margin:e})")]
    Infeasible { best_margin: f64 },
    #[error("margin must be positive and finite")]
    BadMargin,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Free,
    Positive,
}

#[derive(Debug, Clone, PartialEq)]
enum VarKind {
    Scalar(Sign),
    Symmetric { dim: usize, pd: bool },
    Full { rows: usize, cols: usize },
}

impl VarKind {
    fn len(&self) -> usize {
        match *self {
            VarKind::Scalar(_) => 1,
            VarKind::Symmetric { dim, .. } => dim * (dim + 1) / 2,
            VarKind::Full { rows, cols } => rows * cols,
        }
    }
}

#[derive(Debug, Clone)]
struct VarDecl {
    name: String,
    kind: VarKind,
    offset: usize,
}

#[derive(Debug)]
struct Layout {
    vars: Vec<VarDecl>,
    len: usize,
}

/// Values for every decision variable of a problem.
#[derive(Clone)]
pub struct Assignment {
    layout: Arc<Layout>,
    theta: Vec<f64>,
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (i, v) in self.layout.vars.iter().enumerate() {
            match v.kind {
                VarKind::Scalar(_) => m.entry(&v.name, &self.scalar(VarId(i))),
                _ => m.entry(&v.name, &self.matrix(VarId(i)).as_slice().to_vec()),
            };
        }
        m.finish()
    }
}

impl PartialEq for Assignment {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) && self.theta == other.theta
    }
}

impl Assignment {
    fn zeros(layout: Arc<Layout>) -> Self {
        let theta = vec![0.0; layout.len];
        Self { layout, theta }
    }

    fn decl(&self, id: VarId) -> &VarDecl {
        &self.layout.vars[id.0]
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn scalar(&self, id: VarId) -> f64 {
        let d = self.decl(id);
        assert!(matches!(d.kind, VarKind::Scalar(_)), "`{}` is not a scalar", d.name);
        self.theta[d.offset]
    }

    /// Matrix value of a symmetric or full variable.
    pub fn matrix(&self, id: VarId) -> Matrix {
        let d = self.decl(id);
        let t = &self.theta[d.offset..d.offset + d.kind.len()];
        match d.kind {
            VarKind::Scalar(_) => Matrix::from_element(1, 1, t[0]),
            VarKind::Symmetric { dim, .. } => {
                let mut m = Matrix::zeros(dim, dim);
                let mut k = 0;
                for i in 0..dim {
                    for j in i..dim {
                        m[(i, j)] = t[k];
                        m[(j, i)] = t[k];
                        k += 1;
                    }
                }
                m
            }
            VarKind::Full { rows, cols } => Matrix::from_row_slice(rows, cols, t),
        }
    }

    pub fn set_scalar(&mut self, id: VarId, v: f64) {
        let off = self.decl(id).offset;
        self.theta[off] = v;
    }

    /// Sets a matrix variable. Symmetric variables read the upper triangle.
    pub fn set_matrix(&mut self, id: VarId, m: &Matrix) {
        let d = self.decl(id).clone();
        let t = &mut self.theta[d.offset..d.offset + d.kind.len()];
        match d.kind {
            VarKind::Scalar(_) => t[0] = m[(0, 0)],
            VarKind::Symmetric { dim, .. } => {
                assert_eq!(m.shape(), (dim, dim));
                let mut k = 0;
                for i in 0..dim {
                    for j in i..dim {
                        t[k] = 0.5 * (m[(i, j)] + m[(j, i)]);
                        k += 1;
                    }
                }
            }
            VarKind::Full { rows, cols } => {
                assert_eq!(m.shape(), (rows, cols));
                for i in 0..rows {
                    for j in 0..cols {
                        t[i * cols + j] = m[(i, j)];
                    }
                }
            }
        }
    }
}

type BlockFn = Arc<dyn Fn(&Assignment) -> Matrix + Send + Sync>;

struct BlockDef {
    name: String,
    dim: usize,
    f: BlockFn,
}

#[derive(Default)]
pub struct LmiBuilder {
    vars: Vec<VarDecl>,
    len: usize,
    blocks: Vec<BlockDef>,
}

impl LmiBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, kind: VarKind) -> VarId {
        let len = kind.len();
        self.vars.push(VarDecl { name: name.to_string(), kind, offset: self.len });
        self.len += len;
        VarId(self.vars.len() - 1)
    }

    pub fn scalar(&mut self, name: &str, sign: Sign) -> VarId {
        self.push(name, VarKind::Scalar(sign))
    }

    /// Symmetric matrix variable, optionally constrained positive definite.
    pub fn symmetric(&mut self, name: &str, dim: usize, positive_definite: bool) -> VarId {
        self.push(name, VarKind::Symmetric { dim, pd: positive_definite })
    }

    pub fn full(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        self.push(name, VarKind::Full { rows, cols })
    }

    /// Adds the constraint `f(assignment) ⪯ −margin·I`. `f` must be affine.
    pub fn block<F>(&mut self, name: &str, dim: usize, f: F)
    where
        F: Fn(&Assignment) -> Matrix + Send + Sync + 'static,
    {
        self.blocks.push(BlockDef { name: name.to_string(), dim, f: Arc::new(f) });
    }

    pub fn build(self, margin: f64) -> Result<LmiProblem, LmiError> {
        if !(margin.is_finite() && margin > 0.0) {
            return Err(LmiError::BadMargin);
        }
        let layout = Arc::new(Layout { vars: self.vars, len: self.len });
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut probe_rng = ChaCha8Rng::seed_from_u64(0x1f2e3d);
        for def in self.blocks {
            let compiled = compile(&layout, &def)?;
            // affinity audit at a random point
            let mut probe = Assignment::zeros(layout.clone());
            for t in probe.theta.iter_mut() {
                *t = probe_rng.random_range(-1.0..1.0);
            }
            let direct = numerics::symmetrize(&(def.f)(&probe));
            let affine = compiled.eval(&probe.theta);
            let deviation = (&direct - &affine).amax();
            let scale = 1.0 + direct.amax().max(affine.amax());
            if !(deviation <= 1e-9 * scale) {
                return Err(LmiError::NotAffine { block: def.name, deviation });
            }
            blocks.push((def, compiled));
        }
        Ok(LmiProblem { layout, blocks, margin })
    }
}

/// `F(θ) = F0 + Σ θ_i F_i` with zero coefficients skipped.
struct CompiledBlock {
    constant: Matrix,
    coeffs: Vec<(usize, Matrix)>,
}

impl CompiledBlock {
    fn eval(&self, theta: &[f64]) -> Matrix {
        let mut m = self.constant.clone();
        for (i, c) in &self.coeffs {
            if theta[*i] != 0.0 {
                m += c * theta[*i];
            }
        }
        m
    }
}

fn compile(layout: &Arc<Layout>, def: &BlockDef) -> Result<CompiledBlock, LmiError> {
    let mut a = Assignment::zeros(layout.clone());
    let eval = |a: &Assignment| -> Result<Matrix, LmiError> {
        let m = (def.f)(a);
        if m.shape() != (def.dim, def.dim) {
            return Err(LmiError::BlockShape {
                block: def.name.clone(),
                expected: def.dim,
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if !numerics::is_finite(&m) {
            return Err(LmiError::Numerics(NumericsError::NonFiniteEntry));
        }
        Ok(numerics::symmetrize(&m))
    };
    let constant = eval(&a)?;
    let mut coeffs = Vec::new();
    for i in 0..layout.len {
        a.theta[i] = 1.0;
        let c = eval(&a)? - &constant;
        a.theta[i] = 0.0;
        if c.iter().any(|v| *v != 0.0) {
            coeffs.push((i, c));
        }
    }
    Ok(CompiledBlock { constant, coeffs })
}

pub struct LmiProblem {
    layout: Arc<Layout>,
    blocks: Vec<(BlockDef, CompiledBlock)>,
    margin: f64,
}

impl fmt::Debug for LmiProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LmiProblem")
            .field("variables", &self.layout.vars.iter().map(|v| &v.name).collect::<Vec<_>>())
            .field("blocks", &self.blocks.iter().map(|(b, _)| &b.name).collect::<Vec<_>>())
            .field("margin", &self.margin)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Random restarts after the identity start fails.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iter: 50_000, restarts: 5, seed: 17 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiSolution {
    pub assignment: Assignment,
    /// `−max_j λ_max` over all blocks, including sign and definiteness
    /// constraints.
    pub certified_margin: f64,
    pub iterations: usize,
    /// 0 for the identity start, `k` for the k-th random restart.
    pub restart: usize,
}

impl LmiProblem {
    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn variable_count(&self) -> usize {
        self.layout.len
    }

    /// All-zero assignment for this problem.
    pub fn zero_assignment(&self) -> Assignment {
        Assignment::zeros(self.layout.clone())
    }

    /// Matrix variables at identity (rectangular ones padded), scalars at 1.
    pub fn identity_assignment(&self) -> Assignment {
        let mut a = self.zero_assignment();
        for (i, v) in self.layout.vars.iter().enumerate() {
            let id = VarId(i);
            match v.kind {
                VarKind::Scalar(_) => a.set_scalar(id, 1.0),
                VarKind::Symmetric { dim, .. } => a.set_matrix(id, &Matrix::identity(dim, dim)),
                VarKind::Full { rows, cols } => a.set_matrix(id, &Matrix::identity(rows, cols)),
            }
        }
        a
    }

    fn random_assignment(&self, rng: &mut ChaCha8Rng) -> Assignment {
        let mut a = self.zero_assignment();
        for (i, v) in self.layout.vars.iter().enumerate() {
            let id = VarId(i);
            match v.kind {
                VarKind::Scalar(Sign::Positive) => a.set_scalar(id, rng.random_range(0.1..2.0)),
                VarKind::Scalar(Sign::Free) => a.set_scalar(id, rng.random_range(-1.0..1.0)),
                VarKind::Symmetric { dim, .. } => {
                    let g = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
                    a.set_matrix(id, &(&g * g.transpose() / dim as f64 + Matrix::identity(dim, dim) * 0.1));
                }
                VarKind::Full { rows, cols } => {
                    a.set_matrix(id, &Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)))
                }
            }
        }
        a
    }

    /// Independent audit: `−max λ_max` over the user blocks evaluated
    /// through their closures, and over the implicit sign and definiteness
    /// constraints. Positive means strictly feasible.
    pub fn certify(&self, a: &Assignment) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (def, _) in &self.blocks {
            let m = (def.f)(a);
            worst = worst.max(numerics::max_eigenvalue_symmetric(&m).unwrap_or(f64::INFINITY));
        }
        for (i, v) in self.layout.vars.iter().enumerate() {
            match v.kind {
                VarKind::Scalar(Sign::Positive) => worst = worst.max(-a.scalar(VarId(i))),
                VarKind::Symmetric { pd: true, .. } => {
                    let lo = numerics::min_eigenvalue_symmetric(&a.matrix(VarId(i))).unwrap_or(f64::NEG_INFINITY);
                    worst = worst.max(-lo);
                }
                _ => {}
            }
        }
        -worst
    }

    /// Value of a named block at `a`, for reporting.
    pub fn block_value(&self, name: &str, a: &Assignment) -> Option<Matrix> {
        self.blocks.iter().find(|(d, _)| d.name == name).map(|(d, _)| (d.f)(a))
    }

    /// Clamp positive scalars and project PD variables to eigenvalues
    /// `≥ floor`.
    fn project(&self, a: &mut Assignment, floor: f64) {
        for (i, v) in self.layout.vars.iter().enumerate() {
            let id = VarId(i);
            match v.kind {
                VarKind::Scalar(Sign::Positive) => {
                    let s = a.scalar(id);
                    if !(s >= floor) {
                        a.set_scalar(id, floor);
                    }
                }
                VarKind::Symmetric { pd: true, .. } => {
                    let p = a.matrix(id);
                    if let Ok((vals, vecs)) = numerics::symmetric_eigen(&p) {
                        if vals[0] < floor {
                            let clamped = vals.map(|l| l.max(floor));
                            let q = &vecs * Matrix::from_diagonal(&clamped) * vecs.transpose();
                            a.set_matrix(id, &q);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn descend(&self, start: Assignment, max_iter: usize) -> (Assignment, f64, usize) {
        let target = -2.0 * self.margin;
        let floor = 2.0 * self.margin;
        let mut a = start;
        self.project(&mut a, floor);
        let mut best = (a.clone(), f64::NEG_INFINITY);
        for it in 0..max_iter {
            // top eigenpair over all blocks
            let mut top = f64::NEG_INFINITY;
            let mut grad = vec![0.0; self.layout.len];
            for (_, cb) in &self.blocks {
                let m = cb.eval(&a.theta);
                let Ok((vals, vecs)) = numerics::symmetric_eigen(&m) else {
                    return (best.0, best.1, it);
                };
                let lam = vals[vals.len() - 1];
                if lam > top {
                    top = lam;
                    let v = vecs.column(vecs.ncols() - 1);
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for (i, c) in &cb.coeffs {
                        grad[*i] = (v.transpose() * c * v)[(0, 0)];
                    }
                }
            }
            let margin_now = self.certify(&a);
            if margin_now > best.1 {
                best = (a.clone(), margin_now);
            }
            if margin_now >= self.margin {
                return (a, margin_now, it);
            }
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            if !(g2 > 0.0) || !top.is_finite() {
                break;
            }
            let step = (top - target) / g2;
            let before = a.theta.clone();
            for (t, g) in a.theta.iter_mut().zip(&grad) {
                *t -= step * g;
            }
            self.project(&mut a, floor);
            let moved: f64 = a.theta.iter().zip(&before).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let size = 1.0 + before.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if moved <= 1e-14 * size {
                // projection undid the step: no progress possible from here
                break;
            }
        }
        let iterations = max_iter;
        (best.0, best.1, iterations)
    }

    /// Searches for a strictly feasible point, starting from the identity
    /// assignment and then from seeded random PD starts.
    pub fn solve_feasibility(&self, opts: &SolverOptions) -> Result<LmiSolution, LmiError> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut best_margin = f64::NEG_INFINITY;
        let mut total = 0;
        for restart in 0..=opts.restarts {
            let start = if restart == 0 { self.identity_assignment() } else { self.random_assignment(&mut rng) };
            let (a, m, it) = self.descend(start, opts.max_iter);
            total += it;
            if m >= self.margin {
                return Ok(LmiSolution { assignment: a, certified_margin: m, iterations: total, restart });
            }
            best_margin = best_margin.max(m);
        }
        Err(LmiError::Infeasible { best_margin })
    }
}

/// Free-function form of [`LmiProblem::certify`].
pub fn certify(a: &Assignment, p: &LmiProblem) -> f64 {
    p.certify(a)
}

/// Free-function form of [`LmiProblem::solve_feasibility`].
pub fn solve_feasibility(p: &LmiProblem, opts: &SolverOptions) -> Result<LmiSolution, LmiError> {
    p.solve_feasibility(opts)
}
