//! Small dense linear-algebra helpers and fixed-step integration.
//!
//! Everything here is a pure function of its inputs. Matrices are plain
//! `nalgebra` dynamic matrices; the helpers add the finiteness and
//! positive-definiteness checks the estimators rely on.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Iteration cap handed to the symmetric eigen-solver.
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("integration produced a non-finite state")]
    NonFiniteState,
    #[error("matrix contains non-finite entries")]
    NonFiniteEntry,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular")]
    Singular,
}

/// Which square root to use when a covariance fails to factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SqrtPolicy {
    /// Lower Cholesky factor or an error.
    #[default]
    Strict,
    /// Fall back to an eigen-decomposition square root with negative
    /// eigenvalues clamped at zero.
    EigenFallback,
}

/// Builds a matrix from row-major entries, rejecting empty shapes and
/// non-finite values.
pub fn matrix(rows: usize, cols: usize, row_major: &[f64]) -> Result<Matrix, NumericsError> {
    if rows == 0 || cols == 0 {
        return Err(NumericsError::DimensionMismatch(format!(
            "matrix must be at least 1x1, got {rows}x{cols}"
        )));
    }
    if row_major.len() != rows * cols {
        return Err(NumericsError::DimensionMismatch(format!(
            "{rows}x{cols} matrix needs {} entries, got {}",
            rows * cols,
            row_major.len()
        )));
    }
    if row_major.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFiniteEntry);
    }
    Ok(Matrix::from_row_slice(rows, cols, row_major))
}

/// Builds a vector, rejecting empty or non-finite input.
pub fn vector(entries: &[f64]) -> Result<Vector, NumericsError> {
    if entries.is_empty() {
        return Err(NumericsError::DimensionMismatch("vector must have dim >= 1".into()));
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFiniteEntry);
    }
    Ok(Vector::from_column_slice(entries))
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

fn require_square(m: &Matrix, what: &str) -> Result<(), NumericsError> {
    if m.nrows() != m.ncols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "{what} needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `S` with `S·Sᵀ = m`.
///
/// The input is symmetrized first. Any pivot that is not strictly positive
/// is reported as [`NumericsError::NotPositiveDefinite`].
pub fn cholesky_lower(m: &Matrix) -> Result<Matrix, NumericsError> {
    require_square(m, "cholesky")?;
    if !is_finite(m) {
        return Err(NumericsError::NonFiniteEntry);
    }
    let a = symmetrize(m);
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(NumericsError::NotPositiveDefinite { index: j, pivot: diag });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Square root `S` with `S·Sᵀ = m` from the symmetric eigen-decomposition,
/// clamping negative eigenvalues at zero. Works for singular PSD input.
pub fn psd_sqrt(m: &Matrix) -> Result<Matrix, NumericsError> {
    let (values, vectors) = symmetric_eigen(m)?;
    let mut s = vectors;
    for (j, lambda) in values.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        s.column_mut(j).scale_mut(root);
    }
    Ok(s)
}

/// Covariance square root under the given policy.
pub fn covariance_sqrt(m: &Matrix, policy: SqrtPolicy) -> Result<Matrix, NumericsError> {
    match cholesky_lower(m) {
        Ok(s) => Ok(s),
        Err(NumericsError::NotPositiveDefinite { .. }) if policy == SqrtPolicy::EigenFallback => {
            psd_sqrt(m)
        }
        Err(e) => Err(e),
    }
}

/// Moore–Penrose pseudoinverse via the SVD. Singular values below
/// `1e-10 × σ_max` are treated as zero.
pub fn pseudo_inverse(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if sigma_max == 0.0 {
        return Matrix::zeros(cols, rows);
    }
    let tol = 1e-10 * sigma_max;
    let u = svd.u.expect("svd requested with u");
    let v_t = svd.v_t.expect("svd requested with v_t");
    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            out += (v_t.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    out
}

/// Numerical rank with the same relative cutoff as [`pseudo_inverse`].
pub fn rank(m: &Matrix) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * sigma_max).count()
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of the symmetric
/// part of `m`.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vector, Matrix), NumericsError> {
    require_square(m, "symmetric eigen-solve")?;
    if !is_finite(m) {
        return Err(NumericsError::NonFiniteEntry);
    }
    let eig = symmetrize(m)
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(NumericsError::NoConvergence)?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_eigenvalue_symmetric(m: &Matrix) -> Result<f64, NumericsError> {
    let (values, _) = symmetric_eigen(m)?;
    Ok(values[values.len() - 1])
}

pub fn min_eigenvalue_symmetric(m: &Matrix) -> Result<f64, NumericsError> {
    let (values, _) = symmetric_eigen(m)?;
    Ok(values[0])
}

/// Eigenvalues of a general square matrix.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>, NumericsError> {
    require_square(m, "eigenvalues")?;
    if !is_finite(m) {
        return Err(NumericsError::NonFiniteEntry);
    }
    Ok(m.complex_eigenvalues().iter().cloned().collect())
}

/// Largest real part over the spectrum; negative means Hurwitz.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64, NumericsError> {
    Ok(eigenvalues(m)?.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn inverse(m: &Matrix) -> Result<Matrix, NumericsError> {
    require_square(m, "inverse")?;
    m.clone().try_inverse().ok_or(NumericsError::Singular)
}

/// Infinity norm (max absolute row sum).
pub fn norm_inf(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Jacobian of `f` at `x` by central differences with a fixed step.
pub fn jacobian<F>(f: F, x: &Vector, step: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut probe = x.clone();
    for i in 0..n {
        probe[i] = x[i] + step;
        let plus = f(&probe);
        probe[i] = x[i] - step;
        let minus = f(&probe);
        probe[i] = x[i];
        cols.push((plus - minus) / (2.0 * step));
    }
    Matrix::from_columns(&cols)
}

/// One classical fourth-order Runge–Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(f: F, x: &Vector, t: f64, dt: f64) -> Result<Vector, NumericsError>
where
    F: Fn(f64, &Vector) -> Vector,
{
    let half = 0.5 * dt;
    let k1 = f(t, x);
    let k2 = f(t + half, &(x + &k1 * half));
    let k3 = f(t + half, &(x + &k2 * half));
    let k4 = f(t + dt, &(x + &k3 * dt));
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(NumericsError::NonFiniteState)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn frob_rel(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let i4 = Matrix::identity(4, 4);
        assert_eq!(cholesky_lower(&i4).unwrap(), i4);
        let d = matrix(2, 2, &[4.0, 0.0, 0.0, 9.0]).unwrap();
        let s = cholesky_lower(&d).unwrap();
        assert_eq!(s, matrix(2, 2, &[2.0, 0.0, 0.0, 3.0]).unwrap());
    }

    #[test]
    fn cholesky_of_initial_covariance() {
        let p0 = Matrix::from_diagonal(&Vector::from_vec(vec![1e-4, 14.2122, 1e-4, 1e-4]));
        let s = cholesky_lower(&p0).unwrap();
        assert_relative_eq!(s[(0, 0)], 1e-2, max_relative = 1e-14);
        assert_relative_eq!(s[(1, 1)], 14.2122_f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(s[(1, 1)], 3.769907, epsilon = 1e-6);
        assert!(frob_rel(&(&s * s.transpose()), &p0) <= 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = matrix(2, 2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            cholesky_lower(&m),
            Err(NumericsError::NotPositiveDefinite { index: 1, .. })
        ));
        let z = Matrix::zeros(3, 3);
        assert!(matches!(cholesky_lower(&z), Err(NumericsError::NotPositiveDefinite { index: 0, .. })));
    }

    #[test]
    fn eigen_fallback_survives_singular_psd() {
        let m = matrix(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(covariance_sqrt(&m, SqrtPolicy::Strict).is_err());
        let s = covariance_sqrt(&m, SqrtPolicy::EigenFallback).unwrap();
        assert!(frob_rel(&(&s * s.transpose()), &m) < 1e-12);
    }

    #[test]
    fn pseudo_inverse_examples() {
        let i3 = Matrix::identity(3, 3);
        assert!((pseudo_inverse(&i3) - &i3).norm() < 1e-14);

        let v = matrix(3, 1, &[1.0, 2.0, 2.0]).unwrap();
        let expected = matrix(1, 3, &[1.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0]).unwrap();
        assert!((pseudo_inverse(&v) - expected).norm() < 1e-14);

        let z = Matrix::zeros(2, 3);
        let pz = pseudo_inverse(&z);
        assert_eq!(pz.shape(), (3, 2));
        assert!(pz.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn max_eigenvalue_examples() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -2.0, 3.0]));
        assert_relative_eq!(max_eigenvalue_symmetric(&d).unwrap(), 3.0, epsilon = 1e-12);
        let swap = matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(max_eigenvalue_symmetric(&swap).unwrap(), 1.0, epsilon = 1e-12);
        for n in 1..6 {
            let m = -Matrix::identity(n, n);
            assert_relative_eq!(max_eigenvalue_symmetric(&m).unwrap(), -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rk4_examples() {
        let x = vector(&[1.0, -2.0]).unwrap();
        let still = rk4_step(|_, x| Vector::zeros(x.len()), &x, 0.0, 0.1).unwrap();
        assert_eq!(still, x);

        let one = vector(&[1.0]).unwrap();
        let decay = rk4_step(|_, x| -x, &one, 0.0, 0.01).unwrap();
        assert!((decay[0] - (-0.01_f64).exp()).abs() <= 1e-10);
        assert!((decay[0] - 0.990049833).abs() < 1e-9);

        let c = vector(&[0.5, -3.0]).unwrap();
        let drift = rk4_step(|_, _| c.clone(), &x, 2.0, 0.25).unwrap();
        assert_eq!(drift, &x + &c * 0.25);
    }

    #[test]
    fn rk4_flags_blow_up() {
        let x = vector(&[1.0]).unwrap();
        let r = rk4_step(|_, x| x.map(|v| v * f64::MAX), &x, 0.0, 1.0);
        assert_eq!(r, Err(NumericsError::NonFiniteState));
    }

    #[test]
    fn hurwitz_check() {
        let a = matrix(2, 2, &[-1.0, 0.5, 0.0, -2.0]).unwrap();
        assert_relative_eq!(spectral_abscissa(&a).unwrap(), -1.0, epsilon = 1e-12);
        let rot = matrix(2, 2, &[0.1, 1.0, -1.0, 0.1]).unwrap();
        assert_relative_eq!(spectral_abscissa(&rot).unwrap(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn constructors_validate() {
        assert!(matrix(0, 2, &[]).is_err());
        assert!(matrix(1, 2, &[1.0]).is_err());
        assert_eq!(matrix(1, 1, &[f64::NAN]), Err(NumericsError::NonFiniteEntry));
        assert!(vector(&[]).is_err());
        assert!(vector(&[f64::INFINITY]).is_err());
    }

    fn arb_matrix(max: usize) -> impl Strategy<Value = Matrix> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            prop::collection::vec(-5.0..5.0_f64, r * c)
                .prop_map(move |v| Matrix::from_row_slice(r, c, &v))
        })
    }

    fn arb_square(max: usize) -> impl Strategy<Value = Matrix> {
        (1..=max).prop_flat_map(|n| {
            prop::collection::vec(-3.0..3.0_f64, n * n).prop_map(move |v| Matrix::from_row_slice(n, n, &v))
        })
    }

    fn quadratic_roots(b: f64, c: f64) -> (f64, f64) {
        let disc = (b * b - 4.0 * c).max(0.0).sqrt();
        ((-b - disc) / 2.0, (-b + disc) / 2.0)
    }

    /// Real roots of a monic cubic with three real roots (trigonometric form).
    fn cubic_max_root(b: f64, c: f64, d: f64) -> f64 {
        let p = c - b * b / 3.0;
        let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
        if p.abs() < 1e-300 {
            return -q.cbrt() - b / 3.0;
        }
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - b / 3.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    proptest! {
        #[test]
        fn cholesky_reproduces_spd(g in arb_square(6)) {
            let n = g.nrows();
            let m = &g * g.transpose() + Matrix::identity(n, n) * 1e-3;
            let s = cholesky_lower(&m).unwrap();
            prop_assert!(frob_rel(&(&s * s.transpose()), &m) <= 1e-8);
            for i in 0..n { for j in (i + 1)..n { prop_assert_eq!(s[(i, j)], 0.0); } }
        }

        #[test]
        fn penrose_identities(a in arb_matrix(8)) {
            let p = pseudo_inverse(&a);
            let tol = 1e-7 * (1.0 + a.norm() * p.norm()).powi(2);
            prop_assert!((&a * &p * &a - &a).norm() <= tol);
            prop_assert!((&p * &a * &p - &p).norm() <= tol);
            let ap = &a * &p;
            let pa = &p * &a;
            prop_assert!((&ap - ap.transpose()).norm() <= tol);
            prop_assert!((&pa - pa.transpose()).norm() <= tol);
        }

        #[test]
        fn rk4_matches_exponential(lambda_dt in -0.1..0.1_f64, x0 in -10.0..10.0_f64) {
            let dt = 0.01;
            let lambda = lambda_dt / dt;
            let x = vector(&[x0]).unwrap();
            let next = rk4_step(|_, x| x * lambda, &x, 0.0, dt).unwrap();
            let exact = x0 * lambda_dt.exp();
            let rel = if exact == 0.0 { next[0].abs() } else { ((next[0] - exact) / exact).abs() };
            prop_assert!(rel <= lambda_dt.abs().powi(5) + 1e-15);
        }

        #[test]
        fn max_eigen_matches_characteristic_2x2(a in -5.0..5.0_f64, b in -5.0..5.0_f64, c in -5.0..5.0_f64) {
            let m = matrix(2, 2, &[a, b, b, c]).unwrap();
            let (_, hi) = quadratic_roots(-(a + c), a * c - b * b);
            prop_assert!((max_eigenvalue_symmetric(&m).unwrap() - hi).abs() <= 1e-8);
        }

        #[test]
        fn max_eigen_matches_characteristic_3x3(v in prop::collection::vec(-3.0..3.0_f64, 6)) {
            let (a, b, c, d, e, f) = (v[0], v[1], v[2], v[3], v[4], v[5]);
            let m = matrix(3, 3, &[a, d, e, d, b, f, e, f, c]).unwrap();
            // det(λI − M) = λ³ − tr λ² + (sum of principal 2x2 minors) λ − det
            let tr = a + b + c;
            let minors = a * b - d * d + a * c - e * e + b * c - f * f;
            let det = m.determinant();
            let hi = cubic_max_root(-tr, minors, -det);
            prop_assert!((max_eigenvalue_symmetric(&m).unwrap() - hi).abs() <= 1e-8);
        }
    }
}
