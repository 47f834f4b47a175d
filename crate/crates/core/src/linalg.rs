//! Small dense eigenvalue routines used by the diagnostics and the solver.

use nalgebra::{DMatrix, Schur};
use ndarray::{Array1, ArrayView2};

use crate::error::{Result, VarxError};
use crate::scalar::Scalar;

/// Largest eigenvalue of `A Aᵀ` by power iteration, without forming the Gram matrix.
///
/// Returns zero when `A` is identically zero.
pub fn gram_top_eigenvalue<T: Scalar>(a: ArrayView2<'_, T>, tol: T, max_iter: usize) -> T {
    let d = a.nrows();
    if d == 0 || a.ncols() == 0 {
        return T::zero();
    }
    // Start from the Gram diagonal; it is nonnegative and has a component
    // along the leading eigenvector unless the matrix is pathological.
    let mut v: Array1<T> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut norm = v.dot(&v).sqrt();
    if norm == T::zero() {
        return T::zero();
    }
    v.mapv_inplace(|x| x / norm);
    let mut estimate = T::zero();
    for _ in 0..max_iter {
        let w = a.dot(&a.t().dot(&v));
        let rayleigh = v.dot(&w);
        norm = w.dot(&w).sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        v = w.mapv(|x| x / norm);
        let converged = (rayleigh - estimate).abs() <= tol * rayleigh.abs();
        estimate = rayleigh;
        if converged {
            break;
        }
    }
    estimate
}

/// Eigenvalues of a general real square matrix as `(re, im)` pairs.
///
/// Computed from the real Schur form in double precision.
pub fn eigenvalues<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Vec<(T, T)>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigenvalues: matrix must be square");
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = DMatrix::from_fn(n, n, |i, j| a[(i, j)].to_f64_lossy());
    if !m.iter().all(|v| v.is_finite()) {
        return Err(VarxError::EigenNoConvergence);
    }
    let schur = Schur::try_new(m, f64::EPSILON, 10_000).ok_or(VarxError::EigenNoConvergence)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|c| (T::of(c.re), T::of(c.im)))
        .collect())
}

/// Spectral radius (largest eigenvalue modulus) of a general real square matrix.
pub fn spectral_radius<T: Scalar>(a: ArrayView2<'_, T>) -> Result<T> {
    Ok(eigenvalues(a)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(T::zero(), T::max))
}

fn sign<T: Scalar>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: ArrayView2<'_, T>) -> Vec<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigenvalues: matrix must be square");
    let mut m = a.to_owned();
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += m[(i, i)] * m[(i, i)];
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for pi in 0..n {
            for qi in (pi + 1)..n {
                let apq = m[(pi, qi)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(qi, qi)] - m[(pi, pi)]) / (T::of(2.0) * apq);
                let t = sign(T::one(), theta) / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, pi)];
                    let mkq = m[(k, qi)];
                    m[(k, pi)] = c * mkp - s * mkq;
                    m[(k, qi)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(pi, k)];
                    let mqk = m[(qi, k)];
                    m[(pi, k)] = c * mpk - s * mqk;
                    m[(qi, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig
}
