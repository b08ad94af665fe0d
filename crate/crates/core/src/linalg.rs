//! Small dense symmetric linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest dimension accepted by the Jacobi eigen-solver.
pub const MAX_JACOBI_DIM: usize = 64;

#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending.
    pub values: DVector<f64>,
    /// Column `j` is the unit eigenvector of `values[j]`.
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Only the upper triangle is read. Sweeps continue until the off-diagonal
/// mass is below `1e-30` of the total, or 100 sweeps.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymEigen> {
    let p = a.nrows();
    if p != a.ncols() || p == 0 {
        return Err(Error::invalid("eigen-solve needs a nonempty square matrix"));
    }
    if p > MAX_JACOBI_DIM {
        return Err(Error::Unsupported(format!("dimension {p} exceeds {MAX_JACOBI_DIM}")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut m = DMatrix::from_fn(p, p, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = DMatrix::<f64>::identity(p, p);
    let total: f64 = m.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..p {
            for j in i + 1..p {
                off += 2.0 * m[(i, j)] * m[(i, j)];
            }
        }
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                let aij = m[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                let theta = (m[(j, j)] - m[(i, i)]) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let mki = m[(k, i)];
                    let mkj = m[(k, j)];
                    m[(k, i)] = c * mki - s * mkj;
                    m[(k, j)] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let mik = m[(i, k)];
                    let mjk = m[(j, k)];
                    m[(i, k)] = c * mik - s * mjk;
                    m[(j, k)] = s * mik + c * mjk;
                }
                for k in 0..p {
                    let vki = v[(k, i)];
                    let vkj = v[(k, j)];
                    v[(k, i)] = c * vki - s * vkj;
                    v[(k, j)] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| m[(i, i)]));
    let vectors = DMatrix::from_fn(p, p, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Symmetric positive square root; fails unless the matrix is positive definite.
pub fn sym_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = jacobi_eigen(a)?;
    let scale = e.values.amax().max(f64::MIN_POSITIVE);
    if e.values[0] <= 1e-14 * scale {
        return Err(Error::domain(format!("matrix is not positive definite (smallest eigenvalue {:e})", e.values[0])));
    }
    let d = DMatrix::from_diagonal(&e.values.map(f64::sqrt));
    let r = &e.vectors * d * e.vectors.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// Solve `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Solve `a x = b` by partial-pivoting LU; `None` when `a` is numerically singular.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}
