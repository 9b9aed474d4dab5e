//! Thin glue over `faer` for the large dense kernels (Gram products,
//! symmetric eigenproblems, thin SVD) and the sparse Cholesky factorization.
//! Everything outside this module works with `nalgebra` types.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn as_faer(m: &DMatrix<f64>) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

pub(crate) fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `A^T B`.
pub fn transpose_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let prod: Mat<f64> = as_faer(a).transpose() * as_faer(b);
    from_faer(prod.as_ref())
}

/// `A B`.
pub fn mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let prod: Mat<f64> = as_faer(a) * as_faer(b);
    from_faer(prod.as_ref())
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
///
/// The matrix is normalized by its largest entry and entries below `1e-40` of
/// it are dropped: Gram matrices of decaying trajectories span hundreds of
/// orders of magnitude, which stalls the QR iteration, while the dropped part
/// perturbs eigenvalues by less than `n * 1e-40` relative. If faer still does
/// not converge the nalgebra solver is used.
pub fn symmetric_eigen_desc(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let scale = a.amax();
    if n == 0 || scale == 0.0 {
        return Ok((vec![0.0; n], DMatrix::identity(n, n)));
    }
    let mut scaled = a / scale;
    for v in scaled.iter_mut() {
        if v.abs() < 1e-40 {
            *v = 0.0;
        }
    }
    let faer_eig = as_faer(&scaled)
        .self_adjoint_eigen(Side::Lower)
        .ok()
        .filter(|e| (0..n).all(|i| e.S()[i].is_finite()));
    let (mut values, vectors) = match faer_eig {
        Some(eig) => {
            let s = eig.S();
            let u = eig.U();
            // faer returns ascending order
            let values: Vec<f64> = (0..n).rev().map(|i| s[i]).collect();
            (values, DMatrix::from_fn(n, n, |i, j| u[(i, n - 1 - j)]))
        }
        None => {
            let eig = ((&scaled + scaled.transpose()) * 0.5).symmetric_eigen();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            (values, DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]))
        }
    };
    for v in &mut values {
        *v *= scale;
    }
    Ok((values, vectors))
}

/// Replaces subnormal values by zero. Long decaying trajectories underflow
/// into the subnormal range, which slows arithmetic and upsets eigensolvers.
pub fn flush_subnormals(values: &mut [f64]) {
    for v in values {
        if v.abs() < f64::MIN_POSITIVE {
            *v = 0.0;
        }
    }
}

/// Thin SVD `A = U diag(s) V^T` with singular values in decreasing order.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        let k = m.min(n);
        return Ok((DMatrix::zeros(m, k), Vec::new(), DMatrix::zeros(n, k)));
    }
    let svd = as_faer(a)
        .thin_svd()
        .map_err(|e| Error::Factorization(format!("thin svd: {e:?}")))?;
    let k = m.min(n);
    let s = svd.S();
    let values: Vec<f64> = (0..k).map(|i| s[i]).collect();
    Ok((from_faer(svd.U()), values, from_faer(svd.V())))
}

/// Orthonormal basis of the column span of `a` (thin Householder QR).
pub fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(m, 0);
    }
    let qr = as_faer(a).qr();
    let q = qr.compute_thin_Q();
    from_faer(q.as_ref())
}

/// Sparse symmetric positive definite matrix factorized once by Cholesky
/// (fill-reducing ordering chosen by faer), solved many times.
pub struct SparseCholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SparseCholesky {
    /// Factorizes the matrix given by `(row, col, value)` triplets. Duplicate
    /// entries are summed; only the lower triangle is read.
    pub fn factorize(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let entries: Vec<Triplet<usize, usize, f64>> = triplets
            .iter()
            .filter(|(r, c, _)| r >= c)
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| Error::Factorization(format!("sparse assembly: {e:?}")))?;
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("sparse Cholesky: {e:?}")))?;
        Ok(SparseCholesky { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut DVector<f64>) {
        assert_eq!(rhs.len(), self.n);
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.llt.solve_in_place(m.as_mut());
        for i in 0..self.n {
            rhs[i] = m[(i, 0)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let (vals, vecs) = symmetric_eigen_desc(&a).unwrap();
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let rebuilt = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!((rebuilt - a).abs().max() < 1e-12);
    }

    #[test]
    fn svd_reconstructs() {
        let a = DMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 2.5);
        let (u, s, v) = thin_svd(&a).unwrap();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = &u * DMatrix::from_diagonal(&DVector::from_vec(s)) * v.transpose();
        assert!((rebuilt - a).abs().max() < 1e-12);
    }

    #[test]
    fn sparse_cholesky_solves_laplacian() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i + 1 < n {
                t.push((i + 1, i, -1.0));
                t.push((i, i + 1, -1.0));
            }
        }
        let chol = SparseCholesky::factorize(n, &t).unwrap();
        let x = DVector::from_fn(n, |i, _| (i as f64).sin());
        let mut b = DVector::zeros(n);
        for &(r, c, v) in &t {
            b[r] += v * x[c];
        }
        chol.solve_in_place(&mut b);
        assert!((b - x).amax() < 1e-12);
    }

    #[test]
    fn orthonormalize_spans() {
        let a = DMatrix::from_fn(6, 3, |i, j| (i + 1) as f64 * (j as f64 + 0.5).powi(i as i32 % 3));
        let q = orthonormalize(&a);
        assert!((q.transpose() * &q - DMatrix::identity(3, 3)).abs().max() < 1e-13);
        let resid = &a - &q * (q.transpose() * &a);
        assert!(resid.abs().max() < 1e-12);
    }
}
