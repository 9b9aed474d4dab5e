use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// One dense block acting on the (not necessarily contiguous) global indices `dofs`.
#[derive(Debug, Clone)]
pub struct DenseBlock {
    pub dofs: Vec<usize>,
    pub mat: DMatrix<f64>,
}

/// Block-diagonal matrix up to a permutation: each block couples only its own
/// index set and the index sets partition `0..dim`.
#[derive(Debug, Clone)]
pub struct BlockDiagonalMatrix {
    dim: usize,
    blocks: Vec<DenseBlock>,
}

impl BlockDiagonalMatrix {
    pub fn new(dim: usize, blocks: Vec<DenseBlock>) -> Result<Self> {
        let mut seen = vec![false; dim];
        let mut total = 0;
        for (b, block) in blocks.iter().enumerate() {
            let n = block.dofs.len();
            if block.mat.nrows() != n || block.mat.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "block {b} has {n} dofs but a {}x{} matrix",
                    block.mat.nrows(),
                    block.mat.ncols()
                )));
            }
            for &d in &block.dofs {
                if d >= dim || seen[d] {
                    return Err(Error::InvalidArgument(format!(
                        "block {b} index {d} is out of range or repeated"
                    )));
                }
                seen[d] = true;
            }
            total += n;
        }
        if total != dim {
            return Err(Error::DimensionMismatch(format!(
                "block sizes sum to {total}, expected {dim}"
            )));
        }
        Ok(BlockDiagonalMatrix { dim, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[DenseBlock] {
        &self.blocks
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = DVector::zeros(self.dim);
        for block in &self.blocks {
            let local = DVector::from_iterator(block.dofs.len(), block.dofs.iter().map(|&d| x[d]));
            let out = &block.mat * local;
            for (i, &d) in block.dofs.iter().enumerate() {
                y[d] = out[i];
            }
        }
        y
    }

    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.dim);
        let mut y = DMatrix::zeros(self.dim, x.ncols());
        for block in &self.blocks {
            let local = x.select_rows(block.dofs.iter());
            let out = &block.mat * local;
            for (i, &d) in block.dofs.iter().enumerate() {
                y.row_mut(d).copy_from(&out.row(i));
            }
        }
        y
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        self.bilinear(x, x)
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for block in &self.blocks {
            for (i, &di) in block.dofs.iter().enumerate() {
                let xi = x[di];
                if xi == 0.0 {
                    continue;
                }
                for (j, &dj) in block.dofs.iter().enumerate() {
                    s += xi * block.mat[(i, j)] * y[dj];
                }
            }
        }
        s
    }

    /// Column-wise `x_j^T A x_j` for every column of `x`.
    pub fn column_quad_forms(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let ax = self.mul_mat(x);
        (0..x.ncols()).map(|j| x.column(j).dot(&ax.column(j))).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| DenseBlock { dofs: b.dofs.clone(), mat: &b.mat * s })
            .collect();
        BlockDiagonalMatrix { dim: self.dim, blocks }
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (&b.mat - b.mat.transpose()).abs().max())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| {
            let scale = b.mat.abs().max().max(f64::MIN_POSITIVE);
            (&b.mat - b.mat.transpose()).abs().max() <= tol * scale
        })
    }

    /// Blockwise Cholesky; the error names the first block that is not SPD.
    pub fn cholesky(&self) -> Result<BlockCholesky> {
        let mut factors = Vec::with_capacity(self.blocks.len());
        for (b, block) in self.blocks.iter().enumerate() {
            let sym = (&block.mat + block.mat.transpose()) * 0.5;
            let chol = sym.cholesky().ok_or_else(|| {
                Error::Factorization(format!("block {b} (dofs {:?}) is not SPD", block.dofs))
            })?;
            factors.push((block.dofs.clone(), chol));
        }
        Ok(BlockCholesky { dim: self.dim, factors })
    }

    pub fn inverse(&self) -> Result<Self> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (b, block) in self.blocks.iter().enumerate() {
            let inv = block.mat.clone().try_inverse().ok_or_else(|| {
                Error::Factorization(format!("block {b} is singular"))
            })?;
            blocks.push(DenseBlock { dofs: block.dofs.clone(), mat: inv });
        }
        Ok(BlockDiagonalMatrix { dim: self.dim, blocks })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for block in &self.blocks {
            for (i, &di) in block.dofs.iter().enumerate() {
                for (j, &dj) in block.dofs.iter().enumerate() {
                    out[(di, dj)] = block.mat[(i, j)];
                }
            }
        }
        out
    }

    /// `(row, col, value)` triplets of all stored entries.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for block in &self.blocks {
            for (i, &di) in block.dofs.iter().enumerate() {
                for (j, &dj) in block.dofs.iter().enumerate() {
                    out.push((di, dj, block.mat[(i, j)]));
                }
            }
        }
        out
    }
}

/// Blockwise Cholesky factors `A = L L^T`.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    dim: usize,
    factors: Vec<(Vec<usize>, Cholesky<f64, Dyn>)>,
}

impl BlockCholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim);
        for (dofs, chol) in &self.factors {
            let local = DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| b[d]));
            let sol = chol.solve(&local);
            for (i, &d) in dofs.iter().enumerate() {
                x[d] = sol[i];
            }
        }
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.dim, b.ncols());
        for (dofs, chol) in &self.factors {
            let sol = chol.solve(&b.select_rows(dofs.iter()));
            for (i, &d) in dofs.iter().enumerate() {
                x.row_mut(d).copy_from(&sol.row(i));
            }
        }
        x
    }

    /// `L^T x`, mapping coefficients to coordinates in which the weighted
    /// inner product becomes Euclidean.
    pub fn lt_mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.dim, x.ncols());
        for (dofs, chol) in &self.factors {
            let out = chol.l().transpose() * x.select_rows(dofs.iter());
            for (i, &d) in dofs.iter().enumerate() {
                y.row_mut(d).copy_from(&out.row(i));
            }
        }
        y
    }

    /// `L^{-T} y`, the inverse of [`Self::lt_mul_mat`].
    pub fn lt_solve_mat(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.dim, y.ncols());
        for (dofs, chol) in &self.factors {
            let lt = chol.l().transpose();
            let out = lt
                .solve_upper_triangular(&y.select_rows(dofs.iter()))
                .expect("Cholesky factor has a positive diagonal");
            for (i, &d) in dofs.iter().enumerate() {
                x.row_mut(d).copy_from(&out.row(i));
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BlockDiagonalMatrix {
        BlockDiagonalMatrix::new(
            5,
            vec![
                DenseBlock { dofs: vec![0, 3], mat: DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]) },
                DenseBlock {
                    dofs: vec![4, 1, 2],
                    mat: DMatrix::from_row_slice(3, 3, &[5.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 6.0]),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_partitions() {
        let b = DenseBlock { dofs: vec![0, 0], mat: DMatrix::identity(2, 2) };
        assert!(BlockDiagonalMatrix::new(2, vec![b]).is_err());
        let b = DenseBlock { dofs: vec![0], mat: DMatrix::identity(1, 1) };
        assert!(BlockDiagonalMatrix::new(2, vec![b]).is_err());
    }

    #[test]
    fn inverse_and_solve() {
        let a = sample();
        let inv = a.inverse().unwrap();
        let prod = a.to_dense() * inv.to_dense();
        assert!((prod - DMatrix::identity(5, 5)).abs().max() < 1e-12);
        let chol = a.cholesky().unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 1.5]);
        let x = chol.solve(&b);
        assert!((a.mul_vec(&x) - b).amax() < 1e-12);
    }

    #[test]
    fn weighted_coordinates_round_trip() {
        let a = sample();
        let chol = a.cholesky().unwrap();
        let x = DMatrix::from_fn(5, 2, |i, j| (i as f64 + 1.0) * (j as f64 - 0.3));
        let z = chol.lt_mul_mat(&x);
        // z^T z = x^T A x
        let lhs = z.transpose() * &z;
        let rhs = x.transpose() * a.to_dense() * &x;
        assert!((lhs - rhs).abs().max() < 1e-12);
        assert!((chol.lt_solve_mat(&z) - x).abs().max() < 1e-12);
    }

    #[test]
    fn cholesky_reports_block() {
        let bad = BlockDiagonalMatrix::new(
            2,
            vec![
                DenseBlock { dofs: vec![0], mat: DMatrix::from_element(1, 1, 1.0) },
                DenseBlock { dofs: vec![1], mat: DMatrix::from_element(1, 1, -1.0) },
            ],
        )
        .unwrap();
        let err = bad.cholesky().unwrap_err().to_string();
        assert!(err.contains("block 1"), "{err}");
    }
}
