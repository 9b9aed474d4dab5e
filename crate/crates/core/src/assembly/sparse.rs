use nalgebra::{DMatrix, DVector};

/// Compressed-row sparse matrix built from coordinate triplets. Duplicate
/// `(row, col)` entries are summed during construction.
#[derive(Debug, Clone)]
pub struct SparseCouplingMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCouplingMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseCouplingMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        DVector::from_fn(self.nrows, |r, _| self.row(r).map(|(c, v)| v * x[c]).sum())
    }

    /// `A^T x`.
    pub fn tr_mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = DVector::zeros(self.ncols);
        for r in 0..self.nrows {
            let xr = x[r];
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            let xc = x.column(j);
            for r in 0..self.nrows {
                y[(r, j)] = self.row(r).map(|(c, v)| v * xc[c]).sum();
            }
        }
        y
    }

    /// `A^T x`.
    pub fn tr_mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.nrows);
        let mut y = DMatrix::zeros(self.ncols, x.ncols());
        for j in 0..x.ncols() {
            for r in 0..self.nrows {
                let xr = x[(r, j)];
                if xr == 0.0 {
                    continue;
                }
                for (c, v) in self.row(r) {
                    y[(c, j)] += v * xr;
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            out[(r, c)] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseCouplingMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 1, 0.5)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense()[(0, 1)], 1.5);
        let t = m.triplets();
        let mut keys: Vec<_> = t.iter().map(|&(r, c, _)| (r, c)).collect();
        keys.dedup();
        assert_eq!(keys.len(), t.len());
    }

    #[test]
    fn products_match_dense() {
        let trip: Vec<_> = (0..20).map(|i| (i % 4, (i * 7) % 5, i as f64 * 0.3 - 1.0)).collect();
        let m = SparseCouplingMatrix::from_triplets(4, 5, &trip);
        let d = m.to_dense();
        let x = DMatrix::from_fn(5, 2, |i, j| (i + 2 * j) as f64);
        assert!((m.mul_mat(&x) - &d * &x).abs().max() < 1e-12);
        let y = DMatrix::from_fn(4, 3, |i, j| (i * j) as f64 - 1.0);
        assert!((m.tr_mul_mat(&y) - d.transpose() * &y).abs().max() < 1e-12);
        let v = DVector::from_fn(5, |i, _| i as f64);
        assert!((m.mul_vec(&v) - &d * &v).amax() < 1e-12);
        assert!((m.transpose().to_dense() - d.transpose()).abs().max() < 1e-12);
    }
}
