//! Weighted proper orthogonal decomposition of snapshot data.
//!
//! For snapshots `y_1..y_N` with time weights `w_n` and a spatial SPD weight
//! `W = L L^T`, the POD is the SVD of `Z = L^T Y diag(sqrt(w))`. Modes are
//! returned both in weighted coordinates (`psi`, Euclidean-orthonormal) and as
//! full-space coefficient vectors `D = L^{-T} psi`, which satisfy `D^T W D = I`.
//!
//! The spectrum is computed by the method of snapshots. A single Gram
//! eigensolve only resolves singular values down to about `1e-8 sigma_1`, so the
//! candidate subspace is enriched by deflation (Gram of the residual
//! `Z - psi psi^T Z`) and the final singular values come from a Rayleigh-Ritz
//! SVD of `psi^T Z`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{BlockCholesky, BlockDiagonalMatrix, HdgSystem};
use crate::error::{Error, Result};
use crate::fom::SnapshotSet;
use crate::linalg::{mul, orthonormalize, symmetric_eigen_desc, thin_svd, transpose_mul};

/// The three HDG variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Flux,
    Scalar,
    Trace,
}

impl Variable {
    pub fn tag(self) -> &'static str {
        match self {
            Variable::Flux => "q",
            Variable::Scalar => "u",
            Variable::Trace => "uhat",
        }
    }

    /// The spatial weight the POD of this variable is orthonormal in.
    pub fn weight(self, system: &HdgSystem) -> &BlockDiagonalMatrix {
        match self {
            Variable::Flux => &system.a7,
            Variable::Scalar => &system.m,
            Variable::Trace => &system.a8,
        }
    }
}

/// Column access to a snapshot matrix that may not be stored.
pub trait SnapshotSource {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// Raw coefficient columns `Y[:, cols]`.
    fn columns(&self, cols: Range<usize>) -> DMatrix<f64>;
    fn time_weights(&self) -> &[f64];
}

/// A stored snapshot matrix.
pub struct MatrixSource<'a> {
    y: &'a DMatrix<f64>,
    weights: Vec<f64>,
}

impl<'a> MatrixSource<'a> {
    pub fn new(y: &'a DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != y.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} time weights for {} snapshots",
                weights.len(),
                y.ncols()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument("time weights must be positive".into()));
        }
        Ok(MatrixSource { y, weights })
    }
}

impl SnapshotSource for MatrixSource<'_> {
    fn nrows(&self) -> usize {
        self.y.nrows()
    }
    fn ncols(&self) -> usize {
        self.y.ncols()
    }
    fn columns(&self, cols: Range<usize>) -> DMatrix<f64> {
        self.y.columns(cols.start, cols.len()).into_owned()
    }
    fn time_weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Flux snapshots of a run, stored or rebuilt from scalar and trace by
/// `alpha = A1^{-1} A2 beta - A1^{-1} A3 gamma` element by element.
pub struct FluxSource<'a> {
    system: &'a HdgSystem,
    snaps: &'a SnapshotSet,
    weights: Vec<f64>,
    /// Per element `(A1^{-1} A2, A1^{-1} A3)`, when the flux is not stored.
    local: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl<'a> FluxSource<'a> {
    pub fn new(system: &'a HdgSystem, snaps: &'a SnapshotSet) -> Self {
        let local = if snaps.flux.is_some() {
            Vec::new()
        } else {
            system
                .elements
                .iter()
                .map(|e| {
                    let chol = e.a1.clone().cholesky().expect("A1 blocks are SPD");
                    (chol.solve(&e.a2), chol.solve(&e.a3))
                })
                .collect()
        };
        FluxSource { system, snaps, weights: snaps.time_weights(), local }
    }
}

impl SnapshotSource for FluxSource<'_> {
    fn nrows(&self) -> usize {
        self.system.layout.n1
    }
    fn ncols(&self) -> usize {
        self.snaps.len()
    }
    fn columns(&self, cols: Range<usize>) -> DMatrix<f64> {
        if let Some(y) = &self.snaps.flux {
            return y.columns(cols.start, cols.len()).into_owned();
        }
        let nc = cols.len();
        let mut out = DMatrix::zeros(self.system.layout.n1, nc);
        for (e, (p, f)) in self.system.elements.iter().zip(&self.local) {
            let ns = e.scalar_dofs.len();
            let b = self.snaps.scalar.view((e.scalar_dofs.start, cols.start), (ns, nc));
            let mut a = p * b;
            if !e.trace_dofs.is_empty() {
                let tr = &self.snaps.trace;
                let g = DMatrix::from_fn(e.trace_dofs.len(), nc, |i, j| tr[(e.trace_dofs[i], cols.start + j)]);
                a -= f * g;
            }
            for (i, &d) in e.flux_dofs.iter().enumerate() {
                out.row_mut(d).copy_from(&a.row(i));
            }
        }
        out
    }
    fn time_weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Snapshot source of one variable of a run.
pub fn variable_source<'a>(
    system: &'a HdgSystem,
    snaps: &'a SnapshotSet,
    variable: Variable,
) -> Box<dyn SnapshotSource + 'a> {
    let weights = snaps.time_weights();
    match variable {
        Variable::Flux => Box::new(FluxSource::new(system, snaps)),
        Variable::Scalar => Box::new(MatrixSource { y: &snaps.scalar, weights }),
        Variable::Trace => Box::new(MatrixSource { y: &snaps.trace, weights }),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PodOptions {
    /// Singular values `<= eps_rank * sigma_1` are discarded.
    pub eps_rank: f64,
    /// Keep at most this many modes (all singular values are still reported).
    pub r_max: Option<usize>,
    /// Memory allowed for a materialized weighted snapshot block, in bytes.
    pub block_bytes: usize,
    /// Maximum number of deflation passes.
    pub max_passes: usize,
}

impl Default for PodOptions {
    fn default() -> Self {
        PodOptions { eps_rank: 1e-12, r_max: None, block_bytes: 512 << 20, max_passes: 3 }
    }
}

/// POD of one variable.
#[derive(Debug, Clone)]
pub struct PodBasis {
    pub variable: Variable,
    /// All singular values above the rank threshold, non-increasing.
    pub sigma: Vec<f64>,
    /// `lambda_i = sigma_i^2`.
    pub lambda: Vec<f64>,
    /// Full-space mode coefficients `D`, one column per stored mode.
    pub modes: DMatrix<f64>,
    /// Modes in weighted coordinates, `L^T D`.
    pub weighted_modes: DMatrix<f64>,
    /// Right singular vectors (temporal coefficients), one column per stored mode.
    pub temporal: DMatrix<f64>,
    /// `sum_n w_n ||y_n||_W^2`.
    pub total_energy: f64,
    pub weight: BlockDiagonalMatrix,
}

/// Weighted coordinates `Z[:, cols] = L^T Y[:, cols] diag(sqrt(w))`.
struct Weighted<'a> {
    source: &'a dyn SnapshotSource,
    chol: BlockCholesky,
    sqrt_w: Vec<f64>,
}

impl Weighted<'_> {
    fn block(&self, cols: Range<usize>) -> DMatrix<f64> {
        let mut z = self.chol.lt_mul_mat(&self.source.columns(cols.clone()));
        for (c, j) in cols.enumerate() {
            z.column_mut(c).scale_mut(self.sqrt_w[j]);
        }
        z
    }

    /// Residual after removing the span of the orthonormal `psi`.
    fn residual_block(&self, cols: Range<usize>, psi: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let z = self.block(cols);
        match psi {
            Some(p) if p.ncols() > 0 => {
                let mut r = &z - mul(p, &transpose_mul(p, &z));
                r -= mul(p, &transpose_mul(p, &r));
                r
            }
            _ => z,
        }
    }
}

fn column_blocks(nrows: usize, ncols: usize, bytes: usize) -> Vec<Range<usize>> {
    let per = (bytes / (16 * nrows.max(1))).max(1);
    (0..ncols).step_by(per).map(|s| s..(s + per).min(ncols)).collect()
}

/// Gram matrix of the (deflated) weighted snapshots, block pair by block pair.
fn residual_gram(w: &Weighted, blocks: &[Range<usize>], psi: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let n = w.source.ncols();
    let mut g = DMatrix::zeros(n, n);
    for (bi, ri) in blocks.iter().enumerate() {
        let zi = w.residual_block(ri.clone(), psi);
        for rj in blocks.iter().take(bi) {
            let zj = w.residual_block(rj.clone(), psi);
            let gij = transpose_mul(&zi, &zj);
            g.view_mut((ri.start, rj.start), (ri.len(), rj.len())).copy_from(&gij);
            g.view_mut((rj.start, ri.start), (rj.len(), ri.len())).copy_from(&gij.transpose());
        }
        let gii = transpose_mul(&zi, &zi);
        g.view_mut((ri.start, ri.start), (ri.len(), ri.len())).copy_from(&gii);
    }
    g
}

/// `sum_b Z'_b X[b, :]` for the deflated blocks.
fn residual_times(
    w: &Weighted,
    blocks: &[Range<usize>],
    psi: Option<&DMatrix<f64>>,
    x: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(w.source.nrows(), x.ncols());
    for r in blocks {
        let z = w.residual_block(r.clone(), psi);
        out += mul(&z, &x.rows(r.start, r.len()).into_owned());
    }
    out
}

pub fn compute_pod(
    source: &dyn SnapshotSource,
    weight: &BlockDiagonalMatrix,
    variable: Variable,
    options: PodOptions,
) -> Result<PodBasis> {
    let (nrows, ncols) = (source.nrows(), source.ncols());
    if weight.dim() != nrows {
        return Err(Error::DimensionMismatch(format!(
            "weight is {}x{} but snapshots have {nrows} rows",
            weight.dim(),
            weight.dim()
        )));
    }
    let tw = source.time_weights();
    if tw.len() != ncols || tw.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("time weights must be positive, one per snapshot".into()));
    }
    let w = Weighted { source, chol: weight.cholesky()?, sqrt_w: tw.iter().map(|x| x.sqrt()).collect() };
    let blocks = column_blocks(nrows, ncols, options.block_bytes);
    let empty = |total_energy: f64| PodBasis {
        variable,
        sigma: Vec::new(),
        lambda: Vec::new(),
        modes: DMatrix::zeros(nrows, 0),
        weighted_modes: DMatrix::zeros(nrows, 0),
        temporal: DMatrix::zeros(ncols, 0),
        total_energy,
        weight: weight.clone(),
    };
    if ncols == 0 {
        return Ok(empty(0.0));
    }

    let mut psi: Option<DMatrix<f64>> = None;
    let mut total_energy = 0.0;
    let mut lambda_max = 0.0f64;
    for pass in 0..options.max_passes.max(1) {
        let g = residual_gram(&w, &blocks, psi.as_ref());
        if pass == 0 {
            total_energy = g.trace();
        }
        let (vals, vecs) = symmetric_eigen_desc(&g)?;
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        if pass == 0 {
            lambda_max = top;
            if top == 0.0 {
                return Ok(empty(total_energy));
            }
        }
        // nothing left above the rank threshold
        if top <= (options.eps_rank.powi(2) * lambda_max) * 1e-2 {
            break;
        }
        let floor = (top * 1e-12).max(options.eps_rank.powi(2) * lambda_max * 1e-2);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > floor).collect();
        if keep.is_empty() {
            break;
        }
        let v = DMatrix::from_fn(ncols, keep.len(), |i, j| vecs[(i, keep[j])] / vals[keep[j]].sqrt());
        let fresh = residual_times(&w, &blocks, psi.as_ref(), &v);
        let fresh = match &psi {
            Some(p) => {
                let mut f = &fresh - mul(p, &transpose_mul(p, &fresh));
                f -= mul(p, &transpose_mul(p, &f));
                f
            }
            None => fresh,
        };
        let fresh = orthonormalize(&fresh);
        psi = Some(match psi {
            Some(p) => {
                let mut both = DMatrix::zeros(nrows, p.ncols() + fresh.ncols());
                both.columns_mut(0, p.ncols()).copy_from(&p);
                both.columns_mut(p.ncols(), fresh.ncols()).copy_from(&fresh);
                orthonormalize(&both)
            }
            None => fresh,
        });
        if psi.as_ref().map_or(0, |p| p.ncols()) >= ncols.min(nrows) {
            break;
        }
    }
    let psi = psi.expect("at least one pass produced candidates");

    // Rayleigh-Ritz: SVD of psi^T Z
    let mut c = DMatrix::zeros(psi.ncols(), ncols);
    for r in &blocks {
        let z = w.block(r.clone());
        c.columns_mut(r.start, r.len()).copy_from(&transpose_mul(&psi, &z));
    }
    let (u, s, vt) = thin_svd(&c)?;
    let s1 = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().take_while(|&&x| x > options.eps_rank * s1).count();
    let stored = options.r_max.map_or(rank, |m| m.min(rank));
    let sigma: Vec<f64> = s[..rank].to_vec();
    let lambda: Vec<f64> = sigma.iter().map(|x| x * x).collect();
    let weighted_modes = mul(&psi, &u.columns(0, stored).into_owned());
    let modes = w.chol.lt_solve_mat(&weighted_modes);
    let temporal = vt.columns(0, stored).into_owned();
    Ok(PodBasis {
        variable,
        sigma,
        lambda,
        modes,
        weighted_modes,
        temporal,
        total_energy,
        weight: weight.clone(),
    })
}

/// POD of one variable of a run with its natural weight.
pub fn pod_of_run(
    system: &HdgSystem,
    snaps: &SnapshotSet,
    variable: Variable,
    options: PodOptions,
) -> Result<PodBasis> {
    let source = variable_source(system, snaps, variable);
    compute_pod(source.as_ref(), variable.weight(system), variable, options)
}

impl PodBasis {
    /// Rebuilds a basis from stored singular values and modes.
    pub fn from_stored(
        variable: Variable,
        sigma: Vec<f64>,
        modes: DMatrix<f64>,
        temporal: DMatrix<f64>,
        total_energy: f64,
        weight: &BlockDiagonalMatrix,
    ) -> Result<Self> {
        if modes.nrows() != weight.dim() || modes.ncols() > sigma.len() || temporal.ncols() != modes.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} modes of length {} for {} singular values and a weight of size {}",
                modes.ncols(),
                modes.nrows(),
                sigma.len(),
                weight.dim()
            )));
        }
        let weighted_modes = weight.cholesky()?.lt_mul_mat(&modes);
        Ok(PodBasis {
            variable,
            lambda: sigma.iter().map(|s| s * s).collect(),
            sigma,
            modes,
            weighted_modes,
            temporal,
            total_energy,
            weight: weight.clone(),
        })
    }

    /// Number of singular values above the rank threshold.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Number of stored modes.
    pub fn stored(&self) -> usize {
        self.modes.ncols()
    }

    fn check_r(&self, r: usize) -> Result<()> {
        if r > self.stored() {
            return Err(Error::RankExceeded { requested: r, available: self.stored() });
        }
        Ok(())
    }

    /// Leading `r` modes `D_r`.
    pub fn leading(&self, r: usize) -> Result<DMatrix<f64>> {
        self.check_r(r)?;
        Ok(self.modes.columns(0, r).into_owned())
    }

    /// Reduced coordinates `D_r^T W y` and the projection `D_r D_r^T W y`.
    pub fn project(&self, y: &DVector<f64>, r: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_r(r)?;
        let wy = self.weight.mul_vec(y);
        let d = self.modes.columns(0, r);
        let coords = d.transpose() * wy;
        let proj = d * &coords;
        Ok((coords, proj))
    }

    /// `D_r c`.
    pub fn lift(&self, coords: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_r(coords.len())?;
        Ok(self.modes.columns(0, coords.len()) * coords)
    }

    /// `sum_{i > r} lambda_i`.
    pub fn projection_error_tail(&self, r: usize) -> Result<f64> {
        if r > self.rank() {
            return Err(Error::RankExceeded { requested: r, available: self.rank() });
        }
        Ok(self.lambda[r..].iter().rev().sum())
    }

    /// `|phi_i|_S^2` for every stored mode.
    pub fn mode_seminorms(&self, s: &BlockDiagonalMatrix) -> Vec<f64> {
        s.column_quad_forms(&self.modes)
    }

    /// `sum_{i > r} lambda_i |phi_i|_S^2`; needs every mode up to the rank.
    pub fn seminorm_tail(&self, r: usize, s: &BlockDiagonalMatrix) -> Result<f64> {
        if self.stored() < self.rank() {
            return Err(Error::InvalidArgument(format!(
                "seminorm tails need all {} modes, only {} stored",
                self.rank(),
                self.stored()
            )));
        }
        self.check_r(r)?;
        let norms = self.mode_seminorms(s);
        Ok((r..self.rank()).rev().map(|i| self.lambda[i] * norms[i]).sum())
    }

    /// `D^T W D - I`, max entry.
    pub fn orthonormality_defect(&self) -> f64 {
        let wd = self.weight.mul_mat(&self.modes);
        let gram = transpose_mul(&self.modes, &wd);
        (gram - DMatrix::identity(self.stored(), self.stored())).abs().max()
    }
}

/// `sum_n w_n |y_n - P_r y_n|_S^2` computed from the snapshots, where `S` is
/// the spatial Gram matrix of a (semi)norm. With `S = W` this is the
/// projection error whose closed form is the eigenvalue tail.
pub fn direct_projection_error(
    basis: &PodBasis,
    source: &dyn SnapshotSource,
    r: usize,
    s: &BlockDiagonalMatrix,
) -> Result<f64> {
    let d = basis.leading(r)?;
    let tw = source.time_weights();
    let mut total = 0.0;
    for block in column_blocks(source.nrows(), source.ncols(), 256 << 20) {
        let y = source.columns(block.clone());
        let coords = transpose_mul(&d, &basis.weight.mul_mat(&y));
        let resid = &y - mul(&d, &coords);
        for (c, q) in s.column_quad_forms(&resid).into_iter().enumerate() {
            total += tw[block.start + c] * q;
        }
    }
    Ok(total)
}

/// Both sides of a projection-error identity.
#[derive(Debug, Clone, Copy)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / max(lhs, lambda_1)`.
    pub relative: f64,
}

/// Compares the directly computed `S`-seminorm projection error with
/// `sum_{i>r} lambda_i |phi_i|_S^2`.
pub fn seminorm_projection_error(
    basis: &PodBasis,
    source: &dyn SnapshotSource,
    r: usize,
    s: &BlockDiagonalMatrix,
) -> Result<IdentityCheck> {
    let lhs = direct_projection_error(basis, source, r, s)?;
    let rhs = basis.seminorm_tail(r, s)?;
    let scale = lhs.max(basis.lambda.first().copied().unwrap_or(0.0)).max(f64::MIN_POSITIVE);
    Ok(IdentityCheck { lhs, rhs, relative: (lhs - rhs).abs() / scale })
}
