//! Full-order HDG time stepping: backward Euler with element-local static
//! condensation onto the trace unknown.
//!
//! Per step the unknowns satisfy
//!
//! ```text
//! A1 a - A2 b + A3 g = 0
//! A2^T a + (M/dt + A4) b - A5 g = b1(t_n) + M b_prev / dt
//! A3^T a + A5^T b - A6 g = 0
//! ```
//!
//! Eliminating `a` and `b` element by element leaves `S g = rhs` with the
//! symmetric negative definite `S = A3^T At1 + A5^T At2 - A6`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{HdgSystem, SpaceTimeFn};
use crate::error::{Error, Result};
use crate::linalg::{flush_subnormals, SparseCholesky};

/// Element-local pieces of the condensed step.
#[derive(Debug, Clone)]
struct LocalSolver {
    flux_dofs: Vec<usize>,
    scalar_dofs: Range<usize>,
    trace_dofs: Vec<usize>,
    mass_over_dt: DMatrix<f64>,
    q_inv: DMatrix<f64>,
    /// `A1^{-1} A2`
    p: DMatrix<f64>,
    /// `A1^{-1} A3`
    f: DMatrix<f64>,
    /// `Q^{-1} (A5 + A2^T A1^{-1} A3)`
    at2: DMatrix<f64>,
    /// `-(A3^T A1^{-1} A2 + A5^T) Q^{-1}`: maps the local load to the trace rhs.
    r: DMatrix<f64>,
}

/// Backward-Euler stepper with the trace system `-S` factorized once.
pub struct CondensedStepper {
    pub dt: f64,
    n1: usize,
    n2: usize,
    n3: usize,
    locals: Vec<LocalSolver>,
    neg_s: SparseCholesky,
    s_triplets: Vec<(usize, usize, f64)>,
}

/// One backward-Euler state.
#[derive(Debug, Clone)]
pub struct StepState {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
}

/// `M beta0 = b2`.
pub fn solve_initial(system: &HdgSystem, b2: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(system.m.cholesky()?.solve(b2))
}

fn invert(m: &DMatrix<f64>, what: &str, k: usize) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let chol = sym
        .cholesky()
        .ok_or_else(|| Error::Factorization(format!("{what} block of element {k} is not SPD")))?;
    Ok(chol.inverse())
}

pub fn condense(system: &HdgSystem, dt: f64) -> Result<CondensedStepper> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let mut locals = Vec::with_capacity(system.elements.len());
    let mut s_triplets = Vec::new();
    for (k, e) in system.elements.iter().enumerate() {
        let a1_inv = invert(&e.a1, "A1", k)?;
        let p = &a1_inv * &e.a2;
        let f = &a1_inv * &e.a3;
        let mass_over_dt = &e.mass / dt;
        let q = e.a2.transpose() * &p + &mass_over_dt + &e.a4;
        let q_inv = invert(&q, "Q", k)?;
        let ecoup = &e.a5 + e.a2.transpose() * &f;
        let at2 = &q_inv * &ecoup;
        let at1 = &p * &at2 - &f;
        let s_local = e.a3.transpose() * &at1 + e.a5.transpose() * &at2 - &e.a6;
        let r = -(ecoup.transpose() * &q_inv);
        for (i, &gi) in e.trace_dofs.iter().enumerate() {
            for (j, &gj) in e.trace_dofs.iter().enumerate() {
                s_triplets.push((gi, gj, s_local[(i, j)]));
            }
        }
        locals.push(LocalSolver {
            flux_dofs: e.flux_dofs.clone(),
            scalar_dofs: e.scalar_dofs.clone(),
            trace_dofs: e.trace_dofs.clone(),
            mass_over_dt,
            q_inv,
            p,
            f,
            at2,
            r,
        });
    }
    let n3 = system.layout.n3;
    let neg: Vec<_> = s_triplets.iter().map(|&(r, c, v)| (r, c, -v)).collect();
    let neg_s = SparseCholesky::factorize(n3, &neg)
        .map_err(|e| Error::Factorization(format!("condensed trace matrix: {e}")))?;
    Ok(CondensedStepper {
        dt,
        n1: system.layout.n1,
        n2: system.layout.n2,
        n3,
        locals,
        neg_s,
        s_triplets,
    })
}

impl CondensedStepper {
    /// The assembled condensed trace matrix `S` as triplets (duplicates summed
    /// by the consumer).
    pub fn s_triplets(&self) -> &[(usize, usize, f64)] {
        &self.s_triplets
    }

    /// Solves `S x = y`.
    pub fn solve_trace(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut x = -y;
        self.neg_s.solve_in_place(&mut x);
        x
    }

    /// Advances one step from `beta_prev` with load `b1 = b1(t_n)`.
    pub fn step(&self, beta_prev: &DVector<f64>, b1: &DVector<f64>) -> StepState {
        assert_eq!(beta_prev.len(), self.n2);
        assert_eq!(b1.len(), self.n2);
        let mut rhs = DVector::zeros(self.n3);
        let mut bt2_all: Vec<DVector<f64>> = Vec::with_capacity(self.locals.len());
        for loc in &self.locals {
            let ns = loc.scalar_dofs.len();
            let prev = beta_prev.rows(loc.scalar_dofs.start, ns);
            let g = b1.rows(loc.scalar_dofs.start, ns) + &loc.mass_over_dt * prev;
            let rg = &loc.r * &g;
            for (i, &d) in loc.trace_dofs.iter().enumerate() {
                rhs[d] += rg[i];
            }
            bt2_all.push(&loc.q_inv * g);
        }
        // -S gamma = -rhs
        let mut gamma = -rhs;
        self.neg_s.solve_in_place(&mut gamma);

        let mut alpha = DVector::zeros(self.n1);
        let mut beta = DVector::zeros(self.n2);
        for (loc, bt2) in self.locals.iter().zip(bt2_all) {
            let gl = DVector::from_iterator(loc.trace_dofs.len(), loc.trace_dofs.iter().map(|&d| gamma[d]));
            let b = bt2 + &loc.at2 * &gl;
            let a = &loc.p * &b - &loc.f * &gl;
            for (i, d) in loc.scalar_dofs.clone().enumerate() {
                beta[d] = b[i];
            }
            for (i, &d) in loc.flux_dofs.iter().enumerate() {
                alpha[d] = a[i];
            }
        }
        for v in [&mut alpha, &mut beta, &mut gamma] {
            flush_subnormals(v.as_mut_slice());
        }
        StepState { alpha, beta, gamma }
    }
}

/// Flux recovered from scalar and trace through the first block row,
/// `alpha = A1^{-1} (A2 beta - A3 gamma)`.
pub fn derive_flux(system: &HdgSystem, beta: &DVector<f64>, gamma: &DVector<f64>) -> DVector<f64> {
    let mut alpha = DVector::zeros(system.layout.n1);
    for (k, e) in system.elements.iter().enumerate() {
        let ns = e.scalar_dofs.len();
        let b = beta.rows(e.scalar_dofs.start, ns).into_owned();
        let g = DVector::from_iterator(e.trace_dofs.len(), e.trace_dofs.iter().map(|&d| gamma[d]));
        let rhs = &e.a2 * b - &e.a3 * g;
        let chol = e.a1.clone().cholesky().unwrap_or_else(|| panic!("A1 block {k} is SPD"));
        let a = chol.solve(&rhs);
        for (i, &d) in e.flux_dofs.iter().enumerate() {
            alpha[d] = a[i];
        }
    }
    alpha
}

/// Relative residual of the three block rows of one backward-Euler step.
pub fn step_residual(
    system: &HdgSystem,
    dt: f64,
    beta_prev: &DVector<f64>,
    b1: &DVector<f64>,
    state: &StepState,
) -> f64 {
    let (a, b, g) = (&state.alpha, &state.beta, &state.gamma);
    let r1 = system.a1.mul_vec(a) - system.a2.mul_vec(b) + system.a3.mul_vec(g);
    let rhs2 = b1 + system.m.mul_vec(beta_prev) / dt;
    let r2 = system.a2.tr_mul_vec(a) + system.m.mul_vec(b) / dt + system.a4.mul_vec(b)
        - system.a5.mul_vec(g)
        - &rhs2;
    let r3 = system.a3.tr_mul_vec(a) + system.a5.tr_mul_vec(b) - system.a6.mul_vec(g);
    let scale = (system.a1.mul_vec(a).norm() + system.m.mul_vec(b).norm() / dt + rhs2.norm())
        .max(f64::MIN_POSITIVE);
    (r1.norm() + r2.norm() + r3.norm()) / scale
}

/// Reference step solving the uncondensed saddle system densely. Only
/// practical on small meshes; used to validate the condensed stepper.
pub fn monolithic_step(
    system: &HdgSystem,
    dt: f64,
    beta_prev: &DVector<f64>,
    b1: &DVector<f64>,
) -> Result<StepState> {
    let (n1, n2, n3) = (system.layout.n1, system.layout.n2, system.layout.n3);
    let n = n1 + n2 + n3;
    let mut k = DMatrix::<f64>::zeros(n, n);
    let a1 = system.a1.to_dense();
    let a2 = system.a2.to_dense();
    let a3 = system.a3.to_dense();
    let a5 = system.a5.to_dense();
    let mdt = system.m.to_dense() / dt;
    k.view_mut((0, 0), (n1, n1)).copy_from(&a1);
    k.view_mut((0, n1), (n1, n2)).copy_from(&(-&a2));
    k.view_mut((0, n1 + n2), (n1, n3)).copy_from(&a3);
    k.view_mut((n1, 0), (n2, n1)).copy_from(&a2.transpose());
    k.view_mut((n1, n1), (n2, n2)).copy_from(&(&mdt + system.a4.to_dense()));
    k.view_mut((n1, n1 + n2), (n2, n3)).copy_from(&(-&a5));
    k.view_mut((n1 + n2, 0), (n3, n1)).copy_from(&a3.transpose());
    k.view_mut((n1 + n2, n1), (n3, n2)).copy_from(&a5.transpose());
    k.view_mut((n1 + n2, n1 + n2), (n3, n3)).copy_from(&(-system.a6.to_dense()));
    let mut rhs = DVector::zeros(n);
    rhs.rows_mut(n1, n2).copy_from(&(b1 + &mdt * beta_prev));
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Factorization("monolithic saddle system is singular".into()))?;
    Ok(StepState {
        alpha: x.rows(0, n1).into_owned(),
        beta: x.rows(n1, n2).into_owned(),
        gamma: x.rows(n1 + n2, n3).into_owned(),
    })
}

/// Which snapshots are kept from a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Retention {
    /// Keep every `cadence`-th step (1 keeps all).
    pub cadence: usize,
    /// Store flux coefficients; otherwise they are rebuilt on demand from
    /// scalar and trace with [`derive_flux`].
    pub store_flux: bool,
}

impl Default for Retention {
    fn default() -> Self {
        Retention { cadence: 1, store_flux: true }
    }
}

/// Time-indexed coefficient snapshots at `t_1 .. t_N` (the initial state is
/// kept separately in `beta0`).
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub dt: f64,
    pub times: Vec<f64>,
    pub flux: Option<DMatrix<f64>>,
    pub scalar: DMatrix<f64>,
    pub trace: DMatrix<f64>,
    pub beta0: DVector<f64>,
    /// `beta^T M beta` at every step including `t_0`.
    pub energy: Vec<f64>,
    /// Largest per-step relative residual, when checked.
    pub max_residual: Option<f64>,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Uniform time quadrature weight of each retained snapshot.
    pub fn time_weights(&self) -> Vec<f64> {
        if self.times.is_empty() {
            return Vec::new();
        }
        let spacing = if self.times.len() > 1 { self.times[1] - self.times[0] } else { self.times[0] };
        vec![spacing; self.times.len()]
    }

    pub fn flux_column(&self, system: &HdgSystem, j: usize) -> DVector<f64> {
        match &self.flux {
            Some(y) => y.column(j).into_owned(),
            None => derive_flux(
                system,
                &self.scalar.column(j).into_owned(),
                &self.trace.column(j).into_owned(),
            ),
        }
    }

    pub fn flux_columns(&self, system: &HdgSystem, cols: Range<usize>) -> DMatrix<f64> {
        match &self.flux {
            Some(y) => y.columns(cols.start, cols.len()).into_owned(),
            None => {
                let mut out = DMatrix::zeros(system.layout.n1, cols.len());
                for (c, j) in cols.enumerate() {
                    out.set_column(c, &self.flux_column(system, j));
                }
                out
            }
        }
    }
}

/// Options for [`run`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub retention: Retention,
    /// Evaluate the residual of every step (costly, for verification).
    pub check_residual: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { retention: Retention::default(), check_residual: false }
    }
}

/// Number of steps for horizon `t_final`; rejects non-integral ratios.
pub fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and T > 0, got dt={dt}, T={t_final}"
        )));
    }
    let ratio = t_final / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
        return Err(Error::InvalidArgument(format!("T/dt = {ratio} is not a positive integer")));
    }
    Ok(n as usize)
}

pub fn run(
    system: &HdgSystem,
    dt: f64,
    t_final: f64,
    f: &SpaceTimeFn,
    u0: &SpaceTimeFn,
    options: RunOptions,
) -> Result<SnapshotSet> {
    let steps = step_count(dt, t_final)?;
    let cadence = options.retention.cadence;
    if cadence == 0 {
        return Err(Error::InvalidArgument("snapshot cadence must be at least 1".into()));
    }
    let stepper = condense(system, dt)?;
    let beta0 = solve_initial(system, &crate::assembly::assemble_init(system, u0))?;
    let kept = steps / cadence;
    let (n1, n2, n3) = (system.layout.n1, system.layout.n2, system.layout.n3);
    let mut flux = options.retention.store_flux.then(|| DMatrix::zeros(n1, kept));
    let mut scalar = DMatrix::zeros(n2, kept);
    let mut trace = DMatrix::zeros(n3, kept);
    let mut times = Vec::with_capacity(kept);
    let mut energy = vec![system.m.quad_form(&beta0)];
    let mut max_residual = options.check_residual.then_some(0.0f64);

    let mut beta = beta0.clone();
    for n in 1..=steps {
        let t = n as f64 * dt;
        let b1 = crate::assembly::assemble_load(system, f, t);
        let state = stepper.step(&beta, &b1);
        if let Some(res) = max_residual.as_mut() {
            *res = res.max(step_residual(system, dt, &beta, &b1, &state));
        }
        energy.push(system.m.quad_form(&state.beta));
        if n % cadence == 0 && times.len() < kept {
            let j = times.len();
            if let Some(y) = flux.as_mut() {
                y.set_column(j, &state.alpha);
            }
            scalar.set_column(j, &state.beta);
            trace.set_column(j, &state.gamma);
            times.push(t);
        }
        beta = state.beta;
    }
    Ok(SnapshotSet { dt, times, flux, scalar, trace, beta0, energy, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_hdg, assemble_init, Coefficients};
    use crate::mesh::build_structured_mesh;
    use crate::space::{build_dof_layout, build_reference_basis};
    use std::f64::consts::PI;

    fn system(dim: usize, n: usize, k: usize, c: f64) -> HdgSystem {
        let mesh = build_structured_mesh(dim, n).unwrap();
        let basis = build_reference_basis(dim, k).unwrap();
        let layout = build_dof_layout(&mesh, &basis).unwrap();
        let coef = Coefficients::uniform(&mesh, c, 1.0);
        assemble_hdg(mesh, basis, layout, coef).unwrap()
    }

    fn bump(p: &[f64; 3], _t: f64) -> f64 {
        (PI * p[0]).sin() * (PI * p[1]).sin() * p[0].exp() * p[1].cos()
    }

    #[test]
    fn condensed_step_matches_monolithic() {
        for (dim, n, k) in [(2, 2, 0), (2, 2, 1), (3, 1, 1)] {
            let s = system(dim, n, k, 0.5);
            let dt = 0.05;
            let stepper = condense(&s, dt).unwrap();
            let mut beta = solve_initial(&s, &assemble_init(&s, &bump)).unwrap();
            let b1 = s.project_field(&|p, _| p[0] + 1.0, 0.0);
            for _ in 0..3 {
                let a = stepper.step(&beta, &b1);
                let b = monolithic_step(&s, dt, &beta, &b1).unwrap();
                let diff = (&a.alpha - &b.alpha)
                    .amax()
                    .max((&a.beta - &b.beta).amax())
                    .max((&a.gamma - &b.gamma).amax());
                assert!(diff < 1e-10, "dim={dim} k={k} diff={diff}");
                assert!(step_residual(&s, dt, &beta, &b1, &a) < 1e-10);
                beta = a.beta;
            }
        }
    }

    #[test]
    fn trace_matrix_is_symmetric_and_invertible() {
        let s = system(2, 1, 1, 1.0);
        let stepper = condense(&s, 0.1).unwrap();
        assert_eq!(s.layout.n3, 8);
        let mut dense = DMatrix::<f64>::zeros(8, 8);
        for &(r, c, v) in stepper.s_triplets() {
            dense[(r, c)] += v;
        }
        assert!((&dense - dense.transpose()).abs().max() < 1e-12);
        let y = DVector::from_fn(8, |i, _| (i as f64 * 0.7).cos());
        let x = stepper.solve_trace(&y);
        assert!((&dense * x - &y).norm() / y.norm() < 1e-10);
        // negative definite
        assert!(dense.symmetric_eigen().eigenvalues.max() < 0.0);
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = system(2, 2, 1, 1.0);
        let snaps = run(&s, 0.1, 0.5, &|_, _| 0.0, &|_, _| 0.0, RunOptions::default()).unwrap();
        assert_eq!(snaps.len(), 5);
        assert_eq!(snaps.scalar.amax(), 0.0);
        assert_eq!(snaps.flux.unwrap().amax(), 0.0);
    }

    #[test]
    fn energy_decays_without_source() {
        let s = system(2, 4, 1, 0.01);
        let opts = RunOptions { check_residual: true, ..Default::default() };
        let snaps = run(&s, 0.01, 0.2, &|_, _| 0.0, &bump, opts).unwrap();
        assert!(snaps.energy.windows(2).all(|w| w[1] <= w[0]));
        assert!(snaps.max_residual.unwrap() < 1e-9);
    }

    #[test]
    fn derived_flux_matches_stored() {
        let s = system(2, 2, 1, 0.3);
        let opts = RunOptions { retention: Retention { cadence: 2, store_flux: true }, ..Default::default() };
        let snaps = run(&s, 0.05, 0.4, &|_, _| 1.0, &bump, opts).unwrap();
        assert_eq!(snaps.len(), 4);
        assert!((snaps.times[0] - 0.1).abs() < 1e-14);
        let stored = snaps.flux.clone().unwrap();
        let mut derived = snaps.clone();
        derived.flux = None;
        let d = derived.flux_columns(&s, 0..4);
        assert!((d - stored).amax() < 1e-10);
    }

    #[test]
    fn step_count_requires_integral_ratio() {
        assert_eq!(step_count(0.001, 1.0).unwrap(), 1000);
        assert_eq!(step_count(0.5, 0.5).unwrap(), 1);
        assert!(step_count(0.3, 1.0).is_err());
        assert!(step_count(0.0, 1.0).is_err());
    }

    #[test]
    fn initial_projection_of_member_is_exact() {
        let s = system(2, 2, 2, 1.0);
        let target = DVector::from_fn(s.layout.n2, |i, _| ((i * 7) % 5) as f64 - 2.0);
        let b2 = s.m.mul_vec(&target);
        let beta0 = solve_initial(&s, &b2).unwrap();
        assert!((beta0 - target).amax() < 1e-12);
    }
}
