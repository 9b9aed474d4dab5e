//! HDG-POD reduced order model.
//!
//! With POD coefficient matrices `D1, D2, D3` the reduced system is
//!
//! ```text
//! B1 a - B2 b + B3 c = 0
//! b' + B2^T a + B4 b - B5 c = z
//! B3^T a + B5^T b - B6 c = 0
//! ```
//!
//! Eliminating `a = G b` and `c = H b` leaves `b' + A_red b = z` with
//! `A_red = B2^T G + B4 - B5 H`.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::assembly::{HdgSystem, SpaceTimeFn};
use crate::error::{Error, Result};
use crate::linalg::transpose_mul;
use crate::pod::PodBasis;

/// Reduced matrices for one choice of `(r1, r2, r3)`.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub b3: DMatrix<f64>,
    pub b4: DMatrix<f64>,
    pub b5: DMatrix<f64>,
    pub b6: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub a_red: DMatrix<f64>,
    /// Leading scalar modes `D2`, used to reduce loads and initial data.
    pub d2: DMatrix<f64>,
}

fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || lo < 1e-14 * hi {
        return Err(Error::Factorization(format!(
            "{what} is singular or badly conditioned (eigenvalues in [{lo:e}, {hi:e}])"
        )));
    }
    Ok(sym.cholesky().expect("positive eigenvalues").inverse())
}

/// `D_a^T A D_b` for a block-diagonal `A`.
fn galerkin_block(d: &DMatrix<f64>, a: &crate::assembly::BlockDiagonalMatrix) -> DMatrix<f64> {
    transpose_mul(d, &a.mul_mat(d))
}

pub fn build_reduced(
    system: &HdgSystem,
    bases: [&PodBasis; 3],
    r1: usize,
    r2: usize,
    r3: usize,
) -> Result<ReducedModel> {
    let [q, u, uh] = bases;
    if r1 == 0 || r2 == 0 || r3 == 0 {
        return Err(Error::InvalidArgument("reduced dimensions must be at least 1".into()));
    }
    let d1 = q.leading(r1)?;
    let d2 = u.leading(r2)?;
    let d3 = uh.leading(r3)?;
    let b1 = galerkin_block(&d1, &system.a1);
    let b2 = transpose_mul(&d1, &system.a2.mul_mat(&d2));
    let b3 = transpose_mul(&d1, &system.a3.mul_mat(&d3));
    let b4 = galerkin_block(&d2, &system.a4);
    let b5 = transpose_mul(&d2, &system.a5.mul_mat(&d3));
    let b6 = galerkin_block(&d3, &system.a6);

    let b1_inv = spd_inverse(&b1, "B1")?;
    let b1_inv_b2 = &b1_inv * &b2;
    let b1_inv_b3 = &b1_inv * &b3;
    let k = &b6 + b3.transpose() * &b1_inv_b3;
    let k_inv = spd_inverse(&k, "B6 + B3^T B1^-1 B3")?;
    let h = &k_inv * (b5.transpose() + b3.transpose() * &b1_inv_b2);
    let g = &b1_inv_b2 - &b1_inv_b3 * &h;
    let a_red = b2.transpose() * &g + &b4 - &b5 * &h;
    Ok(ReducedModel { r1, r2, r3, b1, b2, b3, b4, b5, b6, g, h, a_red, d2 })
}

/// `b(0) = D2^T M beta0`, the coordinates of the `M`-orthogonal projection.
pub fn reduced_initial(basis_u: &PodBasis, beta0: &DVector<f64>, r2: usize) -> Result<DVector<f64>> {
    Ok(basis_u.project(beta0, r2)?.0)
}

/// Reduced trajectory `b^1 .. b^N` (one column per step).
#[derive(Debug, Clone)]
pub struct RomTrajectory {
    pub times: Vec<f64>,
    pub b: DMatrix<f64>,
}

impl ReducedModel {
    /// `z(t) = D2^T b1(t)`.
    pub fn reduced_load(&self, system: &HdgSystem, f: &SpaceTimeFn, t: f64) -> DVector<f64> {
        self.d2.transpose() * system.project_field(f, t)
    }

    /// `a = G b`, `c = H b`.
    pub fn recover_flux_trace(&self, b: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (&self.g * b, &self.h * b)
    }

    /// Residuals of the first and third reduced rows at `(a, b, c)`.
    pub fn stationary_residuals(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> (f64, f64) {
        let r1 = &self.b1 * a - &self.b2 * b + &self.b3 * c;
        let r3 = self.b3.transpose() * a + self.b5.transpose() * b - &self.b6 * c;
        (r1.norm(), r3.norm())
    }

    /// Largest `|A_red - A_red^T|` entry, absolute and relative to the largest entry.
    pub fn asymmetry(&self) -> (f64, f64) {
        let abs = (&self.a_red - self.a_red.transpose()).amax();
        (abs, abs / self.a_red.amax().max(f64::MIN_POSITIVE))
    }

    /// Smallest eigenvalue of the symmetric part of `A_red`.
    pub fn min_symmetric_eigenvalue(&self) -> f64 {
        ((&self.a_red + self.a_red.transpose()) * 0.5).symmetric_eigen().eigenvalues.min()
    }

    pub fn b1_min_eigenvalue(&self) -> f64 {
        ((&self.b1 + self.b1.transpose()) * 0.5).symmetric_eigen().eigenvalues.min()
    }

    pub fn b6_min_eigenvalue(&self) -> f64 {
        ((&self.b6 + self.b6.transpose()) * 0.5).symmetric_eigen().eigenvalues.min()
    }

    /// Backward Euler `(I + dt A_red) b^n = b^{n-1} + dt z(t_n)` for `steps`
    /// steps. `z` is `None` for a zero source.
    pub fn run(
        &self,
        dt: f64,
        steps: usize,
        b0: &DVector<f64>,
        z: Option<&dyn Fn(f64) -> DVector<f64>>,
    ) -> Result<RomTrajectory> {
        if b0.len() != self.r2 {
            return Err(Error::DimensionMismatch(format!(
                "initial state has length {}, expected {}",
                b0.len(),
                self.r2
            )));
        }
        let lhs = DMatrix::identity(self.r2, self.r2) + &self.a_red * dt;
        let lu: LU<f64, Dyn, Dyn> = lhs.lu();
        if !lu.is_invertible() {
            return Err(Error::Factorization("I + dt A_red is singular".into()));
        }
        let mut b = DMatrix::zeros(self.r2, steps);
        let mut times = Vec::with_capacity(steps);
        let mut prev = b0.clone();
        for n in 1..=steps {
            let t = n as f64 * dt;
            let mut rhs = prev.clone();
            if let Some(z) = z {
                rhs += z(t) * dt;
            }
            let next = lu.solve(&rhs).expect("factorization is invertible");
            b.set_column(n - 1, &next);
            times.push(t);
            prev = next;
        }
        Ok(RomTrajectory { times, b })
    }
}

/// Runs the reduced model from the projected initial condition over the same
/// grid as a FOM run with `steps` steps.
pub fn rom_run(
    model: &ReducedModel,
    system: &HdgSystem,
    dt: f64,
    steps: usize,
    b0: &DVector<f64>,
    f: Option<&SpaceTimeFn>,
) -> Result<RomTrajectory> {
    match f {
        None => model.run(dt, steps, b0, None),
        Some(f) => {
            let z = |t: f64| model.reduced_load(system, f, t);
            model.run(dt, steps, b0, Some(&z))
        }
    }
}

/// Full-space coefficients `D c` of reduced coordinates `c`.
pub fn lift(basis: &PodBasis, coords: &DVector<f64>) -> Result<DVector<f64>> {
    basis.lift(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_hdg, Coefficients};
    use crate::fom::{run, RunOptions};
    use crate::mesh::build_structured_mesh;
    use crate::pod::{pod_of_run, PodOptions, Variable};
    use crate::space::{build_dof_layout, build_reference_basis};
    use std::f64::consts::PI;

    fn setup(c: f64, tau: f64) -> (HdgSystem, crate::fom::SnapshotSet, [PodBasis; 3]) {
        let mesh = build_structured_mesh(2, 3).unwrap();
        let basis = build_reference_basis(2, 1).unwrap();
        let layout = build_dof_layout(&mesh, &basis).unwrap();
        let coef = Coefficients::uniform(&mesh, c, tau);
        let s = assemble_hdg(mesh, basis, layout, coef).unwrap();
        let u0 = |p: &[f64; 3], _t: f64| (PI * p[0]).sin() * (PI * p[1]).sin() * p[0].exp() * p[1].cos();
        let snaps = run(&s, 0.02, 0.6, &|_, _| 0.0, &u0, RunOptions::default()).unwrap();
        let pods = [Variable::Flux, Variable::Scalar, Variable::Trace]
            .map(|v| pod_of_run(&s, &snaps, v, PodOptions::default()).unwrap());
        (s, snaps, pods)
    }

    #[test]
    fn structural_properties() {
        let (s, _, [q, u, uh]) = setup(0.01, 1.0);
        let m = build_reduced(&s, [&q, &u, &uh], 4, 4, 4).unwrap();
        // constant c: B1 = c I; tau = 1: B6 = I
        assert!((&m.b1 - DMatrix::identity(4, 4) * 0.01).amax() < 1e-12);
        assert!((&m.b6 - DMatrix::identity(4, 4)).amax() < 1e-10);
        assert!(m.asymmetry().1 < 1e-9);
        assert!(m.min_symmetric_eigenvalue() > -1e-9);
    }

    #[test]
    fn full_rank_matches_fom() {
        let (s, snaps, [q, u, uh]) = setup(0.5, 2.0);
        let (r1, r2, r3) = (q.rank(), u.rank(), uh.rank());
        let m = build_reduced(&s, [&q, &u, &uh], r1, r2, r3).unwrap();
        let b0 = reduced_initial(&u, &snaps.beta0, r2).unwrap();
        let traj = rom_run(&m, &s, 0.02, snaps.len(), &b0, None).unwrap();
        let flux = snaps.flux.as_ref().unwrap();
        for n in 0..snaps.len() {
            let b = traj.b.column(n).into_owned();
            let du = u.lift(&b).unwrap() - snaps.scalar.column(n);
            assert!(s.m.quad_form(&du).sqrt() < 1e-9);
            let (a, c) = m.recover_flux_trace(&b);
            let dq = q.lift(&a).unwrap() - flux.column(n);
            assert!(s.a7.quad_form(&dq).sqrt() < 1e-9);
            let (ra, rc) = m.stationary_residuals(&a, &b, &c);
            assert!(ra < 1e-10 && rc < 1e-10);
        }
        // contraction without source
        let norms: Vec<f64> = (0..snaps.len()).map(|n| traj.b.column(n).norm()).collect();
        assert!(b0.norm() >= norms[0] && norms.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let (s, _, [q, u, uh]) = setup(0.01, 1.0);
        let m = build_reduced(&s, [&q, &u, &uh], 2, 2, 2).unwrap();
        let traj = m.run(0.1, 5, &DVector::zeros(2), None).unwrap();
        assert_eq!(traj.b.amax(), 0.0);
        let (a, c) = m.recover_flux_trace(&DVector::zeros(2));
        assert_eq!(a.amax() + c.amax(), 0.0);
    }

    #[test]
    fn initial_projection_properties() {
        let (s, _, [_, u, _]) = setup(0.01, 1.0);
        let first = u.modes.column(0).into_owned();
        let b0 = reduced_initial(&u, &first, 3).unwrap();
        assert!((b0 - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-10);
        let rough = DVector::from_fn(s.layout.n2, |i, _| ((i * 13) % 7) as f64 - 3.0);
        let b = reduced_initial(&u, &rough, 5).unwrap();
        assert!(b.norm() <= s.m.quad_form(&rough).sqrt());
    }

    #[test]
    fn rejects_bad_dimensions() {
        let (s, _, [q, u, uh]) = setup(0.01, 1.0);
        assert!(build_reduced(&s, [&q, &u, &uh], 0, 1, 1).is_err());
        assert!(build_reduced(&s, [&q, &u, &uh], q.rank() + 1, 1, 1).is_err());
    }
}
