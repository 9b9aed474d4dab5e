//! Discontinuous polynomial spaces: reference bases, quadrature, element
//! geometry and the global degree-of-freedom layout for the flux, scalar and
//! trace unknowns.

pub mod quadrature;

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{Point, SimplicialMesh};
pub use quadrature::{monomial_integral, simplex_rule, QuadRule};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 6;

/// Polynomials of total degree `<= degree` in `vars` variables, orthonormal
/// in `L^2` of the reference simplex. Stored as coefficients over monomials.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    pub vars: usize,
    pub degree: usize,
    exponents: Vec<[u32; 3]>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
}

fn monomial_exponents(vars: usize, degree: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for total in 0..=degree as u32 {
        match vars {
            0 => {
                if total == 0 {
                    out.push([0, 0, 0]);
                }
            }
            1 => out.push([total, 0, 0]),
            2 => {
                for b in 0..=total {
                    out.push([total - b, b, 0]);
                }
            }
            3 => {
                for b in 0..=total {
                    for c in 0..=(total - b) {
                        out.push([total - b - c, b, c]);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl PolyBasis {
    /// Orthonormalizes monomials centred at the barycentre by two passes of
    /// Cholesky on their Gram matrix (computed with an exact rule).
    pub fn new(vars: usize, degree: usize) -> Self {
        let exponents = monomial_exponents(vars, degree);
        let nm = exponents.len();
        let mut basis = PolyBasis {
            vars,
            degree,
            exponents,
            coeffs: DMatrix::identity(nm, nm),
        };
        let rule = if vars == 0 { None } else { Some(simplex_rule(vars, 2 * degree)) };
        for _ in 0..2 {
            let gram = match &rule {
                None => DMatrix::from_element(1, 1, 1.0),
                Some(rule) => {
                    let mut g = DMatrix::<f64>::zeros(nm, nm);
                    for (p, w) in rule.points.iter().zip(&rule.weights) {
                        let v = DMatrix::from_vec(nm, 1, basis.eval(p));
                        g += (&v * v.transpose()) * *w;
                    }
                    g
                }
            };
            let chol = gram
                .cholesky()
                .expect("monomial Gram matrix is positive definite for supported degrees");
            let linv = chol
                .l()
                .solve_lower_triangular(&DMatrix::identity(nm, nm))
                .expect("triangular factor is invertible");
            basis.coeffs = linv * &basis.coeffs;
        }
        basis
    }

    fn centre(&self) -> f64 {
        1.0 / (self.vars as f64 + 1.0)
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn shifted(&self, x: &[f64; 3]) -> [f64; 3] {
        let c = self.centre();
        [x[0] - c, x[1] - c, x[2] - c]
    }

    fn monomials(&self, x: &[f64; 3]) -> Vec<f64> {
        let s = self.shifted(x);
        self.exponents
            .iter()
            .map(|e| s[0].powi(e[0] as i32) * s[1].powi(e[1] as i32) * s[2].powi(e[2] as i32))
            .collect()
    }

    /// Values of all basis functions at reference point `x`.
    pub fn eval(&self, x: &[f64; 3]) -> Vec<f64> {
        let m = self.monomials(x);
        (0..self.len())
            .map(|i| (0..m.len()).map(|a| self.coeffs[(i, a)] * m[a]).sum())
            .collect()
    }

    /// Reference gradients of all basis functions at `x`.
    pub fn eval_grad(&self, x: &[f64; 3]) -> Vec<[f64; 3]> {
        let x = &self.shifted(x);
        let dm: Vec<[f64; 3]> = self
            .exponents
            .iter()
            .map(|e| {
                let mut g = [0.0; 3];
                for (axis, gv) in g.iter_mut().enumerate().take(self.vars) {
                    if e[axis] == 0 {
                        continue;
                    }
                    let mut v = e[axis] as f64;
                    for (other, &p) in e.iter().enumerate() {
                        let p = if other == axis { p - 1 } else { p };
                        v *= x[other].powi(p as i32);
                    }
                    *gv = v;
                }
                g
            })
            .collect();
        (0..self.len())
            .map(|i| {
                let mut g = [0.0; 3];
                for (a, d) in dm.iter().enumerate() {
                    let c = self.coeffs[(i, a)];
                    g[0] += c * d[0];
                    g[1] += c * d[1];
                    g[2] += c * d[2];
                }
                g
            })
            .collect()
    }
}

/// Reference-element data for degree `k` in dimension `dim`.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub dim: usize,
    pub k: usize,
    pub scalar: PolyBasis,
    pub face: PolyBasis,
    pub elem_quad: QuadRule,
    pub face_quad: QuadRule,
    /// `scalar_values[q][i]` at element quadrature points.
    pub scalar_values: Vec<Vec<f64>>,
    /// Reference gradients at element quadrature points.
    pub scalar_grads: Vec<Vec<[f64; 3]>>,
    /// Face basis values at face quadrature points.
    pub face_values: Vec<Vec<f64>>,
}

impl ReferenceBasis {
    pub fn dim_scalar(&self) -> usize {
        self.scalar.len()
    }

    pub fn dim_face(&self) -> usize {
        self.face.len()
    }

    /// Measure of the reference face (1 for a segment, 1/2 for a triangle).
    pub fn reference_face_measure(&self) -> f64 {
        if self.dim == 2 {
            1.0
        } else {
            0.5
        }
    }
}

pub fn build_reference_basis(dim: usize, k: usize) -> Result<ReferenceBasis> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dim}")));
    }
    if k > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "polynomial degree {k} is above the supported maximum {MAX_DEGREE}"
        )));
    }
    let scalar = PolyBasis::new(dim, k);
    let face = PolyBasis::new(dim - 1, k);
    debug_assert_eq!(scalar.len(), binomial(k + dim, dim));
    debug_assert_eq!(face.len(), binomial(k + dim - 1, dim - 1));
    let elem_quad = simplex_rule(dim, 2 * k + 2);
    let face_quad = simplex_rule(dim - 1, 2 * k + 2);
    let scalar_values = elem_quad.points.iter().map(|p| scalar.eval(p)).collect();
    let scalar_grads = elem_quad.points.iter().map(|p| scalar.eval_grad(p)).collect();
    let face_values = face_quad.points.iter().map(|p| face.eval(p)).collect();
    Ok(ReferenceBasis {
        dim,
        k,
        scalar,
        face,
        elem_quad,
        face_quad,
        scalar_values,
        scalar_grads,
        face_values,
    })
}

/// Affine map `x = origin + J xi` from the reference simplex to an element.
#[derive(Debug, Clone)]
pub struct ElementMap {
    pub dim: usize,
    pub origin: Point,
    pub jac: [[f64; 3]; 3],
    pub jac_inv: [[f64; 3]; 3],
    pub det: f64,
}

impl ElementMap {
    pub fn new(mesh: &SimplicialMesh, k: usize) -> Self {
        let dim = mesh.dim;
        let elem = &mesh.elements[k];
        let origin = mesh.vertices[elem[0]];
        let mut jac = [[0.0; 3]; 3];
        for col in 0..dim {
            let v = mesh.vertices[elem[col + 1]];
            for row in 0..dim {
                jac[row][col] = v[row] - origin[row];
            }
        }
        let (det, jac_inv) = if dim == 2 {
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let mut inv = [[0.0; 3]; 3];
            inv[0][0] = jac[1][1] / det;
            inv[0][1] = -jac[0][1] / det;
            inv[1][0] = -jac[1][0] / det;
            inv[1][1] = jac[0][0] / det;
            (det, inv)
        } else {
            let m = &jac;
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let mut inv = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let (a, b) = ((j + 1) % 3, (j + 2) % 3);
                    let (c, d) = ((i + 1) % 3, (i + 2) % 3);
                    inv[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
                }
            }
            (det, inv)
        };
        ElementMap { dim, origin, jac, jac_inv, det }
    }

    pub fn to_physical(&self, xi: &[f64; 3]) -> Point {
        let mut x = self.origin;
        for (row, xr) in x.iter_mut().enumerate().take(self.dim) {
            for col in 0..self.dim {
                *xr += self.jac[row][col] * xi[col];
            }
        }
        x
    }

    pub fn to_reference(&self, x: &Point) -> [f64; 3] {
        let mut xi = [0.0; 3];
        for (row, xr) in xi.iter_mut().enumerate().take(self.dim) {
            for col in 0..self.dim {
                *xr += self.jac_inv[row][col] * (x[col] - self.origin[col]);
            }
        }
        xi
    }

    /// Physical gradient from a reference gradient: `J^{-T} g`.
    pub fn grad_to_physical(&self, g: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            for j in 0..self.dim {
                *o += self.jac_inv[j][i] * g[j];
            }
        }
        out
    }
}

/// One quadrature point on a face of an element.
#[derive(Debug, Clone)]
pub struct FacePoint {
    /// Element reference coordinates.
    pub xi: [f64; 3],
    /// Physical coordinates.
    pub x: Point,
    /// Physical weight (includes the face measure scaling).
    pub weight: f64,
    /// Index into the reference face rule, i.e. into `ReferenceBasis::face_values`.
    pub face_q: usize,
}

/// Face quadrature points of global face `f`, expressed in the reference
/// coordinates of element `map`. The face is parametrized from its sorted
/// vertex list, so both neighbours see identical points.
pub fn face_points(
    mesh: &SimplicialMesh,
    basis: &ReferenceBasis,
    map: &ElementMap,
    f: usize,
) -> Vec<FacePoint> {
    let face = &mesh.faces[f];
    let w0 = mesh.vertices[face.vertices[0]];
    let scale = face.measure / basis.reference_face_measure();
    basis
        .face_quad
        .points
        .iter()
        .zip(&basis.face_quad.weights)
        .enumerate()
        .map(|(q, (eta, w))| {
            let mut x = w0;
            for (j, &v) in face.vertices.iter().enumerate().skip(1) {
                let wj = mesh.vertices[v];
                for c in 0..3 {
                    x[c] += eta[j - 1] * (wj[c] - w0[c]);
                }
            }
            FacePoint { xi: map.to_reference(&x), x, weight: w * scale, face_q: q }
        })
        .collect()
}

/// Known sharp constant of the discrete trace inequality on simplices for
/// degree `k`: `sqrt((k+1)(k+2)/2)` in 2D and `sqrt((k+1)(k+3)/3)` in 3D.
pub fn trace_inequality_constant(dim: usize, k: usize) -> f64 {
    let k = k as f64;
    match dim {
        2 => ((k + 1.0) * (k + 2.0) / 2.0).sqrt(),
        3 => ((k + 1.0) * (k + 3.0) / 3.0).sqrt(),
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Global numbering of the flux, scalar and trace unknowns.
///
/// Scalar dofs are element-major, flux dofs are component-major
/// (`comp * N2 + scalar dof`), so the divergence coupling splits into `dim`
/// stacked element-block-diagonal pieces. Trace dofs live on interior faces only.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub dim: usize,
    pub dim_scalar: usize,
    pub dim_face: usize,
    pub num_elements: usize,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// First trace dof of each face, `None` for boundary faces.
    face_offset: Vec<Option<usize>>,
    pub interior_faces: Vec<usize>,
}

impl DofLayout {
    pub fn scalar_dof(&self, k: usize, i: usize) -> usize {
        k * self.dim_scalar + i
    }

    pub fn scalar_dofs(&self, k: usize) -> Range<usize> {
        k * self.dim_scalar..(k + 1) * self.dim_scalar
    }

    pub fn flux_dof(&self, k: usize, comp: usize, i: usize) -> usize {
        comp * self.n2 + self.scalar_dof(k, i)
    }

    /// Flux dofs of element `k` in local (component-major) order.
    pub fn flux_dofs(&self, k: usize) -> Vec<usize> {
        (0..self.dim)
            .flat_map(|comp| (0..self.dim_scalar).map(move |i| (comp, i)))
            .map(|(comp, i)| self.flux_dof(k, comp, i))
            .collect()
    }

    pub fn trace_dofs(&self, f: usize) -> Option<Range<usize>> {
        self.face_offset[f].map(|s| s..s + self.dim_face)
    }
}

pub fn build_dof_layout(mesh: &SimplicialMesh, basis: &ReferenceBasis) -> Result<DofLayout> {
    if mesh.dim != basis.dim {
        return Err(Error::DimensionMismatch(format!(
            "mesh is {}D, basis is {}D",
            mesh.dim, basis.dim
        )));
    }
    let ns = basis.dim_scalar();
    let nf = basis.dim_face();
    let mut face_offset = vec![None; mesh.num_faces()];
    let mut interior_faces = Vec::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        if !face.is_boundary() {
            face_offset[f] = Some(interior_faces.len() * nf);
            interior_faces.push(f);
        }
    }
    let n2 = ns * mesh.num_elements();
    Ok(DofLayout {
        dim: mesh.dim,
        dim_scalar: ns,
        dim_face: nf,
        num_elements: mesh.num_elements(),
        n1: mesh.dim * n2,
        n2,
        n3: nf * interior_faces.len(),
        face_offset,
        interior_faces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    #[test]
    fn basis_dimensions() {
        for (dim, k, ns, nf) in [(2, 0, 1, 1), (2, 1, 3, 2), (3, 2, 10, 6), (3, 0, 1, 1), (2, 3, 10, 4)]
        {
            let b = build_reference_basis(dim, k).unwrap();
            assert_eq!(b.dim_scalar(), ns);
            assert_eq!(b.dim_face(), nf);
            assert_eq!(ns, binomial(k + dim, dim));
            assert_eq!(nf, binomial(k + dim - 1, dim - 1));
        }
    }

    #[test]
    fn rejects_unsupported_degree() {
        let err = build_reference_basis(2, 7).unwrap_err();
        assert!(err.to_string().contains("supported maximum"));
        assert!(build_reference_basis(4, 1).is_err());
    }

    #[test]
    fn reference_bases_are_orthonormal() {
        for dim in [2, 3] {
            for k in 0..=MAX_DEGREE {
                let b = build_reference_basis(dim, k).unwrap();
                let rule = simplex_rule(dim, 2 * k);
                let ns = b.dim_scalar();
                let mut mass = DMatrix::<f64>::zeros(ns, ns);
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let v = b.scalar.eval(p);
                    for i in 0..ns {
                        for j in 0..ns {
                            mass[(i, j)] += w * v[i] * v[j];
                        }
                    }
                }
                let err = (&mass - DMatrix::identity(ns, ns)).abs().max();
                assert!(err < 1e-12, "dim={dim} k={k} err={err}");
                assert!(mass.clone().cholesky().is_some());

                let frule = simplex_rule(dim - 1, 2 * k);
                let nf = b.dim_face();
                let mut fmass = DMatrix::<f64>::zeros(nf, nf);
                for (p, w) in frule.points.iter().zip(&frule.weights) {
                    let v = b.face.eval(p);
                    for i in 0..nf {
                        for j in 0..nf {
                            fmass[(i, j)] += w * v[i] * v[j];
                        }
                    }
                }
                assert!((&fmass - DMatrix::identity(nf, nf)).abs().max() < 1e-9);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = PolyBasis::new(3, 3);
        let x = [0.21, 0.17, 0.33];
        let g = b.eval_grad(&x);
        let step = 1e-6;
        for axis in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += step;
            xm[axis] -= step;
            let vp = b.eval(&xp);
            let vm = b.eval(&xm);
            for i in 0..b.len() {
                let fd = (vp[i] - vm[i]) / (2.0 * step);
                assert!((fd - g[i][axis]).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn dof_counts() {
        let mesh = build_structured_mesh(2, 1).unwrap();
        let b = build_reference_basis(2, 1).unwrap();
        let l = build_dof_layout(&mesh, &b).unwrap();
        assert_eq!((l.n1, l.n2, l.n3), (24, 12, 8));

        let mesh = build_structured_mesh(2, 32).unwrap();
        let l = build_dof_layout(&mesh, &b).unwrap();
        assert_eq!(l.n2, 3 * 4096);

        let cube = build_structured_mesh(3, 1).unwrap();
        let b3 = build_reference_basis(3, 1).unwrap();
        let l = build_dof_layout(&cube, &b3).unwrap();
        assert_eq!(l.n2, 24);
        assert_eq!(l.n3, 3 * 6);
    }

    #[test]
    fn index_maps_are_bijections() {
        let mesh = build_structured_mesh(3, 2).unwrap();
        let b = build_reference_basis(3, 1).unwrap();
        let l = build_dof_layout(&mesh, &b).unwrap();
        let mut seen = vec![false; l.n1];
        for k in 0..l.num_elements {
            for d in l.flux_dofs(k) {
                assert!(!seen[d]);
                seen[d] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        let mut seen = vec![false; l.n3];
        for f in 0..mesh.num_faces() {
            match l.trace_dofs(f) {
                Some(r) => r.for_each(|d| {
                    assert!(!seen[d]);
                    seen[d] = true;
                }),
                None => assert!(mesh.faces[f].is_boundary()),
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let mesh = build_structured_mesh(2, 1).unwrap();
        let b = build_reference_basis(3, 1).unwrap();
        assert!(build_dof_layout(&mesh, &b).is_err());
    }

    #[test]
    fn face_points_agree_from_both_sides() {
        for dim in [2, 3] {
            let mesh = build_structured_mesh(dim, 2).unwrap();
            let b = build_reference_basis(dim, 2).unwrap();
            let poly = |x: &Point| 1.0 + x[0] * x[0] * x[1] - 3.0 * x[2] * x[0] + x[1].powi(4);
            for (f, face) in mesh.faces.iter().enumerate() {
                let Some((right, _)) = face.right else { continue };
                let left_map = ElementMap::new(&mesh, face.left);
                let right_map = ElementMap::new(&mesh, right);
                let from_left = face_points(&mesh, &b, &left_map, f);
                let from_right = face_points(&mesh, &b, &right_map, f);
                let il: f64 = from_left.iter().map(|p| p.weight * poly(&left_map.to_physical(&p.xi))).sum();
                let ir: f64 =
                    from_right.iter().map(|p| p.weight * poly(&right_map.to_physical(&p.xi))).sum();
                assert!((il - ir).abs() < 1e-12 * (1.0 + il.abs()));
            }
        }
    }

    #[test]
    fn element_map_round_trip() {
        let mesh = build_structured_mesh(3, 2).unwrap();
        let map = ElementMap::new(&mesh, 5);
        let xi = [0.1, 0.2, 0.3];
        let back = map.to_reference(&map.to_physical(&xi));
        for c in 0..3 {
            assert!((back[c] - xi[c]).abs() < 1e-14);
        }
        assert!((map.det.abs() / 6.0 - mesh.element_volume(5)).abs() < 1e-14);
    }
}
