//! Structured simplicial meshes of the unit square and the unit cube.
//!
//! 2D meshes split each grid square into four triangles through its center,
//! 3D meshes split each grid cube into six tetrahedra along the main diagonal
//! (Kuhn split). Both are conforming.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Coordinates are stored padded to three components; the third is zero in 2D.
pub type Point = [f64; 3];

#[derive(Debug, Clone)]
pub struct Face {
    /// Vertex ids sorted ascending. This order fixes the face parametrization
    /// used by the trace space, so both neighbours see the same face basis.
    pub vertices: Vec<usize>,
    pub left: usize,
    pub left_local: usize,
    /// `(element, local face index)` of the right neighbour, `None` on the boundary.
    pub right: Option<(usize, usize)>,
    /// Unit normal pointing out of `left`.
    pub normal: Point,
    /// Length (2D) or area (3D).
    pub measure: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// `dim + 1` vertex ids per element, positively oriented.
    pub elements: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    /// `element_faces[k][i]` is the face opposite local vertex `i` of element `k`.
    pub element_faces: Vec<Vec<usize>>,
    pub h_per_element: Vec<f64>,
    pub h: f64,
    /// Subdivisions per axis used to build the mesh.
    pub n: usize,
}

/// Builds the structured mesh of the unit box with `n` subdivisions per axis.
pub fn build_structured_mesh(dim: usize, n: usize) -> Result<SimplicialMesh> {
    if n < 1 {
        return Err(Error::InvalidArgument(format!("subdivisions must be >= 1, got {n}")));
    }
    let (vertices, elements) = match dim {
        2 => union_jack_grid(n),
        3 => kuhn_grid(n),
        _ => return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dim}"))),
    };
    Ok(SimplicialMesh::from_elements(dim, n, vertices, elements))
}

fn union_jack_grid(n: usize) -> (Vec<Point>, Vec<Vec<usize>>) {
    let h = 1.0 / n as f64;
    let corner = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h, 0.0]);
        }
    }
    let mut elements = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let center = vertices.len();
            vertices.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, 0.0]);
            let a = corner(i, j);
            let b = corner(i + 1, j);
            let c = corner(i + 1, j + 1);
            let d = corner(i, j + 1);
            elements.push(vec![a, b, center]);
            elements.push(vec![b, c, center]);
            elements.push(vec![c, d, center]);
            elements.push(vec![d, a, center]);
        }
    }
    (vertices, elements)
}

fn kuhn_grid(n: usize) -> (Vec<Point>, Vec<Vec<usize>>) {
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    const PERMUTATIONS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut elements = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMUTATIONS {
                    let mut offset = [0usize; 3];
                    let mut tet = vec![id(i, j, k)];
                    for axis in perm {
                        offset[axis] = 1;
                        tet.push(id(i + offset[0], j + offset[1], k + offset[2]));
                    }
                    if signed_volume(&vertices, &tet) < 0.0 {
                        tet.swap(2, 3);
                    }
                    elements.push(tet);
                }
            }
        }
    }
    (vertices, elements)
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

/// Signed area (2D) or volume (3D) of a simplex given by vertex ids.
pub fn signed_volume(vertices: &[Point], simplex: &[usize]) -> f64 {
    let p0 = &vertices[simplex[0]];
    let e1 = sub(&vertices[simplex[1]], p0);
    let e2 = sub(&vertices[simplex[2]], p0);
    match simplex.len() {
        3 => 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]),
        4 => {
            let e3 = sub(&vertices[simplex[3]], p0);
            dot(&e1, &cross(&e2, &e3)) / 6.0
        }
        len => panic!("unsupported simplex with {len} vertices"),
    }
}

impl SimplicialMesh {
    fn from_elements(
        dim: usize,
        n: usize,
        vertices: Vec<Point>,
        elements: Vec<Vec<usize>>,
    ) -> Self {
        let mut faces: Vec<Face> = Vec::new();
        let mut element_faces = vec![vec![usize::MAX; dim + 1]; elements.len()];
        let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();

        for (k, elem) in elements.iter().enumerate() {
            for local in 0..=dim {
                let mut key: Vec<usize> = elem
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != local)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                match lookup.get(&key) {
                    Some(&f) => {
                        faces[f].right = Some((k, local));
                        element_faces[k][local] = f;
                    }
                    None => {
                        let (normal, measure) =
                            outward_normal(&vertices, &key, &vertices[elem[local]]);
                        let f = faces.len();
                        lookup.insert(key.clone(), f);
                        faces.push(Face {
                            vertices: key,
                            left: k,
                            left_local: local,
                            right: None,
                            normal,
                            measure,
                        });
                        element_faces[k][local] = f;
                    }
                }
            }
        }

        let h_per_element: Vec<f64> = elements
            .iter()
            .map(|elem| {
                let mut diam: f64 = 0.0;
                for a in 0..elem.len() {
                    for b in a + 1..elem.len() {
                        diam = diam.max(norm(&sub(&vertices[elem[a]], &vertices[elem[b]])));
                    }
                }
                diam
            })
            .collect();
        let h = h_per_element.iter().cloned().fold(0.0, f64::max);

        SimplicialMesh { dim, vertices, elements, faces, element_faces, h_per_element, h, n }
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn element_volume(&self, k: usize) -> f64 {
        signed_volume(&self.vertices, &self.elements[k])
    }

    /// Outward unit normal of element `k` on its local face `local`.
    pub fn outward_normal(&self, k: usize, local: usize) -> Point {
        let face = &self.faces[self.element_faces[k][local]];
        if face.left == k {
            face.normal
        } else {
            [-face.normal[0], -face.normal[1], -face.normal[2]]
        }
    }

    /// Total boundary measure of element `k`.
    pub fn element_boundary_measure(&self, k: usize) -> f64 {
        self.element_faces[k].iter().map(|&f| self.faces[f].measure).sum()
    }

    /// Whether every vertex of face `f` lies on the boundary of the unit box.
    pub fn face_on_box_boundary(&self, f: usize) -> bool {
        let verts = &self.faces[f].vertices;
        (0..self.dim).any(|axis| {
            [0.0, 1.0].iter().any(|&side| {
                verts.iter().all(|&v| (self.vertices[v][axis] - side).abs() < 1e-12)
            })
        })
    }

    /// SHA-256 over dimension, coordinates and connectivity, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        for p in &self.vertices {
            for c in p {
                hasher.update(c.to_le_bytes());
            }
        }
        for elem in &self.elements {
            for &v in elem {
                hasher.update((v as u64).to_le_bytes());
            }
        }
        hasher.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Plain-text dump: header `dim n_vertices n_elements n_faces`, then
    /// vertices, elements and face records (`vertices left right nx ny [nz]`,
    /// with `right = -1` on the boundary). Indices are 0-based.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {}",
            self.dim,
            self.vertices.len(),
            self.elements.len(),
            self.faces.len()
        );
        for p in &self.vertices {
            let coords: Vec<String> = p[..self.dim].iter().map(|c| format!("{c:.17e}")).collect();
            let _ = writeln!(out, "{}", coords.join(" "));
        }
        for elem in &self.elements {
            let ids: Vec<String> = elem.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", ids.join(" "));
        }
        for face in &self.faces {
            let mut fields: Vec<String> = face.vertices.iter().map(|v| v.to_string()).collect();
            fields.push(face.left.to_string());
            fields.push(face.right.map_or("-1".to_string(), |(k, _)| k.to_string()));
            fields.extend(face.normal[..self.dim].iter().map(|c| format!("{c:.17e}")));
            let _ = writeln!(out, "{}", fields.join(" "));
        }
        out
    }
}

fn outward_normal(vertices: &[Point], face: &[usize], opposite: &Point) -> (Point, f64) {
    let p0 = &vertices[face[0]];
    let e1 = sub(&vertices[face[1]], p0);
    let (mut normal, measure) = if face.len() == 2 {
        let len = norm(&e1);
        ([e1[1] / len, -e1[0] / len, 0.0], len)
    } else {
        let e2 = sub(&vertices[face[2]], p0);
        let c = cross(&e1, &e2);
        let len = norm(&c);
        ([c[0] / len, c[1] / len, c[2] / len], 0.5 * len)
    };
    if dot(&normal, &sub(opposite, p0)) > 0.0 {
        normal = [-normal[0], -normal[1], -normal[2]];
    }
    (normal, measure)
}

/// Splits face ids into `(interior, boundary)`.
pub fn classify_faces(mesh: &SimplicialMesh) -> (Vec<usize>, Vec<usize>) {
    (0..mesh.faces.len()).partition(|&f| !mesh.faces[f].is_boundary())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_square_mesh() {
        let mesh = build_structured_mesh(2, 1).unwrap();
        assert_eq!(mesh.num_elements(), 4);
        let (interior, boundary) = classify_faces(&mesh);
        assert_eq!(interior.len(), 4);
        assert_eq!(boundary.len(), 4);
        let area: f64 = (0..4).map(|k| mesh.element_volume(k)).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preset_element_counts() {
        assert_eq!(build_structured_mesh(2, 32).unwrap().num_elements(), 4096);
        assert_eq!(build_structured_mesh(3, 16).unwrap().num_elements(), 24576);
    }

    #[test]
    fn boundary_face_counts() {
        let mesh = build_structured_mesh(2, 32).unwrap();
        assert_eq!(classify_faces(&mesh).1.len(), 128);
        let cube = build_structured_mesh(3, 1).unwrap();
        let (interior, boundary) = classify_faces(&cube);
        assert_eq!(boundary.len(), 12);
        assert_eq!(interior.len(), 6);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_structured_mesh(4, 2).is_err());
        assert!(build_structured_mesh(1, 2).is_err());
        assert!(build_structured_mesh(2, 0).is_err());
    }

    fn check_invariants(mesh: &SimplicialMesh) {
        let total: f64 = (0..mesh.num_elements()).map(|k| mesh.element_volume(k)).sum();
        assert!((total - 1.0).abs() < 1e-12, "volume {total}");
        for k in 0..mesh.num_elements() {
            assert!(mesh.element_volume(k) > 0.0);
        }
        for (f, face) in mesh.faces.iter().enumerate() {
            assert!((norm(&face.normal) - 1.0).abs() < 1e-12);
            assert_eq!(face.is_boundary(), mesh.face_on_box_boundary(f));
            if let Some((k, local)) = face.right {
                let nl = mesh.outward_normal(face.left, face.left_local);
                let nr = mesh.outward_normal(k, local);
                for c in 0..3 {
                    assert!((nl[c] + nr[c]).abs() < 1e-12);
                }
                let mut from_right: Vec<usize> = mesh.elements[k]
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != local)
                    .map(|(_, &v)| v)
                    .collect();
                from_right.sort_unstable();
                assert_eq!(from_right, face.vertices);
            }
        }
        let hmax = mesh.h_per_element.iter().cloned().fold(0.0, f64::max);
        assert_eq!(hmax, mesh.h);
    }

    #[test]
    fn mesh_invariants_hold() {
        for (dim, n) in [(2, 1), (2, 3), (2, 8), (3, 1), (3, 2), (3, 3)] {
            check_invariants(&build_structured_mesh(dim, n).unwrap());
        }
    }

    #[test]
    fn every_face_has_one_or_two_elements() {
        let mesh = build_structured_mesh(3, 3).unwrap();
        let mut count = vec![0usize; mesh.num_faces()];
        for faces in &mesh.element_faces {
            for &f in faces {
                count[f] += 1;
            }
        }
        for (f, c) in count.iter().enumerate() {
            let expected = if mesh.faces[f].is_boundary() { 1 } else { 2 };
            assert_eq!(*c, expected);
        }
    }

    #[test]
    fn diameters() {
        let mesh = build_structured_mesh(2, 1).unwrap();
        assert!((mesh.h - 1.0).abs() < 1e-14);
        let cube = build_structured_mesh(3, 2).unwrap();
        assert!((cube.h - 0.5 * 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn dump_header() {
        let mesh = build_structured_mesh(2, 1).unwrap();
        let text = mesh.dump();
        assert_eq!(text.lines().next().unwrap(), "2 5 4 8");
        assert_eq!(text.lines().count(), 1 + 5 + 4 + 8);
    }
}
