//! Collapsed-coordinate Gauss rules on reference simplices.

use std::f64::consts::PI;

/// Quadrature rule on a reference simplex. Points are padded to three
/// coordinates; only the first `dim` are meaningful.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Newton iteration on P_m from the Chebyshev-like initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        // Map from [-1, 1] to [0, 1].
        nodes[m - 1 - i] = 0.5 * (x + 1.0);
        weights[m - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=m {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Rule on the reference simplex `{x_i >= 0, sum x_i <= 1}` of dimension
/// `dim` (1, 2 or 3), exact for polynomials of total degree `degree`.
pub fn simplex_rule(dim: usize, degree: usize) -> QuadRule {
    // The Duffy Jacobian adds up to dim - 1 powers in the first collapsed variable.
    let m = (degree + dim).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            for i in 0..m {
                points.push([x[i], 0.0, 0.0]);
                weights.push(w[i]);
            }
        }
        2 => {
            for i in 0..m {
                for j in 0..m {
                    let u = x[i];
                    let v = x[j];
                    points.push([u, (1.0 - u) * v, 0.0]);
                    weights.push(w[i] * w[j] * (1.0 - u));
                }
            }
        }
        3 => {
            for i in 0..m {
                for j in 0..m {
                    for l in 0..m {
                        let u = x[i];
                        let v = x[j];
                        let s = x[l];
                        points.push([u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * s]);
                        weights.push(w[i] * w[j] * w[l] * (1.0 - u) * (1.0 - u) * (1.0 - v));
                    }
                }
            }
        }
        _ => panic!("unsupported simplex dimension {dim}"),
    }
    QuadRule { dim, points, weights }
}

/// Exact integral of `prod x_i^{a_i}` over the reference simplex of dimension `dim`.
pub fn monomial_integral(exponents: &[u32], dim: usize) -> f64 {
    let total: u32 = exponents.iter().take(dim).sum();
    let num: f64 = exponents.iter().take(dim).map(|&a| factorial(a)).product();
    num / factorial(total + dim as u32)
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}
