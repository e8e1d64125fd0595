//! Gauss rules on the unit interval and collapsed-product rules on the
//! reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`.

use crate::error::{invalid, Result};
use crate::mesh::Point;

pub const MAX_LINE_DEGREE: usize = 20;
pub const MAX_TRIANGLE_DEGREE: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]` with `n` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1]
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * weight;
        w[n - 1 - i] = 0.5 * weight;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn gauss_rule_1d(degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_LINE_DEGREE {
        return Err(invalid(format!(
            "1D quadrature degree must be in 1..={MAX_LINE_DEGREE}, got {degree}"
        )));
    }
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(QuadratureRule {
        points: x.into_iter().map(|x| [x, 0.0]).collect(),
        weights: w,
        exactness_degree: 2 * n - 1,
    })
}

/// Collapsed (Duffy) Gauss product rule on the reference triangle.
pub fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_TRIANGLE_DEGREE {
        return Err(invalid(format!(
            "triangle quadrature degree must be in 1..={MAX_TRIANGLE_DEGREE}, got {degree}"
        )));
    }
    let nu = degree / 2 + 1;
    // the collapse Jacobian (1 - v) adds one degree in v
    let nv = (degree + 1) / 2 + 1;
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (v, wv) in xv.iter().zip(&wv) {
        for (u, wu) in xu.iter().zip(&wu) {
            points.push([u * (1.0 - v), *v]);
            weights.push(wu * wv * (1.0 - v));
        }
    }
    Ok(QuadratureRule { points, weights, exactness_degree: degree })
}

/// Reference rule for cells of a `dim`-dimensional mesh; triangle degrees
/// above the supported maximum are capped.
pub fn cell_rule(dim: usize, degree: usize) -> Result<QuadratureRule> {
    match dim {
        1 => gauss_rule_1d(degree),
        2 => triangle_rule(degree.min(MAX_TRIANGLE_DEGREE)),
        _ => Err(invalid(format!("unsupported dimension {dim}"))),
    }
}
