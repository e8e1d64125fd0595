use std::fmt;
use std::sync::Arc;

use crate::basis::Jet;
use crate::error::{invalid, Result};
use crate::mesh::{Point, SpaceMesh};
use crate::quadrature::cell_rule;

type Coefficient<T> = Arc<dyn Fn(Point) -> T + Send + Sync>;

/// `Av = -Σ ∂ᵢ(aᵢⱼ ∂ⱼv) + Σ bⱼ ∂ⱼv + cv`.
#[derive(Clone)]
pub struct EllipticOperator {
    pub a: Coefficient<[[f64; 2]; 2]>,
    /// Column divergence `Σᵢ ∂ᵢaᵢⱼ` for each `j`.
    pub div_a: Coefficient<[f64; 2]>,
    pub b: Coefficient<[f64; 2]>,
    pub c: Coefficient<f64>,
    /// Declared ellipticity constant.
    pub mu: f64,
}

impl fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticOperator").field("mu", &self.mu).finish_non_exhaustive()
    }
}

impl EllipticOperator {
    /// `-Δ`.
    pub fn laplacian() -> Self {
        Self::constant([[1.0, 0.0], [0.0, 1.0]], [0.0; 2], 0.0)
    }

    pub fn constant(a: [[f64; 2]; 2], b: [f64; 2], c: f64) -> Self {
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
        let (lo, hi) = (tr / 2.0 - disc, tr / 2.0 + disc);
        Self {
            a: Arc::new(move |_| a),
            div_a: Arc::new(|_| [0.0; 2]),
            b: Arc::new(move |_| b),
            c: Arc::new(move |_| c),
            mu: lo.min(1.0 / hi),
        }
    }

    /// `Av` at `x` from the value, gradient and Hessian of `v`.
    pub fn apply(&self, x: Point, v: &Jet) -> f64 {
        let a = (self.a)(x);
        let da = (self.div_a)(x);
        let b = (self.b)(x);
        let [hxx, hxy, hyy] = v.hess;
        let principal = a[0][0] * hxx + (a[0][1] + a[1][0]) * hxy + a[1][1] * hyy;
        let drift = (b[0] - da[0]) * v.grad[0] + (b[1] - da[1]) * v.grad[1];
        -principal + drift + (self.c)(x) * v.value
    }

    /// Checks symmetry and `μ|ξ|² ≤ ξᵀaξ ≤ μ⁻¹|ξ|²` at quadrature points of
    /// every cell.
    pub fn check_ellipticity(&self, mesh: &SpaceMesh) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(invalid(format!("ellipticity constant must lie in (0, 1], got {}", self.mu)));
        }
        let rule = cell_rule(mesh.dim(), 3)?;
        for c in 0..mesh.n_cells() {
            for x in mesh.cell_quadrature(c, &rule).0 {
                let a = (self.a)(x);
                if (a[0][1] - a[1][0]).abs() > 1e-12 * (a[0][0].abs() + a[1][1].abs()) {
                    return Err(invalid(format!("coefficient matrix is not symmetric at {x:?}")));
                }
                let (lo, hi) = if mesh.dim() == 1 {
                    (a[0][0], a[0][0])
                } else {
                    let tr = a[0][0] + a[1][1];
                    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                    let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
                    (tr / 2.0 - disc, tr / 2.0 + disc)
                };
                let tol = 1e-12 * hi.abs().max(1.0);
                if lo < self.mu - tol || hi > 1.0 / self.mu + tol {
                    return Err(invalid(format!(
                        "ellipticity bound mu = {} violated at {x:?}: eigenvalues {lo}, {hi}",
                        self.mu
                    )));
                }
            }
        }
        Ok(())
    }
}

type Modulation = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// The factor `R(x, t)` multiplying the unknown source, with `∂ₜR`.
#[derive(Clone)]
pub struct SourceModulation {
    pub r: Modulation,
    pub dtr: Modulation,
    /// `R` depends on `t` only.
    pub time_only: bool,
}

impl fmt::Debug for SourceModulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceModulation").field("time_only", &self.time_only).finish_non_exhaustive()
    }
}

impl SourceModulation {
    pub fn new(
        r: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        dtr: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { r: Arc::new(r), dtr: Arc::new(dtr), time_only: false }
    }

    pub fn time_only(
        r: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dtr: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { r: Arc::new(move |_, t| r(t)), dtr: Arc::new(move |_, t| dtr(t)), time_only: true }
    }

    pub fn value(&self, x: Point, t: f64) -> f64 {
        (self.r)(x, t)
    }

    pub fn dt(&self, x: Point, t: f64) -> f64 {
        (self.dtr)(x, t)
    }

    /// Smallest sampled `R(x, t₀)` over vertices and quadrature points;
    /// fails unless it is positive.
    pub fn lower_bound(&self, mesh: &SpaceMesh, t0: f64) -> Result<f64> {
        let rule = cell_rule(mesh.dim(), 3)?;
        let mut r0 = f64::INFINITY;
        for v in 0..mesh.n_vertices() {
            r0 = r0.min(self.value(mesh.vertex(v), t0));
        }
        for c in 0..mesh.n_cells() {
            for x in mesh.cell_quadrature(c, &rule).0 {
                r0 = r0.min(self.value(x, t0));
            }
        }
        if r0 > 0.0 {
            Ok(r0)
        } else {
            Err(invalid(format!("R(x, t0) must be bounded below by a positive constant, sampled minimum {r0}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh_1d;

    #[test]
    fn laplacian_of_quadratic() {
        let op = EllipticOperator::laplacian();
        let jet = Jet { value: 1.0, grad: [0.5, 0.2], hess: [2.0, 7.0, -4.0] };
        assert_eq!(op.apply([0.3, 0.4], &jet), 2.0);
    }

    #[test]
    fn variable_coefficients_match_divergence_form() {
        // a = diag(1 + x, 1 + x) with v = x²: -(∂ₓ((1 + x) 2x)) = -(2 + 4x)
        let op = EllipticOperator {
            a: Arc::new(|x| [[1.0 + x[0], 0.0], [0.0, 1.0 + x[0]]]),
            div_a: Arc::new(|_| [1.0, 0.0]),
            b: Arc::new(|_| [0.0; 2]),
            c: Arc::new(|_| 3.0),
            mu: 0.5,
        };
        let x = [0.25, 0.0];
        let jet = Jet { value: x[0] * x[0], grad: [2.0 * x[0], 0.0], hess: [2.0, 0.0, 0.0] };
        assert!((op.apply(x, &jet) - (-(2.0 + 4.0 * x[0]) + 3.0 * x[0] * x[0])).abs() < 1e-14);
        let mesh = SpaceMesh::Line(build_mesh_1d(0.0, 1.0, 4, (0.25, 0.75)).unwrap());
        assert!(op.check_ellipticity(&mesh).is_ok());
        let strict = EllipticOperator { mu: 0.9, ..op };
        assert!(strict.check_ellipticity(&mesh).is_err());
    }

    #[test]
    fn modulation_lower_bound() {
        let mesh = SpaceMesh::Line(build_mesh_1d(0.0, 1.0, 4, (0.25, 0.75)).unwrap());
        let r = SourceModulation::new(|x, t| 1.0 + x[0] * t, |x, _| x[0]);
        assert_eq!(r.lower_bound(&mesh, 0.5).unwrap(), 1.0);
        let bad = SourceModulation::time_only(|t| t - 0.5, |_| 1.0);
        assert!(bad.lower_bound(&mesh, 0.5).is_err());
    }
}
