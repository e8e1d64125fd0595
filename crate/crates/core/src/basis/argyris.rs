//! Argyris quintic triangle.
//!
//! Local DOF order: for each vertex `(v, v_x, v_y, v_xx, v_xy, v_yy)`, then the
//! normal derivatives at the midpoints of edges `(v0, v1)`, `(v1, v2)`,
//! `(v2, v0)`. Edge normals follow the global convention of
//! [`crate::mesh::Edge::normal`], so neighbouring triangles share the same
//! functional and the assembled space is C¹.
//!
//! The element is not affine equivalent, so shape functions are obtained by
//! inverting the 21x21 DOF matrix on the physical triangle, in a monomial basis
//! of local coordinates `((x - x0) / L, (y - y0) / L)`.

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::mesh::Point;

pub const N_DOFS: usize = 21;

/// Exponents `(i, j)` of the monomials `s^i t^j`, `i + j <= 5`.
pub const MONOMIALS: [(u8, u8); N_DOFS] = {
    let mut out = [(0u8, 0u8); N_DOFS];
    let mut k = 0;
    let mut d = 0u8;
    while d <= 5 {
        let mut j = 0u8;
        while j <= d {
            out[k] = (d - j, j);
            k += 1;
            j += 1;
        }
        d += 1;
    }
    out
};

/// Value, gradient and Hessian `(xx, xy, yy)` of a scalar field.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Point,
    pub hess: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgyrisElement {
    pub origin: Point,
    pub scale: f64,
    /// `coeffs[k][j]`: coefficient of monomial `j` in shape function `k`.
    coeffs: Box<[[f64; N_DOFS]; N_DOFS]>,
}

fn powers(x: f64) -> [f64; 6] {
    let mut p = [1.0; 6];
    for k in 1..6 {
        p[k] = p[k - 1] * x;
    }
    p
}

/// Jets of all monomials at local scaled coordinates `(s, t)`; derivatives
/// are returned with respect to the physical coordinates.
fn monomial_jets(s: f64, t: f64, scale: f64) -> [Jet; N_DOFS] {
    let (ps, pt) = (powers(s), powers(t));
    let (il, il2) = (1.0 / scale, 1.0 / (scale * scale));
    let mut out = [Jet::default(); N_DOFS];
    for (k, &(i, j)) in MONOMIALS.iter().enumerate() {
        let (i, j) = (i as usize, j as usize);
        let (fi, fj) = (i as f64, j as f64);
        let sp = |e: usize, d: usize| if e >= d { ps[e - d] } else { 0.0 };
        let tp = |e: usize, d: usize| if e >= d { pt[e - d] } else { 0.0 };
        out[k] = Jet {
            value: ps[i] * pt[j],
            grad: [il * fi * sp(i, 1) * pt[j], il * fj * ps[i] * tp(j, 1)],
            hess: [
                il2 * fi * (fi - 1.0) * sp(i, 2) * pt[j],
                il2 * fi * fj * sp(i, 1) * tp(j, 1),
                il2 * fj * (fj - 1.0) * ps[i] * tp(j, 2),
            ],
        };
    }
    out
}

impl ArgyrisElement {
    pub fn new(corners: [Point; 3]) -> Result<Self> {
        let e1 = [corners[1][0] - corners[0][0], corners[1][1] - corners[0][1]];
        let e2 = [corners[2][0] - corners[0][0], corners[2][1] - corners[0][1]];
        let area2 = e1[0] * e2[1] - e1[1] * e2[0];
        let scale = e1[0].hypot(e1[1]).max(e2[0].hypot(e2[1]));
        if !(scale > 0.0) || area2.abs() <= 1e-12 * scale * scale {
            return Err(Error::SingularGeometry(format!("triangle {corners:?} has no area")));
        }
        let origin = corners[0];
        let local = |p: Point| ((p[0] - origin[0]) / scale, (p[1] - origin[1]) / scale);
        let mut dof = SMatrix::<f64, N_DOFS, N_DOFS>::zeros();
        for v in 0..3 {
            let (s, t) = local(corners[v]);
            let m = monomial_jets(s, t, scale);
            for (j, jet) in m.iter().enumerate() {
                let rows = [jet.value, jet.grad[0], jet.grad[1], jet.hess[0], jet.hess[1], jet.hess[2]];
                for (r, val) in rows.iter().enumerate() {
                    dof[(6 * v + r, j)] = *val;
                }
            }
        }
        for e in 0..3 {
            let (a, b) = (corners[e], corners[(e + 1) % 3]);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let n = crate::mesh::tri_edge_normal(a, b);
            let (s, t) = local(mid);
            let m = monomial_jets(s, t, scale);
            for (j, jet) in m.iter().enumerate() {
                dof[(18 + e, j)] = n[0] * jet.grad[0] + n[1] * jet.grad[1];
            }
        }
        // shape function k has coefficients in column k of dof^{-1}
        let inv = dof
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::SingularGeometry("Argyris DOF matrix is singular".into()))?;
        let mut coeffs = Box::new([[0.0; N_DOFS]; N_DOFS]);
        for k in 0..N_DOFS {
            for j in 0..N_DOFS {
                coeffs[k][j] = inv[(j, k)];
            }
        }
        Ok(Self { origin, scale, coeffs })
    }

    /// The same element translated so that its first vertex sits at `origin`.
    pub fn translated(&self, origin: Point) -> Self {
        Self { origin, scale: self.scale, coeffs: self.coeffs.clone() }
    }

    /// Jets of the 21 shape functions at a physical point.
    pub fn eval(&self, p: Point) -> [Jet; N_DOFS] {
        let s = (p[0] - self.origin[0]) / self.scale;
        let t = (p[1] - self.origin[1]) / self.scale;
        let m = monomial_jets(s, t, self.scale);
        let mut out = [Jet::default(); N_DOFS];
        for (k, jet) in out.iter_mut().enumerate() {
            let c = &self.coeffs[k];
            for (j, mj) in m.iter().enumerate() {
                let w = c[j];
                jet.value += w * mj.value;
                jet.grad[0] += w * mj.grad[0];
                jet.grad[1] += w * mj.grad[1];
                jet.hess[0] += w * mj.hess[0];
                jet.hess[1] += w * mj.hess[1];
                jet.hess[2] += w * mj.hess[2];
            }
        }
        out
    }
}
