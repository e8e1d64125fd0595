//! Reference shape functions: cubic Hermite (1D, also used in time),
//! Argyris quintic triangles, and linear Lagrange elements.

pub mod argyris;
pub mod hermite;

use nalgebra::DMatrix;

pub use argyris::{ArgyrisElement, Jet};
pub use hermite::HermiteCell;

use crate::error::{invalid, Error, Result};
use crate::mesh::{tri_edge_normal, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Hermite1D,
    Argyris,
    P1Line,
    P1Tri,
}

impl Family {
    pub fn n_dofs(self) -> usize {
        match self {
            Family::Hermite1D => 4,
            Family::Argyris => argyris::N_DOFS,
            Family::P1Line => 2,
            Family::P1Tri => 3,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Family::Hermite1D | Family::P1Line => 1,
            Family::Argyris | Family::P1Tri => 2,
        }
    }

    pub fn degree(self) -> usize {
        match self {
            Family::Hermite1D => 3,
            Family::Argyris => 5,
            Family::P1Line | Family::P1Tri => 1,
        }
    }
}

/// What a degree of freedom measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofKind {
    Value,
    /// First derivative along a unit direction.
    Derivative(Point),
    /// Second derivative component: 0 = xx, 1 = xy, 2 = yy.
    Second(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofDescriptor {
    pub location: Point,
    pub kind: DofKind,
}

impl DofDescriptor {
    pub fn apply(&self, jet: &Jet) -> f64 {
        match self.kind {
            DofKind::Value => jet.value,
            DofKind::Derivative(d) => d[0] * jet.grad[0] + d[1] * jet.grad[1],
            DofKind::Second(k) => jet.hess[k],
        }
    }
}

/// Reference element: `[0, 1]` in 1D, the unit right triangle in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBasis {
    pub family: Family,
    pub dofs: Vec<DofDescriptor>,
    argyris: Option<ArgyrisElement>,
}

pub const REFERENCE_TRIANGLE: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

impl ElementBasis {
    pub fn new(family: Family) -> Self {
        let value = |location| DofDescriptor { location, kind: DofKind::Value };
        let dx = |location| DofDescriptor { location, kind: DofKind::Derivative([1.0, 0.0]) };
        let (dofs, argyris) = match family {
            Family::Hermite1D => (vec![value([0.0, 0.0]), dx([0.0, 0.0]), value([1.0, 0.0]), dx([1.0, 0.0])], None),
            Family::P1Line => (vec![value([0.0, 0.0]), value([1.0, 0.0])], None),
            Family::P1Tri => (REFERENCE_TRIANGLE.iter().map(|&p| value(p)).collect(), None),
            Family::Argyris => {
                let mut d = Vec::with_capacity(argyris::N_DOFS);
                for &p in &REFERENCE_TRIANGLE {
                    d.push(value(p));
                    d.push(dx(p));
                    d.push(DofDescriptor { location: p, kind: DofKind::Derivative([0.0, 1.0]) });
                    for k in 0..3 {
                        d.push(DofDescriptor { location: p, kind: DofKind::Second(k) });
                    }
                }
                for e in 0..3 {
                    let (a, b) = (REFERENCE_TRIANGLE[e], REFERENCE_TRIANGLE[(e + 1) % 3]);
                    d.push(DofDescriptor {
                        location: [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
                        kind: DofKind::Derivative(tri_edge_normal(a, b)),
                    });
                }
                let el = ArgyrisElement::new(REFERENCE_TRIANGLE).expect("reference triangle is regular");
                (d, Some(el))
            }
        };
        Self { family, dofs, argyris }
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    fn check_point(&self, p: Point) -> Result<()> {
        let tol = 1e-12;
        let inside = match self.family.dim() {
            1 => p[0] >= -tol && p[0] <= 1.0 + tol,
            _ => p[0] >= -tol && p[1] >= -tol && p[0] + p[1] <= 1.0 + tol,
        };
        if inside {
            Ok(())
        } else {
            Err(Error::Domain { what: "reference element", point: p.to_vec() })
        }
    }

    /// Jets of all shape functions at a reference point.
    pub fn jets(&self, p: Point) -> Result<Vec<Jet>> {
        self.check_point(p)?;
        Ok(match self.family {
            Family::Hermite1D => {
                let e = HermiteCell::new(0.0, 1.0).eval(p[0]);
                (0..4).map(|a| Jet { value: e[0][a], grad: [e[1][a], 0.0], hess: [e[2][a], 0.0, 0.0] }).collect()
            }
            Family::P1Line => vec![
                Jet { value: 1.0 - p[0], grad: [-1.0, 0.0], hess: [0.0; 3] },
                Jet { value: p[0], grad: [1.0, 0.0], hess: [0.0; 3] },
            ],
            Family::P1Tri => vec![
                Jet { value: 1.0 - p[0] - p[1], grad: [-1.0, -1.0], hess: [0.0; 3] },
                Jet { value: p[0], grad: [1.0, 0.0], hess: [0.0; 3] },
                Jet { value: p[1], grad: [0.0, 1.0], hess: [0.0; 3] },
            ],
            Family::Argyris => self.argyris.as_ref().expect("argyris element").eval(p).to_vec(),
        })
    }

    /// DOF functionals applied to every shape function; the identity for a
    /// unisolvent element.
    pub fn dof_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.n_dofs();
        let mut m = DMatrix::zeros(n, n);
        for (i, d) in self.dofs.iter().enumerate() {
            for (k, jet) in self.jets(d.location)?.iter().enumerate() {
                m[(i, k)] = d.apply(jet);
            }
        }
        Ok(m)
    }
}

/// Shape-function derivatives at a reference point.
///
/// Rows are shape functions. Columns hold the value (`order = 0`), the
/// gradient components (`order = 1`) or the second derivatives (`order = 2`;
/// `xx, xy, yy` in 2D).
pub fn eval_basis(basis: &ElementBasis, point: Point, order: usize) -> Result<DMatrix<f64>> {
    if order > 2 {
        return Err(invalid(format!("derivative order must be 0, 1 or 2, got {order}")));
    }
    let jets = basis.jets(point)?;
    let dim = basis.family.dim();
    let cols = match (order, dim) {
        (0, _) => 1,
        (1, d) => d,
        (_, 1) => 1,
        _ => 3,
    };
    Ok(DMatrix::from_fn(jets.len(), cols, |a, c| match order {
        0 => jets[a].value,
        1 => jets[a].grad[c],
        _ => jets[a].hess[c],
    }))
}

/// Builds the physical Argyris element for a triangle; see [`ArgyrisElement`].
pub fn build_argyris_basis(corners: [Point; 3]) -> Result<ArgyrisElement> {
    ArgyrisElement::new(corners)
}
