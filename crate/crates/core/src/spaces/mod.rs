//! Global degree-of-freedom maps for the state, source and time spaces, the
//! space-time tensor space, and L² projections onto them.
//!
//! Global numbering:
//! - Hermite (1D): node `i` carries `(v, v')` at indices `2i, 2i + 1`.
//! - Argyris: vertex `i` carries `(v, v_x, v_y, v_xx, v_xy, v_yy)` at `6i..6i + 6`,
//!   followed by one normal derivative per edge at `6 n_vertices + e`.
//! - P1: one value per vertex.
//! - Tensor space: `(s, t) -> s * n_time + t` (space-major).

mod function;
mod projection;
mod tensor;
mod time;

use std::sync::Arc;

pub use function::{FeFunction, FunctionSpace, SpaceFunction, SpaceTimeFunction};
pub use projection::{mass_matrix, project_l2, project_l2_time};
pub use tensor::{interpolate_tensor, tensor_eval, TensorSpace};
pub use time::TimeSpace;

use crate::basis::{ArgyrisElement, DofDescriptor, DofKind, Family, HermiteCell, Jet};
use crate::error::{invalid, Error, Result};
use crate::mesh::{Orientation, Point, SharedMesh, SpaceMesh, ON_BOTTOM, ON_LEFT, ON_RIGHT, ON_TOP};
use crate::sparse::SKIP;

#[derive(Debug, Clone)]
pub struct DofSpace {
    mesh: SharedMesh,
    family: Family,
    dofs_per_cell: usize,
    cell_dofs: Vec<usize>,
    descriptors: Vec<DofDescriptor>,
    constrained: Vec<bool>,
    free_index: Vec<usize>,
    n_free: usize,
    /// Argyris elements on one representative triangle per orientation.
    argyris: Vec<ArgyrisElement>,
}

impl DofSpace {
    /// Cubic Hermite on a 1D mesh or Argyris on a triangle mesh.
    pub fn h2_conforming(mesh: SharedMesh) -> Result<Self> {
        match mesh.as_ref() {
            SpaceMesh::Line(_) => Self::hermite(mesh),
            SpaceMesh::Plane(_) => Self::argyris(mesh),
        }
    }

    pub fn hermite(mesh: SharedMesh) -> Result<Self> {
        let SpaceMesh::Line(m) = mesh.as_ref() else {
            return Err(invalid("Hermite elements need a 1D mesh"));
        };
        let mut descriptors = Vec::with_capacity(2 * m.nodes.len());
        for &x in &m.nodes {
            descriptors.push(DofDescriptor { location: [x, 0.0], kind: DofKind::Value });
            descriptors.push(DofDescriptor { location: [x, 0.0], kind: DofKind::Derivative([1.0, 0.0]) });
        }
        let cell_dofs = (0..m.n_cells).flat_map(|c| [2 * c, 2 * c + 1, 2 * c + 2, 2 * c + 3]).collect();
        Ok(Self::assemble(mesh, Family::Hermite1D, 4, cell_dofs, descriptors, Vec::new()))
    }

    pub fn argyris(mesh: SharedMesh) -> Result<Self> {
        let SpaceMesh::Plane(m) = mesh.as_ref() else {
            return Err(invalid("Argyris elements need a triangle mesh"));
        };
        let nv = m.vertices.len();
        let mut descriptors = Vec::with_capacity(6 * nv + m.edges.len());
        for &p in &m.vertices {
            descriptors.push(DofDescriptor { location: p, kind: DofKind::Value });
            descriptors.push(DofDescriptor { location: p, kind: DofKind::Derivative([1.0, 0.0]) });
            descriptors.push(DofDescriptor { location: p, kind: DofKind::Derivative([0.0, 1.0]) });
            for k in 0..3 {
                descriptors.push(DofDescriptor { location: p, kind: DofKind::Second(k) });
            }
        }
        for e in &m.edges {
            descriptors.push(DofDescriptor { location: e.midpoint, kind: DofKind::Derivative(e.normal) });
        }
        let mut cell_dofs = Vec::with_capacity(21 * m.n_cells());
        for (tri, edges) in m.triangles.iter().zip(&m.triangle_edges) {
            for &v in tri {
                cell_dofs.extend(6 * v..6 * v + 6);
            }
            cell_dofs.extend(edges.iter().map(|&e| 6 * nv + e));
        }
        let mut argyris = Vec::new();
        for o in [Orientation::Lower, Orientation::Upper] {
            let t = m
                .orientation
                .iter()
                .position(|&x| x == o)
                .ok_or_else(|| Error::Internal("mesh lacks an orientation".into()))?;
            argyris.push(ArgyrisElement::new(m.corners(t))?);
        }
        Ok(Self::assemble(mesh, Family::Argyris, 21, cell_dofs, descriptors, argyris))
    }

    /// Continuous piecewise linear functions.
    pub fn p1(mesh: SharedMesh) -> Self {
        let n = mesh.n_vertices();
        let descriptors = (0..n).map(|v| DofDescriptor { location: mesh.vertex(v), kind: DofKind::Value }).collect();
        let (family, k) = match mesh.as_ref() {
            SpaceMesh::Line(_) => (Family::P1Line, 2),
            SpaceMesh::Plane(_) => (Family::P1Tri, 3),
        };
        let cell_dofs = (0..mesh.n_cells()).flat_map(|c| mesh.cell_vertices(c)).collect();
        Self::assemble(mesh, family, k, cell_dofs, descriptors, Vec::new())
    }

    fn assemble(
        mesh: SharedMesh,
        family: Family,
        dofs_per_cell: usize,
        cell_dofs: Vec<usize>,
        descriptors: Vec<DofDescriptor>,
        argyris: Vec<ArgyrisElement>,
    ) -> Self {
        let n = descriptors.len();
        Self {
            mesh,
            family,
            dofs_per_cell,
            cell_dofs,
            descriptors,
            constrained: vec![false; n],
            free_index: (0..n).collect(),
            n_free: n,
            argyris,
        }
    }

    /// Copy of the space with homogeneous Dirichlet conditions imposed.
    ///
    /// In 1D the boundary values are removed. For Argyris the value, the
    /// tangential derivative and the second tangential derivative at every
    /// boundary vertex are removed (at corners both directions), which makes
    /// the trace vanish edge by edge; normal derivatives stay free.
    pub fn apply_dirichlet_constraints(&self) -> Self {
        let mut constrained = vec![false; self.n_dofs()];
        match (self.family, self.mesh.as_ref()) {
            (Family::Hermite1D, SpaceMesh::Line(m)) => {
                constrained[0] = true;
                constrained[2 * m.n_cells] = true;
            }
            (Family::Argyris, SpaceMesh::Plane(m)) => {
                for (v, &flags) in m.boundary_flags.iter().enumerate() {
                    if flags == 0 {
                        continue;
                    }
                    constrained[6 * v] = true;
                    if flags & (ON_BOTTOM | ON_TOP) != 0 {
                        constrained[6 * v + 1] = true;
                        constrained[6 * v + 3] = true;
                    }
                    if flags & (ON_LEFT | ON_RIGHT) != 0 {
                        constrained[6 * v + 2] = true;
                        constrained[6 * v + 5] = true;
                    }
                }
            }
            (Family::P1Line | Family::P1Tri, _) => {
                for v in 0..self.mesh.n_vertices() {
                    let p = self.mesh.vertex(v);
                    let d = self.mesh.domain();
                    let dim = self.mesh.dim();
                    if (0..dim).any(|k| p[k] == d.lo[k] || p[k] == d.hi[k]) {
                        constrained[v] = true;
                    }
                }
            }
            _ => unreachable!("family and mesh dimension are matched at construction"),
        }
        let mut free_index = vec![SKIP; constrained.len()];
        let mut n_free = 0;
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                free_index[i] = n_free;
                n_free += 1;
            }
        }
        Self { constrained, free_index, n_free, ..self.clone() }
    }

    pub fn mesh(&self) -> &SharedMesh {
        &self.mesh
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_dofs(&self) -> usize {
        self.descriptors.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.dofs_per_cell
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.dofs_per_cell..(c + 1) * self.dofs_per_cell]
    }

    pub fn descriptors(&self) -> &[DofDescriptor] {
        &self.descriptors
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.constrained[i]
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    /// Position of a global dof among the free ones, or [`SKIP`].
    pub fn free_index(&self, i: usize) -> usize {
        self.free_index[i]
    }

    /// Global index of every free dof, in order.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs()).filter(|&i| !self.constrained[i]).collect()
    }

    /// Jets of the local shape functions of cell `c` at a physical point.
    pub fn eval_cell(&self, c: usize, x: Point, out: &mut Vec<Jet>) {
        out.clear();
        match (self.family, self.mesh.as_ref()) {
            (Family::Hermite1D, SpaceMesh::Line(m)) => {
                let (a, b) = m.cell(c);
                let e = HermiteCell::new(a, b).eval(x[0]);
                out.extend((0..4).map(|k| Jet { value: e[0][k], grad: [e[1][k], 0.0], hess: [e[2][k], 0.0, 0.0] }));
            }
            (Family::Argyris, SpaceMesh::Plane(m)) => {
                let o = match m.orientation[c] {
                    Orientation::Lower => 0,
                    Orientation::Upper => 1,
                };
                let el = &self.argyris[o];
                let c0 = m.corners(c)[0];
                out.extend_from_slice(&el.eval([x[0] - c0[0] + el.origin[0], x[1] - c0[1] + el.origin[1]]));
            }
            (Family::P1Line, SpaceMesh::Line(m)) => {
                let (a, b) = m.cell(c);
                let h = b - a;
                out.push(Jet { value: (b - x[0]) / h, grad: [-1.0 / h, 0.0], hess: [0.0; 3] });
                out.push(Jet { value: (x[0] - a) / h, grad: [1.0 / h, 0.0], hess: [0.0; 3] });
            }
            (Family::P1Tri, SpaceMesh::Plane(m)) => {
                let [p0, p1, p2] = m.corners(c);
                let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
                let bary = |a: Point, b: Point| {
                    // linear function equal to 1 at the vertex opposite edge (a, b)
                    let g = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
                    let v = ((a[0] - x[0]) * (b[1] - x[1]) - (b[0] - x[0]) * (a[1] - x[1])) / det;
                    Jet { value: v, grad: g, hess: [0.0; 3] }
                };
                out.push(bary(p1, p2));
                out.push(bary(p2, p0));
                out.push(bary(p0, p1));
            }
            _ => unreachable!("family and mesh dimension are matched at construction"),
        }
    }

    /// Nodal interpolant: every dof functional applied to `f`. Constrained
    /// dofs are set to zero.
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(Point) -> Jet) -> SpaceFunction {
        let coeffs = self
            .descriptors
            .iter()
            .zip(&self.constrained)
            .map(|(d, &c)| if c { 0.0 } else { d.apply(&f(d.location)) })
            .collect();
        FeFunction::new(self.clone(), coeffs).expect("coefficient length matches")
    }
}

impl FunctionSpace for DofSpace {
    fn n_dofs(&self) -> usize {
        self.descriptors.len()
    }
}

/// Builds `V_h` (or `V̊_h` when `dirichlet`) on a mesh.
pub fn build_state_space(mesh: SharedMesh, dirichlet: bool) -> Result<DofSpace> {
    let s = DofSpace::h2_conforming(mesh)?;
    Ok(if dirichlet { s.apply_dirichlet_constraints() } else { s })
}

pub fn apply_dirichlet_constraints(space: &DofSpace) -> DofSpace {
    space.apply_dirichlet_constraints()
}
