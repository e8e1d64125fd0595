//! Geometric discretizations of the space domain and the observation window.

mod interval;
mod time;
mod tri;

use std::sync::Arc;

pub use interval::{build_mesh_1d, SpaceMesh1D};
pub use time::{build_time_grid, TimeGrid};
pub use tri::{build_trimesh_congruent, edge_normal as tri_edge_normal, Edge, Orientation, TriMesh, ON_BOTTOM, ON_LEFT, ON_RIGHT, ON_TOP};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Points are stored in 2D; 1D meshes ignore the second coordinate.
pub type Point = [f64; 2];

/// Axis-aligned box `[lo, hi]`; for 1D meshes only the first coordinate is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    pub lo: Point,
    pub hi: Point,
}

impl BoxRegion {
    pub fn new(lo: Point, hi: Point) -> Self {
        Self { lo, hi }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { lo: [lo, f64::NEG_INFINITY], hi: [hi, f64::INFINITY] }
    }

    pub fn contains(&self, p: Point, dim: usize) -> bool {
        (0..dim).all(|d| p[d] >= self.lo[d] && p[d] <= self.hi[d])
    }
}

/// Where a cell sits relative to a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlap {
    Inside,
    Outside,
    Partial,
}

/// Space mesh in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceMesh {
    Line(SpaceMesh1D),
    Plane(TriMesh),
}

impl SpaceMesh {
    pub fn dim(&self) -> usize {
        match self {
            SpaceMesh::Line(_) => 1,
            SpaceMesh::Plane(_) => 2,
        }
    }

    pub fn n_cells(&self) -> usize {
        match self {
            SpaceMesh::Line(m) => m.n_cells,
            SpaceMesh::Plane(m) => m.n_cells(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        match self {
            SpaceMesh::Line(m) => m.nodes.len(),
            SpaceMesh::Plane(m) => m.vertices.len(),
        }
    }

    pub fn h(&self) -> f64 {
        match self {
            SpaceMesh::Line(m) => m.h,
            SpaceMesh::Plane(m) => m.h(),
        }
    }

    pub fn omega(&self) -> BoxRegion {
        match self {
            SpaceMesh::Line(m) => BoxRegion::interval(m.omega.0, m.omega.1),
            SpaceMesh::Plane(m) => m.omega_box,
        }
    }

    pub fn domain(&self) -> BoxRegion {
        match self {
            SpaceMesh::Line(m) => BoxRegion::interval(m.a, m.b),
            SpaceMesh::Plane(m) => m.domain,
        }
    }

    pub fn measure(&self) -> f64 {
        let d = self.domain();
        match self {
            SpaceMesh::Line(_) => d.hi[0] - d.lo[0],
            SpaceMesh::Plane(_) => (d.hi[0] - d.lo[0]) * (d.hi[1] - d.lo[1]),
        }
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        match self {
            SpaceMesh::Line(m) => m.cell(c).1 - m.cell(c).0,
            SpaceMesh::Plane(m) => m.signed_area(c),
        }
    }

    /// Vertex indices of a cell (P1 degrees of freedom).
    pub fn cell_vertices(&self, c: usize) -> Vec<usize> {
        match self {
            SpaceMesh::Line(_) => vec![c, c + 1],
            SpaceMesh::Plane(m) => m.triangles[c].to_vec(),
        }
    }

    pub fn vertex(&self, v: usize) -> Point {
        match self {
            SpaceMesh::Line(m) => [m.nodes[v], 0.0],
            SpaceMesh::Plane(m) => m.vertices[v],
        }
    }

    pub fn locate(&self, p: Point) -> Option<usize> {
        match self {
            SpaceMesh::Line(m) => m.locate(p[0]),
            SpaceMesh::Plane(m) => m.locate(p),
        }
    }

    fn cell_polygon(&self, c: usize) -> Vec<Point> {
        match self {
            SpaceMesh::Line(m) => {
                let (a, b) = m.cell(c);
                vec![[a, 0.0], [b, 0.0]]
            }
            SpaceMesh::Plane(m) => m.corners(c).to_vec(),
        }
    }

    pub fn overlap(&self, c: usize, region: &BoxRegion) -> Overlap {
        let dim = self.dim();
        let poly = self.cell_polygon(c);
        if poly.iter().all(|p| region.contains(*p, dim)) {
            return Overlap::Inside;
        }
        let clipped = self.clipped_measure(c, region);
        if clipped <= 1e-12 * self.cell_measure(c) {
            Overlap::Outside
        } else if clipped >= (1.0 - 1e-12) * self.cell_measure(c) {
            Overlap::Inside
        } else {
            Overlap::Partial
        }
    }

    fn clipped_measure(&self, c: usize, region: &BoxRegion) -> f64 {
        match self {
            SpaceMesh::Line(m) => {
                let (a, b) = m.cell(c);
                (b.min(region.hi[0]) - a.max(region.lo[0])).max(0.0)
            }
            SpaceMesh::Plane(m) => polygon_area(&clip_to_box(&m.corners(c), region)),
        }
    }

    /// Quadrature on the whole cell built from a reference rule
    /// (a rule on `[0, 1]` in 1D, on the reference triangle in 2D).
    pub fn cell_quadrature(&self, c: usize, rule: &QuadratureRule) -> (Vec<Point>, Vec<f64>) {
        match self {
            SpaceMesh::Line(m) => map_line(m.cell(c), rule),
            SpaceMesh::Plane(m) => map_triangle(&m.corners(c), rule),
        }
    }

    /// Quadrature on `cell ∩ region`, with the region clipped exactly.
    pub fn region_quadrature(&self, c: usize, region: &BoxRegion, rule: &QuadratureRule) -> (Vec<Point>, Vec<f64>) {
        match self.overlap(c, region) {
            Overlap::Outside => (Vec::new(), Vec::new()),
            Overlap::Inside => self.cell_quadrature(c, rule),
            Overlap::Partial => match self {
                SpaceMesh::Line(m) => {
                    let (a, b) = m.cell(c);
                    map_line((a.max(region.lo[0]), b.min(region.hi[0])), rule)
                }
                SpaceMesh::Plane(m) => {
                    let poly = clip_to_box(&m.corners(c), region);
                    let (mut pts, mut wts) = (Vec::new(), Vec::new());
                    for k in 1..poly.len().saturating_sub(1) {
                        let (p, w) = map_triangle(&[poly[0], poly[k], poly[k + 1]], rule);
                        pts.extend(p);
                        wts.extend(w);
                    }
                    (pts, wts)
                }
            },
        }
    }
}

fn map_line((a, b): (f64, f64), rule: &QuadratureRule) -> (Vec<Point>, Vec<f64>) {
    let len = b - a;
    let pts = rule.points.iter().map(|p| [a + len * p[0], 0.0]).collect();
    let wts = rule.weights.iter().map(|w| w * len).collect();
    (pts, wts)
}

fn map_triangle(c: &[Point; 3], rule: &QuadratureRule) -> (Vec<Point>, Vec<f64>) {
    let e1 = [c[1][0] - c[0][0], c[1][1] - c[0][1]];
    let e2 = [c[2][0] - c[0][0], c[2][1] - c[0][1]];
    let det = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let pts = rule
        .points
        .iter()
        .map(|p| [c[0][0] + p[0] * e1[0] + p[1] * e2[0], c[0][1] + p[0] * e1[1] + p[1] * e2[1]])
        .collect();
    let wts = rule.weights.iter().map(|w| w * det).collect();
    (pts, wts)
}

fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s.abs()
}

/// Sutherland-Hodgman clipping of a convex polygon against an axis-aligned box.
fn clip_to_box(poly: &[Point], region: &BoxRegion) -> Vec<Point> {
    let mut out: Vec<Point> = poly.to_vec();
    for axis in 0..2 {
        for (bound, keep_below) in [(region.lo[axis], false), (region.hi[axis], true)] {
            if !bound.is_finite() || out.is_empty() {
                continue;
            }
            let inside = |p: &Point| if keep_below { p[axis] <= bound } else { p[axis] >= bound };
            let input = std::mem::take(&mut out);
            for k in 0..input.len() {
                let (cur, prev) = (input[k], input[(k + input.len() - 1) % input.len()]);
                let (ci, pi) = (inside(&cur), inside(&prev));
                if ci != pi {
                    let s = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                    out.push([prev[0] + s * (cur[0] - prev[0]), prev[1] + s * (cur[1] - prev[1])]);
                }
                if ci {
                    out.push(cur);
                }
            }
        }
    }
    out
}

/// Flags every cell as inside or outside `omega`. The region boundary must
/// run along mesh lines; partially covered cells are rejected.
pub fn classify_omega_cells(mesh: &SpaceMesh, omega: &BoxRegion) -> Result<Vec<bool>> {
    let check = |coord: f64, origin: f64, h: f64| -> Result<()> {
        let k = (coord - origin) / h;
        if (k - k.round()).abs() > 1e-9 {
            Err(Error::Misaligned { coord })
        } else {
            Ok(())
        }
    };
    match mesh {
        SpaceMesh::Line(m) => {
            check(omega.lo[0], m.a, m.h)?;
            check(omega.hi[0], m.a, m.h)?;
        }
        SpaceMesh::Plane(m) => {
            for d in 0..2 {
                let h = if d == 0 { m.hx } else { m.hy };
                check(omega.lo[d], m.domain.lo[d], h)?;
                check(omega.hi[d], m.domain.lo[d], h)?;
            }
        }
    }
    (0..mesh.n_cells())
        .map(|c| match mesh.overlap(c, omega) {
            Overlap::Inside => Ok(true),
            Overlap::Outside => Ok(false),
            Overlap::Partial => Err(Error::Internal(format!("cell {c} partially covered after alignment check"))),
        })
        .collect()
}

pub type SharedMesh = Arc<SpaceMesh>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_rule_1d, triangle_rule};

    #[test]
    fn classify_line_aligned() {
        let m = SpaceMesh::Line(build_mesh_1d(0.0, 1.0, 10, (0.2, 0.8)).unwrap());
        let flags = classify_omega_cells(&m, &m.omega()).unwrap();
        let inside: Vec<usize> = flags.iter().enumerate().filter(|(_, f)| **f).map(|(c, _)| c + 1).collect();
        assert_eq!(inside, vec![3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn classify_line_misaligned() {
        let m = SpaceMesh::Line(build_mesh_1d(0.0, 1.0, 3, (0.2, 0.8)).unwrap());
        assert!(matches!(classify_omega_cells(&m, &m.omega()), Err(Error::Misaligned { .. })));
    }

    #[test]
    fn classify_plane_by_centroid() {
        let tm = build_trimesh_congruent(10, 10, BoxRegion::new([0.2, 0.2], [0.8, 0.8])).unwrap();
        let oracle = (0..tm.n_cells())
            .filter(|&t| {
                let c = tm.centroid(t);
                (0.2..=0.8).contains(&c[0]) && (0.2..=0.8).contains(&c[1])
            })
            .count();
        let m = SpaceMesh::Plane(tm);
        let flags = classify_omega_cells(&m, &m.omega()).unwrap();
        assert_eq!(flags.iter().filter(|f| **f).count(), 72);
        assert_eq!(oracle, 72);
    }

    #[test]
    fn clipped_region_measure_matches_box() {
        // misaligned box: h = 1/4 and omega = (0.2, 0.8)^2
        let m = SpaceMesh::Plane(build_trimesh_congruent(4, 4, BoxRegion::new([0.2, 0.2], [0.8, 0.8])).unwrap());
        assert!(classify_omega_cells(&m, &m.omega()).is_err());
        let rule = triangle_rule(4).unwrap();
        let omega = m.omega();
        let mut area = 0.0;
        let mut moment = 0.0;
        for c in 0..m.n_cells() {
            let (p, w) = m.region_quadrature(c, &omega, &rule);
            area += w.iter().sum::<f64>();
            moment += p.iter().zip(&w).map(|(p, w)| w * p[0] * p[1]).sum::<f64>();
        }
        assert!((area - 0.36).abs() < 1e-14);
        // ∫_ω xy = (∫_0.2^0.8 x dx)^2 = 0.3^2
        assert!((moment - 0.09).abs() < 1e-14);

        let l = SpaceMesh::Line(build_mesh_1d(0.0, 1.0, 3, (0.2, 0.8)).unwrap());
        let rule = gauss_rule_1d(3).unwrap();
        let len: f64 = (0..3).map(|c| l.region_quadrature(c, &l.omega(), &rule).1.iter().sum::<f64>()).sum();
        assert!((len - 0.6).abs() < 1e-14);
    }

    #[test]
    fn cell_measures_sum_to_domain() {
        for m in [
            SpaceMesh::Line(build_mesh_1d(0.0, 1.0, 37, (0.2, 0.8)).unwrap()),
            SpaceMesh::Plane(build_trimesh_congruent(7, 5, BoxRegion::new([0.2, 0.2], [0.8, 0.8])).unwrap()),
        ] {
            let total: f64 = (0..m.n_cells()).map(|c| m.cell_measure(c)).sum();
            assert!((total - m.measure()).abs() < 1e-12);
        }
    }
}
