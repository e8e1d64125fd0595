use std::collections::HashMap;

use super::{BoxRegion, Point};
use crate::error::{invalid, Result};

/// The two congruent shapes produced by splitting each grid rectangle along
/// its rising diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// `(x0, y0), (x1, y0), (x1, y1)`
    Lower,
    /// `(x0, y0), (x1, y1), (x0, y1)`
    Upper,
}

pub const ON_LEFT: u8 = 1;
pub const ON_RIGHT: u8 = 2;
pub const ON_BOTTOM: u8 = 4;
pub const ON_TOP: u8 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub midpoint: Point,
    /// Globally fixed unit normal: positive x component, or positive y when vertical.
    pub normal: Point,
    pub triangles: Vec<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub domain: BoxRegion,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub orientation: Vec<Orientation>,
    pub edges: Vec<Edge>,
    /// Local edges `(v0, v1), (v1, v2), (v2, v0)` of each triangle.
    pub triangle_edges: Vec<[usize; 3]>,
    pub omega_box: BoxRegion,
    pub boundary_flags: Vec<u8>,
}

pub fn edge_normal(a: Point, b: Point) -> Point {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    let mut n = [dy / len, -dx / len];
    if n[0] < -1e-14 || (n[0].abs() <= 1e-14 && n[1] < 0.0) {
        n = [-n[0], -n[1]];
    }
    n
}

impl TriMesh {
    pub fn rectangle(domain: BoxRegion, nx: usize, ny: usize, omega_box: BoxRegion) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("triangle mesh needs nx, ny >= 1"));
        }
        if !(domain.lo[0] < domain.hi[0] && domain.lo[1] < domain.hi[1]) {
            return Err(invalid("empty rectangle"));
        }
        let hx = (domain.hi[0] - domain.lo[0]) / nx as f64;
        let hy = (domain.hi[1] - domain.lo[1]) / ny as f64;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary_flags = Vec::with_capacity(vertices.capacity());
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx { domain.hi[0] } else { domain.lo[0] + i as f64 * hx };
                let y = if j == ny { domain.hi[1] } else { domain.lo[1] + j as f64 * hy };
                vertices.push([x, y]);
                let mut f = 0;
                if i == 0 {
                    f |= ON_LEFT;
                }
                if i == nx {
                    f |= ON_RIGHT;
                }
                if j == 0 {
                    f |= ON_BOTTOM;
                }
                if j == ny {
                    f |= ON_TOP;
                }
                boundary_flags.push(f);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        let mut orientation = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (p00, p10, p11, p01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                triangles.push([p00, p10, p11]);
                orientation.push(Orientation::Lower);
                triangles.push([p00, p11, p01]);
                orientation.push(Orientation::Upper);
            }
        }
        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    let (pa, pb) = (vertices[key.0], vertices[key.1]);
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                        normal: edge_normal(pa, pb),
                        triangles: Vec::new(),
                    });
                    edges.len() - 1
                });
                edges[e].triangles.push(t);
                local[k] = e;
            }
            triangle_edges.push(local);
        }
        Ok(Self {
            domain,
            nx,
            ny,
            hx,
            hy,
            vertices,
            triangles,
            orientation,
            edges,
            triangle_edges,
            omega_box,
            boundary_flags,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Grid spacing (the larger of the two directions).
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn locate(&self, p: Point) -> Option<usize> {
        let tol = 1e-12;
        let d = &self.domain;
        if p[0] < d.lo[0] - tol || p[0] > d.hi[0] + tol || p[1] < d.lo[1] - tol || p[1] > d.hi[1] + tol {
            return None;
        }
        let fx = (p[0] - d.lo[0]) / self.hx;
        let fy = (p[1] - d.lo[1]) / self.hy;
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        let (lx, ly) = (fx - i as f64, fy - j as f64);
        let base = 2 * (j * self.nx + i);
        Some(if lx >= ly { base } else { base + 1 })
    }
}

/// Unit-square criss-cross mesh with `nx x ny` rectangles.
pub fn build_trimesh_congruent(nx: usize, ny: usize, omega_box: BoxRegion) -> Result<TriMesh> {
    TriMesh::rectangle(BoxRegion::new([0.0, 0.0], [1.0, 1.0]), nx, ny, omega_box)
}
