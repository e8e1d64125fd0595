use crate::error::{invalid, Result};

/// Uniform partition of `[a, b]` with an observation sub-interval `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceMesh1D {
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
    pub nodes: Vec<f64>,
    pub h: f64,
    pub omega: (f64, f64),
}

impl SpaceMesh1D {
    pub fn new(a: f64, b: f64, n: usize, omega: (f64, f64)) -> Result<Self> {
        if !(a < b) {
            return Err(invalid(format!("interval endpoints must satisfy a < b, got ({a}, {b})")));
        }
        if n < 2 {
            return Err(invalid(format!("1D mesh needs at least 2 cells, got {n}")));
        }
        if !(a < omega.0 && omega.0 < omega.1 && omega.1 < b) {
            return Err(invalid(format!(
                "observation interval ({}, {}) must lie strictly inside ({a}, {b})",
                omega.0, omega.1
            )));
        }
        let h = (b - a) / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
        nodes[n] = b;
        Ok(Self { a, b, n_cells: n, nodes, h, omega })
    }

    pub fn cell(&self, c: usize) -> (f64, f64) {
        (self.nodes[c], self.nodes[c + 1])
    }

    pub fn locate(&self, x: f64) -> Option<usize> {
        let tol = 1e-12 * (self.b - self.a);
        if x < self.a - tol || x > self.b + tol {
            return None;
        }
        let c = ((x - self.a) / self.h).floor().max(0.0) as usize;
        Some(c.min(self.n_cells - 1))
    }

    /// Flags cells intersecting `omega` (open interval).
    pub fn omega_cells(&self) -> Vec<bool> {
        (0..self.n_cells)
            .map(|c| {
                let (x0, x1) = self.cell(c);
                x1.min(self.omega.1) - x0.max(self.omega.0) > 1e-12 * self.h
            })
            .collect()
    }
}

pub fn build_mesh_1d(a: f64, b: f64, n: usize, omega: (f64, f64)) -> Result<SpaceMesh1D> {
    SpaceMesh1D::new(a, b, n, omega)
}
