//! Cubic Hermite shape functions on a 1D cell, local DOF order
//! `(v(x0), v'(x0), v(x1), v'(x1))`.

/// Reference polynomials on `[0, 1]`: values and first three derivatives.
pub fn reference(xi: f64) -> [[f64; 4]; 4] {
    let (x, x2, x3) = (xi, xi * xi, xi * xi * xi);
    [
        [1.0 - 3.0 * x2 + 2.0 * x3, x - 2.0 * x2 + x3, 3.0 * x2 - 2.0 * x3, -x2 + x3],
        [-6.0 * x + 6.0 * x2, 1.0 - 4.0 * x + 3.0 * x2, 6.0 * x - 6.0 * x2, -2.0 * x + 3.0 * x2],
        [-6.0 + 12.0 * x, -4.0 + 6.0 * x, 6.0 - 12.0 * x, -2.0 + 6.0 * x],
        [12.0, 6.0, -12.0, 6.0],
    ]
}

/// Physical Hermite cell `[x0, x0 + h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteCell {
    pub x0: f64,
    pub h: f64,
}

impl HermiteCell {
    pub fn new(x0: f64, x1: f64) -> Self {
        Self { x0, h: x1 - x0 }
    }

    /// Derivatives of order 0..=3 of the four physical shape functions at `x`.
    pub fn eval(&self, x: f64) -> [[f64; 4]; 4] {
        let r = reference((x - self.x0) / self.h);
        let h = self.h;
        // derivative DOFs carry a factor h so that d/dx hits 1 at the node
        let dof_scale = [1.0, h, 1.0, h];
        let mut out = [[0.0; 4]; 4];
        let mut inv = 1.0;
        for (dst, row) in out.iter_mut().zip(r.iter()) {
            for a in 0..4 {
                dst[a] = row[a] * dof_scale[a] * inv;
            }
            inv /= h;
        }
        out
    }
}
