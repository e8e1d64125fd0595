//! Data synthesis by a fine forward solve of `∂ₜu + Au = f` with `u = 0` at
//! the start time and homogeneous Dirichlet conditions (1D).
//!
//! Space is discretized by cubic Hermite elements. The semi-discrete system
//! `M c' + K c = F` has a time-independent load and is integrated exactly
//! through the generalized eigenpairs `K v = λ M v`:
//! `c(t) = Σ (1 - e^{-λ(t-s)}) / λ · (vᵀF) v`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::assembly::EllipticOperator;
use crate::basis::Jet;
use crate::error::{Error, Result};
use crate::mesh::{build_mesh_1d, Point, SpaceMesh};
use crate::quadrature::gauss_rule_1d;
use crate::spaces::DofSpace;

pub struct ForwardSolution {
    space: Arc<DofSpace>,
    start: f64,
    lambda: Vec<f64>,
    /// `M`-orthonormal eigenvectors over the free dofs, one per column.
    modes: DMatrix<f64>,
    /// `vₖᵀF`.
    weights: Vec<f64>,
    cache: Mutex<HashMap<(u64, usize), Arc<Vec<f64>>>>,
}

impl fmt::Debug for ForwardSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForwardSolution").field("n_free", &self.lambda.len()).field("start", &self.start).finish()
    }
}

impl ForwardSolution {
    /// Solves on `(a, b)` with `n_cells` uniform cells from time `start`.
    /// Only the symmetric part `-(a₁₁v')' + cv` of the operator is supported.
    pub fn solve(
        domain: (f64, f64),
        n_cells: usize,
        op: &EllipticOperator,
        source: impl Fn(Point) -> f64,
        start: f64,
    ) -> Result<Self> {
        // the observation region plays no role here
        let len = domain.1 - domain.0;
        let omega = (domain.0 + 0.25 * len, domain.1 - 0.25 * len);
        let mesh = Arc::new(SpaceMesh::Line(build_mesh_1d(domain.0, domain.1, n_cells, omega)?));
        let space = Arc::new(DofSpace::hermite(mesh.clone())?.apply_dirichlet_constraints());
        let n = space.n_free();
        let rule = gauss_rule_1d(7)?;
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut k = DMatrix::<f64>::zeros(n, n);
        let mut load = DVector::<f64>::zeros(n);
        let mut jets = Vec::new();
        for c in 0..mesh.n_cells() {
            let dofs: Vec<usize> = space.cell_dofs(c).iter().map(|&d| space.free_index(d)).collect();
            let (pts, wts) = mesh.cell_quadrature(c, &rule);
            for (x, w) in pts.iter().zip(&wts) {
                let b = (op.b)(*x);
                if b[0] != 0.0 || (op.div_a)(*x)[0] != 0.0 {
                    return Err(Error::Forward("the forward solver needs a symmetric operator with constant principal part".into()));
                }
                let a = (op.a)(*x)[0][0];
                let cx = (op.c)(*x);
                let fx = source(*x);
                space.eval_cell(c, *x, &mut jets);
                for (i, &di) in dofs.iter().enumerate() {
                    if di == usize::MAX {
                        continue;
                    }
                    load[di] += w * fx * jets[i].value;
                    for (j, &dj) in dofs.iter().enumerate() {
                        if dj == usize::MAX {
                            continue;
                        }
                        m[(di, dj)] += w * jets[i].value * jets[j].value;
                        k[(di, dj)] += w * (a * jets[i].grad[0] * jets[j].grad[0] + cx * jets[i].value * jets[j].value);
                    }
                }
            }
        }
        let chol = m.cholesky().ok_or_else(|| Error::Forward("mass matrix is not positive definite".into()))?;
        let l = chol.l();
        let linv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Forward("singular mass factor".into()))?;
        let c: DMatrix<f64> = &linv * &k * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = c.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Forward("stiffness matrix is not positive definite".into()));
        }
        let modes = linv.transpose() * &eig.eigenvectors;
        let weights = (modes.transpose() * &load).as_slice().to_vec();
        Ok(Self {
            space,
            start,
            lambda: eig.eigenvalues.as_slice().to_vec(),
            modes,
            weights,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn space(&self) -> &Arc<DofSpace> {
        &self.space
    }

    /// Full coefficient vector of `∂ₜᵏu(t)` for `k` in `{0, 1}`.
    pub fn coefficients(&self, t: f64, order: usize) -> Arc<Vec<f64>> {
        let key = (t.to_bits(), order);
        if let Some(v) = self.cache.lock().expect("cache").get(&key) {
            return v.clone();
        }
        let s = t - self.start;
        let g: DVector<f64> = DVector::from_iterator(
            self.lambda.len(),
            self.lambda.iter().zip(&self.weights).map(|(&l, &w)| {
                let e = (-l * s).exp();
                w * if order == 0 { -(-l * s).exp_m1() / l } else { e }
            }),
        );
        let free = &self.modes * g;
        let mut full = vec![0.0; self.space.n_dofs()];
        for (d, v) in full.iter_mut().enumerate() {
            let f = self.space.free_index(d);
            if f != usize::MAX {
                *v = free[f];
            }
        }
        let full = Arc::new(full);
        self.cache.lock().expect("cache").insert(key, full.clone());
        full
    }

    /// Spatial jet of `∂ₜᵏu` at `(x, t)`.
    pub fn eval(&self, x: Point, t: f64, order: usize) -> Result<Jet> {
        if order > 1 {
            return Err(Error::InvalidArgument("forward solution provides time derivatives up to order 1".into()));
        }
        if t < self.start {
            return Err(Error::Domain { what: "forward time window", point: vec![x[0], t] });
        }
        let c = self.space.mesh().locate(x).ok_or_else(|| Error::Domain { what: "space domain", point: x.to_vec() })?;
        let coeffs = self.coefficients(t, order);
        let mut jets = Vec::new();
        self.space.eval_cell(c, x, &mut jets);
        let mut out = Jet::default();
        for (j, &d) in jets.iter().zip(self.space.cell_dofs(c)) {
            let w = coeffs[d];
            out.value += w * j.value;
            out.grad[0] += w * j.grad[0];
            out.hess[0] += w * j.hess[0];
        }
        Ok(out)
    }
}

/// Sine coefficients `2∫₀¹ f sin(kπx) dx`, `k = 1..=modes`, of the
/// continuous piecewise linear interpolant of `(nodes, values)` on `(0, 1)`.
pub fn sine_coefficients_piecewise_linear(nodes: &[f64], values: &[f64], modes: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (1..=modes)
        .map(|k| {
            let om = k as f64 * PI;
            let prim = |alpha: f64, beta: f64, x: f64| {
                -(alpha + beta * x) * (om * x).cos() / om + beta * (om * x).sin() / (om * om)
            };
            let mut s = 0.0;
            for i in 0..nodes.len() - 1 {
                let (x0, x1) = (nodes[i], nodes[i + 1]);
                let beta = (values[i + 1] - values[i]) / (x1 - x0);
                let alpha = values[i] - beta * x0;
                s += prim(alpha, beta, x1) - prim(alpha, beta, x0);
            }
            2.0 * s
        })
        .collect()
}
