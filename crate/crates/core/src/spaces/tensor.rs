use std::sync::Arc;

use crate::basis::Jet;
use crate::error::{invalid, Error, Result};
use crate::mesh::Point;
use crate::sparse::SKIP;

use super::{DofSpace, FeFunction, FunctionSpace, SpaceTimeFunction, TimeSpace};

/// `V_h ⊗ V_τ` with space-major numbering `s * n_time + t`.
#[derive(Debug, Clone)]
pub struct TensorSpace {
    pub space: Arc<DofSpace>,
    pub time: Arc<TimeSpace>,
}

impl TensorSpace {
    pub fn new(space: Arc<DofSpace>, time: Arc<TimeSpace>) -> Self {
        Self { space, time }
    }

    pub fn n_time(&self) -> usize {
        self.time.n_dofs()
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs() * self.time.n_dofs()
    }

    pub fn n_free(&self) -> usize {
        self.space.n_free() * self.time.n_dofs()
    }

    pub fn index(&self, s: usize, t: usize) -> usize {
        s * self.n_time() + t
    }

    /// Position among the free dofs, or [`SKIP`] for a constrained space dof.
    pub fn free_index(&self, s: usize, t: usize) -> usize {
        match self.space.free_index(s) {
            SKIP => SKIP,
            f => f * self.n_time() + t,
        }
    }

    /// Expands a vector over the free dofs to the full numbering.
    pub fn expand_free(&self, free: &[f64]) -> Vec<f64> {
        let nt = self.n_time();
        let mut full = vec![0.0; self.n_dofs()];
        for s in 0..self.space.n_dofs() {
            let f = self.space.free_index(s);
            if f != SKIP {
                full[s * nt..(s + 1) * nt].copy_from_slice(&free[f * nt..(f + 1) * nt]);
            }
        }
        full
    }

    /// Restricts a full coefficient vector to the free dofs.
    pub fn restrict_free(&self, full: &[f64]) -> Vec<f64> {
        let nt = self.n_time();
        let mut free = vec![0.0; self.n_free()];
        for s in 0..self.space.n_dofs() {
            let f = self.space.free_index(s);
            if f != SKIP {
                free[f * nt..(f + 1) * nt].copy_from_slice(&full[s * nt..(s + 1) * nt]);
            }
        }
        free
    }
}

impl FunctionSpace for TensorSpace {
    fn n_dofs(&self) -> usize {
        TensorSpace::n_dofs(self)
    }
}

/// Tensor interpolant. `f(x, t, k)` returns the spatial jet of `∂ₜᵏ u` at
/// `(x, t)` for `k` in `{0, 1}`.
pub fn interpolate_tensor(space: &Arc<TensorSpace>, f: impl Fn(Point, f64, usize) -> Jet) -> SpaceTimeFunction {
    let (sp, tm) = (&space.space, &space.time);
    let mut coeffs = vec![0.0; space.n_dofs()];
    for (s, d) in sp.descriptors().iter().enumerate() {
        if sp.is_constrained(s) {
            continue;
        }
        for t in 0..tm.n_dofs() {
            let (tk, order) = tm.descriptor(t);
            coeffs[space.index(s, t)] = d.apply(&f(d.location, tk, order));
        }
    }
    FeFunction { space: space.clone(), coeffs }
}

/// Spatial jet of `∂ₜᵏ u` at `(x, t)`, `k <= 2`.
pub fn tensor_eval(u: &SpaceTimeFunction, x: Point, t: f64, time_order: usize) -> Result<Jet> {
    if time_order > 2 {
        return Err(invalid(format!("time derivative order must be at most 2, got {time_order}")));
    }
    let ts = &u.space;
    let c = ts.space.mesh().locate(x).ok_or_else(|| Error::Domain { what: "space domain", point: x.to_vec() })?;
    let n = ts.time.locate(t).map_err(|_| Error::Domain { what: "space-time cylinder", point: vec![x[0], x[1], t] })?;
    let mut jets = Vec::new();
    ts.space.eval_cell(c, x, &mut jets);
    let psi = ts.time.eval_interval(n, t)[time_order];
    let tdofs = ts.time.interval_dofs(n);
    let mut out = Jet::default();
    for (j, &s) in jets.iter().zip(ts.space.cell_dofs(c)) {
        let w: f64 = tdofs.iter().zip(&psi).map(|(&td, p)| u.coeffs[ts.index(s, td)] * p).sum();
        out.value += w * j.value;
        out.grad[0] += w * j.grad[0];
        out.grad[1] += w * j.grad[1];
        for k in 0..3 {
            out.hess[k] += w * j.hess[k];
        }
    }
    Ok(out)
}
