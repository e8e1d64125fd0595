use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::linsolve::{SolveOptions, SymmetricSolver};
use crate::mesh::Point;
use crate::quadrature::{cell_rule, gauss_rule_1d};
use crate::sparse::{CsrMatrix, SKIP};

use super::{DofSpace, FeFunction, SpaceFunction, TimeSpace};

const SPACE_DEGREE: usize = 12;
const TIME_DEGREE: usize = 14;

fn projection_options() -> SolveOptions {
    SolveOptions { estimate_condition: false, tolerance: 1e-10, ..SolveOptions::default() }
}

fn free_rows(space: &DofSpace, c: usize) -> Vec<usize> {
    space.cell_dofs(c).iter().map(|&d| space.free_index(d)).collect()
}

/// L² mass matrix on the free dofs of `space`.
pub fn mass_matrix(space: &DofSpace) -> Result<CsrMatrix> {
    Ok(mass_and_load(space, |_| 0.0)?.0)
}

fn mass_and_load(space: &DofSpace, target: impl Fn(Point) -> f64 + Sync) -> Result<(CsrMatrix, Vec<f64>)> {
    let mesh = space.mesh();
    let rule = cell_rule(mesh.dim(), SPACE_DEGREE)?;
    let rows: Vec<Vec<usize>> = (0..space.n_cells()).map(|c| free_rows(space, c)).collect();
    let mut m = CsrMatrix::from_elements(space.n_free(), rows.iter().map(|r| r.as_slice()));
    let mut load = vec![0.0; space.n_free()];
    let locals: Vec<(DMatrix<f64>, Vec<f64>)> = (0..space.n_cells())
        .into_par_iter()
        .map(|c| {
            let k = space.dofs_per_cell();
            let (pts, wts) = mesh.cell_quadrature(c, &rule);
            let mut local = DMatrix::zeros(k, k);
            let mut rhs = vec![0.0; k];
            let mut jets = Vec::new();
            for (p, w) in pts.iter().zip(&wts) {
                space.eval_cell(c, *p, &mut jets);
                let g = target(*p);
                for a in 0..k {
                    rhs[a] += w * g * jets[a].value;
                    for b in 0..k {
                        local[(a, b)] += w * jets[a].value * jets[b].value;
                    }
                }
            }
            (local, rhs)
        })
        .collect();
    for (c, (local, rhs)) in locals.iter().enumerate() {
        m.add_local(&rows[c], &rows[c], local);
        for (&r, v) in rows[c].iter().zip(rhs) {
            if r != SKIP {
                load[r] += v;
            }
        }
    }
    Ok((m, load))
}

/// L² projection of `target` onto `space`; constrained dofs are zero.
pub fn project_l2(space: &Arc<DofSpace>, target: impl Fn(Point) -> f64 + Sync) -> Result<SpaceFunction> {
    let (m, load) = mass_and_load(space, target)?;
    let x = SymmetricSolver::new(m, projection_options())?.solve(&load)?.solution;
    let mut coeffs = vec![0.0; space.n_dofs()];
    for (d, c) in coeffs.iter_mut().enumerate() {
        let f = space.free_index(d);
        if f != SKIP {
            *c = x[f];
        }
    }
    FeFunction::new(space.clone(), coeffs)
}

/// L² projection onto the cubic Hermite time space.
pub fn project_l2_time(space: &Arc<TimeSpace>, target: impl Fn(f64) -> f64) -> Result<FeFunction<TimeSpace>> {
    let rule = gauss_rule_1d(TIME_DEGREE)?;
    let n = space.n_dofs();
    let elements: Vec<[usize; 4]> = (0..space.n_intervals()).map(|k| space.interval_dofs(k)).collect();
    let mut m = CsrMatrix::from_elements(n, elements.iter().map(|e| e.as_slice()));
    let mut load = vec![0.0; n];
    for (k, dofs) in elements.iter().enumerate() {
        let (a, b) = space.grid().interval(k);
        let mut local = DMatrix::zeros(4, 4);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let t = a + (b - a) * p[0];
            let w = w * (b - a);
            let psi = space.eval_interval(k, t)[0];
            let g = target(t);
            for i in 0..4 {
                load[dofs[i]] += w * g * psi[i];
                for j in 0..4 {
                    local[(i, j)] += w * psi[i] * psi[j];
                }
            }
        }
        m.add_local(dofs, dofs, &local);
    }
    let x = SymmetricSolver::new(m, projection_options())?.solve(&load)?.solution;
    FeFunction::new(space.clone(), x)
}
