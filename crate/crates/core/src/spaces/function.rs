use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::basis::Jet;
use crate::error::{invalid, Error, Result};
use crate::mesh::Point;

use super::{DofSpace, TensorSpace};

pub trait FunctionSpace {
    fn n_dofs(&self) -> usize;
}

/// Coefficient vector over the full (unconstrained) dof numbering of a space.
#[derive(Debug, Clone)]
pub struct FeFunction<S> {
    pub space: Arc<S>,
    pub coeffs: Vec<f64>,
}

pub type SpaceFunction = FeFunction<DofSpace>;
pub type SpaceTimeFunction = FeFunction<TensorSpace>;

impl<S: FunctionSpace> FeFunction<S> {
    pub fn new(space: Arc<S>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(invalid(format!("expected {} coefficients, got {}", space.n_dofs(), coeffs.len())));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<S>) -> Self {
        let n = space.n_dofs();
        Self { space, coeffs: vec![0.0; n] }
    }

    /// Writes `dof,coefficient` rows after a header line.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "dof,coefficient")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            writeln!(out, "{i},{c:.17e}")?;
        }
        Ok(())
    }

    /// Reads the format of [`FeFunction::write_csv`]; missing dofs are zero.
    pub fn read_csv(space: Arc<S>, input: impl BufRead) -> Result<Self> {
        let mut coeffs = vec![0.0; space.n_dofs()];
        for (k, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Config(e.to_string()))?;
            let line = line.trim();
            if k == 0 || line.is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("line {}: expected `dof,coefficient`, got `{line}`", k + 1));
            let (i, c) = line.split_once(',').ok_or_else(bad)?;
            let i: usize = i.trim().parse().map_err(|_| bad())?;
            let c: f64 = c.trim().parse().map_err(|_| bad())?;
            *coeffs.get_mut(i).ok_or_else(bad)? = c;
        }
        Ok(Self { space, coeffs })
    }
}

impl FeFunction<DofSpace> {
    /// Value, gradient and Hessian at a physical point.
    pub fn eval(&self, x: Point) -> Result<Jet> {
        let mesh = self.space.mesh();
        let c = mesh.locate(x).ok_or_else(|| Error::Domain { what: "space domain", point: x.to_vec() })?;
        let mut jets = Vec::new();
        self.space.eval_cell(c, x, &mut jets);
        let mut out = Jet::default();
        for (j, &d) in jets.iter().zip(self.space.cell_dofs(c)) {
            let w = self.coeffs[d];
            out.value += w * j.value;
            out.grad[0] += w * j.grad[0];
            out.grad[1] += w * j.grad[1];
            for k in 0..3 {
                out.hess[k] += w * j.hess[k];
            }
        }
        Ok(out)
    }
}
