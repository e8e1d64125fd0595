use std::sync::Arc;

use crate::basis::HermiteCell;
use crate::error::{Error, Result};
use crate::mesh::TimeGrid;

use super::FunctionSpace;

/// Cubic Hermite functions on the time grid; node `k` carries `(v, v')` at
/// indices `2k, 2k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpace {
    grid: Arc<TimeGrid>,
}

impl TimeSpace {
    pub fn new(grid: Arc<TimeGrid>) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_dofs(&self) -> usize {
        2 * (self.grid.n_intervals + 1)
    }

    pub fn n_intervals(&self) -> usize {
        self.grid.n_intervals
    }

    pub fn interval_dofs(&self, n: usize) -> [usize; 4] {
        [2 * n, 2 * n + 1, 2 * n + 2, 2 * n + 3]
    }

    /// Derivatives of order 0..=3 of the four local functions of interval `n`.
    pub fn eval_interval(&self, n: usize, t: f64) -> [[f64; 4]; 4] {
        let (a, b) = self.grid.interval(n);
        HermiteCell::new(a, b).eval(t)
    }

    /// Node and derivative order measured by dof `i`.
    pub fn descriptor(&self, i: usize) -> (f64, usize) {
        (self.grid.nodes[i / 2], i % 2)
    }

    /// Value dof at `t0`; requires `t0` to be a grid node.
    pub fn center_value_dof(&self) -> Result<usize> {
        self.grid
            .center_node()
            .map(|k| 2 * k)
            .ok_or_else(|| Error::InvalidArgument(format!("t0 = {} is not a time grid node", self.grid.t0)))
    }

    /// Interval used to evaluate at `t`.
    pub fn locate(&self, t: f64) -> Result<usize> {
        self.grid.locate(t).ok_or(Error::Domain { what: "time window", point: vec![t] })
    }
}

impl FunctionSpace for TimeSpace {
    fn n_dofs(&self) -> usize {
        TimeSpace::n_dofs(self)
    }
}
