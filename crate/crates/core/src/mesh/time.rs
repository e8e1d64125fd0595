use crate::error::{invalid, Result};

/// Uniform grid on the observation window `I = (t0 - zeta, t0 + zeta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub zeta: f64,
    pub n_intervals: usize,
    pub nodes: Vec<f64>,
    pub tau: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, zeta: f64, n: usize) -> Result<Self> {
        if !(zeta > 0.0) || !zeta.is_finite() {
            return Err(invalid(format!("time half-width must be positive, got {zeta}")));
        }
        if n < 2 {
            return Err(invalid(format!("time grid needs at least 2 intervals, got {n}")));
        }
        let start = t0 - zeta;
        let tau = 2.0 * zeta / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|k| start + k as f64 * tau).collect();
        // pin the endpoints and the center exactly
        nodes[n] = t0 + zeta;
        if n % 2 == 0 {
            nodes[n / 2] = t0;
        }
        Ok(Self { t0, zeta, n_intervals: n, nodes, tau })
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.n_intervals]
    }

    pub fn interval(&self, n: usize) -> (f64, f64) {
        (self.nodes[n], self.nodes[n + 1])
    }

    /// Index of the grid node coinciding with `t0`, if any.
    pub fn center_node(&self) -> Option<usize> {
        self.node_index(self.t0)
    }

    pub fn node_index(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start()) / self.tau).round();
        if k < 0.0 || k > self.n_intervals as f64 {
            return None;
        }
        let k = k as usize;
        ((self.nodes[k] - t).abs() <= 1e-10 * self.tau.max(1.0)).then_some(k)
    }

    /// Interval containing `t`; the right endpoint belongs to the last interval.
    pub fn locate(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.tau;
        if t < self.start() - tol || t > self.end() + tol {
            return None;
        }
        let k = ((t - self.start()) / self.tau).floor().max(0.0) as usize;
        Some(k.min(self.n_intervals - 1))
    }
}

/// Builds the uniform time grid with `n` intervals centered at `t0`.
pub fn build_time_grid(t0: f64, zeta: f64, n: usize) -> Result<TimeGrid> {
    TimeGrid::new(t0, zeta, n)
}
