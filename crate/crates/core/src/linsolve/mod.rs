//! Symmetric solves with compensated-residual refinement and extremal
//! eigenvalue condition estimates.

mod dense;
mod sparse_lblt;

use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use dense::BunchKaufman;
pub use sparse_lblt::SparseLblt;

use crate::error::{Error, Result};
use crate::sparse::{dot_compensated, norm2, two_sum, CsrMatrix};

/// Systems up to this size are factorized densely by default.
pub const DENSE_LIMIT: usize = 600;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Largest dimension handled by the dense factorization.
    pub dense_limit: usize,
    pub max_refinement: usize,
    /// Accepted relative residual `‖b - A x‖ / ‖b‖`.
    pub tolerance: f64,
    pub threads: usize,
    pub estimate_condition: bool,
    /// Iteration cap for each extremal eigenvalue.
    pub condition_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            dense_limit: DENSE_LIMIT,
            max_refinement: 5,
            tolerance: 1e-8,
            threads: rayon::current_num_threads(),
            estimate_condition: true,
            condition_iterations: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub value: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Set when either eigenvalue iteration hit its cap.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// Low-order part: the refined solution is `solution + tail`, which
    /// resolves the residual below the rounding level of `solution` alone.
    pub tail: Vec<f64>,
    pub relative_residual: f64,
    pub condition: Option<ConditionEstimate>,
    pub refinement_steps: usize,
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(BunchKaufman),
    Sparse(Arc<SparseLblt>),
}

impl Factor {
    fn solve_in_place(&self, b: &mut [f64]) {
        match self {
            Factor::Dense(f) => f.solve_in_place(b),
            Factor::Sparse(f) => f.solve_in_place(b),
        }
    }
}

/// A factorized symmetric matrix that can be reused for many right-hand sides.
#[derive(Debug, Clone)]
pub struct SymmetricSolver {
    matrix: CsrMatrix,
    /// Low-order part of the matrix entries, when assembled in extended precision.
    tail: Option<Vec<f64>>,
    factor: Factor,
    options: SolveOptions,
    condition: Option<ConditionEstimate>,
}

impl SymmetricSolver {
    pub fn new(matrix: CsrMatrix, options: SolveOptions) -> Result<Self> {
        if matrix.n_rows != matrix.n_cols {
            return Err(Error::InvalidArgument("system matrix must be square".into()));
        }
        let factor = if matrix.n_rows <= options.dense_limit {
            Factor::Dense(BunchKaufman::factor(&matrix.to_dense())?)
        } else {
            Factor::Sparse(Arc::new(SparseLblt::factor(&matrix, options.threads)?))
        };
        let mut solver = Self { matrix, tail: None, factor, options, condition: None };
        if solver.options.estimate_condition {
            solver.condition = Some(solver.estimate_condition());
        }
        Ok(solver)
    }

    /// Declares the matrix to be `matrix + tail` (same pattern). The
    /// factorization keeps using the leading part; refinement residuals see
    /// both.
    pub fn with_tail(mut self, tail: Vec<f64>) -> Result<Self> {
        if tail.len() != self.matrix.nnz() {
            return Err(Error::InvalidArgument("matrix tail must match the sparsity pattern".into()));
        }
        self.tail = Some(tail);
        Ok(self)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn condition(&self) -> Option<ConditionEstimate> {
        self.condition
    }

    /// Solves `A x = b` with up to `max_refinement` correction sweeps whose
    /// residuals are accumulated in double-double precision.
    pub fn solve(&self, b: &[f64]) -> Result<SolveReport> {
        self.solve_extended(b, None)
    }

    /// As [`Self::solve`] for the right-hand side `b + b_tail`.
    pub fn solve_extended(&self, b: &[f64], b_tail: Option<&[f64]>) -> Result<SolveReport> {
        assert_eq!(b.len(), self.dim());
        let a_tail = self.tail.as_deref();
        let n = b.len();
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(SolveReport {
                solution: vec![0.0; n],
                tail: vec![0.0; n],
                relative_residual: 0.0,
                condition: self.condition,
                refinement_steps: 0,
            });
        }
        let mut x = b.to_vec();
        self.factor.solve_in_place(&mut x);
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularSystem { pivot: k });
        }
        let mut tail = vec![0.0; n];
        let mut r = self.matrix.residual_extended(a_tail, &x, Some(&tail), b, b_tail);
        let mut rel = norm2(&r) / bnorm;
        let mut steps = 0;
        while steps < self.options.max_refinement && rel > f64::EPSILON * f64::EPSILON {
            let mut dx = r.clone();
            self.factor.solve_in_place(&mut dx);
            let (mut th, mut tl) = (x.clone(), tail.clone());
            for i in 0..n {
                let (s, e) = two_sum(th[i], dx[i]);
                (th[i], tl[i]) = two_sum(s, e + tl[i]);
            }
            let r_trial = self.matrix.residual_extended(a_tail, &th, Some(&tl), b, b_tail);
            let rel_trial = norm2(&r_trial) / bnorm;
            steps += 1;
            if !(rel_trial < rel) {
                break;
            }
            let improved = rel_trial < 0.5 * rel;
            (x, tail, r, rel) = (th, tl, r_trial, rel_trial);
            if !improved {
                break;
            }
        }
        if !(rel <= self.options.tolerance) {
            let condition = self.condition.unwrap_or_else(|| self.estimate_condition()).value;
            return Err(Error::IllConditioned { residual: rel, condition });
        }
        Ok(SolveReport { solution: x, tail, relative_residual: rel, condition: self.condition, refinement_steps: steps })
    }

    /// Power iteration for the largest and inverse iteration (through the
    /// factorization) for the smallest eigenvalue magnitude.
    pub fn estimate_condition(&self) -> ConditionEstimate {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let cap = self.options.condition_iterations;
        let (lambda_max, conv_max) = rayleigh_iteration(&start, cap, |v| self.matrix.matvec(v));
        let (mu, conv_min) = rayleigh_iteration(&start, cap, |v| {
            let mut w = v.to_vec();
            self.factor.solve_in_place(&mut w);
            w
        });
        let lambda_min = 1.0 / mu;
        ConditionEstimate { value: lambda_max / lambda_min, lambda_max, lambda_min, approximate: !(conv_max && conv_min) }
    }
}

/// Dominant eigenvalue magnitude of a symmetric operator. Returns the
/// estimate and whether the relative change dropped below 1e-6.
fn rayleigh_iteration(start: &[f64], cap: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> (f64, bool) {
    let mut v = start.to_vec();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..cap {
        let w = apply(&v);
        let next = dot_compensated(&v, &w).abs();
        let nw = norm2(&w);
        if nw == 0.0 || !nw.is_finite() {
            return (next, false);
        }
        let done = (next - lambda).abs() <= 1e-6 * next;
        lambda = next;
        v = w.iter().map(|x| x / nw).collect();
        if done {
            return (lambda, true);
        }
    }
    (lambda, false)
}

/// One-shot solve with default options.
pub fn solve_symmetric(matrix: &CsrMatrix, rhs: &[f64]) -> Result<SolveReport> {
    SymmetricSolver::new(matrix.clone(), SolveOptions::default())?.solve(rhs)
}

pub fn condition_estimate(matrix: &CsrMatrix) -> Result<ConditionEstimate> {
    let options = SolveOptions { estimate_condition: true, ..SolveOptions::default() };
    Ok(SymmetricSolver::new(matrix.clone(), options)?.condition.expect("requested"))
}

/// `‖b - A x‖ / ‖b‖` recomputed from scratch.
pub fn relative_residual(matrix: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    relative_residual_extended(matrix, None, x, None, b, None)
}

/// [`relative_residual`] with every operand carried as `value + tail`.
pub fn relative_residual_extended(
    matrix: &CsrMatrix,
    matrix_tail: Option<&[f64]>,
    x: &[f64],
    x_tail: Option<&[f64]>,
    b: &[f64],
    b_tail: Option<&[f64]>,
) -> f64 {
    let r = matrix.residual_extended(matrix_tail, x, x_tail, b, b_tail);
    let bn = norm2(b);
    if bn == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / bn
    }
}
