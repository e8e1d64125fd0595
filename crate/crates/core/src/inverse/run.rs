use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{assemble_rhs, assemble_system, residual_norms, Load, Spaces, SystemBlocks, Terms};
use crate::error::{invalid, Result};
use crate::linsolve::{ConditionEstimate, SolveOptions, SymmetricSolver};
use crate::mesh::{build_mesh_1d, build_time_grid, build_trimesh_congruent, BoxRegion, Point, SpaceMesh};
use crate::quadrature::cell_rule;
use crate::spaces::{project_l2, DofSpace, SpaceFunction, SpaceTimeFunction, TensorSpace, TimeSpace};

use super::config::{Mode, ProblemConfig};
use super::data::{inject_noise, GradientFn, ObservationData, Noise, SpaceFn};
use super::forward::ForwardSolution;
use super::problem::{Problem, Truth};

/// One row of results.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub example: String,
    pub mode: Mode,
    pub h: usize,
    pub tau: usize,
    pub delta: f64,
    pub seed: u64,
    pub gamma_f: f64,
    pub gamma_u: f64,
    /// `‖f† - f*‖` on `Ω`, or on `Ω₀` without boundary data.
    pub error: f64,
    pub resid_h1: f64,
    pub resid_l2: f64,
    pub cond: f64,
    pub cond_approximate: bool,
    pub relative_residual: f64,
    pub n_dofs: usize,
    /// Rate against the previous rung of a ladder.
    pub order: Option<f64>,
    pub wall_ms: u128,
    pub warning: Option<String>,
}

pub const CSV_HEADER: &str = "example,mode,h,tau,delta,seed,gamma_f,gamma_u,error,resid_h1,resid_l2,cond,order,wall_ms";

fn fmt_opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

impl ExperimentReport {
    /// CSV row matching [`CSV_HEADER`]. Wall time is left empty unless
    /// `timing` is set, so that rows are reproducible byte for byte.
    pub fn csv_row(&self, timing: bool) -> String {
        format!(
            "{},{},1/{},1/{},{},{},{},{},{:.6e},{:.6e},{:.6e},{:.4e},{},{}",
            self.example,
            self.mode.as_str(),
            self.h,
            self.tau,
            self.delta,
            self.seed,
            self.gamma_f,
            self.gamma_u,
            self.error,
            self.resid_h1,
            self.resid_l2,
            self.cond,
            fmt_opt(self.order, |o| format!("{o:.3}")),
            if timing { self.wall_ms.to_string() } else { String::new() },
        )
    }
}

pub fn write_csv(reports: &[ExperimentReport], timing: bool, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", r.csv_row(timing))?;
    }
    Ok(())
}

pub fn build_mesh(problem: &Problem, h: usize) -> Result<Arc<SpaceMesh>> {
    let d = problem.domain;
    let mesh = if problem.dim == 1 {
        SpaceMesh::Line(build_mesh_1d(d.lo[0], d.hi[0], h, (problem.omega.lo[0], problem.omega.hi[0]))?)
    } else {
        if d.lo != [0.0, 0.0] || d.hi != [1.0, 1.0] {
            return Err(invalid("2D problems are posed on the unit square"));
        }
        SpaceMesh::Plane(build_trimesh_congruent(h, h, problem.omega)?)
    };
    Ok(Arc::new(mesh))
}

pub fn build_spaces(problem: &Problem, config: &ProblemConfig) -> Result<Spaces> {
    let mesh = build_mesh(problem, config.h)?;
    let mut space = DofSpace::h2_conforming(mesh.clone())?;
    if config.mode == Mode::Lipschitz {
        space = space.apply_dirichlet_constraints();
    }
    let grid = build_time_grid(problem.t0, problem.zeta, config.n_intervals(problem)?)?;
    let state = Arc::new(TensorSpace::new(Arc::new(space), Arc::new(TimeSpace::new(Arc::new(grid)))));
    Spaces::new(state, Arc::new(DofSpace::p1(mesh)))
}

/// `q = u†`, `∂ₜq = ∂ₜu†`, `p = Au†(t₀)`, `r = ∇u†`, `∂ₜr = ∇∂ₜu†`.
pub fn synthesize_data_analytic(problem: &Problem) -> Result<ObservationData> {
    let Truth::Analytic { u, .. } = &problem.truth else {
        return Err(invalid("analytic data needs a closed-form state"));
    };
    let (u0, u1, u2, u3, u4) = (u.clone(), u.clone(), u.clone(), u.clone(), u.clone());
    let op = problem.operator.clone();
    let t0 = problem.t0;
    Ok(ObservationData {
        q: Arc::new(move |x, t| u0(x, t, 0).value),
        dtq: Arc::new(move |x, t| u1(x, t, 1).value),
        p: Arc::new(move |x| op.apply(x, &u2(x, t0, 0))),
        r: Some(Arc::new(move |x, t| u3(x, t, 0).grad) as GradientFn),
        dtr: Some(Arc::new(move |x, t| u4(x, t, 1).grad) as GradientFn),
        noise: Noise::NONE,
    })
}

/// Data from a forward solve with source `f` on a mesh `fine_factor` times
/// finer than `h`. The trace is `p = Rf - ∂ₜu(t₀)` with `R ≡ 1`.
pub fn synthesize_data_forward(problem: &Problem, f: &SpaceFunction, h: usize, fine_factor: usize) -> Result<ObservationData> {
    let Truth::Forward { start, .. } = &problem.truth else {
        return Err(invalid("forward data needs a forward truth"));
    };
    if problem.dim != 1 {
        return Err(invalid("forward data synthesis is implemented in 1D"));
    }
    if fine_factor < 4 {
        return Err(invalid("fine_factor must be at least 4"));
    }
    let fc = f.clone();
    let sol = Arc::new(ForwardSolution::solve(
        (problem.domain.lo[0], problem.domain.hi[0]),
        h * fine_factor,
        &problem.operator,
        move |x| fc.eval(x).map(|j| j.value).unwrap_or(0.0),
        *start,
    )?);
    let at = |s: &Arc<ForwardSolution>, x: Point, t: f64, k: usize| s.eval(x, t, k).unwrap_or_default();
    let (s0, s1, s2, s3, s4) = (sol.clone(), sol.clone(), sol.clone(), sol.clone(), sol);
    let fp = f.clone();
    let t0 = problem.t0;
    Ok(ObservationData {
        q: Arc::new(move |x, t| at(&s0, x, t, 0).value),
        dtq: Arc::new(move |x, t| at(&s1, x, t, 1).value),
        p: Arc::new(move |x| fp.eval(x).map(|j| j.value).unwrap_or(0.0) - at(&s2, x, t0, 1).value),
        r: Some(Arc::new(move |x, t| at(&s3, x, t, 0).grad) as GradientFn),
        dtr: Some(Arc::new(move |x, t| at(&s4, x, t, 1).grad) as GradientFn),
        noise: Noise::NONE,
    })
}

/// `‖f - g‖` in `L²(Ω)` or, with a region, `L²(region)`.
pub fn source_error(f: &SpaceFunction, exact: &(dyn Fn(Point) -> f64 + Sync), region: Option<&BoxRegion>) -> Result<f64> {
    let mesh = f.space.mesh();
    let rule = cell_rule(mesh.dim(), 12)?;
    let mut s = 0.0;
    let mut jets = Vec::new();
    for c in 0..mesh.n_cells() {
        let (pts, wts) = match region {
            Some(r) => mesh.region_quadrature(c, r, &rule),
            None => mesh.cell_quadrature(c, &rule),
        };
        for (x, w) in pts.iter().zip(&wts) {
            f.space.eval_cell(c, *x, &mut jets);
            let v: f64 = jets.iter().zip(f.space.cell_dofs(c)).map(|(j, &d)| j.value * f.coeffs[d]).sum();
            s += w * (v - exact(*x)).powi(2);
        }
    }
    Ok(s.sqrt())
}

/// Reconstructed pair with its report.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub report: ExperimentReport,
    pub u: SpaceTimeFunction,
    pub f: SpaceFunction,
}

/// A factorized system for one problem and discretization; noisy data only
/// changes the load vector.
pub struct Reconstructor {
    pub problem: Problem,
    pub config: ProblemConfig,
    pub spaces: Spaces,
    pub terms: Terms,
    pub system: SystemBlocks,
    solver: SymmetricSolver,
    clean: ObservationData,
    truth_f: SpaceFn,
    region: Option<BoxRegion>,
}

impl std::fmt::Debug for Reconstructor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Reconstructor").field("problem", &self.problem).field("config", &self.config).finish_non_exhaustive()
    }
}

impl Reconstructor {
    pub fn new(problem: Problem, config: &ProblemConfig) -> Result<Self> {
        let region = config.error_region(&problem)?;
        if config.mode == Mode::Lipschitz {
            problem.check_dirichlet_trace()?;
        }
        let spaces = build_spaces(&problem, config)?;
        let (clean, truth_f): (ObservationData, SpaceFn) = match &problem.truth {
            Truth::Analytic { f, .. } => (synthesize_data_analytic(&problem)?, f.clone()),
            Truth::Forward { g, fine_factor, .. } => {
                let g = g.clone();
                let fh = project_l2(&spaces.source, move |x| g(x))?;
                let data = synthesize_data_forward(&problem, &fh, config.h, *fine_factor)?;
                (data, Arc::new(move |x| fh.eval(x).map(|j| j.value).unwrap_or(0.0)))
            }
        };
        let terms = match config.mode {
            Mode::Lipschitz => Terms::LIPSCHITZ,
            Mode::Holder => Terms::holder(config.gamma_f, config.gamma_u),
        };
        problem.modulation.lower_bound(spaces.mesh(), problem.t0)?;
        problem.operator.check_ellipticity(spaces.mesh())?;
        let system = assemble_system(&spaces, &problem.operator, &problem.modulation, &clean, terms)?;
        let solver =
            SymmetricSolver::new(system.matrix.clone(), SolveOptions::default())?.with_tail(system.matrix_tail.clone())?;
        Ok(Self { problem, config: config.clone(), spaces, terms, system, solver, clean, truth_f, region })
    }

    pub fn condition(&self) -> ConditionEstimate {
        self.solver.condition().expect("estimated at construction")
    }

    pub fn clean_data(&self) -> &ObservationData {
        &self.clean
    }

    /// Reconstruction from the clean data perturbed with `(delta, seed)`.
    pub fn run(&self, delta: f64, seed: u64) -> Result<Reconstruction> {
        let start = Instant::now();
        let load = if delta == 0.0 {
            Load { rhs: self.system.rhs.clone(), tail: self.system.rhs_tail.clone(), data_energy: self.system.data_energy }
        } else {
            let data = inject_noise(&self.clean, delta, seed)?;
            let p = &self.problem;
            assemble_rhs(&self.spaces, &p.operator, &p.modulation, &data, self.terms)?
        };
        let sol = self.solver.solve_extended(&load.rhs, Some(&load.tail))?;
        let (u, f) = self.spaces.split(&sol.solution);
        let error = source_error(&f, self.truth_f.as_ref(), self.region.as_ref())?;
        let resid = residual_norms(&u, &f, &self.problem.operator, &self.problem.modulation)?;
        let cond = self.condition();
        let report = ExperimentReport {
            example: self.problem.name.clone(),
            mode: self.config.mode,
            h: self.config.h,
            tau: self.config.tau,
            delta,
            seed,
            gamma_f: self.config.gamma_f,
            gamma_u: self.config.gamma_u,
            error,
            resid_h1: resid.h1,
            resid_l2: resid.l2,
            cond: cond.value,
            cond_approximate: cond.approximate,
            relative_residual: sol.relative_residual,
            n_dofs: self.spaces.dim(),
            order: None,
            wall_ms: start.elapsed().as_millis(),
            warning: self.system.warning.clone(),
        };
        Ok(Reconstruction { report, u, f })
    }
}

/// Runs a custom problem with the discretization and noise of `config`.
pub fn reconstruct(problem: Problem, config: &ProblemConfig) -> Result<Reconstruction> {
    config.n_intervals(&problem)?;
    let start = Instant::now();
    let r = Reconstructor::new(problem, config)?;
    let mut out = r.run(config.delta, config.seed)?;
    out.report.wall_ms = start.elapsed().as_millis();
    Ok(out)
}

pub fn run_reconstruction(config: &ProblemConfig) -> Result<ExperimentReport> {
    config.validate()?;
    Ok(reconstruct(config.problem()?, config)?.report)
}

/// Which mesh parameter a ladder refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refine {
    Space,
    Time,
    /// Both; rates use the spatial size.
    Joint,
}

/// `ln(eᵢ₋₁/eᵢ) / ln(pᵢ₋₁/pᵢ)`; undefined where an error is not positive.
pub fn convergence_rates(errors: &[f64], params: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), params.len());
    (0..errors.len())
        .map(|i| {
            if i == 0 || !(errors[i] > 0.0 && errors[i - 1] > 0.0) || params[i] == params[i - 1] {
                None
            } else {
                Some((errors[i - 1] / errors[i]).ln() / (params[i - 1] / params[i]).ln())
            }
        })
        .collect()
}

/// Runs every rung (concurrently) and fills in the rates.
pub fn convergence_study(configs: &[ProblemConfig], refine: Refine) -> Result<Vec<ExperimentReport>> {
    if configs.len() < 2 {
        return Err(invalid("a ladder needs at least two rungs"));
    }
    let mut reports: Vec<ExperimentReport> =
        configs.par_iter().map(run_reconstruction).collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = reports.iter().map(|r| r.error).collect();
    let params: Vec<f64> = configs
        .iter()
        .map(|c| match refine {
            Refine::Time => c.tau_size(),
            Refine::Space | Refine::Joint => c.h_size(),
        })
        .collect();
    for (r, o) in reports.iter_mut().zip(convergence_rates(&errors, &params)) {
        r.order = o;
    }
    Ok(reports)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaStudy {
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `errors[i][k]` for `deltas[i]`, `seeds[k]`.
    pub errors: Vec<Vec<f64>>,
    pub mean_errors: Vec<f64>,
    /// Slope of the seed-averaged errors.
    pub slope: f64,
    /// Slope for the first seed alone.
    pub single_seed_slope: f64,
    pub reports: Vec<ExperimentReport>,
}

/// Error against noise level on a fixed grid, averaged over seeds.
pub fn delta_study(config: &ProblemConfig, deltas: &[f64], seeds: &[u64]) -> Result<DeltaStudy> {
    if deltas.len() < 3 || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(invalid("a noise study needs at least three positive noise levels"));
    }
    if seeds.is_empty() {
        return Err(invalid("a noise study needs at least one seed"));
    }
    config.validate()?;
    let rec = Reconstructor::new(config.problem()?, config)?;
    let jobs: Vec<(f64, u64)> = deltas.iter().flat_map(|&d| seeds.iter().map(move |&s| (d, s))).collect();
    let reports: Vec<ExperimentReport> =
        jobs.par_iter().map(|&(d, s)| rec.run(d, s).map(|r| r.report)).collect::<Result<Vec<_>>>()?;
    let errors: Vec<Vec<f64>> = reports.chunks(seeds.len()).map(|c| c.iter().map(|r| r.error).collect()).collect();
    let mean_errors: Vec<f64> = errors.iter().map(|e| e.iter().sum::<f64>() / e.len() as f64).collect();
    let first: Vec<f64> = errors.iter().map(|e| e[0]).collect();
    Ok(DeltaStudy {
        deltas: deltas.to_vec(),
        seeds: seeds.to_vec(),
        slope: fit_log_slope(deltas, &mean_errors),
        single_seed_slope: fit_log_slope(deltas, &first),
        errors,
        mean_errors,
        reports,
    })
}
