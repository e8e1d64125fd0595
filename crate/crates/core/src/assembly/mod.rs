//! Normal equations of the discrete least-squares functionals.
//!
//! Every term of both functionals is a squared residual `½‖Ez - d‖²` sampled
//! at weighted quadrature points, so each space-time cell `K × Iₙ` produces a
//! local block `EEᵀ` and load `Ed`. With `ψᵢ` the time and `φₐ` the space
//! basis, the rows generated per quadrature point are
//!
//! - data on `ω`: `φₐψᵢ ↦ q`, `φₐψᵢ' ↦ ∂ₜq`;
//! - residual on `Ω`: `φₐψᵢ' + Aφₐψᵢ` and `-Rχ_b ↦ 0`, and their time
//!   derivatives `φₐψᵢ'' + Aφₐψᵢ'`, `-∂ₜRχ_b ↦ 0`;
//! - trace at `t₀` (once per space cell): `Aφₐ ↦ p`;
//! - gradient data on `ω` (Hölder): `∂ⱼφₐψᵢ ↦ rⱼ`, `∂ⱼφₐψᵢ' ↦ ∂ₜrⱼ`;
//! - source penalty (Hölder): `√γ_f χ_b ↦ 0`;
//! - state penalty (Hölder): `√γ_u ∂ₜʲψᵢ ∂^αφₐ ↦ 0` for `j ≤ 1, |α| ≤ 2`
//!   (the `H¹(I; H²)` part) and again for `j ≤ 2, |α| ≤ 1` (the `H²(I; H¹)`
//!   part). Multi-indices are unordered, so `∂ₓ∂ᵧ` appears once; pairs
//!   belonging to both parts are counted twice.
//!
//! `H¹(I; X)` norms carry unit weights on both the zeroth and first order
//! terms. `χ_b` are the P1 source functions.

mod operator;
mod residual;

use std::io::{self, Write};
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use operator::{EllipticOperator, SourceModulation};
pub use residual::{apply_l, evaluate_functional, residual_norms, ResidualNorms};

use crate::basis::{Family, Jet};
use crate::error::{invalid, Result};
use crate::inverse::data::{ObservationData, MAX_KEY};
use crate::mesh::{Point, SpaceMesh};
use crate::quadrature::{cell_rule, gauss_legendre, QuadratureRule};
use crate::sparse::{CsrMatrix, DoubleDouble, SKIP};
use crate::spaces::{DofSpace, FeFunction, SpaceFunction, SpaceTimeFunction, TensorSpace};

/// Exactness degree of the spatial rule: 4-point Gauss in 1D.
pub const SPACE_DEGREE_1D: usize = 7;
pub const SPACE_DEGREE_2D: usize = 10;
pub const TIME_POINTS: usize = 4;
/// Upper bound on the triangles a clipped cell splits into.
const MAX_CLIP_PIECES: usize = 5;
const CHUNK: usize = 64;

/// State space (space-time tensor) and source space (P1 on the same mesh).
#[derive(Debug, Clone)]
pub struct Spaces {
    pub state: Arc<TensorSpace>,
    pub source: Arc<DofSpace>,
}

impl Spaces {
    pub fn new(state: Arc<TensorSpace>, source: Arc<DofSpace>) -> Result<Self> {
        if !matches!(source.family(), Family::P1Line | Family::P1Tri) {
            return Err(invalid("source space must be piecewise linear"));
        }
        if source.n_cells() != state.space.n_cells() || source.mesh().dim() != state.space.mesh().dim() {
            return Err(invalid("state and source spaces must share a mesh"));
        }
        Ok(Self { state, source })
    }

    pub fn n_u(&self) -> usize {
        self.state.n_free()
    }

    pub fn n_f(&self) -> usize {
        self.source.n_dofs()
    }

    pub fn dim(&self) -> usize {
        self.n_u() + self.n_f()
    }

    pub fn mesh(&self) -> &SpaceMesh {
        self.state.space.mesh()
    }

    /// Splits a solution vector into the state and the source.
    pub fn split(&self, z: &[f64]) -> (SpaceTimeFunction, SpaceFunction) {
        assert_eq!(z.len(), self.dim());
        let u = FeFunction { space: self.state.clone(), coeffs: self.state.expand_free(&z[..self.n_u()]) };
        let f = FeFunction { space: self.source.clone(), coeffs: z[self.n_u()..].to_vec() };
        (u, f)
    }

    /// Inverse of [`Spaces::split`]; constrained state coefficients are dropped.
    pub fn join(&self, u: &SpaceTimeFunction, f: &SpaceFunction) -> Vec<f64> {
        let mut z = self.state.restrict_free(&u.coeffs);
        z.extend_from_slice(&f.coeffs);
        z
    }
}

/// Which terms enter the functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    pub gradient_data: bool,
    pub gamma_f: f64,
    pub gamma_u: f64,
}

impl Terms {
    pub const LIPSCHITZ: Terms = Terms { gradient_data: false, gamma_f: 0.0, gamma_u: 0.0 };

    pub fn holder(gamma_f: f64, gamma_u: f64) -> Self {
        Terms { gradient_data: true, gamma_f, gamma_u }
    }
}

/// Assembled normal equations over `(free u dofs, f dofs)`.
///
/// Local products and the global sums are accumulated in double-double; the
/// matrix and load are `matrix + matrix_tail` and `rhs + rhs_tail`, with the
/// tails holding what rounding to double would lose. At the condition numbers
/// of the finer discretizations that loss is visible in the reconstruction.
#[derive(Debug, Clone)]
pub struct SystemBlocks {
    pub n_u: usize,
    pub n_f: usize,
    pub matrix: CsrMatrix,
    /// Low-order parts of `matrix.values`.
    pub matrix_tail: Vec<f64>,
    pub rhs: Vec<f64>,
    pub rhs_tail: Vec<f64>,
    /// `Σ d²`, so that `J(z) = ½ zᵀBz - ℓᵀz + ½ data_energy`.
    pub data_energy: f64,
    pub terms: Terms,
    pub warning: Option<String>,
}

impl SystemBlocks {
    pub fn dim(&self) -> usize {
        self.n_u + self.n_f
    }

    fn block(&self, rows: Range<usize>, cols: Range<usize>) -> CsrMatrix {
        let mut trip = Vec::new();
        for i in rows.clone() {
            for k in self.matrix.row_ptr[i]..self.matrix.row_ptr[i + 1] {
                let j = self.matrix.col_idx[k];
                if cols.contains(&j) {
                    trip.push((i - rows.start, j - cols.start, self.matrix.values[k]));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &trip)
    }

    pub fn block_uu(&self) -> CsrMatrix {
        self.block(0..self.n_u, 0..self.n_u)
    }

    pub fn block_uf(&self) -> CsrMatrix {
        self.block(0..self.n_u, self.n_u..self.dim())
    }

    pub fn block_ff(&self) -> CsrMatrix {
        self.block(self.n_u..self.dim(), self.n_u..self.dim())
    }

    pub fn rhs_u(&self) -> &[f64] {
        &self.rhs[..self.n_u]
    }

    pub fn rhs_f(&self) -> &[f64] {
        &self.rhs[self.n_u..]
    }

    /// Value of the discrete functional at `z`.
    pub fn functional(&self, z: &[f64]) -> f64 {
        let zero = vec![0.0; self.dim()];
        // -(B z) with the tails included
        let nbz = self.matrix.residual_extended(Some(&self.matrix_tail), z, None, &zero, None);
        let mut acc = DoubleDouble::from(0.5 * self.data_energy);
        for i in 0..self.dim() {
            acc = acc.add_product(-0.5 * nbz[i], z[i]);
            acc = acc.add_product(-self.rhs[i], z[i]);
            acc = acc.add_product(-self.rhs_tail[i], z[i]);
        }
        acc.value()
    }

    /// Coordinate text export: `% rows cols nnz` header, then `i j value`.
    pub fn write_coo(&self, out: impl Write) -> io::Result<()> {
        self.matrix.write_coo(out)
    }
}

/// Quadrature used by the assembly and by the functional evaluator.
pub(crate) struct Rules {
    pub space: QuadratureRule,
    pub time_nodes: Vec<f64>,
    pub time_weights: Vec<f64>,
    /// Key stride per space cell.
    pub stride: u64,
    pub n_intervals: u64,
}

impl Rules {
    pub fn new(spaces: &Spaces) -> Result<Self> {
        let dim = spaces.mesh().dim();
        let space = cell_rule(dim, if dim == 1 { SPACE_DEGREE_1D } else { SPACE_DEGREE_2D })?;
        let (time_nodes, time_weights) = gauss_legendre(TIME_POINTS);
        let stride = (space.len() * if dim == 1 { 1 } else { MAX_CLIP_PIECES }) as u64;
        let n_intervals = spaces.state.time.n_intervals() as u64;
        let max = (spaces.mesh().n_cells() as u64 * stride) * n_intervals * TIME_POINTS as u64;
        if max > MAX_KEY {
            return Err(invalid("problem too large for the noise key space"));
        }
        Ok(Self { space, time_nodes, time_weights, stride, n_intervals })
    }

    pub fn space_key(&self, c: usize, sq: usize) -> u64 {
        c as u64 * self.stride + sq as u64
    }

    pub fn space_time_key(&self, c: usize, sq: usize, n: usize, tq: usize) -> u64 {
        (self.space_key(c, sq) * self.n_intervals + n as u64) * TIME_POINTS as u64 + tq as u64
    }

    /// Physical time nodes and weights on interval `n`.
    pub fn time_points(&self, spaces: &Spaces, n: usize) -> Vec<(f64, f64)> {
        let (a, b) = spaces.state.time.grid().interval(n);
        self.time_nodes.iter().zip(&self.time_weights).map(|(s, w)| (a + (b - a) * s, w * (b - a))).collect()
    }
}

struct Contribution {
    rows: Vec<usize>,
    local: (DMatrix<f64>, DMatrix<f64>),
    rhs: (Vec<f64>, Vec<f64>),
    energy: f64,
}

fn split(acc: &[DoubleDouble]) -> (Vec<f64>, Vec<f64>) {
    acc.iter().map(|a| (a.hi, a.lo)).unzip()
}

/// Column-major accumulation of weighted rows of `Eᵀ`.
struct Features {
    m: usize,
    e: Vec<f64>,
    d: Vec<f64>,
}

impl Features {
    fn new(m: usize) -> Self {
        Self { m, e: Vec::new(), d: Vec::new() }
    }

    fn push(&mut self, scale: f64, value: impl Fn(usize) -> f64, target: f64) {
        self.e.extend((0..self.m).map(|k| scale * value(k)));
        self.d.push(scale * target);
    }

    /// `EEᵀ` (if requested) and `Ed` with exact products and double-double sums.
    fn finish(self, rows: Vec<usize>, with_matrix: bool) -> Contribution {
        let m = self.m;
        let mut gram = vec![DoubleDouble::default(); if with_matrix { m * m } else { 0 }];
        let mut load = vec![DoubleDouble::default(); m];
        let mut energy = DoubleDouble::default();
        for (col, &d) in self.e.chunks_exact(m).zip(&self.d) {
            energy = energy.add_product(d, d);
            for (i, &ei) in col.iter().enumerate() {
                if ei == 0.0 {
                    continue;
                }
                load[i] = load[i].add_product(ei, d);
                if with_matrix {
                    for (j, &ej) in col.iter().enumerate().skip(i) {
                        gram[i * m + j] = gram[i * m + j].add_product(ei, ej);
                    }
                }
            }
        }
        let local = if with_matrix {
            let hi = DMatrix::from_fn(m, m, |i, j| gram[i.min(j) * m + i.max(j)].hi);
            let lo = DMatrix::from_fn(m, m, |i, j| gram[i.min(j) * m + i.max(j)].lo);
            (hi, lo)
        } else {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
        };
        Contribution { rows, local, rhs: split(&load), energy: energy.value() }
    }
}

struct SpacePoint {
    x: Point,
    w: f64,
    key: usize,
    jets: Vec<Jet>,
    a_phi: Vec<f64>,
    chi: Vec<f64>,
}

/// `∂^α` of a jet for the multi-indices `0, x, y, xx, xy, yy`.
pub(crate) fn partial(j: &Jet, alpha: usize) -> f64 {
    match alpha {
        0 => j.value,
        1 => j.grad[0],
        2 => j.grad[1],
        3 => j.hess[0],
        4 => j.hess[1],
        _ => j.hess[2],
    }
}

/// `(time order, multi-index)` pairs of the state penalty.
pub(crate) fn penalty_terms(dim: usize) -> Vec<(usize, usize)> {
    let (first, second): (&[usize], &[usize]) = if dim == 1 { (&[0, 1], &[0, 1, 3]) } else { (&[0, 1, 2], &[0, 1, 2, 3, 4, 5]) };
    let mut terms = Vec::new();
    for j in 0..=1 {
        terms.extend(second.iter().map(|&a| (j, a)));
    }
    for j in 0..=2 {
        terms.extend(first.iter().map(|&a| (j, a)));
    }
    terms
}

struct Context<'a> {
    spaces: &'a Spaces,
    op: &'a EllipticOperator,
    modulation: &'a SourceModulation,
    data: &'a ObservationData,
    terms: Terms,
    rules: Rules,
    t0_dof: usize,
    with_matrix: bool,
}

impl Context<'_> {
    fn points(&self, c: usize, pts: Vec<Point>, wts: Vec<f64>, full: bool) -> Vec<SpacePoint> {
        let mut jets = Vec::new();
        let mut p1 = Vec::new();
        pts.into_iter()
            .zip(wts)
            .enumerate()
            .map(|(key, (x, w))| {
                self.spaces.state.space.eval_cell(c, x, &mut jets);
                let (a_phi, chi) = if full {
                    self.spaces.source.eval_cell(c, x, &mut p1);
                    (jets.iter().map(|j| self.op.apply(x, j)).collect(), p1.iter().map(|j| j.value).collect())
                } else {
                    (Vec::new(), Vec::new())
                };
                SpacePoint { x, w, key, jets: jets.clone(), a_phi, chi }
            })
            .collect()
    }

    fn cell(&self, c: usize) -> Vec<Contribution> {
        let sp = &self.spaces.state.space;
        let tm = &self.spaces.state.time;
        let mesh = sp.mesh();
        let dim = mesh.dim();
        let ks = sp.dofs_per_cell();
        let sdofs = sp.cell_dofs(c);
        let fdofs = self.spaces.source.cell_dofs(c);
        let kf = fdofs.len();
        let m = 4 * ks + kf;
        let n_u = self.spaces.n_u();
        let f_rows: Vec<usize> = fdofs.iter().map(|&b| n_u + b).collect();

        let (px, pw) = mesh.cell_quadrature(c, &self.rules.space);
        let domain = self.points(c, px, pw, true);
        let (ox, ow) = mesh.region_quadrature(c, &mesh.omega(), &self.rules.space);
        let omega = self.points(c, ox, ow, false);
        let penalty = if self.terms.gamma_u > 0.0 { penalty_terms(dim) } else { Vec::new() };

        let mut out = Vec::with_capacity(tm.n_intervals() + 2);
        for n in 0..tm.n_intervals() {
            let tdofs = tm.interval_dofs(n);
            let mut rows = Vec::with_capacity(m);
            for &s in sdofs {
                rows.extend(tdofs.iter().map(|&t| self.spaces.state.free_index(s, t)));
            }
            rows.extend_from_slice(&f_rows);
            let mut feats = Features::new(m);
            for (tq, (t, wt)) in self.rules.time_points(self.spaces, n).into_iter().enumerate() {
                let psi = tm.eval_interval(n, t);
                for p in &omega {
                    let sw = (p.w * wt).sqrt();
                    let key = self.rules.space_time_key(c, p.key, n, tq);
                    let uf = |order: usize, g: fn(&Jet, usize) -> f64, comp: usize| {
                        move |k: usize| if k < 4 * ks { g(&p.jets[k / 4], comp) * psi[order][k % 4] } else { 0.0 }
                    };
                    let value = |j: &Jet, _| j.value;
                    let grad = |j: &Jet, comp: usize| j.grad[comp];
                    feats.push(sw, uf(0, value, 0), self.data.q_at(p.x, t, key));
                    feats.push(sw, uf(1, value, 0), self.data.dtq_at(p.x, t, key));
                    if self.terms.gradient_data {
                        let r = self.data.r_at(p.x, t, key);
                        let dr = self.data.dtr_at(p.x, t, key);
                        for comp in 0..dim {
                            feats.push(sw, uf(0, grad, comp), r[comp]);
                            feats.push(sw, uf(1, grad, comp), dr[comp]);
                        }
                    }
                }
                for p in &domain {
                    let sw = (p.w * wt).sqrt();
                    let r = self.modulation.value(p.x, t);
                    let dr = self.modulation.dt(p.x, t);
                    for (lo, ro) in [(0usize, r), (1, dr)] {
                        feats.push(
                            sw,
                            |k| {
                                if k < 4 * ks {
                                    let (a, i) = (k / 4, k % 4);
                                    p.jets[a].value * psi[lo + 1][i] + p.a_phi[a] * psi[lo][i]
                                } else {
                                    -ro * p.chi[k - 4 * ks]
                                }
                            },
                            0.0,
                        );
                    }
                    let sg = (self.terms.gamma_u * p.w * wt).sqrt();
                    for &(j, alpha) in &penalty {
                        feats.push(
                            sg,
                            |k| if k < 4 * ks { partial(&p.jets[k / 4], alpha) * psi[j][k % 4] } else { 0.0 },
                            0.0,
                        );
                    }
                }
            }
            out.push(feats.finish(rows, self.with_matrix));
        }

        let rows: Vec<usize> = sdofs.iter().map(|&s| self.spaces.state.free_index(s, self.t0_dof)).collect();
        if rows.iter().any(|&r| r != SKIP) {
            let mut feats = Features::new(ks);
            for p in &domain {
                let target = self.data.p_at(p.x, self.rules.space_key(c, p.key));
                feats.push(p.w.sqrt(), |a| p.a_phi[a], target);
            }
            out.push(feats.finish(rows, self.with_matrix));
        }

        if self.terms.gamma_f > 0.0 {
            let mut feats = Features::new(kf);
            for p in &domain {
                feats.push((self.terms.gamma_f * p.w).sqrt(), |b| p.chi[b], 0.0);
            }
            out.push(feats.finish(f_rows, self.with_matrix));
        }
        out
    }
}

fn assemble(
    spaces: &Spaces,
    op: &EllipticOperator,
    modulation: &SourceModulation,
    data: &ObservationData,
    terms: Terms,
    with_matrix: bool,
) -> Result<SystemBlocks> {
    if !(terms.gamma_f >= 0.0 && terms.gamma_u >= 0.0) {
        return Err(invalid("regularization parameters must be nonnegative"));
    }
    if terms.gradient_data && !data.has_gradient() {
        return Err(invalid("gradient observations are required for this functional"));
    }
    let t0_dof = spaces.state.time.center_value_dof()?;
    let ctx = Context { spaces, op, modulation, data, terms, rules: Rules::new(spaces)?, t0_dof, with_matrix };

    let n = spaces.dim();
    let n_cells = spaces.mesh().n_cells();
    let elements: Vec<Vec<usize>> = (0..if with_matrix { n_cells } else { 0 })
        .flat_map(|c| {
            let sdofs = spaces.state.space.cell_dofs(c);
            let fdofs = spaces.source.cell_dofs(c);
            let nt = spaces.state.n_time();
            (0..spaces.state.time.n_intervals()).map(move |k| {
                let mut rows: Vec<usize> = Vec::new();
                for &s in sdofs {
                    rows.extend(spaces.state.time.interval_dofs(k).iter().map(|&t| spaces.state.free_index(s, t)));
                }
                rows.extend(fdofs.iter().map(|&b| spaces.n_u() + b));
                debug_assert!(rows.iter().all(|&r| r == SKIP || r < n) && nt > 0);
                rows
            })
        })
        .collect();
    let mut matrix =
        if with_matrix { CsrMatrix::from_elements(n, elements.iter().map(|e| e.as_slice())) } else { CsrMatrix::zeros(n, n) };
    drop(elements);
    let mut matrix_tail = vec![0.0; matrix.nnz()];
    let mut rhs = vec![DoubleDouble::default(); n];
    let mut energy = DoubleDouble::default();
    let cells: Vec<usize> = (0..n_cells).collect();
    for chunk in cells.chunks(CHUNK) {
        let parts: Vec<Vec<Contribution>> = chunk.par_iter().map(|&c| ctx.cell(c)).collect();
        for part in parts {
            for contrib in part {
                if with_matrix {
                    matrix.add_local_extended(&mut matrix_tail, &contrib.rows, &contrib.local.0, &contrib.local.1);
                }
                for (k, &r) in contrib.rows.iter().enumerate() {
                    if r != SKIP {
                        rhs[r] = rhs[r].add(contrib.rhs.0[k]).add(contrib.rhs.1[k]);
                    }
                }
                energy = energy.add(contrib.energy);
            }
        }
    }
    for (v, t) in matrix.values.iter_mut().zip(matrix_tail.iter_mut()) {
        let d = DoubleDouble::from(*v).add(*t);
        (*v, *t) = (d.hi, d.lo);
    }
    let (rhs, rhs_tail) = split(&rhs);
    let warning = (terms.gradient_data && terms.gamma_f == 0.0 && terms.gamma_u == 0.0)
        .then(|| "both regularization parameters are zero; uniqueness is not guaranteed".to_string());
    Ok(SystemBlocks {
        n_u: spaces.n_u(),
        n_f: spaces.n_f(),
        matrix,
        matrix_tail,
        rhs,
        rhs_tail,
        data_energy: energy.value(),
        terms,
        warning,
    })
}

/// Normal equations of the functional with data on `ω × I`, the trace at
/// `t₀` and the `H¹(I; L²(Ω))` residual, over a Dirichlet-constrained state.
pub fn assemble_lipschitz_system(
    spaces: &Spaces,
    op: &EllipticOperator,
    modulation: &SourceModulation,
    data: &ObservationData,
) -> Result<SystemBlocks> {
    if !spaces.state.space.constrained().iter().any(|&c| c) {
        return Err(invalid("the Lipschitz functional needs a Dirichlet-constrained state space"));
    }
    assemble(spaces, op, modulation, data, Terms::LIPSCHITZ, true)
}

/// Adds interior gradient data and the source and state penalties.
pub fn assemble_holder_system(
    spaces: &Spaces,
    op: &EllipticOperator,
    modulation: &SourceModulation,
    data: &ObservationData,
    gamma_f: f64,
    gamma_u: f64,
) -> Result<SystemBlocks> {
    assemble(spaces, op, modulation, data, Terms::holder(gamma_f, gamma_u), true)
}

/// Either system, selected by `terms`.
pub fn assemble_system(
    spaces: &Spaces,
    op: &EllipticOperator,
    modulation: &SourceModulation,
    data: &ObservationData,
    terms: Terms,
) -> Result<SystemBlocks> {
    if terms == Terms::LIPSCHITZ {
        assemble_lipschitz_system(spaces, op, modulation, data)
    } else {
        assemble(spaces, op, modulation, data, terms, true)
    }
}

/// Load vector of a [`SystemBlocks`], as `rhs + tail`.
#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub rhs: Vec<f64>,
    pub tail: Vec<f64>,
    pub data_energy: f64,
}

/// Load vector and data energy only; the matrix does not depend on the data.
pub fn assemble_rhs(
    spaces: &Spaces,
    op: &EllipticOperator,
    modulation: &SourceModulation,
    data: &ObservationData,
    terms: Terms,
) -> Result<Load> {
    let s = assemble(spaces, op, modulation, data, terms, false)?;
    Ok(Load { rhs: s.rhs, tail: s.rhs_tail, data_energy: s.data_energy })
}
