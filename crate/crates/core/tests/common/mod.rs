//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use parasrc::assembly::{assemble_system, EllipticOperator, SourceModulation, Spaces, Terms};
use parasrc::basis::Jet;
use parasrc::inverse::ObservationData;
use parasrc::mesh::{build_time_grid, BoxRegion, Point, SpaceMesh};
use parasrc::quadrature::{gauss_legendre, triangle_rule};
use parasrc::spaces::{DofSpace, TensorSpace, TimeSpace};
use parasrc::sparse::SKIP;

pub fn spaces_on(mesh: SpaceMesh, dirichlet: bool, t0: f64, zeta: f64, n: usize) -> Spaces {
    let mesh = Arc::new(mesh);
    let mut space = DofSpace::h2_conforming(mesh.clone()).unwrap();
    if dirichlet {
        space = space.apply_dirichlet_constraints();
    }
    let time = TimeSpace::new(Arc::new(build_time_grid(t0, zeta, n).unwrap()));
    Spaces::new(Arc::new(TensorSpace::new(Arc::new(space), Arc::new(time))), Arc::new(DofSpace::p1(mesh))).unwrap()
}

pub fn constant_r(r: f64) -> SourceModulation {
    SourceModulation::time_only(move |_| r, |_| 0.0)
}

/// Spatial factor matrices, integrated cell by cell with rules finer than
/// the assembly's. Index `α` of `deriv` follows value, ∂x, ∂y, ∂xx, ∂xy, ∂yy.
pub struct SpaceFactors {
    mass_omega: DMatrix<f64>,
    grad_omega: DMatrix<f64>,
    mass: DMatrix<f64>,
    /// `∫ φₐ Aφ_b`
    cross: DMatrix<f64>,
    /// `∫ Aφₐ Aφ_b`
    aa: DMatrix<f64>,
    deriv: Vec<DMatrix<f64>>,
    /// `∫ φₐ χ_b`, `∫ Aφₐ χ_b`, `∫ χₐ χ_b`
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    p1_mass: DMatrix<f64>,
}

pub fn part(j: &Jet, alpha: usize) -> f64 {
    match alpha {
        0 => j.value,
        1 | 2 => j.grad[alpha - 1],
        _ => j.hess[alpha - 3],
    }
}

/// Quadrature points of cell `c`, and the subset inside `ω`. In 2D `ω` must
/// be a union of cells.
pub fn cell_points(mesh: &SpaceMesh, c: usize, omega: &BoxRegion) -> (Vec<(Point, f64)>, Vec<(Point, f64)>) {
    match mesh {
        SpaceMesh::Line(m) => {
            let (a, b) = m.cell(c);
            let (gx, gw) = gauss_legendre(10);
            let line = |lo: f64, hi: f64| -> Vec<(Point, f64)> {
                if hi <= lo {
                    return Vec::new();
                }
                gx.iter().zip(&gw).map(|(s, w)| ([lo + (hi - lo) * s, 0.0], w * (hi - lo))).collect()
            };
            (line(a, b), line(a.max(omega.lo[0]), b.min(omega.hi[0])))
        }
        SpaceMesh::Plane(_) => {
            let (pts, wts) = mesh.cell_quadrature(c, &triangle_rule(12).unwrap());
            let all: Vec<(Point, f64)> = pts.into_iter().zip(wts).collect();
            let centroid = mesh.cell_vertices(c).iter().map(|&v| mesh.vertex(v)).fold([0.0; 2], |acc, p| {
                [acc[0] + p[0] / 3.0, acc[1] + p[1] / 3.0]
            });
            let inside = omega.contains(centroid, 2);
            let w = if inside { all.clone() } else { Vec::new() };
            (all, w)
        }
    }
}

pub fn laplacian(j: &Jet, dim: usize) -> f64 {
    if dim == 1 {
        -j.hess[0]
    } else {
        -(j.hess[0] + j.hess[2])
    }
}

pub fn space_factors(spaces: &Spaces) -> SpaceFactors {
    let space = &spaces.state.space;
    let mesh = space.mesh();
    let dim = mesh.dim();
    let omega = mesh.omega();
    let (n, m) = (space.n_dofs(), spaces.source.n_dofs());
    let z = || DMatrix::<f64>::zeros(n, n);
    let mut s = SpaceFactors {
        mass_omega: z(),
        grad_omega: z(),
        mass: z(),
        cross: z(),
        aa: z(),
        deriv: (0..6).map(|_| z()).collect(),
        p: DMatrix::zeros(n, m),
        q: DMatrix::zeros(n, m),
        p1_mass: DMatrix::zeros(m, m),
    };
    let (mut jets, mut chi) = (Vec::new(), Vec::new());
    for c in 0..mesh.n_cells() {
        let (all, inner) = cell_points(mesh, c, &omega);
        let dofs = space.cell_dofs(c);
        let fdofs = spaces.source.cell_dofs(c);
        for (x, w) in inner {
            space.eval_cell(c, x, &mut jets);
            for (a, ja) in dofs.iter().zip(&jets) {
                for (b, jb) in dofs.iter().zip(&jets) {
                    s.mass_omega[(*a, *b)] += w * ja.value * jb.value;
                    s.grad_omega[(*a, *b)] += w * (0..dim).map(|k| ja.grad[k] * jb.grad[k]).sum::<f64>();
                }
            }
        }
        for (x, w) in all {
            space.eval_cell(c, x, &mut jets);
            spaces.source.eval_cell(c, x, &mut chi);
            for (a, ja) in dofs.iter().zip(&jets) {
                let la = laplacian(ja, dim);
                for (b, jb) in dofs.iter().zip(&jets) {
                    let lb = laplacian(jb, dim);
                    s.mass[(*a, *b)] += w * ja.value * jb.value;
                    s.cross[(*a, *b)] += w * ja.value * lb;
                    s.aa[(*a, *b)] += w * la * lb;
                    for (alpha, d) in s.deriv.iter_mut().enumerate() {
                        d[(*a, *b)] += w * part(ja, alpha) * part(jb, alpha);
                    }
                }
                for (b, cb) in fdofs.iter().zip(&chi) {
                    s.p[(*a, *b)] += w * ja.value * cb.value;
                    s.q[(*a, *b)] += w * la * cb.value;
                }
            }
            for (a, ca) in fdofs.iter().zip(&chi) {
                for (b, cb) in fdofs.iter().zip(&chi) {
                    s.p1_mass[(*a, *b)] += w * ca.value * cb.value;
                }
            }
        }
    }
    s
}

/// `t[j][k] = ∫ ψ⁽ʲ⁾ ψ⁽ᵏ⁾` for `j, k ≤ 2`, `∫ ψ⁽ʲ⁾`, and `ψ(t₀)`.
pub fn time_factors(time: &TimeSpace) -> (Vec<Vec<DMatrix<f64>>>, Vec<Vec<f64>>, Vec<f64>) {
    let n = time.n_dofs();
    let mut t = vec![vec![DMatrix::<f64>::zeros(n, n); 3]; 3];
    let mut ints = vec![vec![0.0; n]; 3];
    let (gx, gw) = gauss_legendre(8);
    for k in 0..time.n_intervals() {
        let (a, b) = time.grid().interval(k);
        let dofs = time.interval_dofs(k);
        for (s, w) in gx.iter().zip(&gw) {
            let psi = time.eval_interval(k, a + (b - a) * s);
            let w = w * (b - a);
            for j in 0..3 {
                for (il, &i) in dofs.iter().enumerate() {
                    ints[j][i] += w * psi[j][il];
                    for l in 0..3 {
                        for (ml, &m) in dofs.iter().enumerate() {
                            t[j][l][(i, m)] += w * psi[j][il] * psi[l][ml];
                        }
                    }
                }
            }
        }
    }
    let t0 = time.grid().t0;
    let k = time.locate(t0).unwrap();
    let psi = time.eval_interval(k, t0);
    let mut e = vec![0.0; n];
    for (il, &i) in time.interval_dofs(k).iter().enumerate() {
        e[i] += psi[0][il];
    }
    (t, ints, e)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Largest entry of the difference between the assembled blocks and sums of
/// Kronecker products of the factor matrices, for constant `R = r`, relative
/// to the largest entry of `B_uu`.
pub fn kronecker_defect(spaces: &Spaces, terms: Terms, r: f64) -> f64 {
    let op = EllipticOperator::laplacian();
    let sys = assemble_system(spaces, &op, &constant_r(r), &ObservationData::zero(), terms).unwrap();
    let s = space_factors(spaces);
    let (t, ints, e) = time_factors(&spaces.state.time);
    let ee = DMatrix::from_fn(e.len(), e.len(), |i, j| e[i] * e[j]);
    let mut pairs: Vec<(DMatrix<f64>, DMatrix<f64>)> = vec![
        (s.mass_omega.clone(), &t[0][0] + &t[1][1]),
        (s.aa.clone(), ee),
        (s.mass.clone(), &t[1][1] + &t[2][2]),
        (s.cross.clone(), &t[1][0] + &t[2][1]),
        (s.cross.transpose(), &t[0][1] + &t[1][2]),
        (s.aa.clone(), &t[0][0] + &t[1][1]),
    ];
    if terms.gradient_data {
        pairs.push((s.grad_omega.clone(), &t[0][0] + &t[1][1]));
    }
    if terms.gamma_u > 0.0 {
        let (first, second): (&[usize], &[usize]) =
            if spaces.mesh().dim() == 1 { (&[0, 1], &[0, 1, 3]) } else { (&[0, 1, 2], &[0, 1, 2, 3, 4, 5]) };
        for j in 0..2 {
            for &a in second {
                pairs.push((&s.deriv[a] * terms.gamma_u, t[j][j].clone()));
            }
        }
        for j in 0..3 {
            for &a in first {
                pairs.push((&s.deriv[a] * terms.gamma_u, t[j][j].clone()));
            }
        }
    }
    let ts = &spaces.state;
    let (ns, nt) = (ts.space.n_dofs(), ts.time.n_dofs());
    let uu = sys.block_uu().to_dense();
    let mut oracle = DMatrix::<f64>::zeros(uu.nrows(), uu.ncols());
    for sa in 0..ns {
        for sb in 0..ns {
            if ts.space.free_index(sa) == SKIP || ts.space.free_index(sb) == SKIP {
                continue;
            }
            for i in 0..nt {
                for j in 0..nt {
                    let v: f64 = pairs.iter().map(|(sm, tm)| sm[(sa, sb)] * tm[(i, j)]).sum();
                    oracle[(ts.free_index(sa, i), ts.free_index(sb, j))] = v;
                }
            }
        }
    }
    let scale = max_abs(&uu);
    let mut defect = max_abs(&(&uu - &oracle));

    let uf = sys.block_uf().to_dense();
    let mut oracle = DMatrix::<f64>::zeros(uf.nrows(), uf.ncols());
    for sa in 0..ns {
        if ts.space.free_index(sa) == SKIP {
            continue;
        }
        for i in 0..nt {
            for b in 0..s.p.ncols() {
                oracle[(ts.free_index(sa, i), b)] = -r * (s.p[(sa, b)] * ints[1][i] + s.q[(sa, b)] * ints[0][i]);
            }
        }
    }
    defect = defect.max(max_abs(&(&uf - &oracle)));

    let ff = sys.block_ff().to_dense();
    let len = 2.0 * ts.time.grid().zeta;
    let oracle = &s.p1_mass * (r * r * len + terms.gamma_f);
    defect.max(max_abs(&(&ff - &oracle))) / scale
}

