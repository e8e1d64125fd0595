use crate::basis::Jet;
use crate::error::Result;
use crate::inverse::data::ObservationData;
use crate::mesh::Point;
use crate::quadrature::{cell_rule, gauss_legendre};
use crate::spaces::{tensor_eval, SpaceFunction, SpaceTimeFunction};

use super::{partial, penalty_terms, EllipticOperator, Rules, SourceModulation, Spaces, Terms};

/// `(Lu, ∂ₜLu)` at `(x, t)` with `L = ∂ₜ + A`.
pub fn apply_l(u: &SpaceTimeFunction, op: &EllipticOperator, x: Point, t: f64) -> Result<(f64, f64)> {
    let j0 = tensor_eval(u, x, t, 0)?;
    let j1 = tensor_eval(u, x, t, 1)?;
    let j2 = tensor_eval(u, x, t, 2)?;
    Ok((j1.value + op.apply(x, &j0), j2.value + op.apply(x, &j1)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    /// `‖G‖` in `H¹(I; L²(Ω))`.
    pub h1: f64,
    /// `‖G‖` in `L²(I; L²(Ω))`.
    pub l2: f64,
}

fn add_scaled(acc: &mut Jet, w: f64, j: &Jet) {
    acc.value += w * j.value;
    acc.grad[0] += w * j.grad[0];
    acc.grad[1] += w * j.grad[1];
    for k in 0..3 {
        acc.hess[k] += w * j.hess[k];
    }
}

/// Norms of `G = Lu - Rf` over the whole cylinder.
pub fn residual_norms(
    u: &SpaceTimeFunction,
    f: &SpaceFunction,
    op: &EllipticOperator,
    modulation: &SourceModulation,
) -> Result<ResidualNorms> {
    let ts = &u.space;
    let mesh = ts.space.mesh();
    let rule = cell_rule(mesh.dim(), 11)?;
    let (tn, tw) = gauss_legendre(6);
    let (mut l2, mut dt) = (0.0, 0.0);
    let (mut jets, mut p1) = (Vec::new(), Vec::new());
    for c in 0..mesh.n_cells() {
        let (pts, wts) = mesh.cell_quadrature(c, &rule);
        for (x, w) in pts.iter().zip(&wts) {
            ts.space.eval_cell(c, *x, &mut jets);
            f.space.eval_cell(c, *x, &mut p1);
            let fx: f64 = p1.iter().zip(f.space.cell_dofs(c)).map(|(j, &d)| j.value * f.coeffs[d]).sum();
            for n in 0..ts.time.n_intervals() {
                let (a, b) = ts.time.grid().interval(n);
                let tdofs = ts.time.interval_dofs(n);
                for (s, wt) in tn.iter().zip(&tw) {
                    let t = a + (b - a) * s;
                    let psi = ts.time.eval_interval(n, t);
                    let mut d = [Jet::default(); 3];
                    for (j, &sd) in jets.iter().zip(ts.space.cell_dofs(c)) {
                        for (order, acc) in d.iter_mut().enumerate() {
                            let coef: f64 =
                                tdofs.iter().zip(&psi[order]).map(|(&td, p)| u.coeffs[ts.index(sd, td)] * p).sum();
                            add_scaled(acc, coef, j);
                        }
                    }
                    let g = d[1].value + op.apply(*x, &d[0]) - modulation.value(*x, t) * fx;
                    let gt = d[2].value + op.apply(*x, &d[1]) - modulation.dt(*x, t) * fx;
                    let ww = w * wt * (b - a);
                    l2 += ww * g * g;
                    dt += ww * gt * gt;
                }
            }
        }
    }
    Ok(ResidualNorms { h1: (l2 + dt).sqrt(), l2: l2.sqrt() })
}

/// The discrete functional evaluated pointwise from the finite element
/// functions, at the quadrature points and noise keys used by the assembly.
pub fn evaluate_functional(
    spaces: &Spaces,
    op: &EllipticOperator,
    modulation: &SourceModulation,
    data: &ObservationData,
    terms: Terms,
    u: &SpaceTimeFunction,
    f: &SpaceFunction,
) -> Result<f64> {
    let rules = Rules::new(spaces)?;
    let mesh = spaces.mesh();
    let dim = mesh.dim();
    let t0 = spaces.state.time.grid().t0;
    let penalty = penalty_terms(dim);
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let (px, pw) = mesh.cell_quadrature(c, &rules.space);
        let (ox, ow) = mesh.region_quadrature(c, &mesh.omega(), &rules.space);
        for n in 0..spaces.state.time.n_intervals() {
            for (tq, (t, wt)) in rules.time_points(spaces, n).into_iter().enumerate() {
                for (sq, (x, w)) in ox.iter().zip(&ow).enumerate() {
                    let key = rules.space_time_key(c, sq, n, tq);
                    let j0 = tensor_eval(u, *x, t, 0)?;
                    let j1 = tensor_eval(u, *x, t, 1)?;
                    let mut s = (j0.value - data.q_at(*x, t, key)).powi(2) + (j1.value - data.dtq_at(*x, t, key)).powi(2);
                    if terms.gradient_data {
                        let r = data.r_at(*x, t, key);
                        let dr = data.dtr_at(*x, t, key);
                        for k in 0..dim {
                            s += (j0.grad[k] - r[k]).powi(2) + (j1.grad[k] - dr[k]).powi(2);
                        }
                    }
                    total += 0.5 * w * wt * s;
                }
                for (x, w) in px.iter().zip(&pw) {
                    let fx = f.eval(*x)?.value;
                    let (lu, dlu) = apply_l(u, op, *x, t)?;
                    let g = lu - modulation.value(*x, t) * fx;
                    let gt = dlu - modulation.dt(*x, t) * fx;
                    total += 0.5 * w * wt * (g * g + gt * gt);
                    if terms.gamma_u > 0.0 {
                        let jets = [tensor_eval(u, *x, t, 0)?, tensor_eval(u, *x, t, 1)?, tensor_eval(u, *x, t, 2)?];
                        let s: f64 = penalty.iter().map(|&(j, a)| partial(&jets[j], a).powi(2)).sum();
                        total += 0.5 * terms.gamma_u * w * wt * s;
                    }
                }
            }
        }
        for (sq, (x, w)) in px.iter().zip(&pw).enumerate() {
            let au = op.apply(*x, &tensor_eval(u, *x, t0, 0)?);
            total += 0.5 * w * (au - data.p_at(*x, rules.space_key(c, sq))).powi(2);
            if terms.gamma_f > 0.0 {
                total += 0.5 * terms.gamma_f * w * f.eval(*x)?.value.powi(2);
            }
        }
    }
    Ok(total)
}
