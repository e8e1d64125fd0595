use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::assembly::{EllipticOperator, SourceModulation};
use crate::basis::Jet;
use crate::error::{invalid, Result};
use crate::mesh::{BoxRegion, Point};

use super::data::SpaceFn;

/// Spatial jet of `∂ₜᵏu†` at `(x, t)`, `k` in `{0, 1}`.
pub type StateFn = Arc<dyn Fn(Point, f64, usize) -> Jet + Send + Sync>;

#[derive(Clone)]
pub enum Truth {
    /// Closed-form state and source.
    Analytic { u: StateFn, f: SpaceFn },
    /// `f = π_h g` on the reconstruction mesh; the state comes from a forward
    /// solve started at `start` with zero initial value, on a mesh
    /// `fine_factor` times finer. Requires `R ≡ 1`.
    Forward { g: SpaceFn, fine_factor: usize, start: f64 },
}

/// Everything about an experiment that does not depend on the discretization.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub dim: usize,
    pub domain: BoxRegion,
    pub omega: BoxRegion,
    pub t0: f64,
    pub zeta: f64,
    pub operator: EllipticOperator,
    pub modulation: SourceModulation,
    pub truth: Truth,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("omega", &self.omega)
            .field("t0", &self.t0)
            .field("zeta", &self.zeta)
            .finish_non_exhaustive()
    }
}

impl Problem {
    /// Checks that the exact state vanishes on `∂Ω` (sampled), as the
    /// functional with boundary information requires.
    pub fn check_dirichlet_trace(&self) -> Result<()> {
        let Truth::Analytic { u, .. } = &self.truth else {
            return Ok(());
        };
        let (lo, hi) = (self.domain.lo, self.domain.hi);
        let mut pts = Vec::new();
        for k in 0..=16 {
            let s = k as f64 / 16.0;
            if self.dim == 1 {
                pts.extend([[lo[0], 0.0], [hi[0], 0.0]]);
                break;
            }
            let x = lo[0] + s * (hi[0] - lo[0]);
            let y = lo[1] + s * (hi[1] - lo[1]);
            pts.extend([[x, lo[1]], [x, hi[1]], [lo[0], y], [hi[0], y]]);
        }
        for k in 0..=4 {
            let t = self.t0 - self.zeta + 0.5 * self.zeta * k as f64;
            for &p in &pts {
                let v = u(p, t, 0).value;
                if v.abs() > 1e-10 {
                    return Err(invalid(format!(
                        "the exact state is {v:e} on the boundary at {p:?}, t = {t}; use the mode without boundary data"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sin_sin_state(dim: usize) -> StateFn {
    Arc::new(move |x: Point, t: f64, k: usize| {
        let st = if k == 0 { (PI * t).sin() } else { PI * (PI * t).cos() };
        let (sx, cx) = ((PI * x[0]).sin(), (PI * x[0]).cos());
        let (sy, cy) = if dim == 1 { (1.0, 0.0) } else { ((PI * x[1]).sin(), (PI * x[1]).cos()) };
        let p2 = PI * PI;
        if dim == 1 {
            Jet { value: st * sx, grad: [st * PI * cx, 0.0], hess: [-st * p2 * sx, 0.0, 0.0] }
        } else {
            Jet {
                value: st * sx * sy,
                grad: [st * PI * cx * sy, st * PI * sx * cy],
                hess: [-st * p2 * sx * sy, st * p2 * cx * cy, -st * p2 * sx * sy],
            }
        }
    })
}

fn sin_source(dim: usize) -> SpaceFn {
    if dim == 1 {
        Arc::new(|x: Point| (PI * x[0]).sin())
    } else {
        Arc::new(|x: Point| (PI * x[0]).sin() * (PI * x[1]).sin())
    }
}

/// `u† = sin(πt) sin(πx)` on `(0, 1)`, `A = -∂ₓₓ`, `R = π² sin(πt) + π cos(πt)`.
pub fn example1() -> Problem {
    Problem {
        name: "1".into(),
        dim: 1,
        domain: BoxRegion::interval(0.0, 1.0),
        omega: BoxRegion::interval(0.2, 0.8),
        t0: 0.5,
        zeta: 0.1,
        operator: EllipticOperator::laplacian(),
        modulation: SourceModulation::time_only(
            |t| PI * PI * (PI * t).sin() + PI * (PI * t).cos(),
            |t| PI * PI * PI * (PI * t).cos() - PI * PI * (PI * t).sin(),
        ),
        truth: Truth::Analytic { u: sin_sin_state(1), f: sin_source(1) },
    }
}

/// `f = π_h sin(πx)` on `(0, 1)`, `A = -∂ₓₓ`, data from a forward solve with
/// `R ≡ 1`, zero initial value at `t = 0` and zero boundary values.
pub fn example2() -> Problem {
    Problem {
        name: "2".into(),
        dim: 1,
        domain: BoxRegion::interval(0.0, 1.0),
        omega: BoxRegion::interval(0.2, 0.8),
        t0: 1.0,
        zeta: 0.5,
        operator: EllipticOperator::laplacian(),
        modulation: SourceModulation::time_only(|_| 1.0, |_| 0.0),
        truth: Truth::Forward { g: sin_source(1), fine_factor: 16, start: 0.0 },
    }
}

/// `u† = sin(πt) sin(πx) sin(πy)` on the unit square, `A = -Δ`,
/// `R = 2π² sin(πt) + π cos(πt)`.
pub fn example3() -> Problem {
    Problem {
        name: "3".into(),
        dim: 2,
        domain: BoxRegion::new([0.0, 0.0], [1.0, 1.0]),
        omega: BoxRegion::new([0.2, 0.2], [0.8, 0.8]),
        t0: 0.5,
        zeta: 0.1,
        operator: EllipticOperator::laplacian(),
        modulation: SourceModulation::time_only(
            |t| 2.0 * PI * PI * (PI * t).sin() + PI * (PI * t).cos(),
            |t| 2.0 * PI * PI * PI * (PI * t).cos() - PI * PI * (PI * t).sin(),
        ),
        truth: Truth::Analytic { u: sin_sin_state(2), f: sin_source(2) },
    }
}

pub fn example(id: u8) -> Result<Problem> {
    match id {
        1 => Ok(example1()),
        2 => Ok(example2()),
        3 => Ok(example3()),
        _ => Err(invalid(format!("unknown example {id}; expected 1, 2 or 3"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_states_solve_their_equations() {
        for p in [example1(), example3()] {
            let Truth::Analytic { u, f } = &p.truth else { unreachable!() };
            for (x, t) in [([0.3, 0.6], 0.45), ([0.71, 0.2], 0.58)] {
                let lu = u(x, t, 1).value + p.operator.apply(x, &u(x, t, 0));
                assert!((lu - p.modulation.value(x, t) * f(x)).abs() < 1e-12);
                let h = 1e-6;
                let fd = (p.modulation.value(x, t + h) - p.modulation.value(x, t - h)) / (2.0 * h);
                assert!((fd - p.modulation.dt(x, t)).abs() < 1e-6);
            }
            assert!(p.check_dirichlet_trace().is_ok());
        }
    }

    #[test]
    fn example1_trace_data() {
        let p = example1();
        let Truth::Analytic { u, .. } = &p.truth else { unreachable!() };
        let x = [0.3, 0.0];
        let pval = p.operator.apply(x, &u(x, 0.5, 0));
        assert!((pval - PI * PI * (PI * 0.3).sin()).abs() < 1e-12);
        assert!(u(x, 0.5, 1).value.abs() < 1e-15);
    }

    #[test]
    fn nonzero_trace_rejected() {
        let mut p = example1();
        p.truth = Truth::Analytic { u: Arc::new(|_, _, _| Jet { value: 1.0, ..Jet::default() }), f: sin_source(1) };
        assert!(p.check_dirichlet_trace().is_err());
        assert!(example(4).is_err());
    }
}
