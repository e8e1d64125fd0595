use std::sync::Arc;

use nalgebra::DMatrix;
use parasrc::assembly::{assemble_system, Terms};
use parasrc::basis::{HermiteCell, Jet};
use parasrc::inverse::{
    build_spaces, convergence_rates, fit_log_slope, inject_noise, synthesize_data_analytic, Mode, Noise,
    ObservationData, ProblemConfig, Site,
};
use parasrc::linsolve::{relative_residual, solve_symmetric};
use parasrc::mesh::{build_mesh_1d, build_time_grid, build_trimesh_congruent, BoxRegion, SpaceMesh};
use parasrc::quadrature::{gauss_rule_1d, triangle_rule};
use parasrc::spaces::{project_l2, DofSpace};
use parasrc::sparse::CsrMatrix;
use proptest::prelude::*;

proptest! {
    #[test]
    fn line_cells_cover_the_domain(n in 2usize..200, a in -2.0f64..0.0, len in 0.5f64..3.0) {
        let b = a + len;
        let mesh = SpaceMesh::Line(build_mesh_1d(a, b, n, (a + 0.1 * len, b - 0.1 * len)).unwrap());
        let total: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_measure(c)).sum();
        prop_assert!((total / len - 1.0).abs() < 1e-12);
    }

    #[test]
    fn time_intervals_cover_the_window(half in 1usize..60, t0 in 0.2f64..2.0, zeta in 0.01f64..0.2) {
        let g = build_time_grid(t0, zeta, 2 * half).unwrap();
        let total: f64 = (0..2 * half).map(|k| { let (a, b) = g.interval(k); b - a }).sum();
        prop_assert!((total / (2.0 * zeta) - 1.0).abs() < 1e-12);
        prop_assert!(g.center_node().is_some());
    }

    #[test]
    fn triangles_cover_the_square_and_are_congruent(nx in 1usize..12, ny in 1usize..12) {
        let m = build_trimesh_congruent(nx, ny, BoxRegion::new([0.3, 0.3], [0.7, 0.7])).unwrap();
        let mut shapes: Vec<[u64; 3]> = Vec::new();
        let mut area = 0.0;
        for t in 0..m.n_cells() {
            area += m.signed_area(t).abs();
            let [a, b, c] = m.corners(t);
            let d = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).hypot(p[1] - q[1]) * 1e9).round() as u64;
            let mut s = [d(a, b), d(b, c), d(c, a)];
            s.sort();
            if !shapes.contains(&s) {
                shapes.push(s);
            }
        }
        prop_assert!((area - 1.0).abs() < 1e-12);
        prop_assert!(shapes.len() <= 2);
    }

    #[test]
    fn hermite_reproduces_cubics(c in prop::array::uniform4(-3.0f64..3.0), x0 in -1.0f64..1.0, h in 0.01f64..2.0, s in 0.0f64..1.0) {
        let p = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
        let dp = |x: f64| c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x;
        let d2p = |x: f64| 2.0 * c[2] + 6.0 * c[3] * x;
        let cell = HermiteCell::new(x0, x0 + h);
        let dofs = [p(x0), dp(x0), p(x0 + h), dp(x0 + h)];
        let x = x0 + s * h;
        let phi = cell.eval(x);
        let at = |k: usize| dofs.iter().zip(&phi[k]).map(|(d, v)| d * v).sum::<f64>();
        let scale = 1.0 + c.iter().map(|v| v.abs()).sum::<f64>() * (1.0 + x.abs()).powi(3);
        prop_assert!((at(0) - p(x)).abs() < 1e-10 * scale);
        prop_assert!((at(1) - dp(x)).abs() < 1e-9 * scale / h);
        prop_assert!((at(2) - d2p(x)).abs() < 1e-8 * scale / (h * h));
    }

    #[test]
    fn hermite_second_derivative_matches_differences(x0 in -1.0f64..1.0, h in 0.1f64..2.0, s in 0.05f64..0.95) {
        let cell = HermiteCell::new(x0, x0 + h);
        let x = x0 + s * h;
        let step = 1e-5 * h;
        let (up, dn, mid) = (cell.eval(x + step), cell.eval(x - step), cell.eval(x));
        for a in 0..4 {
            let fd = (up[1][a] - dn[1][a]) / (2.0 * step);
            prop_assert!((fd - mid[2][a]).abs() <= 1e-6 * mid[2][a].abs().max(1.0 / h));
        }
    }

    #[test]
    fn gauss_rules_integrate_monomials(degree in 1usize..=20, k in 0usize..=20) {
        let k = k.min(degree);
        let rule = gauss_rule_1d(degree).unwrap();
        let v = rule.integrate(|x| x[0].powi(k as i32));
        prop_assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn triangle_rules_integrate_monomials(degree in 1usize..=12, i in 0usize..=12, j in 0usize..=12) {
        prop_assume!(i + j <= degree);
        let rule = triangle_rule(degree).unwrap();
        let v = rule.integrate(|p| p[0].powi(i as i32) * p[1].powi(j as i32));
        // ∫ xⁱ yʲ over the unit simplex = i! j! / (i + j + 2)!
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        let exact = fact(i) * fact(j) / fact(i + j + 2);
        prop_assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn hermite_functions_are_c1(n in 2usize..20, seed in any::<u64>()) {
        let mesh = Arc::new(SpaceMesh::Line(build_mesh_1d(0.0, 1.0, n, (0.2, 0.8)).unwrap()));
        let space = DofSpace::h2_conforming(mesh.clone()).unwrap();
        let mut state = seed;
        let coeffs: Vec<f64> = (0..space.n_dofs()).map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }).collect();
        let mut jets = Vec::new();
        let mut eval = |c: usize, x: f64| {
            space.eval_cell(c, [x, 0.0], &mut jets);
            let v: f64 = jets.iter().zip(space.cell_dofs(c)).map(|(j, &d)| j.value * coeffs[d]).sum();
            let g: f64 = jets.iter().zip(space.cell_dofs(c)).map(|(j, &d)| j.grad[0] * coeffs[d]).sum();
            (v, g)
        };
        for c in 0..n - 1 {
            let x = (c + 1) as f64 / n as f64;
            let (l, r) = (eval(c, x), eval(c + 1, x));
            prop_assert!((l.0 - r.0).abs() < 1e-10 && (l.1 - r.1).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_noise_leaves_values_unchanged(key in 0u64..1_000_000, v in -1e6f64..1e6, seed in any::<u64>()) {
        let n = Noise { delta: 0.0, seed };
        prop_assert_eq!(n.apply(Site::Window, key, v).to_bits(), v.to_bits());
        prop_assert_eq!(n.apply(Site::Trace, key, v).to_bits(), v.to_bits());
    }

    #[test]
    fn noise_is_reproducible(key in 0u64..1_000_000, seed in any::<u64>(), delta in 0.0f64..0.1) {
        let a = Noise::new(delta, seed).unwrap();
        let b = Noise::new(delta, seed).unwrap();
        prop_assert_eq!(a.multiplier(Site::Window, key).to_bits(), b.multiplier(Site::Window, key).to_bits());
        let d = inject_noise(&ObservationData::zero(), delta, seed).unwrap();
        prop_assert_eq!(d.noise, a);
    }

    #[test]
    fn log_slope_ignores_scale(c in 1e-6f64..1e6, k in -3.0f64..3.0, d0 in 1e-4f64..1e-2) {
        let x: Vec<f64> = (0..5).map(|i| d0 * 2f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powf(k)).collect();
        let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
        let (s, t) = (fit_log_slope(&x, &y), fit_log_slope(&x, &scaled));
        prop_assert!((s - k).abs() < 1e-9);
        prop_assert!((s - t).abs() < 1e-9);
    }

    #[test]
    fn rates_of_power_laws(p in 0.5f64..5.0, c in 1e-3f64..1e3) {
        let params = [0.1, 0.05, 0.025, 0.02];
        let errors: Vec<f64> = params.iter().map(|h: &f64| c * h.powf(p)).collect();
        let rates = convergence_rates(&errors, &params);
        prop_assert!(rates[0].is_none());
        for r in &rates[1..] {
            prop_assert!((r.unwrap() - p).abs() < 1e-9);
        }
    }

    #[test]
    fn reported_residual_matches_recomputation(n in 2usize..40, seed in any::<u64>()) {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| next());
        let a = &g * g.transpose() + DMatrix::<f64>::identity(n, n) * 0.1;
        let b: Vec<f64> = (0..n).map(|_| next()).collect();
        let m = CsrMatrix::from_dense(&a);
        let sol = solve_symmetric(&m, &b).unwrap();
        let r = relative_residual(&m, &sol.solution, &b);
        prop_assert!((r - sol.relative_residual).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn projection_is_idempotent(n in 2usize..30, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mesh = Arc::new(SpaceMesh::Line(build_mesh_1d(0.0, 1.0, n, (0.2, 0.8)).unwrap()));
        let space = Arc::new(DofSpace::p1(mesh));
        let once = project_l2(&space, |x| (a * x[0]).sin() + b * x[0] * x[0]).unwrap();
        let twice = project_l2(&space, |x| once.eval(x).map(|j: Jet| j.value).unwrap()).unwrap();
        for (u, v) in once.coeffs.iter().zip(&twice.coeffs) {
            prop_assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn assembled_systems_are_symmetric_semidefinite(h in 2usize..12, half in 1usize..4, holder in any::<bool>(), seed in any::<u64>()) {
        let mode = if holder { Mode::Holder } else { Mode::Lipschitz };
        let cfg = ProblemConfig { h, tau: 10 * half, mode, ..ProblemConfig::default() };
        let problem = cfg.problem().unwrap();
        let spaces = build_spaces(&problem, &cfg).unwrap();
        let data = inject_noise(&synthesize_data_analytic(&problem).unwrap(), 0.01, seed).unwrap();
        let terms = if holder { Terms::holder(1e-3, 1e-4) } else { Terms::LIPSCHITZ };
        let sys = assemble_system(&spaces, &problem.operator, &problem.modulation, &data, terms).unwrap();
        let scale = sys.matrix.max_abs();
        prop_assert!(sys.matrix.symmetry_defect() <= 1e-10 * scale);
        let mut state = seed;
        let z: Vec<f64> = (0..sys.dim()).map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }).collect();
        let bz = sys.matrix.matvec(&z);
        let q: f64 = z.iter().zip(&bz).map(|(a, b)| a * b).sum();
        let nz: f64 = z.iter().map(|v| v * v).sum();
        prop_assert!(q >= -1e-12 * scale * nz);
    }
}
