//! Acceptance criteria. Prints one PASS/FAIL line per criterion with the
//! measured quantities; the exit status does not depend on the outcome.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use parasrc::assembly::{assemble_system, evaluate_functional, SourceModulation, Terms};
use parasrc::basis::{ElementBasis, Family, Jet};
use parasrc::inverse::{
    build_spaces, convergence_rates, convergence_study, delta_study, example1, inject_noise, reconstruct,
    run_reconstruction, source_error, synthesize_data_analytic, ExperimentReport, Mode, Problem, ProblemConfig,
    Reconstructor, Refine, Truth,
};
use parasrc::linsolve::solve_symmetric;
use parasrc::mesh::{build_mesh_1d, build_time_grid, build_trimesh_congruent, BoxRegion, SpaceMesh};
use parasrc::quadrature::{gauss_rule_1d, triangle_rule};
use parasrc::spaces::{project_l2, project_l2_time, DofSpace, TimeSpace};
use parasrc::Result;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{kronecker_defect, spaces_on};

struct Tally {
    passed: usize,
    total: usize,
}

impl Tally {
    fn record(&mut self, id: &str, outcome: Result<(bool, String)>) {
        self.total += 1;
        match outcome {
            Ok((pass, detail)) => {
                if pass {
                    self.passed += 1;
                }
                println!("criterion {id}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
            }
            Err(e) => println!("criterion {id}: FAIL | error: {e}"),
        }
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn factor(a: f64, b: f64) -> f64 {
    (a / b).max(b / a)
}

fn fmt_list(v: &[f64], spec: &str) -> String {
    let items: Vec<String> = v
        .iter()
        .map(|x| if spec == "e" { format!("{x:.3e}") } else { format!("{x:.3}") })
        .collect();
    format!("[{}]", items.join(", "))
}

fn orders(reports: &[ExperimentReport]) -> Vec<f64> {
    reports.iter().filter_map(|r| r.order).collect()
}

fn errors(reports: &[ExperimentReport]) -> Vec<f64> {
    reports.iter().map(|r| r.error).collect()
}

fn ladder(example: u8, rungs: &[(usize, usize)], refine: Refine) -> Result<Vec<ExperimentReport>> {
    let configs: Vec<ProblemConfig> =
        rungs.iter().map(|&(h, tau)| ProblemConfig { example, h, tau, ..ProblemConfig::default() }).collect();
    convergence_study(&configs, refine)
}

fn criterion1() -> Result<(bool, String)> {
    let r = ladder(1, &[(10, 10), (20, 20), (40, 40), (80, 80)], Refine::Joint)?;
    let (o, e) = (orders(&r), errors(&r));
    let pass = o.iter().all(|&v| within(v, 1.85, 2.15)) && factor(e[0], 2.666e-3) <= 3.0;
    Ok((pass, format!("e = {}, orders = {} (paper 2.030, 2.005, 2.000; e(1/10) = 2.666e-3)", fmt_list(&e, "e"), fmt_list(&o, ""))))
}

fn criterion2() -> Result<(bool, String)> {
    let rungs: Vec<_> = [10, 20, 40, 80, 120].iter().map(|&h| (h, 100)).collect();
    let r = ladder(1, &rungs, Refine::Space)?;
    let (o, e) = (orders(&r), errors(&r));
    let pass = o.iter().all(|&v| within(v, 1.9, 2.1));
    Ok((pass, format!("tau = 1/100, e = {}, orders = {}", fmt_list(&e, "e"), fmt_list(&o, ""))))
}

fn criteria3_4() -> Result<((bool, String), (bool, String))> {
    let rungs: Vec<_> = [10, 20, 30, 40, 50].iter().map(|&tau| (200, tau)).collect();
    let r = ladder(1, &rungs, Refine::Time)?;
    let (o, e) = (orders(&r), errors(&r));
    let cond: Vec<f64> = r.iter().map(|x| x.cond).collect();
    let first = within(o[0], 3.5, 4.3);
    let stalls = e[3] >= e[2] && e[4] >= e[2];
    let ill = cond[3] >= 1e12 && cond[4] >= 1e12;
    let c3 = (
        first && stalls && ill,
        format!(
            "h = 1/200, tau = 1/10..1/50: e = {}, orders = {}, cond = {}; order(1/10->1/20) in [3.5, 4.3]: {first}, no gain beyond 1/30: {stalls}, cond >= 1e12 beyond 1/30: {ill}",
            fmt_list(&e, "e"),
            fmt_list(&o, ""),
            fmt_list(&cond, "e")
        ),
    );
    let h1: Vec<f64> = r[..3].iter().map(|x| x.resid_h1).collect();
    let l2: Vec<f64> = r[..3].iter().map(|x| x.resid_l2).collect();
    let params = [0.1, 0.05, 1.0 / 30.0];
    let oh: Vec<f64> = convergence_rates(&h1, &params).into_iter().flatten().collect();
    let ol: Vec<f64> = convergence_rates(&l2, &params).into_iter().flatten().collect();
    let c4 = (
        within(oh[0], 1.8, 2.2) && within(ol[0], 3.4, 4.3),
        format!(
            "|G|_H1 = {} orders {} (paper 5.692e-2, 1.395e-2, 6.154e-3; 2.029); |G|_L2 = {} orders {} (paper 4.056e-4, 2.698e-5, 6.387e-6; 3.910)",
            fmt_list(&h1, "e"),
            fmt_list(&oh, ""),
            fmt_list(&l2, "e"),
            fmt_list(&ol, "")
        ),
    );
    Ok((c3, c4))
}

fn criterion5() -> Result<(bool, String)> {
    let taus = [12usize, 18, 24, 36, 72];
    let paper_cond = [7.113e12, 1.878e13, 3.999e13, 1.212e14, 7.743e14];
    let deltas = [0.002, 0.005, 0.01];
    let paper_noisy = [
        [2.598e-1, 1.384e-1, 1.729e-1, 1.120e-1, 2.806e-1],
        [6.367e-1, 3.502e-1, 3.801e-1, 5.121e-1, 6.758e-1],
        [1.037e0, 8.476e-1, 8.371e-1, 1.131e0, 1.167e0],
    ];
    let mut clean = Vec::new();
    let mut cond = Vec::new();
    let mut noisy = vec![Vec::new(); deltas.len()];
    for &tau in &taus {
        let cfg = ProblemConfig { example: 2, h: 20, tau, ..ProblemConfig::default() };
        let r = Reconstructor::new(cfg.problem()?, &cfg)?;
        clean.push(r.run(0.0, 0)?.report.error);
        cond.push(r.condition().value);
        for (k, &d) in deltas.iter().enumerate() {
            let mut s = 0.0;
            for seed in 0..10 {
                s += r.run(d, seed)?.report.error;
            }
            noisy[k].push(s / 10.0);
        }
    }
    let params: Vec<f64> = taus.iter().map(|&t| 1.0 / t as f64).collect();
    let o: Vec<f64> = convergence_rates(&clean, &params).into_iter().flatten().collect();
    let orders_ok = o[..3].iter().all(|&v| within(v, 3.2, 4.3));
    let cond_ok = cond.iter().zip(&paper_cond).all(|(a, b)| factor(*a, *b) <= 100.0);
    let noisy_ok = noisy.iter().zip(&paper_noisy).all(|(row, p)| row.iter().zip(p).all(|(a, b)| factor(*a, *b) <= 5.0));
    let rows: Vec<String> =
        deltas.iter().zip(&noisy).map(|(d, row)| format!("delta {}%: {}", d * 100.0, fmt_list(row, "e"))).collect();
    Ok((
        orders_ok && cond_ok && noisy_ok,
        format!(
            "h = 1/20, tau = 1/12..1/72: e(0) = {}, orders = {}, cond = {}; {}; orders ok: {orders_ok}, cond within 1e2 of paper: {cond_ok}, noisy within 5x of paper: {noisy_ok}",
            fmt_list(&clean, "e"),
            fmt_list(&o, ""),
            fmt_list(&cond, "e"),
            rows.join("; ")
        ),
    ))
}

fn criterion6() -> Result<(bool, String)> {
    let r = ladder(3, &[(4, 10), (8, 20), (12, 30), (16, 40)], Refine::Joint)?;
    let (o, e) = (orders(&r), errors(&r));
    let pass = o.iter().all(|&v| within(v, 1.9, 2.2)) && factor(e[0], 2.768e-2) <= 3.0;
    Ok((pass, format!("e = {}, orders = {} (paper 2.070, 2.033, 2.018)", fmt_list(&e, "e"), fmt_list(&o, ""))))
}

fn criterion7() -> Result<(bool, String)> {
    let deltas = [0.005, 0.01, 0.02, 0.04];
    let seeds: Vec<u64> = (0..10).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (example, h, tau) in [(1u8, 100usize, 50usize), (3, 12, 20)] {
        let cfg = ProblemConfig { example, h, tau, ..ProblemConfig::default() };
        let s = delta_study(&cfg, &deltas, &seeds)?;
        pass &= within(s.slope, 0.8, 1.2);
        parts.push(format!(
            "example {example} (h = 1/{h}, tau = 1/{tau}): mean e = {}, slope = {:.3}, single seed slope = {:.3}",
            fmt_list(&s.mean_errors, "e"),
            s.slope,
            s.single_seed_slope
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn criterion8() -> Result<(bool, String)> {
    let base = ProblemConfig { h: 100, tau: 50, mode: Mode::Holder, ..ProblemConfig::default() };
    let plain = Reconstructor::new(base.problem()?, &base)?;
    let reg_cfg = ProblemConfig { gamma_f: 1e-3, gamma_u: 1e-4, ..base.clone() };
    let reg = Reconstructor::new(reg_cfg.problem()?, &reg_cfg)?;
    let seed = 0;
    let (e_plain, e_reg) = (plain.run(0.02, seed)?.report.error, reg.run(0.02, seed)?.report.error);
    let benefit = e_reg < e_plain;
    let e_hol = plain.run(0.0, 0)?.report.error;
    let lip_cfg = ProblemConfig { mode: Mode::Lipschitz, ..base.clone() };
    let problem = lip_cfg.problem()?;
    let Truth::Analytic { f, .. } = problem.truth.clone() else { unreachable!() };
    let lip = reconstruct(problem.clone(), &lip_cfg)?;
    let e_lip = source_error(&lip.f, f.as_ref(), Some(&problem.omega))?;
    let close = factor(e_hol, e_lip) <= 10.0;
    Ok((
        benefit && close,
        format!(
            "example 1, h = 1/100, tau = 1/50, error on omega; delta = 2%, seed {seed}: regularized {e_reg:.4e} vs unregularized {e_plain:.4e}; delta = 0: hol {e_hol:.4e} vs lip {e_lip:.4e}"
        ),
    ))
}

/// `u = t x(1-x)`, `R = x(1-x) + 2t`, `f = 1`, all in the discrete spaces.
fn representable_problem() -> Problem {
    Problem {
        name: "poly".into(),
        truth: Truth::Analytic {
            u: Arc::new(|x, t, k| {
                let s = if k == 0 { t } else { 1.0 };
                Jet { value: s * x[0] * (1.0 - x[0]), grad: [s * (1.0 - 2.0 * x[0]), 0.0], hess: [-2.0 * s, 0.0, 0.0] }
            }),
            f: Arc::new(|_| 1.0),
        },
        modulation: SourceModulation::new(|x, t| x[0] * (1.0 - x[0]) + 2.0 * t, |_, _| 2.0),
        ..example1()
    }
}

fn criterion9() -> Result<(bool, String)> {
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let mut kron = 0.0_f64;
    for family in [Family::Hermite1D, Family::Argyris, Family::P1Line, Family::P1Tri] {
        let m = ElementBasis::new(family).dof_matrix()?;
        let n = m.nrows();
        kron = kron.max((m - nalgebra::DMatrix::<f64>::identity(n, n)).amax());
    }
    checks.push(("basis Kronecker identity", kron <= 1e-10));

    let mut quad = true;
    for d in 1..=20 {
        let rule = gauss_rule_1d(d)?;
        for k in 0..=d {
            quad &= (rule.integrate(|x| x[0].powi(k as i32)) - 1.0 / (k as f64 + 1.0)).abs() < 1e-13;
        }
    }
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    for d in 1..=12 {
        let rule = triangle_rule(d)?;
        for i in 0..=d {
            for j in 0..=d - i {
                let exact = fact(i) * fact(j) / fact(i + j + 2);
                quad &= (rule.integrate(|p| p[0].powi(i as i32) * p[1].powi(j as i32)) - exact).abs() < 1e-13;
            }
        }
    }
    checks.push(("quadrature monomial exactness", quad));

    let mut idem = true;
    let mut p1_err = Vec::new();
    for n in [8, 16, 32, 64] {
        let mesh = Arc::new(SpaceMesh::Line(build_mesh_1d(0.0, 1.0, n, (0.2, 0.8))?));
        let space = Arc::new(DofSpace::p1(mesh));
        let g = |x: parasrc::mesh::Point| (PI * x[0]).sin();
        let once = project_l2(&space, g)?;
        let twice = project_l2(&space, |x| once.eval(x).map(|j| j.value).unwrap_or(f64::NAN))?;
        idem &= once.coeffs.iter().zip(&twice.coeffs).all(|(a, b)| (a - b).abs() < 1e-12);
        p1_err.push(source_error(&once, &g, None)?);
    }
    let mut time_err = Vec::new();
    for n in [8, 16, 32, 64] {
        let ts = Arc::new(TimeSpace::new(Arc::new(build_time_grid(0.5, 0.1, n)?)));
        let g = |t: f64| (PI * t).sin() + (7.0 * t).cos();
        let u = project_l2_time(&ts, g)?;
        let rule = gauss_rule_1d(14)?;
        let mut s = 0.0;
        for k in 0..n {
            let (a, b) = ts.grid().interval(k);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let t = a + (b - a) * p[0];
                let psi = ts.eval_interval(k, t)[0];
                let v: f64 = ts.interval_dofs(k).iter().zip(&psi).map(|(&d, p)| u.coeffs[d] * p).sum();
                s += w * (b - a) * (v - g(t)).powi(2);
            }
        }
        time_err.push(s.sqrt());
    }
    let halving = [1.0, 0.5, 0.25, 0.125];
    let rate_ok = |e: &[f64], p: f64| convergence_rates(e, &halving).into_iter().flatten().all(|r| (r - p).abs() <= 0.2);
    checks.push(("projection idempotence", idem));
    checks.push(("projection rates", rate_ok(&p1_err, 2.0) && rate_ok(&time_err, 4.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut jump = 0.0_f64;
    let line = DofSpace::h2_conforming(Arc::new(SpaceMesh::Line(build_mesh_1d(0.0, 1.0, 9, (0.2, 0.8))?)))?;
    let c: Vec<f64> = (0..line.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut jets = Vec::new();
    let mut combine = |s: &DofSpace, cell: usize, x: parasrc::mesh::Point, c: &[f64]| {
        s.eval_cell(cell, x, &mut jets);
        let mut out = [0.0; 3];
        for (j, &d) in jets.iter().zip(s.cell_dofs(cell)) {
            out[0] += c[d] * j.value;
            out[1] += c[d] * j.grad[0];
            out[2] += c[d] * j.grad[1];
        }
        out
    };
    for cell in 0..8 {
        let x = [(cell + 1) as f64 / 9.0, 0.0];
        let (a, b) = (combine(&line, cell, x, &c), combine(&line, cell + 1, x, &c));
        jump = jump.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
    }
    let tri = build_trimesh_congruent(3, 3, BoxRegion::new([0.2, 0.2], [0.8, 0.8]))?;
    let plane = DofSpace::h2_conforming(Arc::new(SpaceMesh::Plane(tri.clone())))?;
    let c: Vec<f64> = (0..plane.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    for e in tri.edges.iter().filter(|e| !e.is_boundary()) {
        let (p, q) = (tri.vertices[e.vertices[0]], tri.vertices[e.vertices[1]]);
        for s in [0.0, 0.21, 0.5, 0.9, 1.0] {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let a = combine(&plane, e.triangles[0], x, &c);
            let b = combine(&plane, e.triangles[1], x, &c);
            jump = (0..3).fold(jump, |m, k| m.max((a[k] - b[k]).abs()));
        }
    }
    checks.push(("C1 interface continuity", jump <= 1e-10));

    let cfg = ProblemConfig { h: 10, tau: 10, ..ProblemConfig::default() };
    let problem = cfg.problem()?;
    let spaces = build_spaces(&problem, &cfg)?;
    let data = inject_noise(&synthesize_data_analytic(&problem)?, 0.01, 5)?;
    let (op, md) = (&problem.operator, &problem.modulation);
    let sys = assemble_system(&spaces, op, md, &data, Terms::LIPSCHITZ)?;
    let scale = sys.matrix.max_abs();
    let mut psd = sys.matrix.symmetry_defect() <= 1e-10 * scale;
    for _ in 0..50 {
        let z: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q: f64 = z.iter().zip(&sys.matrix.matvec(&z)).map(|(a, b)| a * b).sum();
        psd &= q >= -1e-12 * scale * z.iter().map(|v| v * v).sum::<f64>();
    }
    checks.push(("system symmetry and semidefiniteness", psd));

    let line_mesh = SpaceMesh::Line(build_mesh_1d(0.0, 1.0, 5, (0.2, 0.8))?);
    let square = SpaceMesh::Plane(build_trimesh_congruent(4, 4, BoxRegion::new([0.25, 0.25], [0.75, 0.75]))?);
    let defect = kronecker_defect(&spaces_on(line_mesh, true, 0.5, 0.1, 4), Terms::LIPSCHITZ, 2.0)
        .max(kronecker_defect(&spaces_on(square, false, 0.5, 0.1, 2), Terms::holder(0.2, 0.05), 3.0));
    checks.push(("Kronecker structure of the assembly", defect <= 1e-10));

    let z = solve_symmetric(&sys.matrix, &sys.rhs)?.solution;
    let j = |z: &[f64]| -> Result<f64> {
        let (u, f) = spaces.split(z);
        evaluate_functional(&spaces, op, md, &data, Terms::LIPSCHITZ, &u, &f)
    };
    let mut slope = 0.0_f64;
    for _ in 0..20 {
        let d: Vec<f64> = (0..z.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nd = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let shift = |s: f64| z.iter().zip(&d).map(|(a, b)| a + s * 1e-6 * b / nd).collect::<Vec<f64>>();
        slope = slope.max(((j(&shift(1.0))? - j(&shift(-1.0))?) / 2e-6).abs());
    }
    checks.push(("stationarity of the solved functional", slope <= 1e-6));

    let consistency = reconstruct(representable_problem(), &ProblemConfig { h: 7, tau: 20, ..ProblemConfig::default() })?;
    checks.push(("exact representability", consistency.report.error <= 1e-8));

    let cfg = ProblemConfig { h: 20, tau: 20, delta: 0.01, seed: 7, ..ProblemConfig::default() };
    let same = run_reconstruction(&cfg)?.csv_row(false) == run_reconstruction(&cfg)?.csv_row(false);
    checks.push(("determinism", same));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let detail = if failed.is_empty() {
        format!("{} suites ({})", checks.len(), checks.iter().map(|c| c.0).collect::<Vec<_>>().join(", "))
    } else {
        format!("failing: {}", failed.join(", "))
    };
    Ok((failed.is_empty(), detail))
}

fn main() {
    // `cargo test -- <filter>` style arguments are accepted and ignored
    let start = Instant::now();
    let mut tally = Tally { passed: 0, total: 0 };
    let timed = |id: &str, tally: &mut Tally, f: &dyn Fn() -> Result<(bool, String)>| {
        let t = Instant::now();
        let outcome = f().map(|(p, d)| (p, format!("{d} [{:.1} s]", t.elapsed().as_secs_f64())));
        tally.record(id, outcome);
    };
    timed("1", &mut tally, &criterion1);
    timed("2", &mut tally, &criterion2);
    let t = Instant::now();
    match criteria3_4() {
        Ok((c3, c4)) => {
            let s = t.elapsed().as_secs_f64();
            tally.record("3", Ok((c3.0, format!("{} [{s:.1} s]", c3.1))));
            tally.record("4", Ok(c4));
        }
        Err(e) => {
            tally.record("3", Err(e.clone()));
            tally.record("4", Err(e));
        }
    }
    timed("5", &mut tally, &criterion5);
    timed("6", &mut tally, &criterion6);
    timed("7", &mut tally, &criterion7);
    timed("8", &mut tally, &criterion8);
    timed("9", &mut tally, &criterion9);
    println!(
        "acceptance: {}/{} criteria pass ({:.0} s)",
        tally.passed,
        tally.total,
        start.elapsed().as_secs_f64()
    );
}
