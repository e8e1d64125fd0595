use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parasrc::inverse::{
    convergence_study, delta_study, reconstruct, write_csv, ExperimentReport, Mode, Problem, ProblemConfig,
    Reconstructor, Refine, Truth, CSV_HEADER,
};
use parasrc::spaces::SpaceFunction;
use parasrc::Error;

#[derive(Parser, Debug)]
#[command(name = "parasrc", version, about = "Reconstruct the spatial source of a parabolic equation from interior data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single reconstruction; one CSV row.
    Run(RunArgs),
    /// Refinement ladder with observed orders.
    Ladder(LadderArgs),
    /// Error against noise level on a fixed grid.
    NoiseStudy(NoiseArgs),
    /// Assembled system matrix in coordinate text format.
    ExportMatrix(ExportArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Built-in example.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), conflicts_with = "config")]
    example: Option<u8>,
    /// TOML file with experiment settings; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spatial mesh size denominator (`--h 20` is h = 1/20).
    #[arg(long)]
    h: Option<usize>,
    /// Time step denominator.
    #[arg(long)]
    tau: Option<usize>,
    /// Relative noise level.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<CliMode>,
    #[arg(long = "gamma-f")]
    gamma_f: Option<f64>,
    #[arg(long = "gamma-u")]
    gamma_u: Option<f64>,
    /// Error region, `x0,x1` or `x0,x1,y0,y1`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    omega0: Option<Vec<f64>>,
    /// Directory for CSV and plot files; without it results go to stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill in the wall_ms column.
    #[arg(long)]
    timing: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum CliMode {
    Lip,
    Hol,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CliRefine {
    Joint,
    Space,
    Time,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Growth {
    /// Multiply the base denominators by 1, 2, 4, ...
    Double,
    /// Multiply the base denominators by 1, 2, 3, ...
    Linear,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct LadderArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 4)]
    rungs: usize,
    #[arg(long, value_enum, default_value = "joint")]
    refine: CliRefine,
    /// Default: linear for example 3, doubling otherwise.
    #[arg(long, value_enum)]
    growth: Option<Growth>,
    /// Explicit spatial denominators, overriding --rungs and --growth.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    hs: Option<Vec<usize>>,
    /// Explicit time denominators, overriding --rungs and --growth.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    taus: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.005,0.01,0.02,0.04")]
    deltas: Vec<f64>,
    /// Number of seeds, 0..n.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::SingularSystem { .. } | Error::IllConditioned { .. } | Error::Forward(_) => {
                Failure::Numerical(e.to_string())
            }
            Error::InvalidArgument(_) | Error::Config(_) | Error::Misaligned { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn configure(c: &Common) -> Outcome<ProblemConfig> {
    let mut cfg = match (&c.config, c.example) {
        (Some(path), _) => ProblemConfig::load(path)?,
        (None, Some(e)) => ProblemConfig::for_example(e),
        (None, None) => return Err(Failure::Usage("one of --example or --config is required".into())),
    };
    if let Some(v) = c.h {
        cfg.h = v;
    }
    if let Some(v) = c.tau {
        cfg.tau = v;
    }
    if let Some(v) = c.delta {
        cfg.delta = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(m) = c.mode {
        cfg.mode = match m {
            CliMode::Lip => Mode::Lipschitz,
            CliMode::Hol => Mode::Holder,
        };
    }
    if let Some(v) = c.gamma_f {
        cfg.gamma_f = v;
    }
    if let Some(v) = c.gamma_u {
        cfg.gamma_u = v;
    }
    if let Some(v) = &c.omega0 {
        cfg.omega0 = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `text` to stdout and, with an output directory, to `name` there.
fn emit(out: Option<&Path>, name: &str, text: &str) -> Outcome<()> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    lock.write_all(text.as_bytes())?;
    lock.flush()?;
    if let Some(dir) = out {
        write_file(dir, name, text)?;
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> Outcome<()> {
    fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn csv(reports: &[ExperimentReport], timing: bool) -> String {
    let mut buf = Vec::new();
    write_csv(reports, timing, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

fn warn(reports: &[ExperimentReport]) {
    for r in reports {
        if let Some(w) = &r.warning {
            eprintln!("warning: h = 1/{}, tau = 1/{}: {w}", r.h, r.tau);
        }
        if r.cond_approximate {
            eprintln!("warning: h = 1/{}, tau = 1/{}: condition estimate did not converge", r.h, r.tau);
        }
    }
}

fn run(a: &RunArgs) -> Outcome<()> {
    let cfg = configure(&a.common)?;
    let problem = cfg.problem()?;
    let rec = reconstruct(problem.clone(), &cfg)?;
    let reports = [rec.report];
    warn(&reports);
    let out = a.common.out.as_deref();
    emit(out, "run.csv", &csv(&reports, a.common.timing))?;
    if let Some(dir) = out {
        write_file(dir, "source.csv", &source_table(&problem, &rec.f))?;
        write_file(dir, "source.gp", if problem.dim == 1 { SOURCE_PLOT_1D } else { SOURCE_PLOT_2D })?;
    }
    Ok(())
}

/// Reconstructed and exact source at the mesh vertices.
fn source_table(problem: &Problem, f: &SpaceFunction) -> String {
    let exact = match &problem.truth {
        Truth::Analytic { f, .. } => f.clone(),
        Truth::Forward { g, .. } => g.clone(),
    };
    let mesh = f.space.mesh();
    let mut s = String::from("x,y,reconstructed,exact\n");
    for v in 0..mesh.n_vertices() {
        let x = mesh.vertex(v);
        s.push_str(&format!("{},{},{:.10e},{:.10e}\n", x[0], x[1], f.coeffs[v], exact(x)));
    }
    s
}

fn ladder_grid(a: &LadderArgs, cfg: &ProblemConfig) -> Outcome<Vec<(usize, usize)>> {
    let growth = a.growth.unwrap_or(if cfg.example == 3 { Growth::Linear } else { Growth::Double });
    let factor = |i: usize| match growth {
        Growth::Double => 1usize << i,
        Growth::Linear => i + 1,
    };
    let n = match (&a.hs, &a.taus) {
        (Some(h), Some(t)) if h.len() != t.len() => {
            return Err(Failure::Usage(format!("--hs has {} entries but --taus has {}", h.len(), t.len())))
        }
        (Some(v), _) | (None, Some(v)) => v.len(),
        (None, None) => a.rungs,
    };
    if n < 2 {
        return Err(Failure::Usage("a ladder needs at least two rungs".into()));
    }
    let pick = |list: &Option<Vec<usize>>, base: usize, refined: bool, i: usize| match list {
        Some(v) => v[i],
        None if refined => base * factor(i),
        None => base,
    };
    let space = a.refine != CliRefine::Time;
    let time = a.refine != CliRefine::Space;
    Ok((0..n).map(|i| (pick(&a.hs, cfg.h, space, i), pick(&a.taus, cfg.tau, time, i))).collect())
}

fn ladder(a: &LadderArgs) -> Outcome<()> {
    let mut base = configure(&a.common)?;
    if a.common.h.is_none() && a.common.config.is_none() && base.example == 3 {
        base.h = 4;
    }
    let grid = ladder_grid(a, &base)?;
    let configs: Vec<ProblemConfig> = grid.iter().map(|&(h, tau)| ProblemConfig { h, tau, ..base.clone() }).collect();
    for c in &configs {
        c.validate()?;
    }
    let refine = match a.refine {
        CliRefine::Joint => Refine::Joint,
        CliRefine::Space => Refine::Space,
        CliRefine::Time => Refine::Time,
    };
    let reports = convergence_study(&configs, refine)?;
    warn(&reports);
    let out = a.common.out.as_deref();
    emit(out, "ladder.csv", &csv(&reports, a.common.timing))?;
    if let Some(dir) = out {
        let x = if refine == Refine::Time { "tau" } else { "h" };
        write_file(dir, "ladder.gp", &ladder_plot(x))?;
    }
    Ok(())
}

fn noise_study(a: &NoiseArgs) -> Outcome<()> {
    let cfg = configure(&a.common)?;
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let study = delta_study(&cfg, &a.deltas, &seeds)?;
    warn(&study.reports);
    let out = a.common.out.as_deref();
    emit(out, "noise.csv", &csv(&study.reports, a.common.timing))?;
    let mut summary = String::from("delta,mean_error\n");
    for (d, e) in study.deltas.iter().zip(&study.mean_errors) {
        summary.push_str(&format!("{d},{e:.6e}\n"));
    }
    eprintln!("slope {:.3} (seed-averaged), {:.3} (seed 0)", study.slope, study.single_seed_slope);
    if let Some(dir) = out {
        write_file(dir, "noise_mean.csv", &summary)?;
        write_file(dir, "noise.gp", NOISE_PLOT)?;
    }
    Ok(())
}

fn export_matrix(a: &ExportArgs) -> Outcome<()> {
    let cfg = configure(&a.common)?;
    let rec = Reconstructor::new(cfg.problem()?, &cfg)?;
    let mut buf = Vec::new();
    rec.system.write_coo(&mut buf)?;
    let text = String::from_utf8(buf).expect("ascii coo");
    match a.common.out.as_deref() {
        Some(dir) => {
            write_file(dir, "matrix.coo", &text)?;
            let mut rhs = String::from("index,value\n");
            for (i, v) in rec.system.rhs.iter().enumerate() {
                rhs.push_str(&format!("{i},{v:.17e}\n"));
            }
            write_file(dir, "rhs.csv", &rhs)?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    eprintln!("{} unknowns ({} state, {} source), condition estimate {:.3e}", rec.system.dim(), rec.system.n_u, rec.system.n_f, rec.condition().value);
    Ok(())
}

fn ladder_plot(x: &str) -> String {
    // columns follow CSV_HEADER; h and tau are written as 1/n
    let col = if x == "tau" { 4 } else { 3 };
    format!(
        "# {CSV_HEADER}\n\
         set datafile separator ','\n\
         set logscale xy\n\
         set xlabel '{x}'\n\
         set ylabel 'error'\n\
         set key top left\n\
         inv(s) = 1.0 / real(substr(s, 3, strlen(s)))\n\
         plot 'ladder.csv' every ::1 using (inv(strcol({col}))):9 with linespoints title 'error', \\\n\
         \x20    'ladder.csv' every ::1 using (inv(strcol({col}))):10 with linespoints title 'H1 residual'\n"
    )
}

const SOURCE_PLOT_1D: &str = "set datafile separator ','
set xlabel 'x'
plot 'source.csv' every ::1 using 1:3 with linespoints title 'reconstructed', \\
     'source.csv' every ::1 using 1:4 with lines title 'exact'
";

const SOURCE_PLOT_2D: &str = "set datafile separator ','
set xlabel 'x'
set ylabel 'y'
set dgrid3d 41,41
set pm3d map
splot 'source.csv' every ::1 using 1:2:($3 - $4) title 'pointwise error'
";

const NOISE_PLOT: &str = "set datafile separator ','
set logscale xy
set xlabel 'delta'
set ylabel 'mean error'
set key top left
plot 'noise_mean.csv' every ::1 using 1:2 with linespoints title 'error', \\
     'noise_mean.csv' every ::1 using 1:($1 * 0.1) with lines dashtype 2 title 'slope 1'
";

fn cap_threads() -> Outcome<()> {
    let Ok(v) = std::env::var("PARASRC_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("PARASRC_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Other(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cap_threads().and_then(|()| match &cli.command {
        Command::Run(a) => run(a),
        Command::Ladder(a) => ladder(a),
        Command::NoiseStudy(a) => noise_study(a),
        Command::ExportMatrix(a) => export_matrix(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
