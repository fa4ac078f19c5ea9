//! Command-line front end: `solve`, `convergence`, `verify`.
//!
//! Exit codes: 0 success, 1 verification failure or runtime error, 2 usage
//! error, 3 optimizer stall.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::builtin::{BuiltinProblem, BUILTIN_NAMES};
use crate::control::ControlFunction;
use crate::convergence::{format_sci, run_study, ConvergenceOptions};
use crate::error::Error;
use crate::ivp::Discretization;
use crate::mesh::{DGFunction, Partition, Side};
use crate::optimize::{minimize, Method, OptimizeOptions, OptimizeReport};
use crate::problem::OcProblem;
use crate::verify::{run_checks, Corrupted, Corruption, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_STALL: i32 = 3;

/// Environment variable that overrides the default quadrature point count.
pub const QUAD_POINTS_ENV: &str = "DGOCP_QUAD_POINTS";

/// Number of uniform samples in the plot-ready trajectory files.
pub const SAMPLES: usize = 401;

#[derive(Parser, Debug)]
#[command(name = "dgocp", version, about = "DG time stepping for optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one discrete problem and write trajectories.
    Solve(SolveArgs),
    /// Mesh-refinement study, CSV output.
    Convergence(ConvergenceArgs),
    /// Finite-difference and residual checks of the discrete derivatives.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Pgd,
    Fbs,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pgd => Method::ProjectedGradient,
            MethodArg::Fbs => Method::ForwardBackwardSweep,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CorruptArg {
    Fu,
    GradientSign,
}

impl From<CorruptArg> for Corruption {
    fn from(c: CorruptArg) -> Self {
        match c {
            CorruptArg::Fu => Corruption::Fu,
            CorruptArg::GradientSign => Corruption::GradientSign,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Control degree; defaults to the state degree.
    #[arg(long)]
    control_order: Option<usize>,
    #[arg(long, conflicts_with = "h")]
    intervals: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Pgd)]
    method: MethodArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    grad_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long)]
    quad_points: Option<usize>,
    #[arg(long, value_enum, hide = true)]
    corrupt: Option<CorruptArg>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 6)]
    levels: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Pgd)]
    method: MethodArg,
    #[arg(long, default_value_t = 1e-15)]
    grad_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quad_points: Option<usize>,
    #[arg(long, value_enum, hide = true)]
    corrupt: Option<CorruptArg>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 8)]
    intervals: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long)]
    quad_points: Option<usize>,
    /// Test hook: replace a derivative with a wrong one.
    #[arg(long, value_enum)]
    corrupt: Option<CorruptArg>,
}

/// Failure of a subcommand, carrying its exit code.
struct Exit {
    code: i32,
    message: String,
}

impl Exit {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Stall { .. } => EXIT_STALL,
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Exit {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

/// Runs the CLI with the process environment and standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let env = std::env::var(QUAD_POINTS_ENV).ok();
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    run_with(args, env.as_deref(), &mut out, &mut err)
}

/// Runs the CLI with an explicit quadrature override (the value of
/// `DGOCP_QUAD_POINTS`, if any) and output streams.
pub fn run_with<I, T>(args: I, quad_env: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a, quad_env, out),
        Command::Convergence(a) => convergence(a, quad_env, out),
        Command::Verify(a) => verify(a, quad_env, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn quad_points(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, Exit> {
    if flag.is_some() {
        return Ok(flag);
    }
    match env {
        None => Ok(None),
        Some(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&q| q > 0)
            .map(Some)
            .ok_or_else(|| Exit::usage(format!("{QUAD_POINTS_ENV} must be a positive integer, got `{s}`"))),
    }
}

fn problem(name: &str, corrupt: Option<CorruptArg>) -> Result<BuiltinProblem, Exit> {
    let mut b = BuiltinProblem::by_name(name)
        .map_err(|_| Exit::usage(format!("unknown problem `{name}` (expected one of {})", BUILTIN_NAMES.join(", "))))?;
    if let Some(kind) = corrupt {
        let inner: Box<dyn OcProblem + Send> = b.problem;
        b.problem = Box::new(Corrupted::new(inner, kind.into()));
    }
    Ok(b)
}

fn solve(a: SolveArgs, quad_env: Option<&str>, out: &mut dyn Write) -> Result<i32, Exit> {
    let b = problem(&a.problem, a.corrupt)?;
    let p = b.problem.as_ref();
    let horizon = p.horizon();
    let intervals = match (a.intervals, a.h) {
        (Some(n), None) if n > 0 => n,
        (None, Some(h)) if h > 0.0 => {
            let n = (horizon / h).round();
            if n < 1.0 || (n * h - horizon).abs() > 1e-9 * horizon {
                return Err(Exit::usage(format!("--h {h} does not divide the horizon {horizon}")));
            }
            n as usize
        }
        (None, None) => return Err(Exit::usage("one of --intervals or --h is required")),
        _ => return Err(Exit::usage("--intervals and --h must be positive")),
    };
    let part = Arc::new(Partition::uniform(horizon, intervals)?);
    let disc = match quad_points(a.quad_points, quad_env)? {
        Some(q) => Discretization::with_quad_points(part, a.order, q)?,
        None => Discretization::new(part, a.order),
    };
    let opts = OptimizeOptions {
        method: a.method.into(),
        grad_tol: a.grad_tol,
        max_outer: a.max_iter,
        log_path: Some(a.out.join("iterations.csv")),
        ..OptimizeOptions::default()
    };
    fs::create_dir_all(&a.out)?;
    let u0 = ControlFunction::closed(p.control_dim(), |_| vec![0.0]);
    let rep = minimize(p, &u0, &disc, a.control_order.unwrap_or(a.order), &opts)?;

    write_dg(&a.out.join("u.csv"), &rep.u_star)?;
    write_dg(&a.out.join("x.csv"), &rep.x_star)?;
    write_dg(&a.out.join("lambda.csv"), &rep.lambda_star)?;
    write_samples(&a.out.join("u_samples.csv"), &rep.u_star, "u")?;
    write_samples(&a.out.join("x_samples.csv"), &rep.x_star, "x")?;
    write_samples(&a.out.join("lambda_samples.csv"), &rep.lambda_star, "lambda")?;
    write_jumps(&a.out.join("jumps.csv"), &rep)?;

    let summary = summary(&b, &a, &rep, &disc);
    fs::write(a.out.join("summary.txt"), &summary)?;
    out.write_all(summary.as_bytes())?;
    Ok(EXIT_OK)
}

fn summary(b: &BuiltinProblem, a: &SolveArgs, rep: &OptimizeReport, disc: &Discretization) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push('=');
        s.push_str(&v);
        s.push('\n');
    };
    kv("problem", b.name.to_string());
    kv("order", a.order.to_string());
    kv("control_order", a.control_order.unwrap_or(a.order).to_string());
    kv("intervals", disc.partition().len().to_string());
    kv("h", (disc.partition().horizon() / disc.partition().len() as f64).to_string());
    kv("quad_points", disc.n_points().to_string());
    kv("method", format!("{:?}", a.method).to_lowercase());
    kv("converged", rep.converged.to_string());
    kv("iterations", rep.iterations.to_string());
    kv("cost", format!("{:.16e}", rep.final_cost()));
    kv("stationarity", format!("{:.6e}", rep.final_stationarity()));
    kv("tv_u", format!("{:.6e}", rep.tv_u));
    if let (Some(x), Some(u)) = (b.exact_state, b.exact_control) {
        kv("err_x", format_sci(rep.x_star.nodal_l2_error(|t, _| vec![x(t)])));
        kv("err_u", format_sci(rep.u_star.nodal_l2_error(|t, _| vec![u(t)])));
    }
    s
}

fn write_dg(path: &Path, f: &DGFunction) -> Result<(), Exit> {
    f.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn header(prefix: &str, dim: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=dim {
        h.push_str(&format!(",{prefix}_{i}"));
    }
    h
}

/// `SAMPLES` uniform samples; interior nodes and `T` use the left limit.
fn write_samples(path: &Path, f: &DGFunction, prefix: &str) -> Result<(), Exit> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header(prefix, f.dim()))?;
    let horizon = f.partition().horizon();
    for i in 0..SAMPLES {
        let t = if i + 1 == SAMPLES { horizon } else { horizon * i as f64 / (SAMPLES - 1) as f64 };
        let side = if i == 0 { Side::Right } else { Side::Left };
        let v = f.eval(t, side)?;
        write!(w, "{t:e}")?;
        for x in v {
            write!(w, ",{x:e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Jumps `f(t_n^+) - f(t_n^-)` at interior nodes for state, control and adjoint.
fn write_jumps(path: &Path, rep: &OptimizeReport) -> Result<(), Exit> {
    let mut w = BufWriter::new(File::create(path)?);
    let (d, m) = (rep.x_star.dim(), rep.u_star.dim());
    let mut h = String::from("t");
    for (prefix, dim) in [("x", d), ("u", m), ("lambda", d)] {
        h.push_str(&header(prefix, dim)[1..]);
    }
    writeln!(w, "{h}")?;
    let part = rep.x_star.partition();
    for n in 1..part.len() {
        write!(w, "{:e}", part.nodes()[n])?;
        for f in [&rep.x_star, &rep.u_star, &rep.lambda_star] {
            for v in f.jump(n) {
                write!(w, ",{v:e}")?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn convergence(a: ConvergenceArgs, quad_env: Option<&str>, out: &mut dyn Write) -> Result<i32, Exit> {
    let b = problem(&a.problem, a.corrupt)?;
    if a.orders.is_empty() || a.levels == 0 {
        return Err(Exit::usage("--orders and --levels must be non-empty"));
    }
    let opts = ConvergenceOptions {
        orders: a.orders,
        levels: a.levels,
        optimizer: OptimizeOptions {
            method: a.method.into(),
            grad_tol: a.grad_tol,
            max_outer: a.max_iter,
            ..OptimizeOptions::default()
        },
        quad_points: quad_points(a.quad_points, quad_env)?,
        ..ConvergenceOptions::default()
    };
    let (report, failure) = match run_study(&b, &opts) {
        Ok(r) => (r, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    match &a.out {
        Some(path) => fs::write(path, report.to_csv())?,
        None => out.write_all(report.to_csv().as_bytes())?,
    }
    match failure {
        None => Ok(EXIT_OK),
        Some(e) => Err(e.into()),
    }
}

fn verify(a: VerifyArgs, quad_env: Option<&str>, out: &mut dyn Write) -> Result<i32, Exit> {
    let b = problem(&a.problem, a.corrupt)?;
    if a.intervals == 0 || a.trials == 0 {
        return Err(Exit::usage("--intervals and --trials must be positive"));
    }
    let opts = VerifyOptions {
        order: a.order,
        intervals: a.intervals,
        seed: a.seed,
        trials: a.trials,
        quad_points: quad_points(a.quad_points, quad_env)?,
        ..VerifyOptions::default()
    };
    let report = run_checks(&b.problem, &opts)?;
    for c in &report.checks {
        writeln!(out, "{c}")?;
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_FAILURE })
}
