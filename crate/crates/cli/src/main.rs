use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use hjb_rbf::bench::{
    benchmark_kernel, fd_baseline, format_float, guo_problem, ratio_table, read_reports_csv, run_sweep,
    write_ratio_csv, write_reports_csv, BenchError, BenchmarkConfig, Encoding, ErrorReport, EvalSet, Scheme,
};
use hjb_rbf::geometry::{benchmark_radius, default_eval_count, tensor_grid, GeometryError, TimeGrid};
use hjb_rbf::interp::{GramSystem, InterpError};
use hjb_rbf::kernel::{format_rational, KernelError, WendlandKernel};
use hjb_rbf::l1regress::BudgetSchedule;
use hjb_rbf::solver::{
    solve_interp, solve_regress, write_history_csv, HjbProblem, Nonlinearity, RegressConfig, SchemeSolution,
    SolverError, StabilityReport,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("config: {0}")]
    Config(String),
}

#[derive(Parser)]
#[command(
    name = "hjb-rbf",
    version,
    about = "Wendland kernel schemes for parabolic HJB equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Interp,
    Regress,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact kernel coefficients and optionally tabulate the kernel.
    Kernel {
        #[arg(long = "d")]
        dim: usize,
        #[arg(long)]
        tau: usize,
        #[arg(long, default_value_t = 1.0)]
        support_scale: f64,
        /// Radii at which to tabulate φ, φ1 and φ2.
        #[arg(long, value_delimiter = ',')]
        eval: Vec<f64>,
    },
    /// Run one solve described by a JSON file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Error sweep of a kernel scheme on the benchmark problem.
    Bench {
        #[arg(long = "d")]
        dim: usize,
        /// Number of time steps.
        #[arg(long = "n")]
        steps: usize,
        #[arg(long = "N-list", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, value_enum, default_value = "interp")]
        scheme: SchemeArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Number of Sobol evaluation points.
        #[arg(long)]
        eval_count: Option<usize>,
        /// Write zero runtimes so output is byte-reproducible.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, default_value_t = 100.0)]
        beta0: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Regression centers; defaults to every collocation point.
        #[arg(long = "M")]
        centers: Option<usize>,
    },
    /// Error sweep of the explicit finite-difference baseline (d = 1).
    BenchFd {
        #[arg(long = "n")]
        steps: usize,
        #[arg(long = "N-list", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        no_timing: bool,
    },
    /// FD-to-kernel error ratios from two error CSVs of the same step count.
    Ratios {
        #[arg(long)]
        rbf: PathBuf,
        #[arg(long)]
        fd: PathBuf,
        #[arg(long = "n")]
        steps: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    dim: usize,
    scheme: String,
    kernel: KernelSection,
    grid: GridSection,
    time: TimeSection,
    #[serde(default = "default_problem")]
    problem: String,
    regression: Option<RegressionSection>,
}

fn default_problem() -> String {
    "builtin:guo".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    d: Option<usize>,
    tau: usize,
    #[serde(default = "unit")]
    support_scale: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RadiusChoice {
    Value(f64),
    Named(String),
}

impl Default for RadiusChoice {
    fn default() -> Self {
        RadiusChoice::Named("paper".into())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(rename = "N")]
    count: Option<usize>,
    #[serde(rename = "N_per_axis")]
    per_axis: Option<usize>,
    #[serde(rename = "R", default)]
    radius: RadiusChoice,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    #[serde(rename = "T", default = "unit")]
    horizon: f64,
    n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegressionSection {
    #[serde(rename = "M")]
    centers: Option<usize>,
    beta0: f64,
    h: f64,
}

#[derive(Debug, Serialize)]
struct SolveMeta {
    scheme: String,
    #[serde(rename = "N")]
    n_points: usize,
    #[serde(rename = "R")]
    radius: f64,
    delta_x: f64,
    dt: f64,
    steps: usize,
    runtime_ms: f64,
    jitter_used: f64,
    diffusion_number: f64,
}

/// Smallest per-axis count whose tensor grid holds at least `count` points.
fn per_axis_for(dim: usize, count: usize) -> usize {
    let mut p = (count as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
    while p.pow(dim as u32) < count {
        p += 1;
    }
    p
}

fn build_problem(name: &str, dim: usize, horizon: f64) -> Result<HjbProblem, CliError> {
    let nonlinearity = match name {
        "builtin:guo" => guo_problem(dim, Encoding::Control)?.nonlinearity,
        "builtin:zero" => Nonlinearity::zero(),
        other => return Err(CliError::Config(format!("unknown problem {other:?}"))),
    };
    Ok(HjbProblem {
        dim,
        horizon,
        terminal: Arc::new(move |x| (horizon + x.iter().sum::<f64>()).sin()),
        nonlinearity,
    })
}

fn solve(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let cfg: SolveConfig = serde_json::from_reader(File::open(config_path)?)?;
    let dim = cfg.dim;
    if let Some(d) = cfg.kernel.d {
        if d != dim {
            return Err(CliError::Config(format!("kernel.d = {d} but dim = {dim}")));
        }
    }
    let per_axis = match (cfg.grid.count, cfg.grid.per_axis) {
        (Some(_), Some(_)) => return Err(CliError::Config("give only one of N and N_per_axis".into())),
        (None, None) => return Err(CliError::Config("grid needs N or N_per_axis".into())),
        (Some(n), None) => per_axis_for(dim, n),
        (None, Some(p)) => p,
    };
    let actual = per_axis.pow(dim as u32);
    let radius = match &cfg.grid.radius {
        RadiusChoice::Value(r) => *r,
        RadiusChoice::Named(s) if s == "paper" => benchmark_radius(dim, actual, cfg.kernel.tau)?,
        RadiusChoice::Named(s) => return Err(CliError::Config(format!("unknown radius {s:?}"))),
    };
    let colloc = tensor_grid(dim, per_axis, radius)?;
    let kernel = WendlandKernel::new(dim, cfg.kernel.tau)?.with_support_scale(cfg.kernel.support_scale)?;
    let problem = build_problem(&cfg.problem, dim, cfg.time.horizon)?;
    let tgrid = TimeGrid::uniform(cfg.time.horizon, cfg.time.n)?;

    let start = Instant::now();
    let (sol, jitter, stability): (Box<dyn SchemeSolution>, f64, StabilityReport) = match cfg.scheme.as_str() {
        "interp" => {
            let gs = Arc::new(GramSystem::assemble(kernel, colloc)?);
            let jitter = gs.jitter();
            let sol = solve_interp(&problem, &gs, &tgrid)?;
            let stability = sol.stability;
            (Box::new(sol), jitter, stability)
        }
        "regress" => {
            let reg = cfg
                .regression
                .as_ref()
                .ok_or_else(|| CliError::Config("regress scheme needs a regression block".into()))?;
            let rc = RegressConfig {
                centers: reg.centers.unwrap_or(actual),
                schedule: BudgetSchedule::logarithmic(reg.beta0),
                h: reg.h,
            };
            let sol = solve_regress(&problem, &kernel, &colloc, &tgrid, &rc)?;
            let stability = sol.stability;
            (Box::new(sol), 0.0, stability)
        }
        other => return Err(CliError::Config(format!("unknown scheme {other:?}"))),
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    if jitter > 0.0 {
        eprintln!("warning: Gram matrix needed diagonal jitter {jitter:e} to factor");
    }

    fs::create_dir_all(out)?;
    write_history_csv(sol.as_ref(), BufWriter::new(File::create(out.join("history.csv"))?))?;
    let meta = SolveMeta {
        scheme: cfg.scheme.clone(),
        n_points: actual,
        radius,
        delta_x: stability.fill_distance,
        dt: stability.dt,
        steps: cfg.time.n,
        runtime_ms,
        jitter_used: jitter,
        diffusion_number: stability.diffusion_number,
    };
    let mut meta_file = BufWriter::new(File::create(out.join("meta.json"))?);
    serde_json::to_writer_pretty(&mut meta_file, &meta)?;
    meta_file.write_all(b"\n")?;
    meta_file.flush()?;
    Ok(())
}

fn kernel_table(dim: usize, tau: usize, scale: f64, radii: &[f64]) -> Result<(), CliError> {
    let kernel = WendlandKernel::new(dim, tau)?.with_support_scale(scale)?;
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    writeln!(
        w,
        "# d={dim} tau={tau} nu={} degree={} support_scale={}",
        kernel.nu(),
        kernel.degree(),
        format_float(scale)
    )?;
    writeln!(w, "j,exact,double")?;
    for (j, (c, f)) in kernel
        .normalized_rational_coeffs()
        .iter()
        .zip(kernel.normalized_coeffs())
        .enumerate()
    {
        writeln!(w, "{j},{},{}", format_rational(c), format_float(f))?;
    }
    if !radii.is_empty() {
        let cell = |v: Result<f64, KernelError>| v.map(format_float).unwrap_or_default();
        writeln!(w)?;
        writeln!(w, "r,phi,phi1,phi2")?;
        for &r in radii {
            writeln!(
                w,
                "{},{},{},{}",
                format_float(r),
                format_float(kernel.phi(r)?),
                cell(kernel.phi1(r)),
                cell(kernel.phi2(r))
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn report_failures(reports: &[ErrorReport]) {
    for r in reports {
        if let Some(msg) = &r.failure {
            eprintln!("warning: N={} failed: {msg}", r.n_points);
        }
    }
}

fn write_reports(path: &Path, reports: &[ErrorReport]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_reports_csv(reports, BufWriter::new(File::create(path)?))?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Kernel {
            dim,
            tau,
            support_scale,
            eval,
        } => kernel_table(dim, tau, support_scale, &eval),
        Command::Solve { config, out } => solve(&config, &out),
        Command::Bench {
            dim,
            steps,
            n_list,
            scheme,
            out,
            eval_count,
            no_timing,
            beta0,
            h,
            centers,
        } => {
            let scheme = match scheme {
                SchemeArg::Interp => Scheme::Interp,
                SchemeArg::Regress => Scheme::Regress { centers, beta0, h },
            };
            let mut config = BenchmarkConfig::new(dim, steps, scheme)?;
            config.eval = EvalSet::Sobol(eval_count.unwrap_or_else(|| default_eval_count(dim)));
            config.timing = !no_timing;
            // Validate the kernel up front so a bad dimension is an error rather than a failed row.
            benchmark_kernel(dim)?;
            let reports = run_sweep(&config, &n_list)?;
            report_failures(&reports);
            write_reports(&out.join(format!("errors_d{dim}_n{steps}.csv")), &reports)
        }
        Command::BenchFd {
            steps,
            n_list,
            out,
            no_timing,
        } => {
            let reports: Vec<ErrorReport> = n_list.iter().map(|&n| fd_baseline(steps, n, !no_timing)).collect();
            report_failures(&reports);
            write_reports(&out.join(format!("fd_errors_n{steps}.csv")), &reports)
        }
        Command::Ratios { rbf, fd, steps, out } => {
            let rbf = read_reports_csv(File::open(&rbf)?, "rbf", steps)?;
            let fd = read_reports_csv(File::open(&fd)?, "fd", steps)?;
            let rows = ratio_table(&rbf, &fd)?;
            match out {
                Some(path) => write_ratio_csv(&rows, BufWriter::new(File::create(path)?))?,
                None => write_ratio_csv(&rows, io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
