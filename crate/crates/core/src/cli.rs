//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{
    self, ColumnSelector, CsvOptions, Dataset, SyntheticSidecar, SyntheticSpec, XDistribution,
};
use crate::error::{Error, Result};
use crate::pipeline::{
    self, AnnealSettings, DatasetSource, ExperimentSpec, FitConfig, LambdaGrid, SweepReport,
    DESK_N, DIABETES_LAMBDAS, HELD_OUT_N, LAMBDA_TIMES_D_GRID,
};
use crate::qubo::QuboModel;
use crate::regress::{FitReport, SolverKind};
use crate::samplers::{self, AnnealSchedule, SampleSet};

#[derive(Debug, Parser)]
#[command(
    name = "subset-qubo",
    version,
    about = "Best-subset regression via QUBO compilation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a noise-free synthetic dataset (CSV plus JSON sidecar).
    Gen(GenArgs),
    /// Fit one dataset at one λ.
    Fit(FitArgs),
    /// Classical vs QUBO sweep over synthetic datasets and a λ·d grid.
    Sweep(SweepArgs),
    /// Classical vs QUBO comparison on a CSV dataset over absolute λ values.
    Diabetes(DiabetesArgs),
    /// Compile a dataset at one λ and write the QUBO file.
    ExportQubo(ExportArgs),
    /// Sample a QUBO file; optionally refit the reads against a dataset.
    SolveQubo(SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum XDist {
    Uniform,
    Normal,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV with a header row.
    data: PathBuf,
    /// Target column: name, zero-based index or "last".
    #[arg(long, default_value = "last")]
    target: ColumnSelector,
    /// Center features and target before normalizing.
    #[arg(long)]
    center: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        dataset::load_csv(
            &self.data,
            &CsvOptions {
                target: self.target.clone(),
                center: self.center,
            },
        )
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct LambdaArgs {
    #[arg(long, value_parser = non_negative)]
    lambda: Option<f64>,
    /// λ given as λ·d.
    #[arg(long, value_parser = non_negative)]
    lambda_times_d: Option<f64>,
}

impl LambdaArgs {
    fn resolve(&self, d: usize) -> f64 {
        match (self.lambda, self.lambda_times_d) {
            (Some(l), _) => l,
            (None, Some(ld)) => ld / d as f64,
            (None, None) => unreachable!("clap requires one of the group"),
        }
    }
}

#[derive(Debug, Args)]
struct CompileArgs {
    /// Neumann step size (default 2/(d+1)).
    #[arg(long, value_parser = positive)]
    alpha: Option<f64>,
    /// Quadratization penalty (default 1 + 2·Σ|c|).
    #[arg(long, value_parser = positive)]
    penalty: Option<f64>,
}

#[derive(Debug, Args)]
struct AnnealArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = AnnealSchedule::DEFAULT_READS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    reads: u64,
    #[arg(long, default_value_t = AnnealSchedule::DEFAULT_SWEEPS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    sweeps: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

impl AnnealArgs {
    fn settings(&self) -> AnnealSettings {
        AnnealSettings {
            num_reads: self.reads as usize,
            sweeps_per_read: self.sweeps as usize,
            seed: self.seed,
            beta_range: None,
        }
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Include wall-clock timings (makes output non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    d: u64,
    #[arg(long, default_value_t = DESK_N as u64, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// True support size (default ⌊d/2⌋, at least 1).
    #[arg(long)]
    k: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = XDist::Uniform)]
    x_dist: XDist,
    /// CSV path; the sidecar goes next to it with a .json extension.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    lambda: LambdaArgs,
    #[arg(long, default_value_t = SolverKind::Sa)]
    solver: SolverKind,
    #[command(flatten)]
    compile: CompileArgs,
    #[command(flatten)]
    anneal: AnnealArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Feature counts, one synthetic dataset each.
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 6, 7, 8, 9, 10])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = DESK_N)]
    n: usize,
    /// Held-out rows per dataset (0 disables test MSE).
    #[arg(long, default_value_t = HELD_OUT_N)]
    n_test: usize,
    #[arg(long, value_delimiter = ',', default_values_t = LAMBDA_TIMES_D_GRID, value_parser = non_negative)]
    lambda_times_d: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [SolverKind::Exhaustive, SolverKind::Sa])]
    solver: Vec<SolverKind>,
    #[command(flatten)]
    compile: CompileArgs,
    #[command(flatten)]
    anneal: AnnealArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct DiabetesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DIABETES_LAMBDAS, value_parser = non_negative)]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [SolverKind::Exhaustive, SolverKind::Sa])]
    solver: Vec<SolverKind>,
    #[command(flatten)]
    compile: CompileArgs,
    #[command(flatten)]
    anneal: AnnealArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    lambda: LambdaArgs,
    #[command(flatten)]
    compile: CompileArgs,
    /// Write to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// QUBO file written by export-qubo.
    model: PathBuf,
    #[arg(long, default_value_t = SolverKind::Sa, value_parser = qubo_solver)]
    solver: SolverKind,
    /// Dataset for the refit best-of protocol; requires --lambda.
    #[arg(long, requires = "lambda")]
    data: Option<PathBuf>,
    #[arg(long, value_parser = non_negative, requires = "data")]
    lambda: Option<f64>,
    #[arg(long, default_value = "last")]
    target: ColumnSelector,
    #[arg(long)]
    center: bool,
    #[command(flatten)]
    anneal: AnnealArgs,
    #[command(flatten)]
    out: OutputArgs,
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v = parse_real(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is negative"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

fn qubo_solver(s: &str) -> std::result::Result<SolverKind, String> {
    match s.parse::<SolverKind>()? {
        SolverKind::Exhaustive => Err("solve-qubo supports sa or enumerate".into()),
        k => Ok(k),
    }
}

fn fit_config(compile: &CompileArgs, anneal: &AnnealArgs) -> FitConfig {
    FitConfig {
        alpha: compile.alpha,
        penalty: compile.penalty,
        anneal: anneal.settings(),
        threads: anneal.threads.map(|t| t as usize),
    }
}

fn install_threads(anneal: &AnnealArgs) {
    if let Some(t) = anneal.threads {
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build_global();
    }
}

fn announce_seed(seed: u64) {
    eprintln!("seed: {seed}");
}

fn emit(out: &OutputArgs, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}

fn render_fit(report: &FitReport, out: &OutputArgs) -> Result<String> {
    let mut report = report.clone();
    if !out.timings {
        report.timings = None;
    }
    Ok(match out.format {
        Format::Json => report.to_json()?,
        Format::Csv => format!(
            "{}\n{}",
            FitReport::csv_header(report.w.len()),
            report.csv_row()
        ),
        Format::Table => report.to_table(),
    })
}

fn render_sweep(mut report: SweepReport, out: &OutputArgs) -> Result<String> {
    if !out.timings {
        report.strip_timings();
    }
    Ok(match out.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv(),
        Format::Table => report.render_table(),
    })
}

fn render_samples(samples: &SampleSet, q: &QuboModel, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => samples.to_json()?,
        Format::Csv | Format::Table => {
            let mut s = String::from("read_index,energy,z,assignment\n");
            for r in &samples.reads {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    r.read_index,
                    dataset::format_real(r.energy),
                    samplers::bitstring::to_string(&q.project(&r.assignment)),
                    samplers::bitstring::to_string(&r.assignment)
                ));
            }
            s
        }
    })
}

fn run_gen(args: &GenArgs) -> Result<()> {
    announce_seed(args.seed);
    let d = args.d as usize;
    let mut spec = SyntheticSpec::half_support(args.n as usize, d, args.seed);
    if let Some(k) = args.k {
        spec.k_true = k as usize;
    }
    spec.x_distribution = match args.x_dist {
        XDist::Uniform => XDistribution::Uniform,
        XDist::Normal => XDistribution::StandardNormal,
    };
    let (ds, true_w) = dataset::generate_synthetic(&spec)?;
    ds.write_csv(&args.output)?;
    let sidecar = SyntheticSidecar {
        spec,
        true_w,
        column_norms: ds.column_norms().to_vec(),
    };
    dataset::write_sidecar(args.output.with_extension("json"), &sidecar)
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let ds = args.data.load()?;
    let lambda = args.lambda.resolve(ds.d());
    if args.solver == SolverKind::Sa {
        announce_seed(args.anneal.seed);
    }
    install_threads(&args.anneal);
    let report = pipeline::fit(
        &ds,
        lambda,
        args.solver,
        &fit_config(&args.compile, &args.anneal),
    )?;
    emit(&args.out, &render_fit(&report, &args.out)?)
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    announce_seed(args.anneal.seed);
    install_threads(&args.anneal);
    let mut spec = ExperimentSpec::synthetic(&args.dims, args.n, args.anneal.seed);
    spec.lambda_grid = LambdaGrid::TimesD(args.lambda_times_d.clone());
    spec.solvers = args.solver.clone();
    spec.n_test = args.n_test;
    spec.fit = fit_config(&args.compile, &args.anneal);
    let report = pipeline::run_experiment(&spec)?;
    emit(&args.out, &render_sweep(report, &args.out)?)
}

fn run_diabetes(args: &DiabetesArgs) -> Result<()> {
    announce_seed(args.anneal.seed);
    install_threads(&args.anneal);
    let spec = ExperimentSpec {
        datasets: vec![DatasetSource::Csv {
            path: args.data.data.clone(),
            target: Some(args.data.target.to_string()),
            center: args.data.center,
        }],
        lambda_grid: LambdaGrid::Absolute(args.lambda.clone()),
        solvers: args.solver.clone(),
        fit: fit_config(&args.compile, &args.anneal),
        n_test: 0,
        output_dir: None,
    };
    let report = pipeline::run_experiment(&spec)?;
    emit(&args.out, &render_sweep(report, &args.out)?)
}

fn run_export(args: &ExportArgs) -> Result<()> {
    let ds = args.data.load()?;
    let lambda = args.lambda.resolve(ds.d());
    let inst = pipeline::compile_instance(&ds, lambda, args.compile.alpha, args.compile.penalty)?;
    match &args.output {
        Some(path) => inst.qubo.write(path),
        None => {
            let text = inst.qubo.to_text();
            std::io::stdout()
                .lock()
                .write_all(text.as_bytes())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}

fn run_solve(args: &SolveArgs) -> Result<()> {
    let q = QuboModel::read(&args.model)?;
    install_threads(&args.anneal);
    let samples = match args.solver {
        SolverKind::Sa => {
            announce_seed(args.anneal.seed);
            let sched = args.anneal.settings().schedule_for(&q)?;
            samplers::simulated_anneal_threads(&q, &sched, args.anneal.threads.map(|t| t as usize))?
        }
        _ => samplers::enumerate_qubo(&q)?,
    };
    match (&args.data, args.lambda) {
        (Some(path), Some(lambda)) => {
            let ds = DataArgs {
                data: path.clone(),
                target: args.target.clone(),
                center: args.center,
            }
            .load()?;
            if ds.d() != q.num_original {
                return Err(Error::DimensionMismatch {
                    expected: q.num_original,
                    got: ds.d(),
                });
            }
            let mut report = pipeline::best_of_reads(&ds, &q, &samples, lambda)?;
            report.solver = Some(args.solver);
            emit(&args.out, &render_fit(&report, &args.out)?)
        }
        _ => emit(&args.out, &render_samples(&samples, &q, args.out.format)?),
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Fit(a) => run_fit(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Diabetes(a) => run_diabetes(a),
        Command::ExportQubo(a) => run_export(a),
        Command::SolveQubo(a) => run_solve(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
