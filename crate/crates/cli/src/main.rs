//! Command-line front end for the embedding pipeline.
//!
//! Subcommands: `synth` generates the synthetic image-manifold dataset,
//! `extend` embeds a time series against a training set, `corrupt` applies
//! a noise model to a matrix of flattened images, and `eval` runs the full
//! method-by-noise comparison sweep from a JSON config.
//!
//! Exit codes: 0 on success, 1 for computation errors (disconnected
//! graphs, singular systems, failed cells), 2 for usage and I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mets_core::baselines::{st_isomap_oose, StIsomapParams};
use mets_core::config::ExperimentConfig;
use mets_core::corruption::{corrupt_series, NoiseKind, NoiseSpec};
use mets_core::dataio::{read_matrix, write_matrix};
use mets_core::evaluation::{run_experiment, write_reports};
use mets_core::extension::{
    isomap_oose, mets_solve, temporal_laplacian, Solver, TemporalWeighting, TimeSeriesSet,
};
use mets_core::geodesics::{build_knn_graph, extend_distances, shortest_path_distances, Dataset};
use mets_core::isomap::isomap_embed;
use mets_core::synth::{generate_synthetic, SyntheticSpec};
use mets_core::CoreError;

#[derive(Parser)]
#[command(name = "mets", version, about = "Temporally regularized out-of-sample embedding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic blob-image dataset.
    Synth(SynthArgs),
    /// Embed a time series against a training set.
    Extend(ExtendArgs),
    /// Apply a noise model to a matrix of flattened images.
    Corrupt(CorruptArgs),
    /// Run the method-by-noise evaluation sweep.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Training point count.
    #[arg(long, default_value_t = 900)]
    n: usize,
    /// Test point count.
    #[arg(long = "N", default_value_t = 100)]
    n_test: usize,
    #[arg(long, default_value_t = 28)]
    height: usize,
    #[arg(long, default_value_t = 28)]
    width: usize,
    #[arg(long, default_value_t = 2.0)]
    blob_width: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for training.met, test.met, ground_truth.met.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Isomap,
    Mets,
    StIsomap,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Kronecker,
    Sylvester,
}

impl From<SolverArg> for Solver {
    fn from(value: SolverArg) -> Self {
        match value {
            SolverArg::Kronecker => Solver::KroneckerDirect,
            SolverArg::Sylvester => Solver::SylvesterEigen,
        }
    }
}

#[derive(Args)]
struct ExtendArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Training matrix (rows are points).
    #[arg(long)]
    train: PathBuf,
    /// Test matrix (rows are points, temporal order).
    #[arg(long)]
    test: PathBuf,
    /// Optional one-column matrix of integer timestamps for the test rows.
    #[arg(long)]
    timestamps: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Temporal window size.
    #[arg(long = "K", default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Sylvester)]
    solver: SolverArg,
    /// Trivial-match window (st-isomap only).
    #[arg(long, default_value_t = 1)]
    epsilon: usize,
    #[arg(long, default_value_t = 1.0)]
    c_ctn: f64,
    #[arg(long, default_value_t = 1.0)]
    c_atn: f64,
    /// Output embedding file (m rows, one column per test point).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKindArg {
    SaltPepper,
    Gaussian,
    MotionBlur,
}

impl From<NoiseKindArg> for NoiseKind {
    fn from(value: NoiseKindArg) -> Self {
        match value {
            NoiseKindArg::SaltPepper => NoiseKind::SaltPepper,
            NoiseKindArg::Gaussian => NoiseKind::Gaussian,
            NoiseKindArg::MotionBlur => NoiseKind::MotionBlur,
        }
    }
}

#[derive(Args)]
struct CorruptArgs {
    /// Input matrix of flattened images, one per row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: NoiseKindArg,
    /// Flip probability, noise level, or blur scale depending on kind.
    #[arg(long)]
    level: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON experiment configuration; defaults cover the synthetic sweep.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Io(String),
    Compute(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Compute(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Compute(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<mets_core::dataio::MatrixIoError> for CliError {
    fn from(e: mets_core::dataio::MatrixIoError) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn cmd_synth(args: &SynthArgs) -> CliResult<u8> {
    let spec = SyntheticSpec {
        height: args.height,
        width: args.width,
        blob_width: args.blob_width,
        n_train: args.n,
        n_test: args.n_test,
        seed: args.seed,
    };
    let data = generate_synthetic(&spec)?;
    ensure_dir(&args.out)?;
    write_matrix(&args.out.join("training.met"), data.training.points())?;
    write_matrix(&args.out.join("test.met"), data.test.points())?;
    write_matrix(&args.out.join("ground_truth.met"), &data.test_params)?;
    println!(
        "wrote training.met ({}x{}), test.met ({}x{}), ground_truth.met to {}",
        data.training.n(),
        data.training.dim(),
        data.test.len(),
        data.test.points().ncols(),
        args.out.display()
    );
    Ok(0)
}

fn load_series(args: &ExtendArgs) -> CliResult<TimeSeriesSet> {
    let test = read_matrix(&args.test)?;
    match &args.timestamps {
        Some(path) => {
            let ts = read_matrix(path)?;
            Ok(TimeSeriesSet::new(test, ts.iter().map(|&v| v as i64).collect())?)
        }
        None => Ok(TimeSeriesSet::with_unit_timestamps(test)?),
    }
}

fn cmd_extend(args: &ExtendArgs) -> CliResult<u8> {
    let data = Dataset::new(read_matrix(&args.train)?)?;
    let oos = load_series(args)?;
    let x = match args.method {
        MethodArg::StIsomap => {
            let params = StIsomapParams::new(args.c_atn, args.c_ctn, args.epsilon, args.k)?;
            let timestamps: Vec<i64> = (0..data.n() as i64).collect();
            st_isomap_oose(&data, &timestamps, &oos, &params, args.m)?.1
        }
        MethodArg::Isomap | MethodArg::Mets => {
            let graph = build_knn_graph(&data, args.k)?;
            let delta_n = shortest_path_distances(&graph)?;
            let emb = isomap_embed(&delta_n, args.m)?;
            let delta_x = extend_distances(&data, &graph, &delta_n, &oos, args.k)?;
            match args.method {
                MethodArg::Isomap => isomap_oose(&emb, &delta_n, &delta_x),
                _ => {
                    let weighting = TemporalWeighting::exponential(args.window, args.alpha)?;
                    let lap = temporal_laplacian(oos.timestamps(), &weighting)?;
                    mets_solve(
                        &emb,
                        &delta_n,
                        &delta_x,
                        &lap,
                        args.lambda,
                        args.solver.into(),
                    )?
                    .x_matrix
                }
            }
        }
    };
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_matrix(&args.out, &x)?;
    println!("wrote {}x{} embedding to {}", x.nrows(), x.ncols(), args.out.display());
    Ok(0)
}

fn cmd_corrupt(args: &CorruptArgs) -> CliResult<u8> {
    let input = read_matrix(&args.input)?;
    let spec = NoiseSpec::new(args.kind.into(), args.level)?;
    let out = corrupt_series(&input, args.height, args.width, &spec, args.seed)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_matrix(&args.out, &out)?;
    println!("wrote corrupted {}x{} matrix to {}", out.nrows(), out.ncols(), args.out.display());
    Ok(0)
}

fn cmd_eval(args: &EvalArgs) -> CliResult<u8> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.clone());
    }
    let out_dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("reports"));
    let reports = run_experiment(&config)?;
    write_reports(&out_dir, &reports)?;
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| r.error.is_some())
        .map(|r| r.method.as_str())
        .collect();
    println!(
        "wrote {} report rows to {}",
        reports.len(),
        out_dir.display()
    );
    for report in &reports {
        if let Some(err) = &report.error {
            eprintln!(
                "cell failed: {} {} level {}: {err}",
                report.method,
                report.noise_kind.name(),
                report.noise_level
            );
        }
    }
    Ok(if failed.is_empty() { 0 } else { 1 })
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Extend(args) => cmd_extend(&args),
        Command::Corrupt(args) => cmd_corrupt(&args),
        Command::Eval(args) => cmd_eval(&args),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
