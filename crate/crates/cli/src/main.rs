mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hiercode_core::runtime::trial_rng;
use hiercode_core::sim::{run_analytic_sweep, run_monte_carlo, run_real_exec, REAL_EXEC_TOLERANCE};
use hiercode_core::verify::{audit_codec, AuditOptions, CorruptHook};
use hiercode_core::{
    build_tile_plan, choose_grids, optimize_profile, EvalPointSet, ExpectationMode,
    ExperimentConfig, ExperimentMode, ExperimentReport, Matrix, OptimizerSpec, PointMode, Profile,
    RuntimeParams,
};
use rand::Rng;
use serde_json::json;

use config::{parse_grids, Backend, CliConfigFile};

#[derive(Parser)]
#[command(
    name = "hiercode",
    version,
    about = "Hierarchical coded matrix multiplication experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PointsArg {
    Integer,
    Chebyshev,
}

impl From<PointsArg> for PointMode {
    fn from(p: PointsArg) -> Self {
        match p {
            PointsArg::Integer => PointMode::Integer,
            PointsArg::Chebyshev => PointMode::Chebyshev,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    LogApprox,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file with one table per subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    #[arg(long, value_enum)]
    points: Option<PointsArg>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form expected finishing times and decode-cost model.
    Analyze(Common),
    /// Monte Carlo finishing times under the shifted-exponential model.
    Simulate(Common),
    /// Concurrent local execution with injected stragglers.
    Run {
        #[command(flatten)]
        common: Common,
        /// Random operands of shape NX x NZ and NZ x NY.
        #[arg(long, num_args = 3, value_names = ["NX", "NZ", "NY"])]
        random: Option<Vec<usize>>,
        /// Binary matrix file for A.
        #[arg(long, requires = "b")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
    },
    /// Finishing-time-optimal profile as JSON on standard output.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
        /// Total threshold K.
        #[arg(long)]
        total: Option<usize>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Decode every threshold-sized worker subset and check the tiling.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 3, value_names = ["NX", "NZ", "NY"])]
        dims: Option<Vec<usize>>,
        /// Comma-separated thresholds, e.g. 8,4,3,1.
        #[arg(long, value_delimiter = ',')]
        profile: Option<Vec<usize>>,
        /// Comma-separated grids, e.g. 4x2,4x1,3x1,1x1.
        #[arg(long)]
        grids: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        /// Random subsets per layer when exhaustive enumeration is larger.
        #[arg(long)]
        subset_budget: Option<usize>,
        /// Perturb one result, as LAYER:WORKER.
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
}

/// Failures the user must see; `Verify` is the oracle-mismatch exit.
enum Failure {
    Usage(String),
    Verify(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_config(common: &Common) -> CliResult<CliConfigFile> {
    match &common.config {
        Some(path) => CliConfigFile::load(path).map_err(Failure::Usage),
        None => Ok(CliConfigFile::default()),
    }
}

fn out_dir(common: &Common, file: &CliConfigFile) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| file.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn points_mode(common: &Common, file: &CliConfigFile) -> Option<PointMode> {
    common.points.map(PointMode::from).or(file.points)
}

/// Write via a sibling temporary file and rename, so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Failure::from(e)
    })
}

fn experiment(
    common: &Common,
    file: &CliConfigFile,
    section: Option<&ExperimentConfig>,
    name: &str,
    mode: ExperimentMode,
) -> CliResult<ExperimentConfig> {
    let mut config = section.cloned().ok_or_else(|| {
        Failure::Usage(format!(
            "{name}: config file needs a [{name}] table (pass --config)"
        ))
    })?;
    config.mode = mode;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(points) = points_mode(common, file) {
        config.points = points;
    }
    config.validate()?;
    Ok(config)
}

fn write_report(
    dir: &Path,
    stem: &str,
    report: &ExperimentReport,
    with_trials: bool,
) -> CliResult<()> {
    write_atomic(&dir.join(format!("{stem}.csv")), report.to_csv().as_bytes())?;
    write_atomic(
        &dir.join(format!("{stem}.json")),
        report.to_json().as_bytes(),
    )?;
    if with_trials {
        write_atomic(
            &dir.join(format!("{stem}_trials.csv")),
            report.trials_csv().as_bytes(),
        )?;
    }
    Ok(())
}

fn cmd_analyze(common: &Common) -> CliResult<()> {
    let file = load_config(common)?;
    let config = experiment(
        common,
        &file,
        file.analyze.as_ref(),
        "analyze",
        ExperimentMode::Analytic,
    )?;
    let report = run_analytic_sweep(&config)?;
    let dir = out_dir(common, &file);
    write_report(&dir, "analyze", &report, false)?;
    println!("wrote {}", dir.join("analyze.csv").display());
    Ok(())
}

fn cmd_simulate(common: &Common) -> CliResult<()> {
    let file = load_config(common)?;
    let config = experiment(
        common,
        &file,
        file.simulate.as_ref(),
        "simulate",
        ExperimentMode::MonteCarlo,
    )?;
    let report = run_monte_carlo(&config)?;
    let dir = out_dir(common, &file);
    write_report(&dir, "simulate", &report, true)?;
    println!("wrote {}", dir.join("simulate.csv").display());
    Ok(())
}

fn random_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> Matrix {
    let mut rng = trial_rng(seed, stream);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

fn cmd_run(
    common: &Common,
    random: Option<&[usize]>,
    a: Option<&Path>,
    b: Option<&Path>,
) -> CliResult<()> {
    let file = load_config(common)?;
    if common.backend.or(file.backend) == Some(Backend::Exact) {
        return Err(Failure::Usage(
            "backend: run supports only the float backend".into(),
        ));
    }
    let mut config = experiment(
        common,
        &file,
        file.run.as_ref(),
        "run",
        ExperimentMode::RealExec,
    )?;
    let inputs = file.inputs.as_ref();
    let a_path = a
        .map(Path::to_path_buf)
        .or_else(|| inputs.and_then(|i| i.a.clone()));
    let b_path = b
        .map(Path::to_path_buf)
        .or_else(|| inputs.and_then(|i| i.b.clone()));
    let random = random
        .map(|r| [r[0], r[1], r[2]])
        .or_else(|| inputs.and_then(|i| i.random));

    let (a, b) = match (random, a_path, b_path) {
        (Some(dims), _, _) => {
            config.dims = dims;
            (
                random_matrix(dims[0], dims[1], config.seed, u64::MAX - 1),
                random_matrix(dims[1], dims[2], config.seed, u64::MAX),
            )
        }
        (None, Some(pa), Some(pb)) => {
            let a = Matrix::read_binary(&std::fs::read(&pa)?[..])?;
            let b = Matrix::read_binary(&std::fs::read(&pb)?[..])?;
            config.dims = [a.rows(), a.cols(), b.cols()];
            (a, b)
        }
        _ => {
            let [nx, nz, ny] = config.dims;
            (
                random_matrix(nx, nz, config.seed, u64::MAX - 1),
                random_matrix(nz, ny, config.seed, u64::MAX),
            )
        }
    };
    config.validate()?;

    let outcome = run_real_exec(&config, &a, &b)?;
    let dir = out_dir(common, &file);
    write_report(&dir, "run", &outcome.report, true)?;
    if let Some(m) = &outcome.recovered {
        write_atomic(&dir.join("recovered.bin"), &m.to_binary_bytes())?;
    }

    for row in &outcome.report.rows {
        if let Some(reason) = &row.skipped {
            eprintln!("{} L={}: skipped ({reason})", row.scheme.name(), row.layers);
            continue;
        }
        let err = row.max_rel_error.unwrap_or(0.0);
        println!(
            "{} L={} profile {:?}: mean finish {} s, failures {}, max rel error {err:.2e}",
            row.scheme.name(),
            row.layers,
            row.profile,
            row.mean_finish.map_or("n/a".into(), |v| format!("{v:.4}")),
            row.failures
        );
        if err > REAL_EXEC_TOLERANCE {
            return Err(Failure::Verify(format!(
                "{} L={}: relative error {err:e} exceeds {REAL_EXEC_TOLERANCE:e}",
                row.scheme.name(),
                row.layers
            )));
        }
        if row.failures > 0 {
            return Err(Failure::Usage(format!(
                "{} L={}: {} of {} trials could not decode",
                row.scheme.name(),
                row.layers,
                row.failures,
                row.trials
            )));
        }
    }
    Ok(())
}

struct OptimizeArgs {
    workers: Option<usize>,
    layers: Option<usize>,
    total: Option<usize>,
    mu: Option<f64>,
    alpha: Option<f64>,
    mode: Option<ModeArg>,
}

fn cmd_optimize(common: &Common, args: OptimizeArgs) -> CliResult<()> {
    let file = load_config(common)?;
    let section = file.optimize.as_ref();
    let missing = |key: &str| Failure::Usage(format!("{key}: required (flag or [optimize] table)"));
    let n = args
        .workers
        .or(section.map(|s| s.n_workers))
        .ok_or_else(|| missing("n_workers"))?;
    let layers = args
        .layers
        .or(section.map(|s| s.layers))
        .ok_or_else(|| missing("layers"))?;
    let total = args
        .total
        .or(section.map(|s| s.total_threshold))
        .ok_or_else(|| missing("total_threshold"))?;
    let mu = args
        .mu
        .or(section.map(|s| s.mu))
        .ok_or_else(|| missing("mu"))?;
    let alpha = args
        .alpha
        .or(section.map(|s| s.alpha))
        .ok_or_else(|| missing("alpha"))?;
    let mode = match args.mode {
        Some(ModeArg::Exact) => ExpectationMode::Exact,
        Some(ModeArg::LogApprox) => ExpectationMode::LogApprox,
        None => section.map_or(ExpectationMode::Exact, |s| s.mode),
    };
    let spec = OptimizerSpec::new(layers, total, RuntimeParams::new(n, mu, alpha)?, mode)?;
    let opt = optimize_profile(&spec)?;
    let out = json!({
        "profile": opt.profile.thresholds(),
        "objective": opt.objective,
        "n_workers": n,
        "layers": layers,
        "total_threshold": total,
        "mu": mu,
        "alpha": alpha,
        "mode": mode,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

struct VerifyArgs {
    dims: Option<Vec<usize>>,
    profile: Option<Vec<usize>>,
    grids: Option<String>,
    workers: Option<usize>,
    subset_budget: Option<usize>,
    corrupt: Option<String>,
}

fn parse_corrupt(s: &str) -> CliResult<CorruptHook> {
    let (l, w) = s
        .split_once(':')
        .ok_or_else(|| Failure::Usage(format!("corrupt: expected LAYER:WORKER, got {s:?}")))?;
    Ok(CorruptHook {
        layer: l.trim().parse()?,
        worker: w.trim().parse()?,
    })
}

fn small_int_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> Matrix {
    let mut rng = trial_rng(seed, stream);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-4i32..=4) as f64)
}

fn cmd_verify(common: &Common, args: VerifyArgs) -> CliResult<()> {
    let file = load_config(common)?;
    let section = file.verify.as_ref();
    let missing = |key: &str| Failure::Usage(format!("{key}: required (flag or [verify] table)"));
    let dims = args
        .dims
        .map(|d| [d[0], d[1], d[2]])
        .or(section.map(|s| s.dims))
        .ok_or_else(|| missing("dims"))?;
    let profile = args
        .profile
        .or(section.map(|s| s.profile.clone()))
        .ok_or_else(|| missing("profile"))?;
    let profile = Profile::new(profile).map_err(|e| Failure::Usage(format!("profile: {e}")))?;
    let n = args
        .workers
        .or(section.map(|s| s.n_workers))
        .ok_or_else(|| missing("n_workers"))?;
    let [n_x, n_z, n_y] = dims;
    let grids = match args
        .grids
        .map(|g| vec![g])
        .or_else(|| section.and_then(|s| s.grids.clone()))
    {
        Some(list) => parse_grids(&list).map_err(Failure::Usage)?,
        None => choose_grids(&profile, n_x, n_z, n_y)?,
    };
    let plan = build_tile_plan(n_x, n_z, n_y, &profile, &grids)?;
    let backend = common.backend.or(file.backend).unwrap_or(Backend::Exact);
    let points = points_mode(common, &file).unwrap_or(match backend {
        Backend::Exact => PointMode::Integer,
        Backend::Float => PointMode::Chebyshev,
    });
    let seed = common.seed.or(section.map(|s| s.seed)).unwrap_or(0);
    let options = AuditOptions {
        subset_budget: args
            .subset_budget
            .or(section.and_then(|s| s.subset_budget))
            .unwrap_or(AuditOptions::default().subset_budget),
        tolerance: match backend {
            Backend::Exact => 0.0,
            Backend::Float => section.and_then(|s| s.tolerance).unwrap_or(1e-6),
        },
        seed,
        corrupt: args.corrupt.as_deref().map(parse_corrupt).transpose()?,
    };

    let a = small_int_matrix(n_x, n_z, seed, 0);
    let b = small_int_matrix(n_z, n_y, seed, 1);
    let point_set = EvalPointSet::new(points, n);
    let report = match backend {
        Backend::Exact => audit_codec(
            &a.to_rational(),
            &b.to_rational(),
            &plan,
            &point_set,
            n,
            &options,
        )?,
        Backend::Float => audit_codec(&a, &b, &plan, &point_set, n, &options)?,
    };
    let dump = serde_json::to_string_pretty(&report)?;
    if report.passed() {
        println!("{dump}");
        println!("VERIFY_OK");
        Ok(())
    } else {
        if let Some(dir) = common
            .out
            .clone()
            .or_else(|| file.output.as_ref().and_then(|o| o.dir.clone()))
        {
            write_atomic(&dir.join("counterexample.json"), dump.as_bytes())?;
        }
        Err(Failure::Verify(dump))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(c) => cmd_analyze(&c),
        Command::Simulate(c) => cmd_simulate(&c),
        Command::Run {
            common,
            random,
            a,
            b,
        } => cmd_run(&common, random.as_deref(), a.as_deref(), b.as_deref()),
        Command::Optimize {
            common,
            workers,
            layers,
            total,
            mu,
            alpha,
            mode,
        } => cmd_optimize(
            &common,
            OptimizeArgs {
                workers,
                layers,
                total,
                mu,
                alpha,
                mode,
            },
        ),
        Command::Verify {
            common,
            dims,
            profile,
            grids,
            workers,
            subset_budget,
            corrupt,
        } => cmd_verify(
            &common,
            VerifyArgs {
                dims,
                profile,
                grids,
                workers,
                subset_budget,
                corrupt,
            },
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("VERIFY_FAIL\n{msg}");
            ExitCode::from(1)
        }
    }
}
