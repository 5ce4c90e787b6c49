mod input;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mbf_core::bf::{
    bound_cdfs, fbound_pvalue, run_all, run_test, Method, TestResult, TwoSampleData,
};
use mbf_core::sim::{run_grid, write_atomic, write_outputs, SimConfig};
use mbf_core::verify::{check_theorem1, run_checks, SuiteSize, Which, DEFAULT_SEED};
use mbf_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0} check(s) reported violations")]
    Violations(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::NotMajorized | Error::InvalidConfig(_)) => 1,
            CliError::Data(_) | CliError::Core(_) => 2,
            CliError::Violations(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

/// Two-sample mean tests under proportional covariances.
#[derive(Debug, Parser)]
#[command(name = "mbf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the tests on two CSV samples.
    Test(TestArgs),
    /// Estimate Type I error over a grid of settings.
    Simulate(SimulateArgs),
    /// Run the numerical property checks and write a JSON report.
    Verify(VerifyArgs),
    /// Tabulate the two F bounds on the null distribution.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct TestArgs {
    /// First sample: one observation per line, comma separated.
    #[arg(long)]
    x: PathBuf,
    /// Second sample, same layout as --x.
    #[arg(long)]
    y: PathBuf,
    /// yao, johansen, nvdm, ky, fbound or all.
    #[arg(long, default_value = "all")]
    method: String,
    /// Skip the first line of each file.
    #[arg(long)]
    header: bool,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Directory that receives results, figures and the manifest.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// lemma1, lemma2, theorem1, theorem2, appendix or all.
    #[arg(long, default_value = "all")]
    which: String,
    /// Base seed of every check.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Debug: feed the ordering check a pair that is not majorized.
    #[arg(long)]
    inject_non_majorized: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Dimension.
    #[arg(long)]
    p: usize,
    /// First sample size.
    #[arg(long)]
    m: usize,
    /// Second sample size.
    #[arg(long)]
    n: usize,
    /// Largest statistic value tabulated.
    #[arg(long, default_value_t = 20.0)]
    t_max: f64,
    /// Number of equal steps from 0 to --t-max.
    #[arg(long, default_value_t = 100)]
    t_steps: usize,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Worker count from `MBF_THREADS`, if set.
fn env_threads() -> Result<Option<usize>, CliError> {
    match std::env::var("MBF_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "MBF_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn results_csv(results: &[TestResult]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record([
        "method",
        "statistic",
        "d1",
        "d2",
        "scale",
        "nu",
        "c",
        "p_value",
    ])
    .map_err(err)?;
    for r in results {
        let df = r.df_info;
        w.write_record([
            r.method.id().to_string(),
            r.statistic.to_string(),
            fmt_opt(df.map(|d| d.d1)),
            fmt_opt(df.map(|d| d.d2)),
            fmt_opt(df.map(|d| d.scale)),
            fmt_opt(df.and_then(|d| d.nu)),
            fmt_opt(df.and_then(|d| d.c)),
            r.p_value.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

fn cmd_test(args: &TestArgs) -> Result<(), CliError> {
    let method = if args.method.eq_ignore_ascii_case("all") {
        None
    } else {
        Some(
            args.method
                .parse::<Method>()
                .map_err(|e| CliError::Usage(e.to_string()))?,
        )
    };
    let x = input::read_matrix(&args.x, args.header)?;
    let y = input::read_matrix(&args.y, args.header)?;
    if x.ncols() != y.ncols() {
        return Err(CliError::Data(format!(
            "{} has {} columns but {} has {}",
            args.x.display(),
            x.ncols(),
            args.y.display(),
            y.ncols()
        )));
    }
    let (m, n, p) = (x.nrows(), y.nrows(), x.ncols());
    let data = TwoSampleData::new(x, y).map_err(|e| match e {
        Error::DimensionTooLarge { .. } => CliError::Data(format!(
            "need more rows than columns in each sample: p = {p}, m = {m}, n = {n}"
        )),
        e => e.into(),
    })?;
    let results = match method {
        Some(m) => vec![run_test(&data, m)?],
        None => run_all(&data)?,
    };
    emit(args.out.as_deref(), &results_csv(&results)?)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.config.display())))?;
    let mut config = SimConfig::from_json_str(&text)?;
    if let Some(n) = env_threads()? {
        config.parallelism = Some(n);
    }
    let run = run_grid(&config)?;
    if run.rows.is_empty() {
        return Err(Error::EmptyResults.into());
    }
    let files = write_outputs(&run, &args.out_dir)?;
    for f in &files {
        eprintln!("wrote {}", f.display());
    }
    if run.is_partial() {
        for f in &run.manifest.failed {
            eprintln!("setting ({}, {}, {}) failed: {}", f.m, f.n, f.k, f.error);
        }
        return Err(CliError::Data(format!(
            "{} of {} settings failed; partial results written",
            run.manifest.failed.len(),
            config.grid.len()
        )));
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let which: Which = args
        .which
        .parse()
        .map_err(|e: Error| CliError::Usage(e.to_string()))?;
    if let Some(n) = env_threads()? {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    if args.inject_non_majorized {
        if !matches!(which, Which::Theorem1 | Which::All) {
            return Err(CliError::Usage(
                "--inject-non-majorized applies to theorem1 only".into(),
            ));
        }
        let stream = mbf_core::rng::RngStream::new(args.seed);
        check_theorem1(&[1.0, 0.0], &[0.5, 0.5], 1, 5, 1000, &stream)?;
    }
    let reports = run_checks(which, args.seed, &SuiteSize::default())?;
    let mut json = serde_json::to_vec_pretty(&reports).map_err(Error::from)?;
    json.push(b'\n');
    emit(args.out.as_deref(), &json)?;
    let failing = reports.iter().filter(|r| r.violations > 0).count();
    for r in &reports {
        eprintln!(
            "{}: {} instances, {} violations",
            r.check, r.instances, r.violations
        );
    }
    if failing > 0 {
        return Err(CliError::Violations(failing));
    }
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), CliError> {
    if !(args.t_max > 0.0 && args.t_max.is_finite()) || args.t_steps == 0 {
        return Err(CliError::Usage(
            "--t-max must be positive and --t-steps at least 1".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["t", "lower", "upper", "fbound_pvalue"])
        .map_err(err)?;
    for i in 0..=args.t_steps {
        let t = args.t_max * i as f64 / args.t_steps as f64;
        let b = bound_cdfs(t, args.p, args.m, args.n)?;
        let pv = fbound_pvalue(t, args.p, args.m, args.n)?;
        w.write_record([
            t.to_string(),
            b.lower.to_string(),
            b.upper.to_string(),
            pv.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    emit(args.out.as_deref(), &bytes)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bounds(a) => cmd_bounds(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
