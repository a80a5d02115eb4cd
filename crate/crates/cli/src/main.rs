use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hashprobe::experiment::PointResult;
use hashprobe::report::{self, AggregateRow, Metadata, PerInsertionRow};
use hashprobe::verify::{self, Fault, VerifyOptions};
use hashprobe::{run_point, run_trials, Error, Execution, FunnelParams, Scheme, TableConfig};

const MIN_LOG2_N: u32 = 6;
const MAX_LOG2_N: u32 = 26;
const MAX_LOG2_INV_DELTA: u32 = 12;

#[derive(Parser)]
#[command(
    name = "hashprobe",
    version,
    about = "Probe-complexity experiments for open-addressing tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials for one table configuration.
    Run(RunArgs),
    /// Run every combination of schemes, sizes and load factors.
    Sweep(SweepArgs),
    /// Run the structural property suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Detail {
    #[value(name = "per_insertion", alias = "per-insertion")]
    PerInsertion,
    Aggregate,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 1)]
    trials: u32,
    /// Master seed; trial t uses a seed derived from (seed, t).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Elastic probe budget constant.
    #[arg(long, default_value_t = hashprobe::elastic::DEFAULT_C)]
    c: u32,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file, written atomically; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs trials sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    /// Exit 0 even if some trials fail.
    #[arg(long)]
    allow_failures: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scheme: Scheme,
    #[arg(long)]
    n: usize,
    /// k, with delta = 2^-k.
    #[arg(long)]
    log2_inv_delta: u32,
    #[arg(long, value_enum, default_value = "aggregate")]
    detail: Detail,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated schemes.
    #[arg(long, value_delimiter = ',', required = true)]
    scheme: Vec<Scheme>,
    /// Comma-separated table sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Inclusive range `a:b` or a single k.
    #[arg(long, value_parser = parse_range)]
    log2_inv_delta: (u32, u32),
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Skip the statistical sweeps.
    #[arg(long)]
    fast: bool,
    #[arg(long, hide = true, value_parser = ["phi"])]
    inject_fault: Option<String>,
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let parse = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("{t:?}: {e}"));
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let k = parse(s)?;
            (k, k)
        }
    };
    if a > b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

enum CliError {
    Usage(String),
    Failure(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

fn check_envelope(n: usize, k: u32, trials: u32) -> Result<(), CliError> {
    if !n.is_power_of_two() || !(1usize << MIN_LOG2_N..=1usize << MAX_LOG2_N).contains(&n) {
        return Err(CliError::Usage(format!(
            "n = {n} must be a power of two in [2^{MIN_LOG2_N}, 2^{MAX_LOG2_N}]"
        )));
    }
    if !(1..=MAX_LOG2_INV_DELTA).contains(&k) {
        return Err(CliError::Usage(format!(
            "log2-inv-delta = {k} must be in [1, {MAX_LOG2_INV_DELTA}]"
        )));
    }
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    Ok(())
}

fn config(scheme: Scheme, n: usize, k: u32, common: &Common) -> Result<TableConfig, CliError> {
    check_envelope(n, k, common.trials)?;
    let cfg = TableConfig::new(scheme, n, k).with_c(common.c);
    cfg.validate()?;
    Ok(cfg)
}

fn warnings(cfg: &TableConfig) -> Option<String> {
    if cfg.scheme != Scheme::Funnel {
        return None;
    }
    let p = FunnelParams::new(cfg.n, cfg.log2_inv_delta, 0).ok()?;
    p.is_clamped().then(|| {
        format!(
            "funnel n={} delta=2^-{}: layout uses delta=2^-{}",
            cfg.n,
            cfg.log2_inv_delta,
            p.layout_log2_inv_delta()
        )
    })
}

fn execution(jobs: Option<usize>) -> Execution {
    match jobs {
        None => Execution::Parallel,
        Some(0 | 1) => Execution::Sequential,
        Some(j) => Execution::ParallelJobs(j),
    }
}

fn emit(common: &Common, body: String) -> Result<(), CliError> {
    match &common.out {
        Some(path) => report::write_atomic(path, body.as_bytes())
            .map_err(|e| CliError::Failure(format!("writing {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Failure(format!("writing stdout: {e}"))),
    }
}

fn failure_check(common: &Common, failures: usize, trials: usize) -> Result<(), CliError> {
    if failures > 0 && !common.allow_failures {
        return Err(CliError::Failure(format!(
            "{failures} of {trials} trials failed"
        )));
    }
    Ok(())
}

fn aggregate_output(
    common: &Common,
    points: &[PointResult],
    warnings: Vec<String>,
    start: Instant,
) -> String {
    let rows: Vec<AggregateRow> = points.iter().map(AggregateRow::from_point).collect();
    match common.format {
        Format::Csv => report::aggregate_csv(&rows),
        Format::Json => report::to_json(
            &Metadata::new(common.seed, start.elapsed().as_secs_f64(), warnings),
            &rows,
        ),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let common = &args.common;
    let cfg = config(args.scheme, args.n, args.log2_inv_delta, common)?;
    let warnings: Vec<String> = warnings(&cfg).into_iter().collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let exec = execution(common.jobs);

    let failures = match args.detail {
        Detail::Aggregate => {
            let point = run_point(&cfg, common.seed, common.trials, exec)?;
            emit(
                common,
                aggregate_output(common, std::slice::from_ref(&point), warnings, start),
            )?;
            point.failures()
        }
        Detail::PerInsertion => {
            let results = run_trials(&cfg, common.seed, common.trials, exec)?;
            let records = results.iter().flat_map(|r| &r.records);
            let body = match common.format {
                Format::Csv => report::per_insertion_csv(&cfg, records),
                Format::Json => {
                    let rows: Vec<PerInsertionRow> =
                        records.map(|r| PerInsertionRow::new(&cfg, r)).collect();
                    report::to_json(
                        &Metadata::new(common.seed, start.elapsed().as_secs_f64(), warnings),
                        &rows,
                    )
                }
            };
            emit(common, body)?;
            for r in &results {
                if let Some(e) = &r.failure {
                    eprintln!("trial {} failed: {e}", r.trial);
                }
            }
            results.iter().filter(|r| r.failure.is_some()).count()
        }
    };
    failure_check(common, failures, common.trials as usize)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let common = &args.common;
    let (lo, hi) = args.log2_inv_delta;
    let mut configs = Vec::new();
    for &scheme in &args.scheme {
        for &n in &args.n {
            for k in lo..=hi {
                configs.push(config(scheme, n, k, common)?);
            }
        }
    }
    let warnings: Vec<String> = configs.iter().filter_map(warnings).collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let exec = execution(common.jobs);
    let mut points = Vec::with_capacity(configs.len());
    for cfg in &configs {
        points.push(run_point(cfg, common.seed, common.trials, exec)?);
    }
    emit(common, aggregate_output(common, &points, warnings, start))?;
    let failures = points.iter().map(PointResult::failures).sum();
    failure_check(common, failures, configs.len() * common.trials as usize)
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let fault = args.inject_fault.as_deref().map(|_| Fault::PhiShift);
    let report = verify::run_suite(VerifyOptions {
        fast: args.fast,
        fault,
    });
    print!("{}", report.render());
    let failed: Vec<&str> = report.failures().map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "failed properties: {}",
            failed.join(", ")
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
