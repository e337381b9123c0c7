//! Command-line driver: ingestion, estimation, frontier bounds, the
//! exact oracle, and the disparate-missingness study.
//!
//! Exit codes: 0 on success, 1 on compute failure, 2 on usage or schema
//! errors. All outputs land in `--out-dir` next to a `manifest.json`
//! recording input/output hashes, the resolved configuration, and the
//! seed; reruns with identical inputs and seed produce byte-identical
//! data files. `FAIRFRONT_THREADS` caps worker threads.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use fairfront::cutgen::CutSearchConfig;
use fairfront::dist::{self, DistError, JointModel, SchemaSpec};
use fairfront::frontier::{approximate_frontier, sweep, FrontierConfig, MetricAxis};
use fairfront::metrics::Thresholds;
use fairfront::oracle;
use fairfront::run::{
    self, derive_seed, missing_study, missing_study_to_csv, sweep_to_csv, sweep_to_svg,
    ConstraintDump, FrontierReport, MissingStudyConfig, OracleReport, OutputWriter,
};

#[derive(Parser)]
#[command(
    name = "fairfront",
    version,
    about = "Fairness Pareto frontier bounds for finite data distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Upper-bound the frontier at one threshold setting.
    Frontier(FrontierArgs),
    /// Evaluate the frontier over a threshold grid and emit curve data.
    Sweep(SweepArgs),
    /// Degrade one group's features with missing values, impute, and
    /// sweep; one curve per erase probability.
    MissingStudy(MissingStudyArgs),
    /// Exact frontier via the coupled classifier program (finite
    /// supports only).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Input CSV with a header row.
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    data: Option<PathBuf>,
    /// Schema JSON (column roles, bins, missing token).
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    schema: Option<PathBuf>,
    /// Reuse a previously estimated model (model.json) instead of
    /// CSV + schema.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Statistical parity threshold; >= 1 deactivates.
    #[arg(long)]
    alpha_sp: Option<f64>,
    /// Equalized odds threshold; >= 1 deactivates.
    #[arg(long)]
    alpha_eo: Option<f64>,
    /// Overall accuracy equality threshold; >= 1 deactivates.
    #[arg(long)]
    alpha_oae: Option<f64>,
    /// Pieces per cut.
    #[arg(long)]
    k: Option<usize>,
    /// Outer iteration cap.
    #[arg(long)]
    iters: Option<usize>,
    /// Cut-search restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Base seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if absent).
    #[arg(long, default_value = "fairfront-out")]
    out_dir: PathBuf,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mode-impute missing cells after quantization.
    #[arg(long)]
    impute: bool,
}

#[derive(Args)]
struct FrontierArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also solve the exact oracle and report the gap.
    #[arg(long)]
    oracle: bool,
    /// Dump the compiled constraint sets to constraints.json.
    #[arg(long)]
    dump_constraints: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which threshold the grid varies.
    #[arg(long, value_enum, default_value_t = MetricChoice::Eo)]
    metric: MetricChoice,
    /// Ascending comma-separated thresholds.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    /// Add exact-oracle value and gap columns.
    #[arg(long)]
    with_oracle: bool,
    /// Emit a static SVG chart of the curve.
    #[arg(long)]
    svg: bool,
    /// Share one cut pool across grid points (runs sequentially).
    #[arg(long)]
    reuse_cuts: bool,
}

#[derive(Args)]
struct MissingStudyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Erase probabilities for group 0, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    p0: Vec<f64>,
    /// Erase probability for every other group.
    #[arg(long, default_value_t = 0.1)]
    p1: f64,
    /// Which threshold the grid varies.
    #[arg(long, value_enum, default_value_t = MetricChoice::Eo)]
    metric: MetricChoice,
    /// Ascending comma-separated thresholds.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Variable cap guarding the oracle program size.
    #[arg(long, default_value_t = oracle::DEFAULT_VAR_CAP)]
    cap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricChoice {
    Sp,
    Eo,
    Oae,
}

impl From<MetricChoice> for MetricAxis {
    fn from(value: MetricChoice) -> Self {
        match value {
            MetricChoice::Sp => MetricAxis::Sp,
            MetricChoice::Eo => MetricAxis::Eo,
            MetricChoice::Oae => MetricAxis::Oae,
        }
    }
}

/// Optional config file; flags override these, these override defaults.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    alpha_sp: Option<f64>,
    alpha_eo: Option<f64>,
    alpha_oae: Option<f64>,
    k: Option<usize>,
    iters: Option<usize>,
    restarts: Option<usize>,
    seed: Option<u64>,
}

enum CliError {
    Usage(String),
    Compute(String),
}

impl CliError {
    fn usage(err: impl std::fmt::Display) -> Self {
        CliError::Usage(err.to_string())
    }

    fn compute(err: impl std::fmt::Display) -> Self {
        CliError::Compute(err.to_string())
    }
}

impl From<DistError> for CliError {
    fn from(err: DistError) -> Self {
        // Every dist failure traces back to the inputs the user handed
        // over: schema, file contents, probabilities, data quality.
        CliError::Usage(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Compute(err.to_string())
    }
}

struct Resolved {
    thresholds: Thresholds,
    frontier: FrontierConfig,
    seed: u64,
    config_echo: serde_json::Value,
}

fn resolve(common: &CommonArgs, verbose: u8) -> Result<Resolved, CliError> {
    let file: ConfigFile = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let sp = common.alpha_sp.or(file.alpha_sp).unwrap_or(1.0);
    let eo = common.alpha_eo.or(file.alpha_eo).unwrap_or(1.0);
    let oae = common.alpha_oae.or(file.alpha_oae).unwrap_or(1.0);
    let thresholds = Thresholds::new(sp, eo, oae).map_err(CliError::usage)?;
    let k = common.k.or(file.k).unwrap_or(6);
    let iters = common.iters.or(file.iters).unwrap_or(20);
    let restarts = common.restarts.or(file.restarts).unwrap_or(16);
    if k == 0 || iters == 0 || restarts == 0 {
        return Err(CliError::Usage(
            "k, iters, and restarts must be positive".into(),
        ));
    }
    let seed = common.seed.or(file.seed).unwrap_or(0);
    let frontier = FrontierConfig {
        search: CutSearchConfig {
            pieces: k,
            restarts,
            seed: derive_seed(seed, "cut-search"),
            ..Default::default()
        },
        max_iterations: iters,
        record_trace: verbose > 0,
        reuse_cuts: false,
    };
    let config_echo = serde_json::json!({
        "thresholds": {"sp": sp, "eo": eo, "oae": oae},
        "k": k,
        "iters": iters,
        "restarts": restarts,
        "seed": seed,
        "impute": common.impute,
    });
    Ok(Resolved {
        thresholds,
        frontier,
        seed,
        config_echo,
    })
}

fn load_schema(path: &Path) -> Result<SchemaSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read schema {}: {e}", path.display())))?;
    SchemaSpec::from_json(&text).map_err(CliError::usage)
}

fn input_hashes(common: &CommonArgs) -> Result<BTreeMap<String, String>, CliError> {
    let hash = |role: &str, path: &Path| {
        run::sha256_file(path)
            .map_err(|e| CliError::usage(format!("cannot read {role} {}: {e}", path.display())))
    };
    let mut hashes = BTreeMap::new();
    if let Some(model) = &common.model {
        hashes.insert("model".to_string(), hash("model", model)?);
    }
    if let Some(data) = &common.data {
        hashes.insert("data".to_string(), hash("data", data)?);
    }
    if let Some(schema) = &common.schema {
        hashes.insert("schema".to_string(), hash("schema", schema)?);
    }
    if let Some(config) = &common.config {
        hashes.insert("config".to_string(), hash("config", config)?);
    }
    Ok(hashes)
}

fn load_model(common: &CommonArgs) -> Result<JointModel, CliError> {
    if let Some(model_path) = &common.model {
        let text = std::fs::read_to_string(model_path).map_err(|e| {
            CliError::usage(format!("cannot read model {}: {e}", model_path.display()))
        })?;
        return JointModel::from_json(&text).map_err(CliError::from);
    }
    let (data, schema_path) = match (&common.data, &common.schema) {
        (Some(d), Some(s)) => (d, s),
        _ => {
            return Err(CliError::Usage(
                "provide --data with --schema, or --model".into(),
            ))
        }
    };
    let schema = load_schema(schema_path)?;
    Ok(dist::model_from_csv(data, &schema, common.impute)?)
}

fn cmd_frontier(args: &FrontierArgs, verbose: u8) -> Result<(), CliError> {
    let started = Instant::now();
    let resolved = resolve(&args.common, verbose)?;
    let hashes = input_hashes(&args.common)?;
    let jm = load_model(&args.common)?;
    let point = approximate_frontier(&jm, &resolved.thresholds, &resolved.frontier)
        .map_err(CliError::compute)?;
    let oracle_result = if args.oracle {
        Some(oracle::exact_frontier(&jm, &resolved.thresholds).map_err(CliError::compute)?)
    } else {
        None
    };
    let report = FrontierReport::new(&jm, point, oracle_result.as_ref());

    let mut writer = OutputWriter::create(&args.common.out_dir)?;
    writer.write("model.json", jm.to_json().as_bytes())?;
    writer.write(
        "frontier.json",
        serde_json::to_string_pretty(&report)
            .expect("report serializes")
            .as_bytes(),
    )?;
    writer.write("frontier_summary.txt", report.summary().as_bytes())?;
    if args.dump_constraints {
        let dump = ConstraintDump::new(&jm, &resolved.thresholds).map_err(CliError::compute)?;
        writer.write(
            "constraints.json",
            serde_json::to_string_pretty(&dump)
                .expect("dump serializes")
                .as_bytes(),
        )?;
    }
    writer.finish(
        "frontier",
        resolved.seed,
        resolved.config_echo,
        hashes,
        started.elapsed().as_millis(),
    )?;
    print!("{}", report.summary());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, verbose: u8) -> Result<(), CliError> {
    let started = Instant::now();
    let resolved = resolve(&args.common, verbose)?;
    if args.grid.is_empty() {
        return Err(CliError::Usage(
            "--grid must list at least one threshold".into(),
        ));
    }
    if args.grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(CliError::Usage("--grid must be sorted ascending".into()));
    }
    let hashes = input_hashes(&args.common)?;
    let jm = load_model(&args.common)?;
    let mut cfg = resolved.frontier.clone();
    cfg.reuse_cuts = args.reuse_cuts;
    let metric: MetricAxis = args.metric.into();
    let result =
        sweep(&jm, metric, &args.grid, &resolved.thresholds, &cfg).map_err(CliError::compute)?;
    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }

    let exact: Option<Vec<Option<f64>>> = if args.with_oracle {
        let values = args
            .grid
            .iter()
            .map(|&alpha| {
                let th = metric.apply(&resolved.thresholds, alpha);
                oracle::exact_frontier(&jm, &th).map(|r| r.value)
            })
            .collect::<Vec<_>>();
        Some(
            values
                .into_iter()
                .map(|r| match r {
                    Ok(v) => Some(v),
                    Err(err) => {
                        eprintln!("warning: oracle failed on a grid point: {err}");
                        None
                    }
                })
                .collect(),
        )
    } else {
        None
    };

    let mut writer = OutputWriter::create(&args.common.out_dir)?;
    writer.write("model.json", jm.to_json().as_bytes())?;
    writer.write(
        "sweep.csv",
        sweep_to_csv(&result, exact.as_deref()).as_bytes(),
    )?;
    let json_report = serde_json::json!({
        "format_version": run::FORMAT_VERSION,
        "sweep": result,
        "exact_values": exact,
    });
    writer.write(
        "sweep.json",
        serde_json::to_string_pretty(&json_report)
            .expect("sweep serializes")
            .as_bytes(),
    )?;
    if args.svg {
        writer.write("sweep.svg", sweep_to_svg(&result).as_bytes())?;
    }
    writer.finish(
        "sweep",
        resolved.seed,
        resolved.config_echo,
        hashes,
        started.elapsed().as_millis(),
    )?;
    for point in &result.points {
        match &point.point {
            Some(p) => println!("alpha={} value={:.6}", point.alpha, p.value),
            None => println!("alpha={} failed", point.alpha),
        }
    }
    Ok(())
}

fn cmd_missing_study(args: &MissingStudyArgs, verbose: u8) -> Result<(), CliError> {
    let started = Instant::now();
    let resolved = resolve(&args.common, verbose)?;
    if args.common.model.is_some() {
        return Err(CliError::Usage(
            "missing-study injects values into raw data; provide --data and --schema".into(),
        ));
    }
    if args.p0.is_empty() {
        return Err(CliError::Usage(
            "--p0 must list at least one probability".into(),
        ));
    }
    for &p in args.p0.iter().chain([&args.p1]) {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Usage(format!(
                "probability {p} is outside [0, 1]"
            )));
        }
    }
    if args.grid.is_empty() {
        return Err(CliError::Usage(
            "--grid must list at least one threshold".into(),
        ));
    }
    if args.grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(CliError::Usage("--grid must be sorted ascending".into()));
    }
    let hashes = input_hashes(&args.common)?;
    let (data, schema_path) = match (&args.common.data, &args.common.schema) {
        (Some(d), Some(s)) => (d, s),
        _ => {
            return Err(CliError::Usage(
                "missing-study requires --data and --schema".into(),
            ))
        }
    };
    let schema = load_schema(schema_path)?;
    let dataset = dist::load_dataset(data, &schema)?;
    let dataset = dist::quantize_dataset(&dataset, &schema)?;

    let study_cfg = MissingStudyConfig {
        p0_grid: args.p0.clone(),
        p1: args.p1,
        metric: args.metric.into(),
        grid: args.grid.clone(),
        base_thresholds: resolved.thresholds,
        frontier: resolved.frontier.clone(),
        seed: resolved.seed,
    };
    let result = missing_study(&dataset, &study_cfg).map_err(CliError::compute)?;

    let mut writer = OutputWriter::create(&args.common.out_dir)?;
    for branch in &result.branches {
        let single = run::MissingStudyResult {
            format_version: result.format_version,
            branches: vec![branch.clone()],
        };
        writer.write(
            &format!("missing_p0_{}.csv", branch.p0),
            missing_study_to_csv(&single).as_bytes(),
        )?;
    }
    writer.write(
        "missing_combined.csv",
        missing_study_to_csv(&result).as_bytes(),
    )?;
    writer.write(
        "missing_study.json",
        serde_json::to_string_pretty(&result)
            .expect("study serializes")
            .as_bytes(),
    )?;
    writer.finish(
        "missing-study",
        resolved.seed,
        resolved.config_echo,
        hashes,
        started.elapsed().as_millis(),
    )?;
    for branch in &result.branches {
        for point in &branch.sweep.points {
            match &point.point {
                Some(p) => println!(
                    "p0={} alpha={} value={:.6}",
                    branch.p0, point.alpha, p.value
                ),
                None => println!("p0={} alpha={} failed", branch.p0, point.alpha),
            }
        }
    }
    Ok(())
}

fn cmd_oracle(args: &OracleArgs, verbose: u8) -> Result<(), CliError> {
    let started = Instant::now();
    let resolved = resolve(&args.common, verbose)?;
    let hashes = input_hashes(&args.common)?;
    let jm = load_model(&args.common)?;
    let result = oracle::exact_frontier_capped(&jm, &resolved.thresholds, args.cap)
        .map_err(CliError::compute)?;
    let report = OracleReport::new(&jm, &resolved.thresholds, result);
    let mut writer = OutputWriter::create(&args.common.out_dir)?;
    writer.write("model.json", jm.to_json().as_bytes())?;
    writer.write(
        "oracle.json",
        serde_json::to_string_pretty(&report)
            .expect("report serializes")
            .as_bytes(),
    )?;
    writer.finish(
        "oracle",
        resolved.seed,
        resolved.config_echo,
        hashes,
        started.elapsed().as_millis(),
    )?;
    println!("exact frontier: {:.6}", report.value);
    println!("bayes accuracy: {:.6}", report.bayes_accuracy);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Ok(threads) = std::env::var("FAIRFRONT_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                if let Err(err) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("could not cap threads: {err}");
                }
            }
            _ => {
                eprintln!("error: FAIRFRONT_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let outcome = match &cli.command {
        Command::Frontier(args) => cmd_frontier(args, cli.verbose),
        Command::Sweep(args) => cmd_sweep(args, cli.verbose),
        Command::MissingStudy(args) => cmd_missing_study(args, cli.verbose),
        Command::Oracle(args) => cmd_oracle(args, cli.verbose),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
