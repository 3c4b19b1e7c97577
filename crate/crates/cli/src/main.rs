mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use defog_core::bulk::{generate_bulk, ParamGrid};
use defog_core::metrics::parse_lattice;
use defog_core::pipeline::{
    default_workers, load_variants, run_pipeline, score_images, score_variances, workers_from_env,
    RunConfig,
};
use defog_core::report::{self, read_variance_table, ReportFile, REPORT_CSV, REPORT_JSON};
use defog_core::{
    load_image, retinex, save_image, select_and_rank, threshold, Error, GateThresholds, Level,
    MetricsReport, PartitionSpec, RankKey, RankedList, Result, RetinexParams, ScalarMode,
};

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "defog", version, about = "Bulk Retinex enhancement and variance-based selection for foggy images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enhance one image with a single parameter tuple.
    Enhance(EnhanceArgs),
    /// Binarize an image by mean channel value.
    Threshold(ThresholdArgs),
    /// Generate every variant of a parameter grid.
    Bulk(BulkArgs),
    /// Compute variance statistics of variants against the original.
    Score(ScoreArgs),
    /// Gate and rank a previously written report.
    Select(SelectArgs),
    /// Bulk generation, scoring and selection in one run.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct EnhanceArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 240)]
    scale: u32,
    #[arg(long, visible_alias = "division", default_value_t = 3)]
    scale_division: u32,
    #[arg(long, default_value_t = 1.2)]
    dynamic: f64,
    #[arg(long, default_value_t = Level::Uniform)]
    level: Level,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(short, long, default_value_t = 127)]
    threshold: u32,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Comma-separated scales, 16..=250.
    #[arg(long, value_delimiter = ',')]
    scale: Option<Vec<u32>>,
    #[arg(long, visible_alias = "division", value_delimiter = ',')]
    scale_division: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    dynamic: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    level: Option<Vec<Level>>,
    /// Comma-separated binarization thresholds applied to every variant.
    #[arg(long, value_delimiter = ',', conflicts_with = "no_threshold")]
    threshold: Option<Vec<u32>>,
    /// Skip the thresholded copies.
    #[arg(long)]
    no_threshold: bool,
}

#[derive(Debug, Args)]
struct MeasureArgs {
    /// Split into N horizontal stripes.
    #[arg(long, conflicts_with = "lattice")]
    stripes: Option<usize>,
    /// Split into an RxC grid of cells, e.g. 3x3.
    #[arg(long)]
    lattice: Option<String>,
    /// Scalar used for variances: brightness, r, g or b.
    #[arg(long)]
    scalar_mode: Option<ScalarMode>,
}

#[derive(Debug, Args)]
struct GateArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// max-vvo or rvv.
    #[arg(long)]
    rank_key: Option<RankKey>,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Flat TOML file with default settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct BulkArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Original image; required unless --from-variances is given.
    #[arg(required_unless_present = "from_variances")]
    original: Option<PathBuf>,
    /// Variant directory or manifest.json.
    #[arg(required_unless_present = "from_variances", conflicts_with = "from_variances")]
    variants: Option<PathBuf>,
    /// CSV of precomputed variances (`id,total,v1,...`) with an `original` row.
    #[arg(long, conflicts_with = "original")]
    from_variances: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    measure: MeasureArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// report.json or report.csv.
    report: PathBuf,
    /// Output directory; defaults to the report's directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    gates: GateArgs,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    measure: MeasureArgs,
    #[command(flatten)]
    gates: GateArgs,
    #[command(flatten)]
    common: CommonArgs,
}

/// Process exit status for a failed run.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParams(_) | Error::DimensionMismatch(_) | Error::Parse { .. } => 2,
        Error::FileNotFound(_)
        | Error::UnsupportedFormat(_)
        | Error::CorruptData(_)
        | Error::Io { .. }
        | Error::Encode(_) => 3,
        Error::DegenerateOriginal(_) => 4,
    }
}

const NOTHING_ACCEPTED: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("defog: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Enhance(a) => {
            let params = RetinexParams::new(a.scale, a.scale_division, a.dynamic, a.level)?;
            let img = load_image(&a.input)?;
            save_image(&retinex(&img, &params)?, &a.output)?;
            Ok(0)
        }
        Command::Threshold(a) => {
            let img = load_image(&a.input)?;
            save_image(&threshold(&img, a.threshold)?, &a.output)?;
            Ok(0)
        }
        Command::Bulk(a) => {
            let file = load_config(a.common.config.as_deref())?;
            let grid = resolve_grid(&a.grid, &file)?;
            let workers = resolve_workers(a.common.workers, &file)?;
            let img = load_image(&a.input)?;
            create_dir(&a.output)?;
            let records = generate_bulk(&img, &grid, &a.output, workers)?;
            println!("{} variants written to {}", records.len(), a.output.display());
            Ok(0)
        }
        Command::Score(a) => score(a),
        Command::Select(a) => select(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn score(a: ScoreArgs) -> Result<u8> {
    let file = load_config(a.common.config.as_deref())?;
    let reports = if let Some(table) = &a.from_variances {
        let (original, rows) = read_variance_table(table)?;
        score_variances(&original, &rows)?
    } else {
        let (Some(original), Some(variants)) = (&a.original, &a.variants) else {
            unreachable!("clap enforces both positionals")
        };
        let partition = resolve_partition(&a.measure, &file)?;
        let mode = resolve_mode(&a.measure, &file)?;
        let workers = resolve_workers(a.common.workers, &file)?;
        let original = load_image(original)?;
        let variants = load_variants(variants)?;
        score_images(&original, &variants, partition, mode, workers)?
    };
    create_dir(&a.output)?;
    let report = ReportFile::ungated(reports);
    report::write_csv(&report, &a.output.join(REPORT_CSV))?;
    report::write_json(&report, &a.output.join(REPORT_JSON))?;
    println!("{} variants scored", report.rows.len());
    Ok(0)
}

fn select(a: SelectArgs) -> Result<u8> {
    let file = load_config(a.config.as_deref())?;
    let gates = resolve_gates(&a.gates, &file)?;
    let key = resolve_rank_key(&a.gates, &file)?;
    let is_csv = a
        .report
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let reports: Vec<MetricsReport> = if is_csv {
        report::read_csv(&a.report)?
    } else {
        report::read_json(&a.report)?.reports()
    };
    let out = match a.output {
        Some(dir) => dir,
        None => a.report.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    let (ranked, verdicts) = select_and_rank(&reports, &gates, key);
    create_dir(&out)?;
    let report = ReportFile::gated(reports, &verdicts, ranked.clone(), gates);
    report::write_csv(&report, &out.join(REPORT_CSV))?;
    report::write_json(&report, &out.join(REPORT_JSON))?;
    print_ranking(&ranked, verdicts.len());
    Ok(if ranked.is_empty() { NOTHING_ACCEPTED } else { 0 })
}

fn pipeline(a: PipelineArgs) -> Result<u8> {
    let file = load_config(a.common.config.as_deref())?;
    let mut cfg = RunConfig::new(&a.input, &a.output);
    cfg.grid = resolve_grid(&a.grid, &file)?;
    cfg.partition = resolve_partition(&a.measure, &file)?;
    cfg.scalar_mode = resolve_mode(&a.measure, &file)?;
    cfg.gates = resolve_gates(&a.gates, &file)?;
    cfg.rank_key = resolve_rank_key(&a.gates, &file)?;
    cfg.workers = resolve_workers(a.common.workers, &file)?;
    let outcome = run_pipeline(&cfg)?;
    print_ranking(&outcome.ranked, outcome.reports.len());
    if let Some(best) = &outcome.best {
        println!("best: {}", best.display());
    }
    Ok(if outcome.ranked.is_empty() { NOTHING_ACCEPTED } else { 0 })
}

fn print_ranking(ranked: &RankedList, total: usize) {
    println!("{} of {} variants accepted (key {})", ranked.len(), total, ranked.key);
    for e in &ranked.entries {
        println!("{:>4}  {}  {}", e.rank, e.variant_id, report::format_value(e.key_value));
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    path.map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
}

fn parse_named<T>(what: &str, raw: &str) -> Result<T>
where
    T: std::str::FromStr,
{
    raw.parse()
        .map_err(|_| Error::InvalidParams(format!("config: invalid {what} '{raw}'")))
}

fn resolve_grid(flags: &GridArgs, file: &FileConfig) -> Result<ParamGrid> {
    let d = ParamGrid::default();
    let levels = match (&flags.level, &file.level) {
        (Some(l), _) => l.clone(),
        (None, Some(names)) => names
            .iter()
            .map(|n| parse_named("level", n))
            .collect::<Result<_>>()?,
        (None, None) => d.levels,
    };
    let thresholds = if flags.no_threshold {
        Vec::new()
    } else {
        pick(flags.threshold.clone(), file.threshold.clone(), d.thresholds)
    };
    ParamGrid::new(
        pick(flags.scale.clone(), file.scale.clone(), d.scales),
        pick(flags.scale_division.clone(), file.scale_division.clone(), d.divisions),
        pick(flags.dynamic.clone(), file.dynamic.clone(), d.dynamics),
        levels,
        thresholds,
    )
}

fn resolve_partition(flags: &MeasureArgs, file: &FileConfig) -> Result<PartitionSpec> {
    let lattice = |s: &str| {
        parse_lattice(s)
            .map(|(rows, cols)| PartitionSpec::Lattice { rows, cols })
            .ok_or_else(|| Error::InvalidParams(format!("cannot parse lattice '{s}' (expected RxC)")))
    };
    let spec = match (flags.stripes, &flags.lattice) {
        (Some(n), _) => PartitionSpec::Stripes(n),
        (None, Some(l)) => lattice(l)?,
        (None, None) => match (file.stripes, &file.lattice) {
            (Some(n), _) => PartitionSpec::Stripes(n),
            (None, Some(l)) => lattice(l)?,
            (None, None) => PartitionSpec::default(),
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn resolve_mode(flags: &MeasureArgs, file: &FileConfig) -> Result<ScalarMode> {
    match (flags.scalar_mode, &file.scalar_mode) {
        (Some(m), _) => Ok(m),
        (None, Some(raw)) => parse_named("scalar_mode", raw),
        (None, None) => Ok(ScalarMode::default()),
    }
}

fn resolve_gates(flags: &GateArgs, file: &FileConfig) -> Result<GateThresholds> {
    let d = GateThresholds::default();
    GateThresholds::new(
        flags.epsilon.or(file.epsilon).unwrap_or(d.epsilon),
        flags.tau.or(file.tau).unwrap_or(d.tau),
        flags.mu.or(file.mu).unwrap_or(d.mu),
    )
}

fn resolve_rank_key(flags: &GateArgs, file: &FileConfig) -> Result<RankKey> {
    match (flags.rank_key, &file.rank_key) {
        (Some(k), _) => Ok(k),
        (None, Some(raw)) => parse_named("rank_key", raw),
        (None, None) => Ok(RankKey::default()),
    }
}

/// Flag, then the environment, then the config file, then the core count.
fn resolve_workers(flag: Option<usize>, file: &FileConfig) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match workers_from_env()? {
            Some(n) => n,
            None => file.workers.unwrap_or_else(default_workers),
        },
    };
    if n == 0 {
        return Err(Error::InvalidParams("worker count must be positive".into()));
    }
    Ok(n)
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
