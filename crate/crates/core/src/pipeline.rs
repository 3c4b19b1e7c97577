//! End-to-end runs: generate the bulk set, score it, select and rank.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bulk::{generate_bulk_with, read_manifest, thread_pool, ParamGrid, VariantRecord};
use crate::error::{Error, Result};
use crate::imaging::{load_image, to_scalar, RgbImage, ScalarMode};
use crate::metrics::{Baseline, MetricsReport, PartitionSpec, VarianceProfile};
use crate::report::{self, ReportFile, VarianceRow, REPORT_CSV, REPORT_JSON};
use crate::selector::{select_and_rank, GateThresholds, RankKey, RankedList, Verdict};

pub const BEST_FILE: &str = "best.png";

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "DEFOG_WORKERS";

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidParams(format!(
                "{WORKERS_ENV} must be a positive integer, got '{v}'"
            ))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub grid: ParamGrid,
    pub partition: PartitionSpec,
    pub scalar_mode: ScalarMode,
    pub gates: GateThresholds,
    pub rank_key: RankKey,
    pub workers: usize,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            out_dir: out_dir.into(),
            grid: ParamGrid::default(),
            partition: PartitionSpec::default(),
            scalar_mode: ScalarMode::default(),
            gates: GateThresholds::default(),
            rank_key: RankKey::default(),
            workers: default_workers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.partition.validate()?;
        self.gates.validate()?;
        if self.workers == 0 {
            return Err(Error::InvalidParams("worker count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub records: Vec<VariantRecord>,
    pub reports: Vec<MetricsReport>,
    pub verdicts: Vec<Verdict>,
    pub ranked: RankedList,
    /// Path of `best.png`, when anything was accepted.
    pub best: Option<PathBuf>,
}

/// Baseline statistics of the original, failing early if it is degenerate.
pub fn baseline_for(original: &RgbImage, partition: PartitionSpec, mode: ScalarMode) -> Result<Baseline> {
    Baseline::new(&VarianceProfile::from_field(
        &to_scalar(original, mode),
        partition,
    )?)
}

/// Generates, scores, gates and ranks every variant of `cfg.input`.
///
/// Writes `manifest.json`, the variant PNGs, `report.csv`, `report.json` and
/// (if anything is accepted) `best.png` into `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let source = load_image(&cfg.input)?;
    run_pipeline_on(&source, cfg)
}

/// [`run_pipeline`] with the source image already loaded; `cfg.input` is
/// ignored.
pub fn run_pipeline_on(source: &RgbImage, cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let baseline = baseline_for(source, cfg.partition, cfg.scalar_mode)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let scored = generate_bulk_with(source, &cfg.grid, &cfg.out_dir, cfg.workers, |record, img| {
        let profile = VarianceProfile::from_field(&to_scalar(img, cfg.scalar_mode), cfg.partition)?;
        baseline.report(&record.id, &profile)
    })?;
    let (records, reports): (Vec<_>, Vec<_>) = scored.into_iter().unzip();

    let (ranked, verdicts) = select_and_rank(&reports, &cfg.gates, cfg.rank_key);
    let file = ReportFile::gated(reports.clone(), &verdicts, ranked.clone(), cfg.gates);
    report::write_csv(&file, &cfg.out_dir.join(REPORT_CSV))?;
    report::write_json(&file, &cfg.out_dir.join(REPORT_JSON))?;

    let best_path = cfg.out_dir.join(BEST_FILE);
    let best = match ranked.best() {
        Some(entry) => {
            let record = records
                .iter()
                .find(|r| r.id == entry.variant_id)
                .expect("ranked ids come from the records");
            let src = record.resolve(&cfg.out_dir);
            fs::copy(&src, &best_path).map_err(|e| Error::io(&src, e))?;
            Some(best_path)
        }
        None => {
            // do not leave a stale winner from an earlier run
            if best_path.exists() {
                fs::remove_file(&best_path).map_err(|e| Error::io(&best_path, e))?;
            }
            None
        }
    };

    Ok(PipelineOutcome {
        records,
        reports,
        verdicts,
        ranked,
        best,
    })
}

/// A named image to score.
#[derive(Debug, Clone)]
pub struct Variant {
    pub id: String,
    pub image: RgbImage,
}

/// Collects variants from a `manifest.json` or from every PNG/PPM file in a
/// directory (id = file stem). Results are sorted by id.
pub fn load_variants(path: &Path) -> Result<Vec<Variant>> {
    let mut variants = if path.is_dir() {
        let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            let ext = p
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase);
            let stem = p.file_stem().and_then(|s| s.to_str()).map(str::to_owned);
            if let (Some("png" | "ppm"), Some(stem)) = (ext.as_deref(), stem) {
                if stem != "best" {
                    files.push((stem, p));
                }
            }
        }
        files
            .into_iter()
            .map(|(id, p)| Ok(Variant { id, image: load_image(&p)? }))
            .collect::<Result<Vec<_>>>()?
    } else {
        let base = path.parent().unwrap_or(Path::new("."));
        read_manifest(path)?
            .into_iter()
            .map(|r| {
                Ok(Variant {
                    image: load_image(r.resolve(base))?,
                    id: r.id,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    variants.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(variants)
}

/// Scores each variant against the original.
pub fn score_images(
    original: &RgbImage,
    variants: &[Variant],
    partition: PartitionSpec,
    mode: ScalarMode,
    workers: usize,
) -> Result<Vec<MetricsReport>> {
    let baseline = baseline_for(original, partition, mode)?;
    for v in variants {
        if v.image.dimensions() != original.dimensions() {
            return Err(Error::DimensionMismatch(format!(
                "variant '{}' is {:?}, original is {:?}",
                v.id,
                v.image.dimensions(),
                original.dimensions()
            )));
        }
    }
    thread_pool(workers)?.install(|| {
        variants
            .par_iter()
            .map(|v| {
                let profile = VarianceProfile::from_field(&to_scalar(&v.image, mode), partition)?;
                baseline.report(&v.id, &profile)
            })
            .collect()
    })
}

/// Scores rows of precomputed variances against the `original` row.
pub fn score_variances(original: &VarianceRow, rows: &[VarianceRow]) -> Result<Vec<MetricsReport>> {
    let baseline = Baseline::new(&VarianceProfile::new(original.total, original.areas.clone())?)?;
    rows.iter()
        .map(|r| baseline.report(&r.id, &VarianceProfile::new(r.total, r.areas.clone())?))
        .collect()
}
