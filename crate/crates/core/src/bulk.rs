//! Bulk generation of Retinex variants over a parameter grid.
//!
//! The grid is the cartesian product of scales, scale divisions, dynamics and
//! levels. Every point yields one plain Retinex variant plus one binarized
//! copy per configured threshold.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imaging::{save_image, RgbImage};
use crate::retinex::{dynamic_normalize, restored_planes, validate_dynamic, Level, RetinexParams};
use crate::threshold::threshold;

pub const MANIFEST_FILE: &str = "manifest.json";

/// The discrete parameter set to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub scales: Vec<u32>,
    pub divisions: Vec<u32>,
    pub dynamics: Vec<f64>,
    pub levels: Vec<Level>,
    /// Thresholds for the binarized branch; empty disables it.
    pub thresholds: Vec<u32>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            scales: vec![16, 60, 120, 180, 240],
            divisions: vec![3],
            dynamics: vec![0.6, 1.2, 2.4],
            levels: Level::ALL.to_vec(),
            thresholds: vec![127],
        }
    }
}

impl ParamGrid {
    /// Sorts and validates each axis. Duplicates are an error rather than
    /// silently merged.
    pub fn new(
        mut scales: Vec<u32>,
        mut divisions: Vec<u32>,
        mut dynamics: Vec<f64>,
        mut levels: Vec<Level>,
        mut thresholds: Vec<u32>,
    ) -> Result<Self> {
        scales.sort_unstable();
        divisions.sort_unstable();
        dynamics.sort_by(f64::total_cmp);
        levels.sort_unstable();
        thresholds.sort_unstable();
        let grid = Self {
            scales,
            divisions,
            dynamics,
            levels,
            thresholds,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        fn axis<T: PartialOrd>(name: &str, values: &[T]) -> Result<()> {
            if values.is_empty() {
                return Err(Error::InvalidParams(format!("grid axis '{name}' is empty")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParams(format!(
                    "grid axis '{name}' must be sorted and duplicate-free"
                )));
            }
            Ok(())
        }
        axis("scale", &self.scales)?;
        axis("scale division", &self.divisions)?;
        axis("dynamic", &self.dynamics)?;
        axis("level", &self.levels)?;
        if !self.thresholds.is_empty() {
            axis("threshold", &self.thresholds)?;
        }
        for &s in &self.scales {
            for &n in &self.divisions {
                RetinexParams::new(s, n, 1.0, Level::Uniform)?;
            }
        }
        for &d in &self.dynamics {
            validate_dynamic(d)?;
        }
        if self
            .dynamics
            .windows(2)
            .any(|w| dynamic_code(w[0]) == dynamic_code(w[1]))
        {
            return Err(Error::InvalidParams(
                "dynamics must differ by at least 0.1 to get distinct variant ids".into(),
            ));
        }
        if let Some(t) = self.thresholds.iter().find(|&&t| t > 255) {
            return Err(Error::InvalidParams(format!(
                "threshold must be in [0, 255], got {t}"
            )));
        }
        Ok(())
    }

    /// Number of Retinex parameter tuples, `|Ω|`.
    pub fn tuple_count(&self) -> usize {
        self.scales.len() * self.divisions.len() * self.dynamics.len() * self.levels.len()
    }

    /// Number of variants, `|Ω| * (1 + thresholds)`.
    pub fn variant_count(&self) -> usize {
        self.tuple_count() * (1 + self.thresholds.len())
    }
}

/// One grid point: Retinex parameters and an optional binarization level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEntry {
    pub params: RetinexParams,
    pub threshold: Option<u32>,
}

impl GridEntry {
    pub fn id(&self) -> String {
        variant_id(&self.params, self.threshold)
    }
}

/// Expands the grid in lexicographic `(s, n, d, l)` order; each tuple appears
/// once plain, then once per threshold.
pub fn build_grid(grid: &ParamGrid) -> Result<Vec<GridEntry>> {
    grid.validate()?;
    let mut entries = Vec::with_capacity(grid.variant_count());
    for &scale in &grid.scales {
        for &scale_division in &grid.divisions {
            for &dynamic in &grid.dynamics {
                for &level in &grid.levels {
                    let params = RetinexParams {
                        scale,
                        scale_division,
                        dynamic,
                        level,
                    };
                    entries.push(GridEntry {
                        params,
                        threshold: None,
                    });
                    entries.extend(grid.thresholds.iter().map(|&t| GridEntry {
                        params,
                        threshold: Some(t),
                    }));
                }
            }
        }
    }
    Ok(entries)
}

fn dynamic_code(d: f64) -> i64 {
    (d * 10.0).round() as i64
}

/// `s{scale}_n{division}_d{10*dynamic}_l{U|L|H}_t{threshold|none}`.
pub fn variant_id(params: &RetinexParams, threshold: Option<u32>) -> String {
    let t = threshold.map_or_else(|| "none".to_owned(), |t| t.to_string());
    format!(
        "s{}_n{}_d{}_l{}_t{}",
        params.scale,
        params.scale_division,
        dynamic_code(params.dynamic),
        params.level.code(),
        t
    )
}

/// One generated image and the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ManifestRow", from = "ManifestRow")]
pub struct VariantRecord {
    pub id: String,
    pub params: RetinexParams,
    pub threshold: Option<u32>,
    /// Relative to the manifest's directory.
    pub image_path: PathBuf,
    /// SHA-256 of the source image, see [`source_checksum`].
    pub source_checksum: String,
}

impl VariantRecord {
    pub fn resolve(&self, base: &Path) -> PathBuf {
        base.join(&self.image_path)
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    s: u32,
    n: u32,
    d: f64,
    l: Level,
    t: Option<u32>,
    path: String,
    source_checksum: String,
}

impl From<VariantRecord> for ManifestRow {
    fn from(r: VariantRecord) -> Self {
        Self {
            id: r.id,
            s: r.params.scale,
            n: r.params.scale_division,
            d: r.params.dynamic,
            l: r.params.level,
            t: r.threshold,
            path: r.image_path.to_string_lossy().into_owned(),
            source_checksum: r.source_checksum,
        }
    }
}

impl From<ManifestRow> for VariantRecord {
    fn from(r: ManifestRow) -> Self {
        Self {
            id: r.id,
            params: RetinexParams {
                scale: r.s,
                scale_division: r.n,
                dynamic: r.d,
                level: r.l,
            },
            threshold: r.t,
            image_path: PathBuf::from(r.path),
            source_checksum: r.source_checksum,
        }
    }
}

/// Hex SHA-256 over `"{w}x{h}\n"` followed by the RGB bytes.
pub fn source_checksum(img: &RgbImage) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{}x{}\n", img.width(), img.height()).as_bytes());
    hasher.update(img.to_rgb_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_manifest(records: &[VariantRecord], path: &Path) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(records).map_err(|e| Error::Encode(e.to_string()))?;
    json.push(b'\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<VariantRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: "manifest",
        message: e.to_string(),
    })
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start worker pool: {e}")))
}

/// Entries sharing surround scales; they differ only in dynamic and
/// threshold, so the MSRCR planes are computed once per group.
fn group_by_scales(entries: Vec<GridEntry>) -> Vec<Vec<GridEntry>> {
    let mut groups: BTreeMap<(u32, u32, Level), Vec<GridEntry>> = BTreeMap::new();
    for e in entries {
        groups
            .entry((e.params.scale, e.params.scale_division, e.params.level))
            .or_default()
            .push(e);
    }
    groups.into_values().collect()
}

/// Renders every variant of the grid in memory and hands each one to
/// `visit`, which runs on the worker that produced it.
///
/// Results come back sorted by variant id whatever the worker count.
pub fn render_variants<T, F>(
    source: &RgbImage,
    grid: &ParamGrid,
    workers: usize,
    visit: F,
) -> Result<Vec<(GridEntry, T)>>
where
    T: Send,
    F: Fn(&GridEntry, &RgbImage) -> Result<T> + Sync,
{
    let groups = group_by_scales(build_grid(grid)?);
    let pool = thread_pool(workers)?;
    let nested: Vec<Vec<(GridEntry, T)>> = pool.install(|| {
        groups
            .par_iter()
            .map(|group| render_group(source, group, &visit))
            .collect::<Result<_>>()
    })?;
    let mut out: Vec<(GridEntry, T)> = nested.into_iter().flatten().collect();
    out.sort_by_cached_key(|(e, _)| e.id());
    Ok(out)
}

fn render_group<T, F>(source: &RgbImage, group: &[GridEntry], visit: &F) -> Result<Vec<(GridEntry, T)>>
where
    F: Fn(&GridEntry, &RgbImage) -> Result<T>,
{
    let planes = restored_planes(source, &group[0].params.scales()?)?;
    let mut out = Vec::with_capacity(group.len());
    let mut current: Option<(f64, RgbImage)> = None;
    for entry in group {
        let dynamic = entry.params.dynamic;
        if current.as_ref().is_none_or(|(d, _)| *d != dynamic) {
            current = Some((dynamic, dynamic_normalize(&planes, dynamic)?));
        }
        let (_, plain) = current.as_ref().expect("set above");
        let value = match entry.threshold {
            None => visit(entry, plain)?,
            Some(t) => visit(entry, &threshold(plain, t)?)?,
        };
        out.push((*entry, value));
    }
    Ok(out)
}

/// Writes every variant as `<id>.png` plus `manifest.json` into `out_dir`,
/// and returns the manifest records sorted by id.
pub fn generate_bulk(
    source: &RgbImage,
    grid: &ParamGrid,
    out_dir: &Path,
    workers: usize,
) -> Result<Vec<VariantRecord>> {
    let records = generate_bulk_with(source, grid, out_dir, workers, |_, _| Ok(()))?;
    Ok(records.into_iter().map(|(r, ())| r).collect())
}

/// [`generate_bulk`] that also runs `visit` on each variant while it is
/// still in memory.
pub fn generate_bulk_with<T, F>(
    source: &RgbImage,
    grid: &ParamGrid,
    out_dir: &Path,
    workers: usize,
    visit: F,
) -> Result<Vec<(VariantRecord, T)>>
where
    T: Send,
    F: Fn(&VariantRecord, &RgbImage) -> Result<T> + Sync,
{
    if !out_dir.is_dir() {
        return Err(Error::io(
            out_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        ));
    }
    let checksum = source_checksum(source);
    let rendered = render_variants(source, grid, workers, |entry, img| {
        let id = entry.id();
        let record = VariantRecord {
            image_path: PathBuf::from(format!("{id}.png")),
            id,
            params: entry.params,
            threshold: entry.threshold,
            source_checksum: checksum.clone(),
        };
        save_image(img, record.resolve(out_dir))?;
        let value = visit(&record, img)?;
        Ok((record, value))
    })?;
    let results: Vec<(VariantRecord, T)> = rendered.into_iter().map(|(_, rv)| rv).collect();
    let records: Vec<VariantRecord> = results.iter().map(|(r, _)| r.clone()).collect();
    write_manifest(&records, &out_dir.join(MANIFEST_FILE))?;
    Ok(results)
}
