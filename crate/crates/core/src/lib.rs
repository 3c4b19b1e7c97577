//! Fog-image enhancement by bulk multi-scale Retinex filtering.
//!
//! A source image is filtered with MSRCR over a discrete grid of
//! `(scale, scale division, dynamic, level)` settings, optionally followed by
//! bi-level thresholding. Every variant is then scored with area-variance
//! statistics measured against the source, gated, and ranked.
//!
//! Module map:
//!
//! - [`imaging`]: RGB rasters, scalar planes, PNG/PPM I/O
//! - [`retinex`]: scale distribution, Gaussian surround, MSR, color restoration
//! - [`threshold`]: fixed-level binarization
//! - [`bulk`]: parameter grid, variant ids, bulk generation and manifest
//! - [`metrics`]: partitions and the AAV/RAV/VVO/AVV/RVV statistics
//! - [`selector`]: acceptance gates and ranking
//! - [`report`]: CSV and JSON report files
//! - [`pipeline`]: end-to-end orchestration

pub mod bulk;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod retinex;
pub mod selector;
pub mod threshold;

pub use bulk::{build_grid, generate_bulk, variant_id, GridEntry, ParamGrid, VariantRecord};
pub use error::{Error, Result};
pub use imaging::{load_image, save_image, to_scalar, RgbImage, ScalarField, ScalarMode};
pub use metrics::{compute_report, report_from_precomputed, MetricsReport, PartitionSpec};
pub use retinex::{retinex, Level, RetinexParams};
pub use selector::{gate, rank, select_and_rank, GateThresholds, RankKey, RankedList, Verdict};
pub use threshold::threshold;
