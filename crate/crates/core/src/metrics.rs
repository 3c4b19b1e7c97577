//! Area-variance statistics of a processed image against its original.
//!
//! For an image `P` split into `N` areas `a_1..a_N`:
//!
//! ```text
//! AAV_i = Var(a_i)                 absolute area variance
//! RAV_i = AAV_i / Var(P)           relative area variance
//! VVO_i = RAV_i(P) / RAV_i(B)      variance versus original
//! AVV   = Var({RAV_i})             variance of the relative variances
//! RVV   = AVV(P) / AVV(B)
//! ```
//!
//! All variances are population variances (divisor `M`, not `M - 1`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{to_scalar, RgbImage, ScalarField, ScalarMode};

/// How the image is cut into areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionSpec {
    /// `N` horizontal bands, top to bottom.
    Stripes(usize),
    /// `rows x cols` grid of cells, row-major.
    Lattice { rows: usize, cols: usize },
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec::Stripes(5)
    }
}

impl PartitionSpec {
    pub fn area_count(&self) -> usize {
        match *self {
            PartitionSpec::Stripes(n) => n,
            PartitionSpec::Lattice { rows, cols } => rows * cols,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PartitionSpec::Stripes(n) if n < 2 => Err(Error::InvalidParams(format!(
                "need at least 2 stripes, got {n}"
            ))),
            PartitionSpec::Lattice { rows, cols } if rows < 2 || cols < 2 => {
                Err(Error::InvalidParams(format!(
                    "lattice must be at least 2x2, got {rows}x{cols}"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionSpec::Stripes(n) => write!(f, "stripes:{n}"),
            PartitionSpec::Lattice { rows, cols } => write!(f, "lattice:{rows}x{cols}"),
        }
    }
}

impl FromStr for PartitionSpec {
    type Err = Error;

    /// Accepts `stripes:N` or `lattice:RxC`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("cannot parse partition '{s}'"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let spec = match kind.trim().to_ascii_lowercase().as_str() {
            "stripes" => PartitionSpec::Stripes(arg.trim().parse().map_err(|_| bad())?),
            "lattice" => {
                let (r, c) = parse_lattice(arg).ok_or_else(bad)?;
                PartitionSpec::Lattice { rows: r, cols: c }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses `RxC` (also `R,C`).
pub fn parse_lattice(s: &str) -> Option<(usize, usize)> {
    let (r, c) = s.split_once(['x', 'X', ','])?;
    Some((r.trim().parse().ok()?, c.trim().parse().ok()?))
}

/// Half-open pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Area {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Area {
    pub fn len(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cut `[0, len)` into `parts` ranges `[floor(i*len/parts), floor((i+1)*len/parts))`.
fn split(len: usize, parts: usize) -> Vec<(usize, usize)> {
    (0..parts)
        .map(|i| (i * len / parts, (i + 1) * len / parts))
        .collect()
}

/// Rectangles of the partition for a `width x height` image.
pub fn partition_areas(width: usize, height: usize, spec: PartitionSpec) -> Result<Vec<Area>> {
    spec.validate()?;
    match spec {
        PartitionSpec::Stripes(n) => {
            if height < n {
                return Err(Error::InvalidParams(format!(
                    "image height {height} is smaller than {n} stripes"
                )));
            }
            Ok(split(height, n)
                .into_iter()
                .map(|(y0, y1)| Area {
                    x0: 0,
                    x1: width,
                    y0,
                    y1,
                })
                .collect())
        }
        PartitionSpec::Lattice { rows, cols } => {
            if height < rows || width < cols {
                return Err(Error::InvalidParams(format!(
                    "image {width}x{height} is smaller than a {rows}x{cols} lattice"
                )));
            }
            let xs = split(width, cols);
            Ok(split(height, rows)
                .into_iter()
                .flat_map(|(y0, y1)| xs.iter().map(move |&(x0, x1)| Area { x0, x1, y0, y1 }))
                .collect())
        }
    }
}

/// Values of each area, in partition order.
pub fn partition(field: &ScalarField, spec: PartitionSpec) -> Result<Vec<Vec<f64>>> {
    let areas = partition_areas(field.width(), field.height(), spec)?;
    Ok(areas
        .iter()
        .map(|a| {
            (a.y0..a.y1)
                .flat_map(|y| field.row(y)[a.x0..a.x1].iter().copied())
                .collect()
        })
        .collect())
}

/// Population variance.
pub fn variance(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParams(
            "variance of an empty set is undefined".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Whole-image variance and per-area variances: everything the ratios need.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    pub total: f64,
    pub areas: Vec<f64>,
}

impl VarianceProfile {
    pub fn from_field(field: &ScalarField, spec: PartitionSpec) -> Result<Self> {
        let areas = partition(field, spec)?
            .iter()
            .map(|a| variance(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            total: variance(field.values())?,
            areas,
        })
    }

    pub fn new(total: f64, areas: Vec<f64>) -> Result<Self> {
        if areas.is_empty() {
            return Err(Error::InvalidParams("no area variances given".into()));
        }
        if !total.is_finite() || total < 0.0 || areas.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParams(
                "variances must be finite and non-negative".into(),
            ));
        }
        Ok(Self { total, areas })
    }

    /// `AAV_i / Var(P)`. A zero-variance image has no detail anywhere and all
    /// of its relative variances are reported as 0.
    pub fn relative(&self) -> Vec<f64> {
        if self.total > 0.0 {
            self.areas.iter().map(|a| a / self.total).collect()
        } else {
            vec![0.0; self.areas.len()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant_id: String,
    pub total_variance: f64,
    pub aav: Vec<f64>,
    pub rav: Vec<f64>,
    /// May hold `+inf` where the original area is flat and this one is not.
    #[serde(with = "float_list")]
    pub vvo: Vec<f64>,
    pub avv: f64,
    pub rvv: f64,
    #[serde(with = "float_or_inf")]
    pub max_vvo: f64,
}

impl MetricsReport {
    pub fn area_count(&self) -> usize {
        self.rav.len()
    }
}

/// Baseline ratios taken from the original image.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    rav: Vec<f64>,
    avv: f64,
}

impl Baseline {
    pub fn new(original: &VarianceProfile) -> Result<Self> {
        if original.total <= 0.0 {
            return Err(Error::DegenerateOriginal(
                "original image has zero variance".into(),
            ));
        }
        let rav = original.relative();
        let avv = variance(&rav)?;
        if avv <= 0.0 {
            return Err(Error::DegenerateOriginal(
                "original areas all have the same relative variance".into(),
            ));
        }
        Ok(Self { rav, avv })
    }

    pub fn rav(&self) -> &[f64] {
        &self.rav
    }

    pub fn avv(&self) -> f64 {
        self.avv
    }

    /// The statistics of a processed image with the given profile.
    pub fn report(&self, variant_id: &str, profile: &VarianceProfile) -> Result<MetricsReport> {
        if profile.areas.len() != self.rav.len() {
            return Err(Error::InvalidParams(format!(
                "variant has {} areas, original has {}",
                profile.areas.len(),
                self.rav.len()
            )));
        }
        let rav = profile.relative();
        let vvo: Vec<f64> = rav
            .iter()
            .zip(&self.rav)
            .map(|(&p, &b)| vvo_ratio(p, b))
            .collect();
        let avv = variance(&rav)?;
        let max_vvo = vvo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(MetricsReport {
            variant_id: variant_id.to_owned(),
            total_variance: profile.total,
            aav: profile.areas.clone(),
            rav,
            vvo,
            avv,
            rvv: avv / self.avv,
            max_vvo,
        })
    }
}

fn vvo_ratio(rav_p: f64, rav_b: f64) -> f64 {
    if rav_b > 0.0 {
        rav_p / rav_b
    } else if rav_p > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Scores `processed` against `original` on the chosen scalar.
pub fn compute_report(
    variant_id: &str,
    processed: &RgbImage,
    original: &RgbImage,
    spec: PartitionSpec,
    mode: ScalarMode,
) -> Result<MetricsReport> {
    if processed.dimensions() != original.dimensions() {
        return Err(Error::DimensionMismatch(format!(
            "variant is {:?}, original is {:?}",
            processed.dimensions(),
            original.dimensions()
        )));
    }
    let baseline = Baseline::new(&VarianceProfile::from_field(
        &to_scalar(original, mode),
        spec,
    )?)?;
    let profile = VarianceProfile::from_field(&to_scalar(processed, mode), spec)?;
    baseline.report(variant_id, &profile)
}

/// Same arithmetic as [`compute_report`] from the variance stage onward, for
/// when the area variances are already known.
pub fn report_from_precomputed(
    variant_id: &str,
    area_vars: &[f64],
    total_var: f64,
    original_area_vars: &[f64],
    original_total_var: f64,
) -> Result<MetricsReport> {
    if area_vars.len() != original_area_vars.len() {
        return Err(Error::InvalidParams(format!(
            "variant has {} areas, original has {}",
            area_vars.len(),
            original_area_vars.len()
        )));
    }
    let original = VarianceProfile::new(original_total_var, original_area_vars.to_vec())?;
    let profile = VarianceProfile::new(total_var, area_vars.to_vec())?;
    Baseline::new(&original)?.report(variant_id, &profile)
}

/// Serializes `f64` as a JSON number, or the string `"inf"` for `+inf`.
mod float_or_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Text(String),
    }

    impl Repr {
        pub(super) fn value<E: de::Error>(self) -> Result<f64, E> {
            match self {
                Repr::Num(v) => Ok(v),
                Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
                Repr::Text(t) => Err(E::custom(format!("expected a number or \"inf\", got {t:?}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Repr::deserialize(d)?.value()
    }
}

mod float_list {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::float_or_inf::Repr;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        struct Item(f64);
        impl serde::Serialize for Item {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::float_or_inf::serialize(&self.0, s)
            }
        }
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for &x in v {
            seq.serialize_element(&Item(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(Repr::value)
            .collect()
    }
}
