//! Multi-scale Retinex with color restoration (MSRCR).
//!
//! The transform is driven by four knobs:
//!
//! | knob             | range        | effect                                           |
//! |------------------|--------------|--------------------------------------------------|
//! | `scale`          | 16..=250     | largest Gaussian surround                        |
//! | `scale_division` | >= 1         | number of surround scales averaged               |
//! | `dynamic`        | >= 0         | half-width, in std devs, of the output stretch   |
//! | `level`          | U / L / H    | how the surround scales are spread               |
//!
//! Pipeline per image: split into R, G, B planes, average
//! `ln(I + 1) - ln(G_sigma * I + 1)` over the surround scales, multiply by the
//! chromatic restoration factor, then stretch the three planes jointly into
//! `[0, 255]` around their common mean.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{channel_fields, RgbImage, ScalarField};

pub const MIN_SCALE: u32 = 16;
pub const MAX_SCALE: u32 = 250;

/// Color-restoration constants: `alpha` inside the log, then `gain` and
/// `offset` applied to the product.
pub const RESTORE_ALPHA: f64 = 128.0;
pub const RESTORE_GAIN: f64 = 1.0;
pub const RESTORE_OFFSET: f64 = 0.0;

/// Output value used when the restored planes carry no contrast at all.
pub const FLAT_OUTPUT: u8 = 128;

/// How surround scales are distributed between the smallest blur and `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Linear spread; treats dark and bright regions evenly.
    Uniform,
    /// Small radii dominate; lifts the darker regions.
    Low,
    /// Radii bunch up near `scale`; favors the brighter regions.
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Uniform, Level::Low, Level::High];

    /// One-letter code used in variant ids.
    pub fn code(self) -> char {
        match self {
            Level::Uniform => 'U',
            Level::Low => 'L',
            Level::High => 'H',
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Uniform => "uniform",
            Level::Low => "low",
            Level::High => "high",
        })
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "u" => Ok(Level::Uniform),
            "low" | "l" => Ok(Level::Low),
            "high" | "h" => Ok(Level::High),
            other => Err(Error::InvalidParams(format!(
                "unknown level '{other}' (expected uniform, low or high)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetinexParams {
    pub scale: u32,
    pub scale_division: u32,
    pub dynamic: f64,
    pub level: Level,
}

impl Default for RetinexParams {
    fn default() -> Self {
        Self {
            scale: 240,
            scale_division: 3,
            dynamic: 1.2,
            level: Level::Uniform,
        }
    }
}

impl RetinexParams {
    pub fn new(scale: u32, scale_division: u32, dynamic: f64, level: Level) -> Result<Self> {
        let params = Self {
            scale,
            scale_division,
            dynamic,
            level,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        validate_scale(self.scale, self.scale_division)?;
        validate_dynamic(self.dynamic)
    }

    pub fn scales(&self) -> Result<Vec<f64>> {
        distribute_scales(self.scale, self.scale_division, self.level)
    }
}

fn validate_scale(scale: u32, division: u32) -> Result<()> {
    if !(MIN_SCALE..=MAX_SCALE).contains(&scale) {
        return Err(Error::InvalidParams(format!(
            "scale must be in [{MIN_SCALE}, {MAX_SCALE}], got {scale}"
        )));
    }
    if division < 1 {
        return Err(Error::InvalidParams(
            "scale division must be at least 1".into(),
        ));
    }
    Ok(())
}

pub(crate) fn validate_dynamic(dynamic: f64) -> Result<()> {
    if !dynamic.is_finite() || dynamic < 0.0 {
        return Err(Error::InvalidParams(format!(
            "dynamic must be a finite value >= 0, got {dynamic}"
        )));
    }
    Ok(())
}

/// Gaussian radii for `division` surrounds up to `scale`.
///
/// One scale gives `[s/2]`, two give `[s/2, s]`. From three on, with
/// `i = 0..n`:
///
/// ```text
/// Uniform  2 + i * s / n
/// Low      2 + exp(i * ln(s - 2) / n)
/// High     s - exp(i * ln(s - 2) / n)
/// ```
pub fn distribute_scales(scale: u32, division: u32, level: Level) -> Result<Vec<f64>> {
    validate_scale(scale, division)?;
    let s = f64::from(scale);
    let n = division as usize;
    let sigmas = match n {
        1 => vec![s / 2.0],
        2 => vec![s / 2.0, s],
        _ => {
            let log_step = (s - 2.0).ln() / n as f64;
            (0..n)
                .map(|i| {
                    let i = i as f64;
                    match level {
                        Level::Uniform => 2.0 + i * s / n as f64,
                        Level::Low => 2.0 + (i * log_step).exp(),
                        Level::High => s - (i * log_step).exp(),
                    }
                })
                .collect()
        }
    };
    Ok(sigmas)
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "blur sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|o| (-((o * o) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Separable Gaussian blur with clamp-to-edge boundaries.
pub fn gaussian_blur(field: &ScalarField, sigma: f64) -> Result<ScalarField> {
    let kernel = gaussian_kernel(sigma)?;
    let (w, h) = field.dimensions();
    let rows = blur_rows(field.values(), w, h, &kernel);
    let cols = blur_rows(&transpose(&rows, w, h), h, w, &kernel);
    Ok(ScalarField::from_raw(w, h, transpose(&cols, h, w)))
}

fn transpose(values: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = values[y * w + x];
        }
    }
    out
}

/// 1-D blur of every row.
///
/// Written as `f[x] + sum_o k[o] * (f[clamp(x + o)] - f[x])`, which equals the
/// plain convolution for a normalized kernel but leaves constant rows exactly
/// unchanged. Taps that fall off either edge all read the edge sample, so
/// their weights are summed from the cumulative kernel instead of visited.
fn blur_rows(values: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let mut cumulative = Vec::with_capacity(kernel.len());
    let mut acc = 0.0;
    for &k in kernel {
        acc += k;
        cumulative.push(acc);
    }
    let total = acc;
    let width = w as isize;

    let mut out = Vec::with_capacity(values.len());
    for row in values.chunks_exact(w) {
        let (first, last) = (row[0], row[w - 1]);
        for x in 0..width {
            let centre = row[x as usize];
            let lo = (-radius).max(-x);
            let hi = radius.min(width - 1 - x);
            let mut delta = 0.0;
            if lo > -radius {
                // offsets -radius..lo read row[0]
                delta += cumulative[(lo - 1 + radius) as usize] * (first - centre);
            }
            for o in lo..=hi {
                delta += kernel[(o + radius) as usize] * (row[(x + o) as usize] - centre);
            }
            if hi < radius {
                // offsets hi+1..=radius read row[w-1]
                let weight = total - cumulative[(hi + radius) as usize];
                delta += weight * (last - centre);
            }
            out.push(centre + delta);
        }
    }
    debug_assert_eq!(out.len(), w * h);
    out
}

/// Multi-scale Retinex of one channel.
pub fn msr(channel: &ScalarField, scales: &[f64]) -> Result<ScalarField> {
    let blurs = scales
        .iter()
        .map(|&sigma| gaussian_blur(channel, sigma))
        .collect::<Result<Vec<_>>>()?;
    msr_from_surrounds(channel, &blurs)
}

/// MSR given precomputed surrounds, one per scale.
pub fn msr_from_surrounds(channel: &ScalarField, surrounds: &[ScalarField]) -> Result<ScalarField> {
    if surrounds.is_empty() {
        return Err(Error::InvalidParams("MSR needs at least one scale".into()));
    }
    if let Some(bad) = surrounds
        .iter()
        .find(|s| s.dimensions() != channel.dimensions())
    {
        return Err(Error::DimensionMismatch(format!(
            "surround is {:?}, channel is {:?}",
            bad.dimensions(),
            channel.dimensions()
        )));
    }
    let weight = 1.0 / surrounds.len() as f64;
    let values = channel
        .values()
        .iter()
        .enumerate()
        .map(|(p, &c)| {
            let log_c = (c + 1.0).ln();
            let sum: f64 = surrounds
                .iter()
                .map(|s| log_c - (s.values()[p] + 1.0).ln())
                .sum();
            weight * sum
        })
        .collect();
    Ok(ScalarField::from_raw(
        channel.width(),
        channel.height(),
        values,
    ))
}

/// Applies the chromatic restoration factor
/// `ln(alpha * (I_c + 1)) - ln(I_r + I_g + I_b + 3)` to each MSR plane.
pub fn color_restore(msr_rgb: &[ScalarField; 3], src: &RgbImage) -> Result<[ScalarField; 3]> {
    for field in msr_rgb {
        if field.dimensions() != src.dimensions() {
            return Err(Error::DimensionMismatch(format!(
                "MSR plane is {:?}, source image is {:?}",
                field.dimensions(),
                src.dimensions()
            )));
        }
    }
    let (w, h) = src.dimensions();
    let restore = |c: usize| {
        let values = src
            .pixels()
            .iter()
            .zip(msr_rgb[c].values())
            .map(|(px, &m)| {
                let sum = f64::from(px[0]) + f64::from(px[1]) + f64::from(px[2]);
                let factor = (RESTORE_ALPHA * (f64::from(px[c]) + 1.0)).ln() - (sum + 3.0).ln();
                RESTORE_GAIN * factor * m + RESTORE_OFFSET
            })
            .collect();
        ScalarField::from_raw(w, h, values)
    };
    Ok([restore(0), restore(1), restore(2)])
}

/// Stretches three planes into an RGB image using their joint mean and
/// population standard deviation: `[m - d*sd, m + d*sd]` maps onto `[0, 255]`.
pub fn dynamic_normalize(fields: &[ScalarField; 3], dynamic: f64) -> Result<RgbImage> {
    validate_dynamic(dynamic)?;
    let (w, h) = fields[0].dimensions();
    if fields.iter().any(|f| f.dimensions() != (w, h)) {
        return Err(Error::DimensionMismatch(
            "restored planes differ in size".into(),
        ));
    }
    let count = (3 * w * h) as f64;
    let all = || fields.iter().flat_map(|f| f.values().iter().copied());
    let mean = all().sum::<f64>() / count;
    let var = all().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let sd = var.sqrt();

    if sd == 0.0 || dynamic == 0.0 {
        return RgbImage::filled(w, h, [FLAT_OUTPUT; 3]);
    }
    let lo = mean - dynamic * sd;
    let range = 2.0 * dynamic * sd;
    let quantize = |v: f64| (255.0 * (v - lo) / range).round().clamp(0.0, 255.0) as u8;
    let pixels = (0..w * h)
        .map(|p| {
            [
                quantize(fields[0].values()[p]),
                quantize(fields[1].values()[p]),
                quantize(fields[2].values()[p]),
            ]
        })
        .collect();
    RgbImage::new(w, h, pixels)
}

/// MSR followed by color restoration, before the dynamic stretch.
///
/// The result depends on the scales but not on `dynamic`, so callers sweeping
/// several dynamics can compute it once.
pub fn restored_planes(img: &RgbImage, scales: &[f64]) -> Result<[ScalarField; 3]> {
    let [r, g, b] = channel_fields(img);
    let msr_rgb = [msr(&r, scales)?, msr(&g, scales)?, msr(&b, scales)?];
    color_restore(&msr_rgb, img)
}

/// Full MSRCR transform.
pub fn retinex(img: &RgbImage, params: &RetinexParams) -> Result<RgbImage> {
    params.validate()?;
    let planes = restored_planes(img, &params.scales()?)?;
    dynamic_normalize(&planes, params.dynamic)
}
