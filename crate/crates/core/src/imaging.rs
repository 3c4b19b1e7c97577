//! Raster data model, file I/O and scalar-field extraction.
//!
//! Two on-disk formats are supported: 8-bit PNG (RGB, or RGBA with the alpha
//! channel dropped; gray PNGs are expanded to RGB) and binary PPM (`P6`) with
//! a maxval of 255. Anything 16-bit is rejected rather than truncated.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use image::{ColorType, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit RGB raster stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidParams(format!(
                "expected {} pixels for a {width}x{height} image, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image where every pixel has the same value.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Wraps an interleaved `RGBRGB...` buffer.
    pub fn from_rgb_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::InvalidParams(format!(
                "expected {} bytes of RGB data, got {}",
                width * height * 3,
                bytes.len()
            )));
        }
        let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(width, height, pixels)
    }

    /// Wraps an interleaved `RGBARGBA...` buffer, dropping alpha.
    pub fn from_rgba_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 4 {
            return Err(Error::InvalidParams(format!(
                "expected {} bytes of RGBA data, got {}",
                width * height * 4,
                bytes.len()
            )));
        }
        let pixels = bytes.chunks_exact(4).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn to_rgb_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }

    pub fn to_rgba_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|&[r, g, b]| [r, g, b, 255])
            .collect()
    }

    /// Mirrors the image left to right.
    pub fn flip_horizontal(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(self.width) {
            pixels.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// Per-pixel real-valued plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidParams(format!(
                "expected {} values for a {width}x{height} field, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "scalar field contains a non-finite value ({bad})"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Unchecked constructor for values produced by finite arithmetic inside
    /// the crate.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_raw(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Applies `f` to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(
            self.width,
            self.height,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Which per-pixel scalar the statistics are computed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarMode {
    /// Unweighted mean `(r + g + b) / 3`.
    #[default]
    Brightness,
    R,
    G,
    B,
}

impl FromStr for ScalarMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "brightness" | "bright" | "y" => Ok(Self::Brightness),
            "r" | "red" => Ok(Self::R),
            "g" | "green" => Ok(Self::G),
            "b" | "blue" => Ok(Self::B),
            other => Err(Error::InvalidParams(format!(
                "unknown scalar mode '{other}' (expected brightness, r, g or b)"
            ))),
        }
    }
}

pub fn to_scalar(img: &RgbImage, mode: ScalarMode) -> ScalarField {
    let values = img
        .pixels
        .iter()
        .map(|&[r, g, b]| match mode {
            ScalarMode::Brightness => (f64::from(r) + f64::from(g) + f64::from(b)) / 3.0,
            ScalarMode::R => f64::from(r),
            ScalarMode::G => f64::from(g),
            ScalarMode::B => f64::from(b),
        })
        .collect();
    ScalarField::from_raw(img.width, img.height, values)
}

/// Splits an image into its three channel planes.
pub fn channel_fields(img: &RgbImage) -> [ScalarField; 3] {
    [
        to_scalar(img, ScalarMode::R),
        to_scalar(img, ScalarMode::G),
        to_scalar(img, ScalarMode::B),
    ]
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    decode_image(&bytes)
}

/// Decodes PNG or P6 bytes, sniffing the format from the magic number.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::UnsupportedFormat(format!(
            "netpbm variant P{} (only binary P6 is supported)",
            bytes[1] as char
        )))
    } else {
        Err(Error::UnsupportedFormat(
            "not a PNG or binary PPM file".into(),
        ))
    }
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::CorruptData(e.to_string()))?;
    let color = decoded.color();
    match color {
        ColorType::Rgb8 | ColorType::Rgba8 | ColorType::L8 | ColorType::La8 => {}
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {other:?} (only 8-bit channels are supported)"
            )))
        }
    }
    let rgb = decoded.into_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::from_rgb_bytes(w as usize, h as usize, rgb.as_raw())
}

fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in &mut header {
        *slot = ppm_header_number(bytes, &mut pos)?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PPM maxval {maxval} (only 255 is supported)"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::CorruptData("PPM header not terminated".into())),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::CorruptData("PPM dimensions overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::CorruptData(format!(
            "PPM raster truncated: expected {expected} bytes, found {}",
            raster.len()
        )));
    }
    RgbImage::from_rgb_bytes(width, height, &raster[..expected])
        .map_err(|e| Error::CorruptData(e.to_string()))
}

fn ppm_header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&c| c != b'\n') {
                    *pos += 1;
                }
            }
            Some(_) => break,
            None => return Err(Error::CorruptData("PPM header truncated".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::CorruptData("malformed PPM header field".into()))
}

/// Writes `img` as PNG, or as P6 when the extension is `.ppm`.
pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_ppm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm"));
    let bytes = if is_ppm {
        encode_ppm(img)
    } else {
        encode_png(img)?
    };
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    writer.write_all(&bytes).map_err(io_err)?;
    writer.flush().map_err(io_err)
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_rgb_bytes());
    out
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::write_buffer_with_format(
        &mut io::Cursor::new(&mut out),
        &img.to_rgb_bytes(),
        img.width as u32,
        img.height as u32,
        ColorType::Rgb8,
        ImageFormat::Png,
    )
    .map_err(|e| Error::Encode(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_hand_written_p6() {
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend([255, 0, 0, 0, 0, 255]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img.dimensions(), (2, 1));
        assert_eq!(img.pixels(), &[[255, 0, 0], [0, 0, 255]]);
    }

    #[test]
    fn p6_header_comments_are_skipped() {
        let mut bytes = b"P6 # made by hand\n1 1\n# another\n255\n".to_vec();
        bytes.extend([1, 2, 3]);
        assert_eq!(decode_image(&bytes).unwrap().pixels(), &[[1, 2, 3]]);
    }

    #[test]
    fn sixteen_bit_ppm_is_rejected() {
        let mut bytes = b"P6\n1 1\n65535\n".to_vec();
        bytes.extend([0; 6]);
        assert!(matches!(
            decode_image(&bytes),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn ascii_ppm_is_rejected() {
        assert!(matches!(
            decode_image(b"P3\n1 1\n255\n1 2 3\n"),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn truncated_ppm_is_corrupt() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend([0; 5]);
        assert!(matches!(decode_image(&bytes), Err(Error::CorruptData(_))));
    }

    #[test]
    fn sixteen_bit_png_is_rejected() {
        let mut out = Vec::new();
        image::write_buffer_with_format(
            &mut io::Cursor::new(&mut out),
            &[0u8; 6],
            1,
            1,
            ColorType::Rgb16,
            ImageFormat::Png,
        )
        .unwrap();
        assert!(matches!(decode_image(&out), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn rgba_png_drops_alpha() {
        let mut out = Vec::new();
        image::write_buffer_with_format(
            &mut io::Cursor::new(&mut out),
            &[10, 20, 30, 0, 40, 50, 60, 255],
            2,
            1,
            ColorType::Rgba8,
            ImageFormat::Png,
        )
        .unwrap();
        let img = decode_image(&out).unwrap();
        assert_eq!(img.pixels(), &[[10, 20, 30], [40, 50, 60]]);
    }

    #[test]
    fn garbage_is_unsupported() {
        assert!(matches!(
            decode_image(b"GIF89a"),
            Err(Error::UnsupportedFormat(_))
        ));
        let mut png = b"\x89PNG\r\n\x1a\n".to_vec();
        png.extend([1, 2, 3]);
        assert!(matches!(decode_image(&png), Err(Error::CorruptData(_))));
    }

    #[test]
    fn scalar_modes() {
        let img = RgbImage::filled(1, 1, [30, 60, 90]).unwrap();
        assert_eq!(to_scalar(&img, ScalarMode::Brightness).values(), &[60.0]);
        assert_eq!(to_scalar(&img, ScalarMode::R).values(), &[30.0]);
        assert_eq!(to_scalar(&img, ScalarMode::G).values(), &[60.0]);
        assert_eq!(to_scalar(&img, ScalarMode::B).values(), &[90.0]);
    }

    #[test]
    fn gray_image_is_mode_independent() {
        let img = RgbImage::filled(3, 2, [77, 77, 77]).unwrap();
        for mode in [
            ScalarMode::Brightness,
            ScalarMode::R,
            ScalarMode::G,
            ScalarMode::B,
        ] {
            assert!(to_scalar(&img, mode).values().iter().all(|&v| v == 77.0));
        }
    }

    #[test]
    fn constructors_check_sizes() {
        assert!(RgbImage::new(0, 1, vec![]).is_err());
        assert!(RgbImage::new(2, 2, vec![[0; 3]; 3]).is_err());
        assert!(ScalarField::new(1, 1, vec![f64::NAN]).is_err());
        assert!(ScalarField::new(2, 1, vec![1.0]).is_err());
    }

    #[test]
    fn flip_reverses_rows() {
        let img = RgbImage::from_fn(3, 2, |x, y| [x as u8, y as u8, 0]).unwrap();
        let flipped = img.flip_horizontal();
        assert_eq!(flipped.pixel(0, 1), [2, 1, 0]);
        assert_eq!(flipped.flip_horizontal(), img);
    }
}
