//! Fixed-level bi-level thresholding on brightness.

use crate::error::{Error, Result};
use crate::imaging::RgbImage;

/// Threshold used for the binarized branch when none is configured.
pub const DEFAULT_THRESHOLD: u8 = 127;

const WHITE: [u8; 3] = [255; 3];
const BLACK: [u8; 3] = [0; 3];

/// Maps each pixel to white when its brightness `(r + g + b) / 3` is at least
/// `t`, black otherwise.
///
/// Takes `u32` so out-of-range levels coming from user input are reported
/// rather than wrapped.
pub fn threshold(img: &RgbImage, t: u32) -> Result<RgbImage> {
    if t > 255 {
        return Err(Error::InvalidParams(format!(
            "threshold must be in [0, 255], got {t}"
        )));
    }
    // (r+g+b)/3 >= t  <=>  r+g+b >= 3t, exact in integers
    let cut = 3 * t;
    let pixels = img
        .pixels()
        .iter()
        .map(|&[r, g, b]| {
            if u32::from(r) + u32::from(g) + u32::from(b) >= cut {
                WHITE
            } else {
                BLACK
            }
        })
        .collect();
    RgbImage::new(img.width(), img.height(), pixels)
}
