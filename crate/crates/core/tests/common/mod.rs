#![allow(dead_code)]

use defog_core::{RgbImage, ScalarField};

/// Deterministic integer hash used for fixture texture.
pub fn hash(x: usize, y: usize) -> u32 {
    let mut h = (x as u32).wrapping_mul(0x9E37_79B1) ^ (y as u32).wrapping_mul(0x85EB_CA77);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    h
}

/// Low-contrast foggy scene: a bright-to-dark gradient with faint texture and
/// one small dark object, all blended 70% toward light gray.
pub fn foggy_fixture(size: usize) -> RgbImage {
    RgbImage::from_fn(size, size, |x, y| {
        let fx = x as f64 / size as f64;
        let fy = y as f64 / size as f64;
        let mut scene = 200.0 - 140.0 * fy + 30.0 * fx + f64::from(hash(x, y) % 21) - 10.0;
        if (0.55..0.75).contains(&fx) && (0.45..0.70).contains(&fy) {
            scene = 10.0;
        }
        let v = (0.3 * scene + 0.7 * 210.0).round().clamp(0.0, 255.0) as u8;
        [v, v, v.saturating_add(4)]
    })
    .unwrap()
}

/// Direct 2-D convolution with the `ceil(3 sigma)` Gaussian and clamped
/// indices: O(W H k^2), no separability, no edge shortcuts.
pub fn brute_force_blur(field: &ScalarField, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|o| (-((o * o) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = taps.iter().sum();
    let (w, h) = field.dimensions();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let weight = taps[(dy + r) as usize] * taps[(dx + r) as usize] / (norm * norm);
                    acc += weight * field.get(clamp(x as isize + dx, w), clamp(y as isize + dy, h));
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Field of `w x h` values from a seeded uniform generator on `[0, 255]`.
pub fn random_field(rng: &mut impl rand::Rng, w: usize, h: usize) -> ScalarField {
    let values = (0..w * h).map(|_| rng.random_range(0.0..=255.0)).collect();
    ScalarField::new(w, h, values).unwrap()
}

pub fn random_image(rng: &mut impl rand::Rng, w: usize, h: usize) -> RgbImage {
    let pixels = (0..w * h).map(|_| rng.random::<[u8; 3]>()).collect();
    RgbImage::new(w, h, pixels).unwrap()
}
