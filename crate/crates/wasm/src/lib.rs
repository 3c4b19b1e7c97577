//! Browser bindings: single-image enhancement, binarization and a small
//! sweep that scores and ranks variants. Pixels travel as RGBA bytes, the
//! layout of `ImageData`. Everything runs on the calling thread.

use serde_json::json;
use wasm_bindgen::prelude::*;

use defog_core::bulk::variant_id;
use defog_core::{
    compute_report, retinex, select_and_rank, threshold, GateThresholds, Level, PartitionSpec,
    RankKey, Result, RetinexParams, RgbImage, ScalarMode,
};

/// Scales tried by [`sweep`].
pub const SWEEP_SCALES: [u32; 4] = [16, 60, 120, 240];

fn image(rgba: &[u8], width: usize, height: usize) -> Result<RgbImage> {
    RgbImage::from_rgba_bytes(width, height, rgba)
}

pub fn enhance_rgba(
    rgba: &[u8],
    width: usize,
    height: usize,
    scale: u32,
    division: u32,
    dynamic: f64,
    level: &str,
) -> Result<Vec<u8>> {
    let params = RetinexParams::new(scale, division, dynamic, level.parse()?)?;
    Ok(retinex(&image(rgba, width, height)?, &params)?.to_rgba_bytes())
}

pub fn threshold_rgba(rgba: &[u8], width: usize, height: usize, t: u32) -> Result<Vec<u8>> {
    Ok(threshold(&image(rgba, width, height)?, t)?.to_rgba_bytes())
}

/// Runs every scale/level pair at one dynamic, scores against the input with
/// `stripes` stripes and returns the reports, verdicts and ranking as JSON.
pub fn sweep_json(
    rgba: &[u8],
    width: usize,
    height: usize,
    dynamic: f64,
    stripes: usize,
    rank_key: &str,
) -> Result<String> {
    let source = image(rgba, width, height)?;
    let spec = PartitionSpec::Stripes(stripes);
    spec.validate()?;
    let key: RankKey = rank_key.parse()?;
    let mut params = Vec::new();
    let mut reports = Vec::new();
    for &scale in &SWEEP_SCALES {
        for level in Level::ALL {
            let p = RetinexParams::new(scale, 3, dynamic, level)?;
            let id = variant_id(&p, None);
            let out = retinex(&source, &p)?;
            reports.push(compute_report(&id, &out, &source, spec, ScalarMode::Brightness)?);
            params.push(json!({
                "id": id,
                "scale": p.scale,
                "division": p.scale_division,
                "dynamic": p.dynamic,
                "level": level.to_string(),
            }));
        }
    }
    let (ranked, verdicts) = select_and_rank(&reports, &GateThresholds::default(), key);
    Ok(json!({
        "variants": params,
        "reports": reports,
        "verdicts": verdicts,
        "ranking": ranked,
    })
    .to_string())
}

fn js(e: defog_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn enhance(
    rgba: &[u8],
    width: usize,
    height: usize,
    scale: u32,
    division: u32,
    dynamic: f64,
    level: &str,
) -> std::result::Result<Vec<u8>, JsError> {
    enhance_rgba(rgba, width, height, scale, division, dynamic, level).map_err(js)
}

#[wasm_bindgen]
pub fn binarize(
    rgba: &[u8],
    width: usize,
    height: usize,
    t: u32,
) -> std::result::Result<Vec<u8>, JsError> {
    threshold_rgba(rgba, width, height, t).map_err(js)
}

#[wasm_bindgen]
pub fn sweep(
    rgba: &[u8],
    width: usize,
    height: usize,
    dynamic: f64,
    stripes: usize,
    rank_key: &str,
) -> std::result::Result<String, JsError> {
    sweep_json(rgba, width, height, dynamic, stripes, rank_key).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(w: usize, h: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(w * h * 4);
        for y in 0..h {
            for x in 0..w {
                let mut v = 190 - (y * 40 / h) as u8 + (x * 9 / w) as u8 + ((x * 5 + y * 3) % 7) as u8;
                if x > w / 2 && x < w * 3 / 4 && y > h / 2 && y < h * 3 / 4 {
                    v = 150;
                }
                out.extend([v, v, v + 3, 255]);
            }
        }
        out
    }

    #[test]
    fn enhance_keeps_size_and_alpha() {
        let out = enhance_rgba(&scene(20, 15), 20, 15, 60, 3, 1.2, "low").unwrap();
        assert_eq!(out.len(), 20 * 15 * 4);
        assert!(out.chunks(4).all(|px| px[3] == 255));
    }

    #[test]
    fn bad_inputs_are_errors() {
        let px = scene(4, 4);
        assert!(enhance_rgba(&px, 4, 4, 300, 3, 1.2, "low").is_err());
        assert!(enhance_rgba(&px, 4, 4, 60, 3, 1.2, "middle").is_err());
        assert!(enhance_rgba(&px, 5, 4, 60, 3, 1.2, "low").is_err());
        assert!(threshold_rgba(&px, 4, 4, 999).is_err());
        assert!(sweep_json(&px, 4, 4, 1.2, 5, "best").is_err());
    }

    #[test]
    fn threshold_is_binary() {
        let out = threshold_rgba(&scene(10, 10), 10, 10, 180).unwrap();
        assert!(out.chunks(4).all(|px| px[..3] == [0; 3] || px[..3] == [255; 3]));
    }

    #[test]
    fn sweep_reports_every_variant() {
        let text = sweep_json(&scene(32, 32), 32, 32, 1.2, 5, "max-vvo").unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let n = SWEEP_SCALES.len() * Level::ALL.len();
        assert_eq!(v["variants"].as_array().unwrap().len(), n);
        assert_eq!(v["reports"].as_array().unwrap().len(), n);
        assert_eq!(v["verdicts"].as_array().unwrap().len(), n);
        assert!(v["ranking"]["entries"].is_array());
    }

    #[test]
    fn flat_image_is_degenerate() {
        let flat = [100u8, 100, 100, 255].repeat(64);
        assert!(sweep_json(&flat, 8, 8, 1.2, 5, "rvv").is_err());
    }
}
