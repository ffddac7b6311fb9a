//! Quality checks: histograms, PSNR and the shrink / super-resolve round trip.

use crate::error::{Result, SrError};
use crate::raster::RasterImage;
use crate::resize::resize;
use crate::scn::{super_resolve, upscale_factor, ScnParams};

pub const TARGET_SIDE: usize = 256;

/// One 256-bin histogram per channel.
pub fn histogram(image: &RasterImage) -> Vec<[u64; 256]> {
    let c = image.channels();
    let mut h = vec![[0u64; 256]; c];
    for (i, &v) in image.pixels().iter().enumerate() {
        h[i % c][v as usize] += 1;
    }
    h
}

/// L1 distance between the two histograms after normalising each by its
/// total count. Ranges over `[0, 2]`.
pub fn histogram_distance(h1: &[u64], h2: &[u64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(SrError::Contract(format!(
            "histograms have {} and {} bins",
            h1.len(),
            h2.len()
        )));
    }
    let (n1, n2) = (h1.iter().sum::<u64>(), h2.iter().sum::<u64>());
    if n1 == 0 || n2 == 0 {
        return Err(SrError::Contract("histogram with zero total count".into()));
    }
    Ok(h1
        .iter()
        .zip(h2)
        .map(|(&a, &b)| (a as f64 / n1 as f64 - b as f64 / n2 as f64).abs())
        .sum())
}

/// Mean per-channel histogram distance between two images.
pub fn image_histogram_distance(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.channels() != b.channels() {
        return Err(SrError::Contract(format!(
            "{} vs {} channels",
            a.channels(),
            b.channels()
        )));
    }
    let (ha, hb) = (histogram(a), histogram(b));
    let mut total = 0.0;
    for (x, y) in ha.iter().zip(&hb) {
        total += histogram_distance(x, y)?;
    }
    Ok(total / ha.len() as f64)
}

/// Peak signal-to-noise ratio in dB for samples on a `[0, peak]` scale.
pub fn psnr(pred: &[f32], truth: &[f32], peak: f64) -> f64 {
    assert_eq!(pred.len(), truth.len(), "psnr operands differ in length");
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(&a, &b)| ((a - b) as f64).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    10.0 * (peak * peak / mse).log10()
}

/// Upscales by `factor` with `params`, which may be trained for another
/// factor: the SCN is applied repeatedly until the image is at least
/// `factor` times larger, then bicubic brings it to exactly `factor` times
/// the input size.
pub fn upscale_with(image: &RasterImage, factor: usize, params: &ScnParams) -> Result<RasterImage> {
    let (tw, th) = (image.width() * factor, image.height() * factor);
    if factor <= 1 {
        return Ok(image.clone());
    }
    if params.factor == factor {
        return super_resolve(image, factor, params);
    }
    if params.factor < 2 {
        return Err(SrError::Contract(format!(
            "parameters trained for factor {} cannot upscale",
            params.factor
        )));
    }
    let mut cur = image.clone();
    while cur.width() < tw || cur.height() < th {
        cur = super_resolve(&cur, params.factor, params)?;
    }
    resize(&cur, tw, th)
}

/// Shrinks `image` by `shrink`, lifts it back with super-resolution (factor
/// from [`upscale_factor`]) and resizes both it and the original to
/// 256x256 for side-by-side comparison. Returns `(original, round trip)`.
pub fn simulate_sr_roundtrip(
    image: &RasterImage,
    shrink: f64,
    params: &ScnParams,
) -> Result<(RasterImage, RasterImage)> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(SrError::Contract(format!(
            "shrink must lie in (0, 1), got {shrink}"
        )));
    }
    let (w, h) = roundtrip_sizes(image.width(), image.height(), shrink);
    let small = resize(image, w, h)?;
    let factor = upscale_factor(w, h, TARGET_SIDE);
    let lifted = upscale_with(&small, factor, params)?;
    Ok((
        resize(image, TARGET_SIDE, TARGET_SIDE)?,
        resize(&lifted, TARGET_SIDE, TARGET_SIDE)?,
    ))
}

/// Intermediate size of the round trip.
pub fn roundtrip_sizes(width: usize, height: usize, shrink: f64) -> (usize, usize) {
    let s = |v: usize| ((v as f64 * shrink).round() as usize).max(1);
    (s(width), s(height))
}
