//! Turning images into normalised network inputs.

use dishnet_core::Tensor;
use dishnet_sr::{resize, RasterImage};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{DataError, Result};
use crate::manifest::Manifest;

/// Images are resized to `resize x resize` and then cropped to `crop x crop`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub resize: usize,
    pub crop: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            resize: 256,
            crop: 224,
        }
    }
}

impl Geometry {
    pub fn new(resize: usize, crop: usize) -> Result<Self> {
        if crop == 0 || crop > resize {
            return Err(DataError::Validation(format!(
                "crop {crop} must be in 1..={resize}"
            )));
        }
        Ok(Self { resize, crop })
    }

    /// Largest crop offset along either axis.
    pub fn max_offset(&self) -> usize {
        self.resize - self.crop
    }

    pub fn centre_offset(&self) -> usize {
        self.max_offset() / 2
    }
}

/// Per-channel means on the `[0, 1]` scale.
pub type ChannelMeans = [f32; 3];

/// Unifies resolution: colour, `resize x resize`.
pub fn unify(img: &RasterImage, geom: Geometry) -> Result<RasterImage> {
    Ok(resize(&img.to_rgb(), geom.resize, geom.resize)?)
}

/// Mean of every channel over already unified images. Sums are taken per
/// image in parallel and combined in input order.
pub fn channel_means(images: &[RasterImage]) -> Result<ChannelMeans> {
    if images.is_empty() {
        return Err(DataError::Validation(
            "channel means of an empty image set".into(),
        ));
    }
    let sums: Vec<([f64; 3], usize)> = images
        .par_iter()
        .map(|img| {
            let img = img.to_rgb();
            let mut s = [0f64; 3];
            for px in img.pixels().chunks(3) {
                for c in 0..3 {
                    s[c] += px[c] as f64;
                }
            }
            (s, img.width() * img.height())
        })
        .collect();
    let mut total = [0f64; 3];
    let mut n = 0;
    for (s, k) in sums {
        (0..3).for_each(|c| total[c] += s[c]);
        n += k;
    }
    Ok(total.map(|t| (t / n as f64 / 255.0) as f32))
}

/// `[3, crop, crop]` tensor of `img` (already unified) cropped at `(x, y)`,
/// scaled to `[0, 1]` with `means` subtracted.
pub fn crop_tensor(img: &RasterImage, geom: Geometry, x: usize, y: usize, means: &ChannelMeans) -> Result<Tensor<f32>> {
    if img.width() != geom.resize || img.height() != geom.resize || img.channels() != 3 {
        return Err(DataError::Validation(format!(
            "expected a unified {0}x{0} colour image, got {1}x{2}x{3}",
            geom.resize,
            img.width(),
            img.height(),
            img.channels()
        )));
    }
    if x > geom.max_offset() || y > geom.max_offset() {
        return Err(DataError::Validation(format!(
            "crop offset ({x}, {y}) beyond {}",
            geom.max_offset()
        )));
    }
    let c = geom.crop;
    let mut data = vec![0f32; 3 * c * c];
    for yy in 0..c {
        for xx in 0..c {
            for ch in 0..3 {
                let v = img.get(x + xx, y + yy, ch) as f32 / 255.0;
                data[(ch * c + yy) * c + xx] = v - means[ch];
            }
        }
    }
    Ok(Tensor::new(&[3, c, c], data).expect("shape matches"))
}

/// Training input: unify, take a crop at a uniformly random offset, normalise.
pub fn prepare_train_sample<R: Rng>(
    img: &RasterImage,
    geom: Geometry,
    means: &ChannelMeans,
    rng: &mut R,
) -> Result<Tensor<f32>> {
    let unified = unify(img, geom)?;
    let (x, y) = random_offset(geom, rng);
    crop_tensor(&unified, geom, x, y, means)
}

pub fn random_offset<R: Rng>(geom: Geometry, rng: &mut R) -> (usize, usize) {
    let m = geom.max_offset();
    (rng.gen_range(0..=m), rng.gen_range(0..=m))
}

/// Evaluation input: unify, central crop, normalise.
pub fn prepare_eval_sample(img: &RasterImage, geom: Geometry, means: &ChannelMeans) -> Result<Tensor<f32>> {
    let unified = unify(img, geom)?;
    let o = geom.centre_offset();
    crop_tensor(&unified, geom, o, o, means)
}

/// Reads and unifies every image of `m`, in parallel, in record order.
pub fn load_unified(m: &Manifest, geom: Geometry) -> Vec<Result<RasterImage>> {
    m.records()
        .par_iter()
        .map(|r| {
            let path = m.resolve(r);
            let img = RasterImage::read_ppm(&path).map_err(|source| DataError::Image {
                path: path.clone(),
                source,
            })?;
            unify(&img, geom)
        })
        .collect()
}
