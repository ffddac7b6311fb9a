//! Procedural stand-in for the food collections: each class is a coloured
//! geometric texture, each image a jittered instance of it.

use std::path::Path;

use dishnet_sr::RasterImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DataError, Result};
use crate::manifest::Manifest;
use crate::record::{SampleRecord, Source, CATEGORIES};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    /// Total classes; the first half is source A, the rest source B.
    pub classes: usize,
    pub images_per_class: usize,
    /// Inclusive range of source-A image sides.
    pub a_sides: (usize, usize),
    /// Inclusive range of source-B image sides (typically smaller).
    pub b_sides: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            images_per_class: 30,
            a_sides: (48, 72),
            b_sides: (20, 34),
            seed: 42,
        }
    }
}

/// Class-level appearance parameters.
#[derive(Clone, Copy, Debug)]
struct Style {
    pattern: usize,
    fg: [f32; 3],
    bg: [f32; 3],
    period: f32,
    angle: f32,
}

fn hue_rgb(h: f32) -> [f32; 3] {
    let f = |n: f32| {
        let k = (n + h * 6.0) % 6.0;
        1.0 - (k.min(4.0 - k).clamp(0.0, 1.0))
    };
    [f(5.0), f(3.0), f(1.0)]
}

fn style(class: usize) -> Style {
    let h = (class as f32 * 0.618_034) % 1.0;
    let fg = hue_rgb(h);
    let bg = hue_rgb((h + 0.5) % 1.0).map(|v| 0.25 + 0.5 * v);
    Style {
        pattern: class % 4,
        fg,
        bg,
        period: 4.0 + (class / 4 % 3) as f32 * 2.5,
        angle: (class as f32 * 0.7) % std::f32::consts::PI,
    }
}

/// One `width x height` instance of `class`.
pub fn render(class: usize, width: usize, height: usize, rng: &mut ChaCha8Rng) -> RasterImage {
    let s = style(class);
    let phase: f32 = rng.gen_range(0.0..s.period);
    let angle = s.angle + rng.gen_range(-0.2..0.2);
    let gain: f32 = rng.gen_range(0.85..1.15);
    let (sin, cos) = angle.sin_cos();
    let (cx, cy) = (width as f32 / 2.0, height as f32 / 2.0);
    let mut px = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let (dx, dy) = (x as f32 - cx, y as f32 - cy);
            let u = dx * cos + dy * sin + phase;
            let v = -dx * sin + dy * cos + phase;
            let on = match s.pattern {
                0 => (u / s.period).rem_euclid(2.0) < 1.0,
                1 => ((u / s.period).floor() + (v / s.period).floor()).rem_euclid(2.0) < 1.0,
                2 => {
                    let (a, b) = (u.rem_euclid(s.period) - s.period / 2.0, v.rem_euclid(s.period) - s.period / 2.0);
                    a * a + b * b < (s.period * 0.3).powi(2)
                }
                _ => ((dx * dx + dy * dy).sqrt() / s.period + phase).rem_euclid(2.0) < 1.0,
            };
            let base = if on { s.fg } else { s.bg };
            for c in base {
                let noise: f32 = rng.gen_range(-0.06..0.06);
                px.push(((c * gain + noise) * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(width, height, 3, px).expect("sizes agree")
}

/// Writes `classes * images_per_class` PPM images under `out_dir/images/`
/// and returns (and saves as `out_dir/manifest.tsv`) their manifest.
/// Output depends only on the config.
pub fn generate_dataset(out_dir: &Path, cfg: &SyntheticConfig) -> Result<Manifest> {
    if cfg.classes == 0 || cfg.images_per_class == 0 {
        return Err(DataError::Validation("need at least one class and one image".into()));
    }
    for (lo, hi) in [cfg.a_sides, cfg.b_sides] {
        if lo == 0 || lo > hi {
            return Err(DataError::Validation(format!("bad side range {lo}..={hi}")));
        }
    }
    let half = cfg.classes.div_ceil(2);
    let jobs: Vec<(usize, usize)> = (0..cfg.classes)
        .flat_map(|c| (0..cfg.images_per_class).map(move |i| (c, i)))
        .collect();
    let records: Vec<Result<SampleRecord>> = jobs
        .par_iter()
        .map(|&(class, i)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((class * cfg.images_per_class + i) as u64);
            let (source, sides, dish) = if class < half {
                (Source::A, cfg.a_sides, format!("intl_dish_{class:02}"))
            } else {
                (Source::B, cfg.b_sides, format!("med_dish_{class:02}"))
            };
            let w = rng.gen_range(sides.0..=sides.1);
            let h = rng.gen_range(sides.0..=sides.1);
            let img = render(class, w, h, &mut rng);
            let rel = format!("images/{dish}/{i:04}.ppm");
            let path = out_dir.join(&rel);
            let dir = path.parent().expect("has parent");
            std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
            img.write_ppm(&path).map_err(|source| DataError::Image {
                path: path.clone(),
                source,
            })?;
            Ok(SampleRecord::new(rel, dish, Some(CATEGORIES[class % CATEGORIES.len()]), source))
        })
        .collect();
    let m = Manifest::from_records(records.into_iter().collect::<Result<_>>()?)?.with_base_dir(out_dir);
    m.save(out_dir.join("manifest.tsv"))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_labelled() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig {
            classes: 5,
            images_per_class: 3,
            ..Default::default()
        };
        let m1 = generate_dataset(d1.path(), &cfg).unwrap();
        let m2 = generate_dataset(d2.path(), &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.len(), 15);
        assert_eq!(m1.num_classes(), 5);
        assert_eq!(m1.records().iter().filter(|r| r.source == Source::A).count(), 9);
        for r in m1.records() {
            let a = std::fs::read(m1.resolve(r)).unwrap();
            let b = std::fs::read(m2.resolve(r)).unwrap();
            assert_eq!(a, b);
        }
        let reloaded = Manifest::load(d1.path().join("manifest.tsv")).unwrap();
        assert_eq!(reloaded, m1);
    }

    #[test]
    fn classes_differ_in_colour() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mean = |img: &RasterImage| {
            let mut s = [0f64; 3];
            for p in img.pixels().chunks(3) {
                (0..3).for_each(|c| s[c] += p[c] as f64);
            }
            s.map(|v| v / (img.width() * img.height()) as f64)
        };
        let a = mean(&render(0, 32, 32, &mut rng));
        let b = mean(&render(1, 32, 32, &mut rng));
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        assert!(d > 20.0, "{a:?} vs {b:?}");
    }
}
