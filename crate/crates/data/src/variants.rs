//! The three resolution variants: untouched, source A halved, and source B
//! lifted by super-resolution.

use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use dishnet_sr::{resize, upscale_factor, upscale_with, RasterImage, ScnParams};
use rayon::prelude::*;

use crate::error::{DataError, Result};
use crate::manifest::Manifest;
use crate::record::Source;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetVariant {
    Original,
    BSuperResolved,
    AHalved,
}

impl DatasetVariant {
    pub const ALL: [DatasetVariant; 3] = [
        DatasetVariant::Original,
        DatasetVariant::BSuperResolved,
        DatasetVariant::AHalved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetVariant::Original => "original",
            DatasetVariant::BSuperResolved => "b_super_resolved",
            DatasetVariant::AHalved => "a_halved",
        }
    }
}

impl FromStr for DatasetVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "original" => Ok(DatasetVariant::Original),
            "b_super_resolved" | "sr" => Ok(DatasetVariant::BSuperResolved),
            "a_halved" | "halved" => Ok(DatasetVariant::AHalved),
            _ => Err(format!(
                "unknown variant '{s}' (original | b_super_resolved | a_halved)"
            )),
        }
    }
}

impl fmt::Display for DatasetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Half width and height (rounded down, at least 1), bicubic.
pub fn halve(img: &RasterImage) -> Result<RasterImage> {
    Ok(resize(img, (img.width() / 2).max(1), (img.height() / 2).max(1))?)
}

/// Lifts `img` so both sides reach `target`, or returns `None` when it
/// already does.
pub fn lift(img: &RasterImage, target: usize, scn: &ScnParams) -> Result<Option<RasterImage>> {
    let f = upscale_factor(img.width(), img.height(), target);
    if f == 1 {
        return Ok(None);
    }
    Ok(Some(upscale_with(img, f, scn)?))
}

/// How `variant` changes one image; `None` means "leave as is".
pub fn transform(
    img: &RasterImage,
    source: Source,
    variant: DatasetVariant,
    scn: Option<&ScnParams>,
    target: usize,
) -> Result<Option<RasterImage>> {
    match (variant, source) {
        (DatasetVariant::AHalved, Source::A) => Ok(Some(halve(img)?)),
        (DatasetVariant::BSuperResolved, Source::B) => {
            let scn = scn.ok_or_else(|| {
                DataError::Validation("the super-resolved variant needs SCN weights".into())
            })?;
            lift(img, target, scn)
        }
        _ => Ok(None),
    }
}

/// Result of materialising a variant.
#[derive(Debug)]
pub struct VariantOutcome {
    /// Manifest of the materialised images (same records, same order).
    pub manifest: Manifest,
    /// Number of images that were transformed rather than copied.
    pub transformed: usize,
    /// `(image path, error)` for every image that could not be processed.
    pub errors: Vec<(String, String)>,
}

/// Path of `p` inside a mirror rooted at `root`.
fn mirrored(root: &Path, p: &str) -> PathBuf {
    let rel: PathBuf = Path::new(p)
        .components()
        .filter(|c| matches!(c, Component::Normal(_)))
        .collect();
    root.join(rel)
}

/// Writes every image of `m` under `out_dir/<variant>/`, mirroring the
/// original relative layout, transformed as the variant prescribes, plus a
/// `manifest.tsv` next to them. The original variant returns `m` unchanged
/// and writes nothing. Unreadable images are collected in `errors`; the
/// remaining images are still processed.
pub fn apply_variant(
    m: &Manifest,
    variant: DatasetVariant,
    scn: Option<&ScnParams>,
    target: usize,
    out_dir: &Path,
) -> Result<VariantOutcome> {
    if variant == DatasetVariant::Original {
        return Ok(VariantOutcome {
            manifest: m.clone(),
            transformed: 0,
            errors: Vec::new(),
        });
    }
    if variant == DatasetVariant::BSuperResolved && scn.is_none() {
        return Err(DataError::Validation(
            "the super-resolved variant needs SCN weights".into(),
        ));
    }
    let root = out_dir.join(variant.name());
    let results: Vec<std::result::Result<bool, String>> = m
        .records()
        .par_iter()
        .map(|r| {
            let src = m.resolve(r);
            let dst = mirrored(&root, &r.image_path);
            let img = RasterImage::read_ppm(&src).map_err(|e| e.to_string())?;
            let out = transform(&img, r.source, variant, scn, target).map_err(|e| e.to_string())?;
            if let Some(dir) = dst.parent() {
                std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            }
            let changed = out.is_some();
            out.as_ref()
                .unwrap_or(&img)
                .write_ppm(&dst)
                .map_err(|e| format!("{}: {e}", dst.display()))?;
            Ok(changed)
        })
        .collect();
    let mut errors = Vec::new();
    let mut transformed = 0;
    let mut records = Vec::with_capacity(m.len());
    for (r, res) in m.records().iter().zip(results) {
        match res {
            Ok(changed) => {
                transformed += changed as usize;
                let mut r = r.clone();
                r.image_path = mirrored(Path::new(""), &r.image_path).display().to_string();
                records.push(r);
            }
            Err(e) => errors.push((r.image_path.clone(), e)),
        }
    }
    let manifest = Manifest::from_records(records)?.with_base_dir(&root);
    manifest.save(root.join("manifest.tsv"))?;
    Ok(VariantOutcome {
        manifest,
        transformed,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use dishnet_sr::ScnConfig;

    #[test]
    fn halving_examples() {
        let img = RasterImage::filled(512, 512, [9, 9, 9]).unwrap();
        let h = halve(&img).unwrap();
        assert_eq!((h.width(), h.height()), (256, 256));
        let one = RasterImage::filled(1, 3, [0, 0, 0]).unwrap();
        let h = halve(&one).unwrap();
        assert_eq!((h.width(), h.height()), (1, 1));
    }

    #[test]
    fn lift_follows_the_factor_rule() {
        let scn = ScnParams::init(&ScnConfig {
            factor: 3,
            patch_size: 4,
            atoms: 16,
            ..Default::default()
        })
        .unwrap();
        let img = RasterImage::filled(402, 125, [50, 60, 70]).unwrap();
        let up = lift(&img, 256, &scn).unwrap().unwrap();
        assert_eq!((up.width(), up.height()), (1206, 375));
        let big = RasterImage::filled(300, 300, [0, 0, 0]).unwrap();
        assert!(lift(&big, 256, &scn).unwrap().is_none());
    }

    #[test]
    fn variants_only_touch_their_source() {
        let img = RasterImage::filled(8, 8, [1, 2, 3]).unwrap();
        assert!(transform(&img, Source::B, DatasetVariant::AHalved, None, 256)
            .unwrap()
            .is_none());
        assert!(transform(&img, Source::A, DatasetVariant::BSuperResolved, None, 256)
            .unwrap()
            .is_none());
        assert!(transform(&img, Source::B, DatasetVariant::BSuperResolved, None, 256).is_err());
        assert!(transform(&img, Source::A, DatasetVariant::Original, None, 256).unwrap().is_none());
    }

    #[test]
    fn names_round_trip() {
        for v in DatasetVariant::ALL {
            assert_eq!(v.name().parse::<DatasetVariant>().unwrap(), v);
        }
        assert!("bogus".parse::<DatasetVariant>().is_err());
    }
}
