//! Labelled images held in memory at the unified resolution.

use dishnet_core::Tensor;
use dishnet_data::sample::{channel_means, crop_tensor, random_offset, unify};
use dishnet_data::{ChannelMeans, DataError, Geometry, Manifest, Source, Split, CATEGORIES};
use dishnet_sr::RasterImage;
use dishnet_data::synthetic::render;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ExpError, Result};

/// What a classifier predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Labeling {
    /// One class per (source, dish) of the whole manifest.
    Dish,
    /// One of the twelve food categories.
    Category,
}

/// Index of `name` among the canonical categories, ignoring case.
pub fn category_index(name: &str) -> Option<usize> {
    CATEGORIES.iter().position(|c| c.eq_ignore_ascii_case(name.trim()))
}

#[derive(Clone, Debug)]
pub struct ImageSet {
    images: Vec<RasterImage>,
    labels: Vec<usize>,
    sources: Vec<Source>,
    num_classes: usize,
    geometry: Geometry,
}

impl ImageSet {
    /// Unifies `images` (in parallel, order kept) to `geometry`.
    pub fn new(
        images: Vec<RasterImage>,
        labels: Vec<usize>,
        sources: Vec<Source>,
        num_classes: usize,
        geometry: Geometry,
    ) -> Result<Self> {
        if images.len() != labels.len() || images.len() != sources.len() {
            return Err(ExpError::Validation(format!(
                "{} images, {} labels, {} sources",
                images.len(),
                labels.len(),
                sources.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(ExpError::Validation(format!("label {l} >= {num_classes} classes")));
        }
        let images = images
            .par_iter()
            .map(|img| unify(img, geometry))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            images,
            labels,
            sources,
            num_classes,
            geometry,
        })
    }

    /// Loads the records of `split` (all records when `None`). Dish labels
    /// are class ids of the whole manifest, so every split of one manifest
    /// shares them. Returns the set and the number of records skipped for
    /// lacking a label.
    pub fn from_manifest(
        m: &Manifest,
        split: Option<Split>,
        labeling: Labeling,
        geometry: Geometry,
    ) -> Result<(Self, usize)> {
        let mut picked = Vec::new();
        let mut skipped = 0;
        for r in m.records() {
            if split.is_some_and(|s| r.split != s) {
                continue;
            }
            let label = match labeling {
                Labeling::Dish => Some(m.class_id(r)),
                Labeling::Category => r.category.as_deref().and_then(category_index),
            };
            match label {
                Some(l) => picked.push((r, l)),
                None => skipped += 1,
            }
        }
        let images = picked
            .par_iter()
            .map(|(r, _)| {
                let path = m.resolve(r);
                let img = RasterImage::read_ppm(&path)
                    .map_err(|source| DataError::Image { path, source })?;
                Ok(unify(&img, geometry)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let num_classes = match labeling {
            Labeling::Dish => m.num_classes(),
            Labeling::Category => CATEGORIES.len(),
        };
        Ok((
            Self {
                images,
                labels: picked.iter().map(|&(_, l)| l).collect(),
                sources: picked.iter().map(|(r, _)| r.source).collect(),
                num_classes,
                geometry,
            },
            skipped,
        ))
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn channel_means(&self) -> Result<ChannelMeans> {
        Ok(channel_means(&self.images)?)
    }

    /// Random-crop training input of sample `i`.
    pub fn train_input<R: Rng>(&self, i: usize, means: &ChannelMeans, rng: &mut R) -> Result<Tensor<f32>> {
        let (x, y) = random_offset(self.geometry, rng);
        Ok(crop_tensor(&self.images[i], self.geometry, x, y, means)?)
    }

    /// Central-crop evaluation input of sample `i`.
    pub fn eval_input(&self, i: usize, means: &ChannelMeans) -> Result<Tensor<f32>> {
        let o = self.geometry.centre_offset();
        Ok(crop_tensor(&self.images[i], self.geometry, o, o, means)?)
    }

    /// Samples whose source satisfies `keep`, order kept.
    pub fn restrict(&self, keep: impl Fn(Source) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.sources[i])).collect();
        Self {
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            sources: idx.iter().map(|&i| self.sources[i]).collect(),
            num_classes: self.num_classes,
            geometry: self.geometry,
        }
    }
}

/// In-memory synthetic set: `per_class` rendered images for each of
/// `classes` texture classes (sides 32 to 40), the first half from source A.
pub fn synthetic_set(classes: usize, per_class: usize, geometry: Geometry, seed: u64) -> Result<ImageSet> {
    let mut images = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    let mut sources = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        for i in 0..per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((c * per_class + i) as u64);
            let (w, h) = (rng.gen_range(32..=40), rng.gen_range(32..=40));
            images.push(render(c, w, h, &mut rng));
            labels.push(c);
            sources.push(if c < classes.div_ceil(2) { Source::A } else { Source::B });
        }
    }
    ImageSet::new(images, labels, sources, classes, geometry)
}
