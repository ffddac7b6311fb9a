//! Run settings: built-in defaults, then command-line flags, then a TOML
//! config file, each layer overriding the previous one.

use std::path::{Path, PathBuf};

use dishnet_core::FreezeMode;
use dishnet_data::synthetic::SyntheticConfig;
use dishnet_data::{DatasetVariant, Geometry};
use serde::Deserialize;

use crate::error::{ExpError, Result};
use crate::plan::{Architecture, ModelScale};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub manifest: Option<PathBuf>,
    pub variant: DatasetVariant,
    pub balanced: bool,
    /// Per-class image cap when balancing.
    pub cap: usize,
    pub seed: u64,
    pub arch: Architecture,
    pub scale: ModelScale,
    pub freeze: FreezeMode,
    pub out: PathBuf,
    pub pretrained: Option<PathBuf>,
    /// SCN weights; trained on the fly when absent and needed.
    pub scn: Option<PathBuf>,
    pub geometry: Geometry,
    /// Side both image dimensions must reach after super-resolution.
    pub sr_target: usize,
    /// Integer SR factor of SCN weights trained on the fly.
    pub sr_factor: usize,
    pub split: [f64; 3],
    /// Classes with fewer images are dropped; 0 keeps everything.
    pub min_images: usize,
    pub train: TrainConfig,
    pub synthetic: SyntheticConfig,
}

impl Settings {
    /// Full-scale defaults: 256/224 geometry, cap 500, 80/10/10 split.
    pub fn full() -> Self {
        Self {
            manifest: None,
            variant: DatasetVariant::Original,
            balanced: false,
            cap: 500,
            seed: 42,
            arch: Architecture::Inception,
            scale: ModelScale::Full,
            freeze: FreezeMode::AllLayers,
            out: PathBuf::from("runs"),
            pretrained: None,
            scn: None,
            geometry: Geometry::default(),
            sr_target: 256,
            sr_factor: 2,
            split: [0.8, 0.1, 0.1],
            min_images: 0,
            train: TrainConfig {
                max_iterations: 100_000,
                validation_interval: 5_000,
                ..TrainConfig::default()
            },
            synthetic: SyntheticConfig::default(),
        }
    }

    /// Desk-scale defaults for the bundled synthetic mini-dataset.
    pub fn mini() -> Self {
        let geometry = Geometry::new(36, 32).expect("valid geometry");
        Self {
            scale: ModelScale::Toy,
            geometry,
            sr_target: geometry.resize,
            cap: 24,
            train: TrainConfig {
                max_iterations: 240,
                validation_interval: 40,
                ..TrainConfig::default()
            },
            ..Self::full()
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        fn parse<T: std::str::FromStr<Err = String>>(v: &Option<String>) -> Result<Option<T>> {
            v.as_deref()
                .map(|s| s.parse().map_err(ExpError::Validation))
                .transpose()
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = o.$field.clone() { $target = v; })*
            };
        }
        if let Some(v) = parse(&o.variant)? {
            self.variant = v;
        }
        if let Some(v) = parse(&o.arch)? {
            self.arch = v;
        }
        if let Some(v) = parse(&o.scale)? {
            self.scale = v;
        }
        if let Some(v) = parse(&o.freeze)? {
            self.freeze = v;
        }
        set! {
            balanced => self.balanced,
            cap => self.cap,
            seed => self.seed,
            out => self.out,
            sr_target => self.sr_target,
            sr_factor => self.sr_factor,
            split => self.split,
            min_images => self.min_images,
            learning_rate => self.train.learning_rate,
            momentum => self.train.momentum,
            batch_size => self.train.batch_size,
            max_iterations => self.train.max_iterations,
            validation_interval => self.train.validation_interval,
            aux_discount => self.train.aux_discount,
            synthetic_classes => self.synthetic.classes,
            synthetic_images_per_class => self.synthetic.images_per_class,
        }
        if o.manifest.is_some() {
            self.manifest = o.manifest.clone();
        }
        if o.pretrained.is_some() {
            self.pretrained = o.pretrained.clone();
        }
        if o.scn.is_some() {
            self.scn = o.scn.clone();
        }
        if o.resize.is_some() || o.crop.is_some() {
            let resize = o.resize.unwrap_or(self.geometry.resize);
            let crop = o.crop.unwrap_or(self.geometry.crop);
            self.geometry = Geometry::new(resize, crop)?;
        }
        Ok(())
    }

    /// Training configuration with the run seed and freeze mode folded in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            freeze_mode: self.freeze,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cap == 0 {
            return Err(ExpError::Validation("cap must be at least 1".into()));
        }
        if self.sr_target == 0 || self.sr_factor < 2 {
            return Err(ExpError::Validation(
                "sr_target must be positive and sr_factor at least 2".into(),
            ));
        }
        dishnet_data::ops::validate_ratios(self.split)?;
        self.train_config().validate()
    }
}

/// Optional values from flags or a config file. Enumerations are kept as
/// strings and parsed when applied.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub variant: Option<String>,
    pub balanced: Option<bool>,
    pub cap: Option<usize>,
    pub seed: Option<u64>,
    pub arch: Option<String>,
    pub scale: Option<String>,
    pub freeze: Option<String>,
    pub out: Option<PathBuf>,
    pub pretrained: Option<PathBuf>,
    pub scn: Option<PathBuf>,
    pub resize: Option<usize>,
    pub crop: Option<usize>,
    pub sr_target: Option<usize>,
    pub sr_factor: Option<usize>,
    pub split: Option<[f64; 3]>,
    pub min_images: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_iterations: Option<usize>,
    pub validation_interval: Option<usize>,
    pub aux_discount: Option<f64>,
    pub synthetic_classes: Option<usize>,
    pub synthetic_images_per_class: Option<usize>,
}

impl Overrides {
    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ExpError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
        Self::parse_toml(&text)
            .map_err(|e| ExpError::Validation(format!("{}: {e}", path.display())))
    }
}

/// Defaults, then `flags`, then the config file (if any).
pub fn resolve(base: Settings, flags: &Overrides, config: Option<&Path>) -> Result<Settings> {
    let mut s = base;
    s.apply(flags)?;
    if let Some(path) = config {
        s.apply(&Overrides::load(path)?)?;
    }
    s.validate()?;
    Ok(s)
}
