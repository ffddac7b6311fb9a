//! The six dish-recognition experiments and the networks they train.

use std::fmt;
use std::str::FromStr;

use dishnet_core::{Model, ModelSpec};
use dishnet_data::DatasetVariant;
use serde::Deserialize;

use crate::error::{ExpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
#[serde(try_from = "String")]
pub enum Architecture {
    /// Inception network, "G".
    Inception,
    /// Plain VGG-style stack, "V".
    VggStyle,
}

impl Architecture {
    pub fn letter(self) -> char {
        match self {
            Architecture::Inception => 'G',
            Architecture::VggStyle => 'V',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Inception => "inception",
            Architecture::VggStyle => "vgg",
        }
    }
}

impl FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "g" | "inception" | "googlenet" => Ok(Architecture::Inception),
            "v" | "vgg" | "vgg_style" => Ok(Architecture::VggStyle),
            _ => Err(format!("unknown architecture '{s}' (inception | vgg)")),
        }
    }
}

impl TryFrom<String> for Architecture {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Network size: the desk-scale toy layouts or the full 224x224 ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelScale {
    Toy,
    Full,
}

impl FromStr for ModelScale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "toy" => Ok(ModelScale::Toy),
            "full" => Ok(ModelScale::Full),
            _ => Err(format!("unknown model scale '{s}' (toy | full)")),
        }
    }
}

/// Layout for `classes` outputs on `[3, crop, crop]` inputs.
pub fn model_spec(arch: Architecture, scale: ModelScale, classes: usize, crop: usize) -> Result<ModelSpec> {
    if classes == 0 {
        return Err(ExpError::Validation("a classifier needs at least one class".into()));
    }
    let input = [3, crop, crop];
    let spec = match (arch, scale) {
        (Architecture::Inception, ModelScale::Toy) => ModelSpec::toy_inception(classes, input),
        (Architecture::VggStyle, ModelScale::Toy) => {
            ModelSpec::vgg_style(&[1, 1, 2], &[16, 32, 32], classes, input, 64)?
        }
        (_, ModelScale::Full) if crop != 224 => {
            return Err(ExpError::Validation(format!(
                "full-size networks take 224x224 crops, not {crop}x{crop}"
            )))
        }
        (Architecture::Inception, ModelScale::Full) => ModelSpec::googlenet(classes),
        (Architecture::VggStyle, ModelScale::Full) => ModelSpec::vgg19(classes),
    };
    spec.block_shapes()?;
    Ok(spec)
}

pub fn build_model(arch: Architecture, scale: ModelScale, classes: usize, crop: usize, seed: u64) -> Result<Model<f32>> {
    Ok(Model::new(model_spec(arch, scale, classes, crop)?, seed)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExperimentPlan {
    pub id: u32,
    pub architecture: Architecture,
    pub variant: DatasetVariant,
    pub balanced: bool,
}

impl ExperimentPlan {
    /// Short label such as "G: sr, balanced".
    pub fn label(&self) -> String {
        format!(
            "{}: {}{}",
            self.architecture.letter(),
            self.variant.name(),
            if self.balanced { ", balanced" } else { "" }
        )
    }
}

/// The six experiments, in order.
pub fn plan_matrix() -> Vec<ExperimentPlan> {
    use Architecture::{Inception as G, VggStyle as V};
    use DatasetVariant::{AHalved, BSuperResolved, Original};
    [
        (G, BSuperResolved, false),
        (G, BSuperResolved, true),
        (G, AHalved, false),
        (G, AHalved, true),
        (V, Original, false),
        (V, Original, true),
    ]
    .into_iter()
    .zip(1..)
    .map(|((architecture, variant, balanced), id)| ExperimentPlan {
        id,
        architecture,
        variant,
        balanced,
    })
    .collect()
}
