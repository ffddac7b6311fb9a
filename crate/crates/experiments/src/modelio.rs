//! Saved models: `model.dnt` weights, `model.spec` layout and
//! `preprocess.txt` (resize, crop, channel means).

use std::path::Path;

use dishnet_core::{checkpoint, Model, ModelSpec};
use dishnet_data::{ChannelMeans, Geometry};

use crate::error::{write_file, ExpError, Result};

pub fn save_model(dir: &Path, model: &Model<f32>, means: &ChannelMeans, geometry: Geometry) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    checkpoint::save(dir.join("model.dnt"), &model.params().to_named_f32())?;
    write_file(dir.join("model.spec"), model.spec().to_config())?;
    write_file(
        dir.join("preprocess.txt"),
        format!(
            "resize {}\ncrop {}\nmeans {} {} {}\n",
            geometry.resize, geometry.crop, means[0], means[1], means[2]
        ),
    )
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| ExpError::io(path, e))
}

pub fn load_model(dir: &Path) -> Result<(Model<f32>, ChannelMeans, Geometry)> {
    let spec = ModelSpec::parse(&read(&dir.join("model.spec"))?)?;
    let mut model = Model::new(spec, 0)?;
    model
        .params_mut()
        .load_values(&checkpoint::load(dir.join("model.dnt"))?)?;
    let text = read(&dir.join("preprocess.txt"))?;
    let bad = || ExpError::Validation(format!("{}: malformed preprocess.txt", dir.display()));
    let mut resize = None;
    let mut crop = None;
    let mut means = None;
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("resize") => resize = it.next().and_then(|v| v.parse().ok()),
            Some("crop") => crop = it.next().and_then(|v| v.parse().ok()),
            Some("means") => {
                let v: Vec<f32> = it.filter_map(|v| v.parse().ok()).collect();
                means = <[f32; 3]>::try_from(v).ok();
            }
            _ => {}
        }
    }
    let geometry = Geometry::new(resize.ok_or_else(bad)?, crop.ok_or_else(bad)?)?;
    Ok((model, means.ok_or_else(bad)?, geometry))
}

/// Copies every tensor of the checkpoint at `path` whose name and shape
/// match a parameter of `model`. Returns how many were loaded and the names
/// that were skipped (typically the classifier of a different class count).
pub fn load_pretrained(model: &mut Model<f32>, path: &Path) -> Result<(usize, Vec<String>)> {
    let tensors = checkpoint::load(path)?;
    let params = model.params_mut();
    let mut matching = Vec::new();
    let mut skipped = Vec::new();
    for (name, t) in tensors {
        match params.find(&name) {
            Some(k) if params.get(k).shape() == t.shape() => matching.push((name, t)),
            _ => skipped.push(name),
        }
    }
    if matching.is_empty() {
        return Err(ExpError::Validation(format!(
            "{}: no tensor matches the model",
            path.display()
        )));
    }
    let n = matching.len();
    params.load_values(&matching)?;
    Ok((n, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{build_model, Architecture, ModelScale};

    #[test]
    fn save_load_round_trip_and_partial_pretraining() {
        let dir = tempfile::tempdir().unwrap();
        let model = build_model(Architecture::Inception, ModelScale::Toy, 5, 16, 3).unwrap();
        let geom = Geometry::new(20, 16).unwrap();
        save_model(dir.path(), &model, &[0.1, 0.2, 0.3], geom).unwrap();
        let (back, means, g) = load_model(dir.path()).unwrap();
        assert_eq!(means, [0.1, 0.2, 0.3]);
        assert_eq!(g, geom);
        assert_eq!(back.params().to_named_f32(), model.params().to_named_f32());

        let mut other = build_model(Architecture::Inception, ModelScale::Toy, 12, 16, 9).unwrap();
        let (n, skipped) = load_pretrained(&mut other, &dir.path().join("model.dnt")).unwrap();
        let [w, b] = other.final_layer();
        let names = [other.params().name(w).to_string(), other.params().name(b).to_string()];
        assert!(names.iter().all(|s| skipped.contains(s)), "{skipped:?}");
        assert_eq!(n + skipped.len(), model.params().len());
        assert_eq!(other.params().get(0).data(), model.params().get(0).data());
    }
}
