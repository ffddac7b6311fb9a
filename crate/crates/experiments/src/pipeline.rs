//! End-to-end runs: dataset preparation, training, evaluation, the
//! six-experiment matrix and the category fine-tuning comparison.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use dishnet_core::FreezeMode;
use dishnet_data::ops::{balance_classes, filter_min_images, split_dataset};
use dishnet_data::stats::image_dimensions;
use dishnet_data::{apply_variant, DatasetVariant, Manifest, Source, Split, CATEGORIES};
use dishnet_metrics::{ExperimentScores, MetricsReport, Scope, ScopeScores};
use dishnet_sr::raster::rgb_to_ycbcr;
use dishnet_sr::synthetic::{patch_pairs_from_plane, synthetic_patch_pairs};
use dishnet_sr::{train_scn, PatchPair, RasterImage, ScnConfig, ScnParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{ImageSet, Labeling};
use crate::error::{write_file, ExpError, Result};
use crate::evaluate::evaluate;
use crate::modelio::{load_pretrained, save_model};
use crate::plan::{build_model, plan_matrix, Architecture, ExperimentPlan};
use crate::settings::Settings;
use crate::train::{train, TrainOutcome};

/// Outcome of one training run, evaluated on its test split.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub id: u32,
    /// Comma-free run name, e.g. `G-b_super_resolved-balanced`.
    pub name: String,
    pub best_iteration: usize,
    pub max_iterations: usize,
    pub train_images: usize,
    pub test_images: usize,
    pub scopes: Vec<(Scope, MetricsReport)>,
    pub class_names: Vec<String>,
    pub duration: Duration,
}

impl RunResult {
    pub fn scores(&self) -> ExperimentScores {
        ExperimentScores {
            id: self.id,
            scopes: self
                .scopes
                .iter()
                .map(|(s, r)| {
                    (
                        *s,
                        ScopeScores {
                            at1: r.at1,
                            at5: r.at5,
                            nat1: r.nat1,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn report(&self, scope: Scope) -> Option<&MetricsReport> {
        self.scopes.iter().find(|(s, _)| *s == scope).map(|(_, r)| r)
    }
}

/// The manifest itself when every record has a split, otherwise a fresh
/// stratified split.
pub fn ensure_split(m: &Manifest, settings: &Settings) -> Result<Manifest> {
    if m.records().iter().all(|r| r.split != Split::Unassigned) {
        return Ok(m.clone());
    }
    let (split, warnings) = split_dataset(m, settings.split, settings.seed)?;
    warnings.iter().for_each(|w| log::warn!("{w}"));
    Ok(split)
}

fn run_name(plan: &ExperimentPlan) -> String {
    format!(
        "{}-{}{}",
        plan.architecture.letter(),
        plan.variant.name(),
        if plan.balanced { "-balanced" } else { "" }
    )
}

/// Saves `m` with every path resolved, so the copy is valid anywhere.
fn save_resolved(m: &Manifest, path: &Path) -> Result<()> {
    let records = m
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.image_path = m.resolve(&r).display().to_string();
            r
        })
        .collect();
    Ok(m.with_records(records)?.save(path)?)
}

/// Trains and evaluates one classifier on the splits of `m`. Artifacts go
/// to `out_dir` when given.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    id: u32,
    name: &str,
    m: &Manifest,
    labeling: Labeling,
    arch: Architecture,
    settings: &Settings,
    scopes: &[Scope],
    out_dir: Option<&Path>,
) -> Result<(RunResult, TrainOutcome)> {
    let start = Instant::now();
    let geom = settings.geometry;
    let load = |split| -> Result<ImageSet> {
        let (set, skipped) = ImageSet::from_manifest(m, Some(split), labeling, geom)?;
        if skipped > 0 {
            log::warn!("{name}: {skipped} {split} records lack a label and were excluded");
        }
        Ok(set)
    };
    let (train_set, val_set, test_set) = (load(Split::Train)?, load(Split::Val)?, load(Split::Test)?);
    if test_set.is_empty() {
        return Err(ExpError::Validation(format!("{name}: empty test split")));
    }
    let means = train_set.channel_means()?;
    let mut model = build_model(
        arch,
        settings.scale,
        train_set.num_classes(),
        geom.crop,
        settings.seed,
    )?;
    if let Some(p) = &settings.pretrained {
        let (n, skipped) = load_pretrained(&mut model, p)?;
        log::info!("{name}: {n} pretrained tensors loaded, {} skipped", skipped.len());
    }
    log::info!(
        "{name}: training on {} images ({} val, {} test)",
        train_set.len(),
        val_set.len(),
        test_set.len()
    );
    let cfg = settings.train_config();
    let outcome = train(model, &train_set, Some(&val_set), &means, &cfg)?;
    let mut reports = Vec::new();
    for &scope in scopes {
        let (report, log) = evaluate(&outcome.model, &test_set, &means, scope)?;
        if let Some(dir) = out_dir {
            let tag = if scope == Scope::AB { "ab" } else { "b" };
            write_file(dir.join(format!("predictions_{tag}.tsv")), log.to_tsv())?;
        }
        reports.push((scope, report));
    }
    if let Some(dir) = out_dir {
        save_model(&dir.join("model"), &outcome.model, &means, geom)?;
        write_file(dir.join("loss.csv"), outcome.losses_csv())?;
        write_file(dir.join("validation.csv"), outcome.validations_csv())?;
        save_resolved(m, &dir.join("manifest.tsv"))?;
    }
    let class_names = match labeling {
        Labeling::Dish => (0..m.num_classes()).map(|c| m.class_name(c)).collect(),
        Labeling::Category => CATEGORIES.iter().map(|c| c.to_string()).collect(),
    };
    let result = RunResult {
        id,
        name: name.to_string(),
        best_iteration: outcome.best_iteration,
        max_iterations: cfg.max_iterations,
        train_images: train_set.len(),
        test_images: test_set.len(),
        scopes: reports,
        class_names,
        duration: start.elapsed(),
    };
    Ok((result, outcome))
}

/// Luminance patch pairs from the source-A images of `m`, at most `max`,
/// taken evenly across the whole set.
pub fn scn_pairs_from_manifest(m: &Manifest, cfg: &ScnConfig, max: usize) -> Result<Vec<PatchPair>> {
    let f = cfg.factor;
    let per_image = m
        .records()
        .par_iter()
        .filter(|r| r.source == Source::A)
        .map(|r| {
            let img = RasterImage::read_ppm(m.resolve(r))?;
            let (w, h) = (img.width() / f * f, img.height() / f * f);
            if w == 0 || h == 0 {
                return Ok(Vec::new());
            }
            let [y, _, _] = rgb_to_ycbcr(&img.crop(0, 0, w, h)?);
            Ok(patch_pairs_from_plane(&y, w, h, f, cfg.patch_size, cfg.patch_size / 2))
        })
        .collect::<Result<Vec<_>, dishnet_sr::SrError>>()?;
    let all: Vec<PatchPair> = per_image.into_iter().flatten().collect();
    let step = all.len().div_ceil(max.max(1)).max(1);
    Ok(all.into_iter().step_by(step).collect())
}

/// SCN weights for the super-resolved variant: trained on high-resolution
/// source-A luminance, or on synthetic imagery when A yields no patches.
pub fn train_scn_for(m: Option<&Manifest>, settings: &Settings) -> Result<ScnParams> {
    let cfg = ScnConfig {
        factor: settings.sr_factor,
        seed: settings.seed,
        ..ScnConfig::default()
    };
    let mut pairs = match m {
        Some(m) => scn_pairs_from_manifest(m, &cfg, 6000)?,
        None => Vec::new(),
    };
    if pairs.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        pairs = synthetic_patch_pairs(6000, cfg.factor, cfg.patch_size, &mut rng);
    }
    log::info!("training SCN x{} on {} patch pairs", cfg.factor, pairs.len());
    let trained = train_scn(&pairs, &cfg)?;
    Ok(trained.params)
}

/// Materialises `variant` of `base` under `work_dir/variants`.
pub fn variant_manifest(
    base: &Manifest,
    variant: DatasetVariant,
    scn: Option<&ScnParams>,
    settings: &Settings,
    work_dir: &Path,
) -> Result<Manifest> {
    let outcome = apply_variant(base, variant, scn, settings.sr_target, &work_dir.join("variants"))?;
    for (path, e) in &outcome.errors {
        log::warn!("{}: {path} skipped: {e}", variant.name());
    }
    Ok(outcome.manifest)
}

/// Balancing (when asked), then a stratified split unless every record
/// already has one.
pub fn plan_manifest(variant: &Manifest, balanced: bool, settings: &Settings) -> Result<Manifest> {
    if balanced {
        ensure_split(&balance_classes(variant, settings.cap, settings.seed)?, settings)
    } else {
        ensure_split(variant, settings)
    }
}

/// Everything the matrix produced.
#[derive(Clone, Debug)]
pub struct MatrixOutput {
    pub results: Vec<RunResult>,
    /// Image dimensions of every materialised variant.
    pub dims: Vec<(DatasetVariant, Vec<(usize, usize)>)>,
}

/// Runs the six experiments on `base`, writing per-run artifacts to
/// `out/exp<id>/`.
pub fn run_matrix(base: &Manifest, settings: &Settings, scn: Option<&ScnParams>, out: &Path) -> Result<MatrixOutput> {
    let base = if settings.min_images > 0 {
        filter_min_images(base, settings.min_images)?
    } else {
        base.clone()
    };
    let plans = plan_matrix();
    let needs_scn = plans.iter().any(|p| p.variant == DatasetVariant::BSuperResolved);
    let trained;
    let scn = match scn {
        Some(s) => Some(s),
        None if needs_scn => {
            trained = train_scn_for(Some(&base), settings)?;
            trained.save(out.join("scn.dnt"))?;
            Some(&trained)
        }
        None => None,
    };
    let mut variants: HashMap<DatasetVariant, Manifest> = HashMap::new();
    let mut dims = Vec::new();
    for v in DatasetVariant::ALL {
        if plans.iter().any(|p| p.variant == v) {
            let m = variant_manifest(&base, v, scn, settings, out)?;
            let d = image_dimensions(&m)
                .into_iter()
                .filter_map(|(_, d)| d.ok())
                .collect();
            dims.push((v, d));
            variants.insert(v, m);
        }
    }
    let mut results = Vec::new();
    for plan in &plans {
        let name = run_name(plan);
        log::info!("experiment {} ({name})", plan.id);
        let m = plan_manifest(&variants[&plan.variant], plan.balanced, settings)?;
        let dir = out.join(format!("exp{}", plan.id));
        let (r, _) = run_experiment(
            plan.id,
            &name,
            &m,
            Labeling::Dish,
            plan.architecture,
            settings,
            &Scope::ALL,
            Some(&dir),
        )?;
        results.push(r);
    }
    Ok(MatrixOutput { results, dims })
}

/// Twelve-way category classifier trained under `mode`; id 1 for all
/// layers, 2 for the last layer only.
pub fn run_category_experiment(
    mode: FreezeMode,
    m: &Manifest,
    settings: &Settings,
    out_dir: Option<&Path>,
) -> Result<(RunResult, TrainOutcome)> {
    let m = ensure_split(m, settings)?;
    let settings = Settings {
        freeze: mode,
        ..settings.clone()
    };
    let id = match mode {
        FreezeMode::AllLayers => 1,
        FreezeMode::LastFcOnly => 2,
    };
    run_experiment(
        id,
        &mode.to_string(),
        &m,
        Labeling::Category,
        settings.arch,
        &settings,
        &[Scope::AB],
        out_dir,
    )
}
