//! The `dishnet` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dishnet_core::FreezeMode;
use dishnet_data::stats::{dataset_stats, dims_csv, dims_svg, image_dimensions};
use dishnet_data::synthetic::generate_dataset;
use dishnet_data::{apply_variant, DatasetVariant, Manifest};
use dishnet_metrics::{published_table4, Scope};
use dishnet_sr::{upscale_factor, upscale_with, RasterImage, ScnParams};

use crate::dataset::{ImageSet, Labeling};
use crate::error::{write_file, ExpError, Result};
use crate::evaluate::evaluate;
use crate::modelio::load_model;
use crate::pipeline::{
    ensure_split, plan_manifest, run_category_experiment, run_experiment, run_matrix,
    train_scn_for, variant_manifest,
};
use crate::report::{
    emit_category_report, emit_report, parse_rows_csv, rows_to_scores, scores_markdown,
};
use crate::settings::{Overrides, Settings};

#[derive(Parser, Debug)]
#[command(name = "dishnet", version, about = "Food recognition experiments on merged dish collections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Category and class counts, image dimension plot.
    Stats(Common),
    /// Train super-resolution weights on source-A images (or synthetic ones).
    SrTrain(Common),
    /// Super-resolve one PPM image.
    SrApply {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Upscaling factor; derived from the SR target side when omitted.
        #[arg(long)]
        factor: Option<usize>,
    },
    /// Materialise a resolution variant of a manifest.
    Variant(Common),
    /// Train one dish classifier.
    Train(Common),
    /// Evaluate a trained model on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the six dish-recognition experiments.
    Matrix(Common),
    /// Category recognition, training all layers and only the last one.
    Category(Common),
    /// Re-render the tables of a results directory, or of the published numbers.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory holding results.csv.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Use the published Table 4 values.
        #[arg(long)]
        published: bool,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// original | b_super_resolved | a_halved
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    balanced: Option<bool>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// inception | vgg
    #[arg(long)]
    arch: Option<String>,
    /// all_layers | last_fc_only
    #[arg(long)]
    freeze: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint whose matching tensors initialise the network.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// SCN weights for super-resolution.
    #[arg(long)]
    scn: Option<PathBuf>,
    /// toy | full
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// TOML file whose values override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base defaults: `mini` (bundled synthetic data) or `full`. Defaults
    /// to `mini` without a manifest and `full` with one.
    #[arg(long)]
    preset: Option<String>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            manifest: self.manifest.clone(),
            variant: self.variant.clone(),
            balanced: self.balanced,
            cap: self.cap,
            seed: self.seed,
            arch: self.arch.clone(),
            scale: self.scale.clone(),
            freeze: self.freeze.clone(),
            out: self.out.clone(),
            pretrained: self.pretrained.clone(),
            scn: self.scn.clone(),
            max_iterations: self.max_iterations,
            ..Overrides::default()
        }
    }
}

/// Resolved settings plus whether the freeze mode was chosen explicitly.
struct Resolved {
    settings: Settings,
    explicit_freeze: bool,
}

fn resolve(common: &Common) -> Result<Resolved> {
    let flags = common.overrides();
    let file = common.config.as_deref().map(Overrides::load).transpose()?;
    let manifest_given = flags.manifest.is_some()
        || file.as_ref().is_some_and(|f| f.manifest.is_some());
    let mut s = match common.preset.as_deref() {
        Some("mini") => Settings::mini(),
        Some("full") => Settings::full(),
        Some(p) => return Err(ExpError::Validation(format!("unknown preset '{p}' (mini | full)"))),
        None if manifest_given => Settings::full(),
        None => Settings::mini(),
    };
    s.apply(&flags)?;
    if let Some(f) = &file {
        s.apply(f)?;
    }
    s.validate()?;
    let explicit_freeze = flags.freeze.is_some() || file.is_some_and(|f| f.freeze.is_some());
    Ok(Resolved {
        settings: s,
        explicit_freeze,
    })
}

/// The configured manifest, or the synthetic mini-dataset generated under
/// `<out>/data`.
fn base_manifest(s: &Settings) -> Result<Manifest> {
    match &s.manifest {
        Some(p) => Ok(Manifest::load(p)?),
        None => {
            let cfg = dishnet_data::synthetic::SyntheticConfig {
                seed: s.seed,
                ..s.synthetic.clone()
            };
            let dir = s.out.join("data");
            log::info!("generating the synthetic mini-dataset in {}", dir.display());
            Ok(generate_dataset(&dir, &cfg)?)
        }
    }
}

fn require_manifest(s: &Settings) -> Result<Manifest> {
    match &s.manifest {
        Some(p) => Ok(Manifest::load(p)?),
        None => Err(ExpError::Validation("--manifest is required".into())),
    }
}

fn scn_weights(s: &Settings, m: Option<&Manifest>) -> Result<ScnParams> {
    match &s.scn {
        Some(p) => Ok(ScnParams::load(p)?),
        None => train_scn_for(m, s),
    }
}

fn cmd_stats(s: &Settings) -> Result<()> {
    let m = require_manifest(s)?;
    let st = dataset_stats(&m);
    write_file(s.out.join("categories.csv"), st.categories_csv())?;
    write_file(s.out.join("classes.csv"), st.classes_csv())?;
    let mut dims = Vec::new();
    for (path, d) in image_dimensions(&m) {
        match d {
            Ok(d) => dims.push(d),
            Err(e) => log::warn!("{path}: {e}"),
        }
    }
    write_file(s.out.join("dims.csv"), dims_csv(&dims))?;
    write_file(s.out.join("dims.svg"), dims_svg(&dims, "Image dimensions"))?;
    print!("{}", st.categories_csv());
    println!("{} images, {} classes", st.total_images, m.num_classes());
    Ok(())
}

fn cmd_sr_train(s: &Settings) -> Result<()> {
    let m = s.manifest.as_ref().map(Manifest::load).transpose()?;
    let params = train_scn_for(m.as_ref(), s)?;
    let path = if s.out.extension().is_some() {
        s.out.clone()
    } else {
        s.out.join("scn.dnt")
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    }
    params.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_sr_apply(s: &Settings, input: &Path, factor: Option<usize>) -> Result<()> {
    let img = RasterImage::read_ppm(input).map_err(|source| dishnet_data::DataError::Image {
        path: input.to_path_buf(),
        source,
    })?;
    let f = factor.unwrap_or_else(|| upscale_factor(img.width(), img.height(), s.sr_target));
    let out = if f <= 1 {
        img
    } else {
        let params = scn_weights(s, None)?;
        upscale_with(&img, f, &params)?
    };
    out.write_ppm(&s.out)?;
    println!("{}x{} -> {}", out.width(), out.height(), s.out.display());
    Ok(())
}

fn cmd_variant(s: &Settings) -> Result<()> {
    let m = require_manifest(s)?;
    let scn = match s.variant {
        DatasetVariant::BSuperResolved => Some(scn_weights(s, Some(&m))?),
        _ => None,
    };
    let o = apply_variant(&m, s.variant, scn.as_ref(), s.sr_target, &s.out)?;
    for (p, e) in &o.errors {
        log::warn!("{p}: {e}");
    }
    println!(
        "{}: {} images, {} transformed, {} failed",
        s.variant.name(),
        o.manifest.len(),
        o.transformed,
        o.errors.len()
    );
    Ok(())
}

fn prepared_manifest(s: &Settings) -> Result<Manifest> {
    let base = base_manifest(s)?;
    let scn = match s.variant {
        DatasetVariant::BSuperResolved => Some(scn_weights(s, Some(&base))?),
        _ => None,
    };
    let v = variant_manifest(&base, s.variant, scn.as_ref(), s, &s.out)?;
    plan_manifest(&v, s.balanced, s)
}

fn cmd_train(s: &Settings) -> Result<()> {
    let m = prepared_manifest(s)?;
    let name = format!("{}-{}", s.arch.letter(), s.variant.name());
    let (r, _) = run_experiment(1, &name, &m, Labeling::Dish, s.arch, s, &Scope::ALL, Some(&s.out))?;
    emit_report(&[r], &[], &s.out)?;
    println!("{}", s.out.join("results.md").display());
    Ok(())
}

fn cmd_eval(s: &Settings, model_dir: &Path) -> Result<()> {
    let (model, means, geometry) = load_model(model_dir)?;
    let m = ensure_split(&base_manifest(s)?, s)?;
    let (test, _) = ImageSet::from_manifest(&m, Some(dishnet_data::Split::Test), Labeling::Dish, geometry)?;
    let mut table = String::from("scope,at1,at5,nat1,images\n");
    for scope in Scope::ALL {
        match evaluate(&model, &test, &means, scope) {
            Ok((rep, log)) => {
                let tag = if scope == Scope::AB { "ab" } else { "b" };
                write_file(s.out.join(format!("predictions_{tag}.tsv")), log.to_tsv())?;
                table.push_str(&format!("\"{scope}\",{},{},{},{}\n", rep.at1, rep.at5, rep.nat1, log.len()));
            }
            Err(ExpError::Validation(msg)) if scope == Scope::B => log::warn!("{msg}"),
            Err(e) => return Err(e),
        }
    }
    write_file(s.out.join("metrics.csv"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_matrix(s: &Settings) -> Result<()> {
    let base = base_manifest(s)?;
    let scn = s.scn.as_ref().map(ScnParams::load).transpose()?;
    let out = run_matrix(&base, s, scn.as_ref(), &s.out)?;
    let files = emit_report(&out.results, &out.dims, &s.out)?;
    files.warnings.iter().for_each(|w| log::warn!("{w}"));
    print!("{}", std::fs::read_to_string(s.out.join("results.md")).unwrap_or_default());
    Ok(())
}

fn cmd_category(r: &Resolved) -> Result<()> {
    let s = &r.settings;
    let m = base_manifest(s)?;
    let modes = if r.explicit_freeze {
        vec![s.freeze]
    } else {
        vec![FreezeMode::AllLayers, FreezeMode::LastFcOnly]
    };
    let mut results = Vec::new();
    for mode in modes {
        let dir = s.out.join(format!("category_{mode}"));
        results.push(run_category_experiment(mode, &m, s, Some(&dir))?.0);
    }
    let files = emit_category_report(&results, &s.out)?;
    files.warnings.iter().for_each(|w| log::warn!("{w}"));
    print!("{}", std::fs::read_to_string(s.out.join("category.md")).unwrap_or_default());
    Ok(())
}

fn cmd_report(s: &Settings, results: Option<&Path>, published: bool) -> Result<()> {
    let (title, scores, names) = if published {
        ("Published results", published_table4(), Vec::new())
    } else {
        let dir = results.ok_or_else(|| ExpError::Validation("give --results DIR or --published".into()))?;
        let path = dir.join("results.csv");
        let text = std::fs::read_to_string(&path).map_err(|e| ExpError::io(&path, e))?;
        let rows = parse_rows_csv(&text)?;
        let mut names: Vec<(u32, String)> = rows.iter().map(|r| (r.id, r.name.clone())).collect();
        names.dedup();
        ("Dish recognition", rows_to_scores(&rows), names)
    };
    let (md, ranking) = scores_markdown(title, &scores, &names);
    if ranking.is_none() {
        log::warn!("some experiment lacks a scope; no ranking");
    }
    write_file(s.out.join("report.md"), &md)?;
    print!("{md}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Stats(c) => cmd_stats(&resolve(c)?.settings),
        Command::SrTrain(c) => cmd_sr_train(&resolve(c)?.settings),
        Command::SrApply { common, input, factor } => {
            cmd_sr_apply(&resolve(common)?.settings, input, *factor)
        }
        Command::Variant(c) => cmd_variant(&resolve(c)?.settings),
        Command::Train(c) => cmd_train(&resolve(c)?.settings),
        Command::Eval { common, model } => cmd_eval(&resolve(common)?.settings, model),
        Command::Matrix(c) => cmd_matrix(&resolve(c)?.settings),
        Command::Category(c) => cmd_category(&resolve(c)?),
        Command::Report {
            common,
            results,
            published,
        } => cmd_report(&resolve(common)?.settings, results.as_deref(), *published),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 validation, 2 I/O, 3 numeric failure.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
