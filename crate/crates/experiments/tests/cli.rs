//! The `dishnet` command line, run in-process.

use std::path::Path;

use dishnet_data::Manifest;
use dishnet_experiments::cli::run;
use dishnet_experiments::report::parse_rows_csv;
use dishnet_sr::RasterImage;

fn dishnet(args: &[&str]) -> u8 {
    run(std::iter::once("dishnet").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Config for a tiny synthetic run: 4 classes of 10 images, short training.
fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("tiny.toml");
    std::fs::write(
        &cfg,
        "synthetic_classes = 4\nsynthetic_images_per_class = 10\nmax_iterations = 12\nvalidation_interval = 6\nbatch_size = 4\n",
    )
    .unwrap();
    cfg
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(dishnet(&["--help"]), 0);
    assert_eq!(dishnet(&["frobnicate"]), 1);
    assert_eq!(dishnet(&["train", "--cap", "many"]), 1);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(dishnet(&["train", "--variant", "sepia", "--out", p(&out)]), 1);
    let missing = dir.path().join("missing.tsv");
    assert_eq!(dishnet(&["stats", "--manifest", p(&missing), "--out", p(&out)]), 2);
    assert_eq!(dishnet(&["stats", "--out", p(&out)]), 1);
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "learning_rate = -1.0\n").unwrap();
    assert_eq!(dishnet(&["train", "--config", p(&bad_cfg), "--out", p(&out)]), 1);
}

#[test]
fn published_report_ranks_experiment_one_first() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dishnet(&["report", "--published", "--out", p(dir.path())]), 0);
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("| 1 | 1 | 289.44 |"), "{md}");
    assert!(md.contains("| 6 | 288.09 |"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (flag_out, file_out) = (dir.path().join("flag"), dir.path().join("file"));
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, format!("out = {:?}\n", p(&file_out))).unwrap();
    assert_eq!(
        dishnet(&["report", "--published", "--out", p(&flag_out), "--config", p(&cfg)]),
        0
    );
    assert!(file_out.join("report.md").exists());
    assert!(!flag_out.exists());
}

#[test]
fn train_eval_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    assert_eq!(dishnet(&["train", "--config", p(&cfg), "--out", p(&out), "--arch", "vgg"]), 0);
    let rows = parse_rows_csv(&std::fs::read_to_string(out.join("results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].name, "V-original");
    assert_eq!(rows[0].max_iterations, 12);

    let eval_out = dir.path().join("eval");
    let manifest = out.join("manifest.tsv");
    let code = dishnet(&[
        "eval",
        "--manifest",
        p(&manifest),
        "--model",
        p(&out.join("model")),
        "--out",
        p(&eval_out),
    ]);
    assert_eq!(code, 0);
    let metrics = std::fs::read_to_string(eval_out.join("metrics.csv")).unwrap();
    let at1_ab: f64 = metrics.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    // same model, same test split: same accuracy as during training
    assert_eq!(at1_ab, rows[0].at1);

    let rep = dir.path().join("rep");
    assert_eq!(dishnet(&["report", "--results", p(&out), "--out", p(&rep)]), 0);
    assert!(std::fs::read_to_string(rep.join("report.md")).unwrap().contains("V-original"));
}

#[test]
fn category_runs_both_modes_with_twelve_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("cat");
    assert_eq!(dishnet(&["category", "--config", p(&cfg), "--out", p(&out)]), 0);
    let md = std::fs::read_to_string(out.join("category.md")).unwrap();
    assert!(md.contains("| all_layers |") && md.contains("| last_fc_only |"), "{md}");
    let cm = std::fs::read_to_string(out.join("cm_category_all_layers.csv")).unwrap();
    assert_eq!(cm.lines().count(), 13);
    assert!(cm.lines().all(|l| l.matches(',').count() >= 12));
}

#[test]
fn stats_variant_and_super_resolution_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dishnet_data::synthetic::SyntheticConfig {
        classes: 4,
        images_per_class: 3,
        ..Default::default()
    };
    let m = dishnet_data::synthetic::generate_dataset(&dir.path().join("data"), &cfg).unwrap();
    let manifest = dir.path().join("data/manifest.tsv");
    let stats = dir.path().join("stats");
    assert_eq!(dishnet(&["stats", "--manifest", p(&manifest), "--out", p(&stats)]), 0);
    assert!(std::fs::read_to_string(stats.join("dims.svg")).unwrap().starts_with("<svg"));

    let var = dir.path().join("var");
    let code = dishnet(&["variant", "--manifest", p(&manifest), "--variant", "a_halved", "--out", p(&var)]);
    assert_eq!(code, 0);
    let halved = Manifest::load(var.join("a_halved/manifest.tsv")).unwrap();
    assert_eq!(halved.len(), m.len());

    let scn = dir.path().join("scn.dnt");
    assert_eq!(dishnet(&["sr-train", "--out", p(&scn)]), 0);
    let img = dir.path().join("small.ppm");
    RasterImage::filled(20, 14, [90, 140, 200]).unwrap().write_ppm(&img).unwrap();
    let big = dir.path().join("big.ppm");
    let code = dishnet(&["sr-apply", "--scn", p(&scn), "--input", p(&img), "--factor", "3", "--out", p(&big)]);
    assert_eq!(code, 0);
    let up = RasterImage::read_ppm(&big).unwrap();
    assert_eq!((up.width(), up.height()), (60, 42));
    assert_eq!(up.get(30, 20, 2), 200);
}
