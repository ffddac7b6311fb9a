//! Result tables and figures: `results.csv`, `results.md`, confusion-matrix
//! CSVs and heatmaps, and image-dimension scatter plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dishnet_data::stats::{dims_csv, dims_svg};
use dishnet_data::DatasetVariant;
use dishnet_metrics::{
    aggregate_experiment_scores, confusion_csv, confusion_svg, results_markdown, ExperimentScores,
    Ranking, Scope, ScopeScores,
};

use crate::error::{write_file, ExpError, Result};
use crate::pipeline::RunResult;

/// One line of `results.csv`. Accuracies are full-precision fractions;
/// `test_images` counts the images inside the scope.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub id: u32,
    pub name: String,
    pub scope: Scope,
    pub at1: f64,
    pub at5: f64,
    pub nat1: f64,
    pub best_iteration: usize,
    pub max_iterations: usize,
    pub train_images: usize,
    pub test_images: usize,
}

const HEADER: &str =
    "experiment,name,scope,at1,at5,nat1,best_iteration,max_iterations,train_images,test_images";

pub fn result_rows(results: &[RunResult]) -> Vec<ResultRow> {
    results
        .iter()
        .flat_map(|r| {
            r.scopes.iter().map(move |(scope, m)| ResultRow {
                id: r.id,
                name: r.name.clone(),
                scope: *scope,
                at1: m.at1,
                at5: m.at5,
                nat1: m.nat1,
                best_iteration: r.best_iteration,
                max_iterations: r.max_iterations,
                train_images: r.train_images,
                test_images: m.per_class_counts.iter().sum(),
            })
        })
        .collect()
}

/// Deterministic CSV: no timings, scopes quoted since "A,B" holds a comma.
pub fn rows_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},\"{}\",{},{},{},{},{},{},{}",
            r.id,
            r.name,
            r.scope,
            r.at1,
            r.at5,
            r.nat1,
            r.best_iteration,
            r.max_iterations,
            r.train_images,
            r.test_images
        );
    }
    out
}

/// Splits one CSV line, honouring double quotes.
fn csv_fields(line: &str) -> Vec<String> {
    let mut fields = vec![String::new()];
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(String::new()),
            _ => fields.last_mut().expect("non-empty").push(c),
        }
    }
    fields
}

pub fn parse_rows_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(ExpError::Validation("results.csv: unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| ExpError::Validation(format!("results.csv line {}: bad {what}", i + 2));
            let f = csv_fields(line);
            if f.len() != 10 {
                return Err(bad("field count"));
            }
            let num = |k: usize, what: &str| f[k].parse::<f64>().map_err(|_| bad(what));
            let int = |k: usize, what: &str| f[k].parse::<usize>().map_err(|_| bad(what));
            Ok(ResultRow {
                id: f[0].parse().map_err(|_| bad("experiment"))?,
                name: f[1].clone(),
                scope: f[2].parse().map_err(|_| bad("scope"))?,
                at1: num(3, "at1")?,
                at5: num(4, "at5")?,
                nat1: num(5, "nat1")?,
                best_iteration: int(6, "best_iteration")?,
                max_iterations: int(7, "max_iterations")?,
                train_images: int(8, "train_images")?,
                test_images: int(9, "test_images")?,
            })
        })
        .collect()
}

/// Groups rows by experiment, in first-appearance order.
pub fn rows_to_scores(rows: &[ResultRow]) -> Vec<ExperimentScores> {
    let mut out: Vec<ExperimentScores> = Vec::new();
    for r in rows {
        let s = ScopeScores {
            at1: r.at1,
            at5: r.at5,
            nat1: r.nat1,
        };
        match out.iter_mut().find(|e| e.id == r.id) {
            Some(e) => e.scopes.push((r.scope, s)),
            None => out.push(ExperimentScores {
                id: r.id,
                scopes: vec![(r.scope, s)],
            }),
        }
    }
    out
}

/// Table 4 style Markdown with the ranking, or without it when some
/// experiment lacks a scope.
pub fn scores_markdown(title: &str, scores: &[ExperimentScores], names: &[(u32, String)]) -> (String, Option<Ranking>) {
    let ranking = aggregate_experiment_scores(scores).ok();
    let mut md = format!("# {title}\n\n");
    if !names.is_empty() {
        md.push_str("| Exp | Run |\n|---:|---|\n");
        for (id, name) in names {
            let _ = writeln!(md, "| {id} | {name} |");
        }
        md.push('\n');
    }
    md.push_str(&results_markdown(scores, ranking.as_ref()));
    if let Some(best) = ranking.as_ref().and_then(|r| r.entries.first()) {
        let _ = writeln!(
            md,
            "\nBest: experiment {} with AT1 + AT5 summed over both scopes = {:.2}.",
            best.id, best.total
        );
    }
    (md, ranking)
}

/// Files written by [`emit_report`] and any warnings raised on the way.
#[derive(Clone, Debug, Default)]
pub struct ReportFiles {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn write(files: &mut ReportFiles, path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    write_file(&path, contents)?;
    files.written.push(path);
    Ok(())
}

/// Confusion matrix CSV and heatmap of `report`, skipped with a warning when
/// the matrix holds no predictions.
fn emit_confusion(
    files: &mut ReportFiles,
    out_dir: &Path,
    tag: &str,
    title: &str,
    matrix: &[Vec<f64>],
    labels: &[String],
) -> Result<()> {
    if matrix.iter().flatten().all(|&v| v == 0.0) {
        files.warnings.push(format!("{tag}: empty confusion matrix, no heatmap"));
        return Ok(());
    }
    write(files, out_dir.join(format!("cm_{tag}.csv")), confusion_csv(matrix, labels))?;
    write(files, out_dir.join(format!("cm_{tag}.svg")), confusion_svg(matrix, labels, title))
}

/// Writes `results.csv`, `results.md`, `timings.csv`, per-run confusion
/// matrices (scope "A,B") and one dimension plot per variant.
pub fn emit_report(
    results: &[RunResult],
    dims: &[(DatasetVariant, Vec<(usize, usize)>)],
    out_dir: &Path,
) -> Result<ReportFiles> {
    if results.is_empty() {
        return Err(ExpError::Validation("no results to report".into()));
    }
    let mut files = ReportFiles::default();
    write(&mut files, out_dir.join("results.csv"), rows_csv(&result_rows(results)))?;
    let scores: Vec<ExperimentScores> = results.iter().map(RunResult::scores).collect();
    let names: Vec<(u32, String)> = results.iter().map(|r| (r.id, r.name.clone())).collect();
    let (mut md, _) = scores_markdown("Dish recognition", &scores, &names);
    md.push_str("\n| Exp | Train images | Test images | Iterations | Best iteration |\n|---:|---:|---:|---:|---:|\n");
    for r in results {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            r.id, r.train_images, r.test_images, r.max_iterations, r.best_iteration
        );
    }
    write(&mut files, out_dir.join("results.md"), md)?;
    let mut timings = String::from("experiment,seconds\n");
    for r in results {
        let _ = writeln!(timings, "{},{:.3}", r.id, r.duration.as_secs_f64());
    }
    write(&mut files, out_dir.join("timings.csv"), timings)?;
    for r in results {
        if let Some(rep) = r.report(Scope::AB) {
            let title = format!("Experiment {} ({}), normalized confusion matrix", r.id, r.name);
            emit_confusion(&mut files, out_dir, &r.id.to_string(), &title, &rep.confusion, &r.class_names)?;
        }
    }
    for (v, d) in dims {
        if d.is_empty() {
            files.warnings.push(format!("{}: no readable images, no dimension plot", v.name()));
            continue;
        }
        let title = format!("Image dimensions, {}", v.name());
        write(&mut files, out_dir.join(format!("dims_{}.svg", v.name())), dims_svg(d, &title))?;
        write(&mut files, out_dir.join(format!("dims_{}.csv", v.name())), dims_csv(d))?;
    }
    Ok(files)
}

/// Table 5 style report of the category runs.
pub fn emit_category_report(results: &[RunResult], out_dir: &Path) -> Result<ReportFiles> {
    if results.is_empty() {
        return Err(ExpError::Validation("no results to report".into()));
    }
    let mut files = ReportFiles::default();
    write(&mut files, out_dir.join("category.csv"), rows_csv(&result_rows(results)))?;
    let mut md = String::from(
        "# Category recognition\n\n| Trained layers | Iterations | Best iteration | AT1 | AT5 | NAT1 | Time (s) |\n|---|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in results {
        if let Some(rep) = r.report(Scope::AB) {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {:.2} | {:.2} | {:.2} | {:.1} |",
                r.name,
                r.max_iterations,
                r.best_iteration,
                100.0 * rep.at1,
                100.0 * rep.at5,
                100.0 * rep.nat1,
                r.duration.as_secs_f64()
            );
            let title = format!("Categories, {}, normalized confusion matrix", r.name);
            emit_confusion(&mut files, out_dir, &format!("category_{}", r.name), &title, &rep.confusion, &r.class_names)?;
        }
    }
    write(&mut files, out_dir.join("category.md"), md)?;
    Ok(files)
}
