//! CSV, Markdown and SVG renderings of scores and confusion matrices.

use std::fmt::Write as _;

use crate::ranking::{ExperimentScores, Ranking, Scope};

/// Two decimals, as in published accuracy tables.
fn pct(frac: f64) -> String {
    format!("{:.2}", 100.0 * frac)
}

/// Long-form CSV: one row per experiment and scope, accuracies in percent.
pub fn results_csv(results: &[ExperimentScores]) -> String {
    let mut out = String::from("experiment,scope,at1,at5,nat1\n");
    for r in results {
        for (scope, s) in &r.scopes {
            let _ = writeln!(
                out,
                "{},\"{}\",{},{},{}",
                r.id,
                scope,
                pct(s.at1),
                pct(s.at5),
                pct(s.nat1)
            );
        }
    }
    out
}

/// Markdown table with AT1, AT5 and NAT1 columns for each scope, followed
/// by the ranking by summed AT1 + AT5.
pub fn results_markdown(results: &[ExperimentScores], ranking: Option<&Ranking>) -> String {
    let mut out = String::from("| Exp |");
    for metric in ["AT1", "AT5", "NAT1"] {
        for scope in Scope::ALL {
            let _ = write!(out, " {metric} {scope} |");
        }
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(6));
    out.push('\n');
    for r in results {
        let _ = write!(out, "| {} |", r.id);
        for metric in 0..3 {
            for scope in Scope::ALL {
                let cell = r.get(scope).map_or("-".to_string(), |s| {
                    pct([s.at1, s.at5, s.nat1][metric])
                });
                let _ = write!(out, " {cell} |");
            }
        }
        out.push('\n');
    }
    if let Some(rank) = ranking {
        out.push_str("\n| Rank | Exp | AT1 + AT5 |\n|---:|---:|---:|\n");
        for (i, e) in rank.entries.iter().enumerate() {
            let _ = writeln!(out, "| {} | {} | {:.2} |", i + 1, e.id, e.total);
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Confusion matrix as CSV with a header row of predicted labels and a
/// leading column of true labels.
pub fn confusion_csv(matrix: &[Vec<f64>], labels: &[String]) -> String {
    let mut out = String::from("true\\predicted");
    for l in labels {
        out.push(',');
        out.push_str(&csv_field(l));
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(matrix) {
        out.push_str(&csv_field(label));
        for v in row {
            let _ = write!(out, ",{v:.6}");
        }
        out.push('\n');
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Heatmap of a row-normalised confusion matrix; darker cells are larger.
pub fn confusion_svg(matrix: &[Vec<f64>], labels: &[String], title: &str) -> String {
    let n = matrix.len();
    let cell = if n <= 16 { 32 } else { (512 / n).max(4) };
    let margin = 140;
    let side = margin + n * cell + 20;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="16" font-size="13" text-anchor="middle">{}</text>"#,
        side / 2,
        xml_escape(title)
    );
    for (i, row) in matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let shade = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)"><title>{:.3}</title></rect>"#,
                margin + j * cell,
                margin + i * cell,
                v
            );
        }
    }
    if cell >= 10 {
        for (i, l) in labels.iter().enumerate().take(n) {
            let c = margin + i * cell + cell / 2;
            let l = xml_escape(l);
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{l}</text>"#,
                margin - 4,
                c
            );
            let _ = writeln!(
                out,
                r#"<text transform="translate({c},{}) rotate(-60)" text-anchor="start">{l}</text>"#,
                margin - 4
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::{aggregate_experiment_scores, published_table4};

    #[test]
    fn csv_has_two_rows_per_experiment() {
        let t = published_table4();
        let csv = results_csv(&t);
        assert_eq!(csv.lines().count(), 1 + 12);
        assert!(csv.contains("1,\"A,B\",68.07,89.53,59.08"));
    }

    #[test]
    fn markdown_lists_ranking() {
        let t = published_table4();
        let r = aggregate_experiment_scores(&t).unwrap();
        let md = results_markdown(&t, Some(&r));
        assert!(md.contains("| 1 | 1 | 289.44 |"));
        assert!(md.contains("| 3 | 6 | 288.09 |"));
        assert!(md.starts_with("| Exp | AT1 A,B | AT1 B | AT5 A,B |"));
    }

    #[test]
    fn confusion_renderings() {
        let m = vec![vec![1.0, 0.0], vec![0.25, 0.75]];
        let labels = vec!["a,b".to_string(), "<c>".to_string()];
        let csv = confusion_csv(&m, &labels);
        assert_eq!(csv.lines().nth(2).unwrap(), "<c>,0.250000,0.750000");
        assert!(csv.starts_with("true\\predicted,\"a,b\",<c>"));
        let svg = confusion_svg(&m, &labels, "t & u");
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("&lt;c&gt;") && svg.contains("t &amp; u"));
    }
}
