//! Per-category and per-class counts and the image-size distribution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use dishnet_sr::PnmHeader;
use rayon::prelude::*;

use crate::manifest::Manifest;

pub const NO_CATEGORY: &str = "(none)";

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryRow {
    pub category: String,
    pub dishes: usize,
    /// Share of all dishes, in percent.
    pub dish_percent: f64,
    pub images: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    /// Sorted by image count (descending), then name.
    pub categories: Vec<CategoryRow>,
    /// `(class name, image count)` in class-id order.
    pub classes: Vec<(String, usize)>,
    pub total_images: usize,
    pub total_dishes: usize,
}

pub fn dataset_stats(m: &Manifest) -> DatasetStats {
    let mut dishes: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    let mut images: BTreeMap<&str, usize> = BTreeMap::new();
    for r in m.records() {
        let cat = r.category.as_deref().unwrap_or(NO_CATEGORY);
        dishes.entry(cat).or_default().insert(m.class_id(r));
        *images.entry(cat).or_default() += 1;
    }
    let total_dishes = m.num_classes();
    let mut categories: Vec<CategoryRow> = dishes
        .into_iter()
        .map(|(cat, set)| CategoryRow {
            category: cat.to_string(),
            dishes: set.len(),
            dish_percent: 100.0 * set.len() as f64 / total_dishes.max(1) as f64,
            images: images[cat],
        })
        .collect();
    categories.sort_by(|a, b| b.images.cmp(&a.images).then_with(|| a.category.cmp(&b.category)));
    let counts = m.class_counts();
    DatasetStats {
        categories,
        classes: (0..m.num_classes())
            .map(|c| (m.class_name(c), counts[c]))
            .collect(),
        total_images: m.len(),
        total_dishes,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl DatasetStats {
    /// Category table: `category,dishes,dish_percent,images`, then a total row.
    pub fn categories_csv(&self) -> String {
        let mut out = String::from("category,dishes,dish_percent,images\n");
        for r in &self.categories {
            let _ = writeln!(
                out,
                "{},{},{:.2},{}",
                csv_field(&r.category),
                r.dishes,
                r.dish_percent,
                r.images
            );
        }
        let pct: f64 = self.categories.iter().map(|r| r.dish_percent).sum();
        let _ = writeln!(out, "Total,{},{pct:.2},{}", self.total_dishes, self.total_images);
        out
    }

    pub fn classes_csv(&self) -> String {
        let mut out = String::from("class,images\n");
        for (name, n) in &self.classes {
            let _ = writeln!(out, "{},{n}", csv_field(name));
        }
        out
    }
}

/// `(path, width, height)` for every image, or `(path, error)`.
pub fn image_dimensions(m: &Manifest) -> Vec<(String, Result<(usize, usize), String>)> {
    m.records()
        .par_iter()
        .map(|r| {
            let dims = PnmHeader::read(m.resolve(r))
                .map(|h| (h.width, h.height))
                .map_err(|e| e.to_string());
            (r.image_path.clone(), dims)
        })
        .collect()
}

pub fn dims_csv(dims: &[(usize, usize)]) -> String {
    let mut out = String::from("width,height\n");
    for (w, h) in dims {
        let _ = writeln!(out, "{w},{h}");
    }
    out
}

/// Scatter plot of image sizes (width on x, height on y).
pub fn dims_svg(dims: &[(usize, usize)], title: &str) -> String {
    let (size, margin) = (400.0, 50.0);
    let max = dims
        .iter()
        .map(|&(w, h)| w.max(h))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let scale = |v: usize| v as f64 / max * size;
    let mut s = String::new();
    let total = size + 2.0 * margin;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        total / 2.0,
        xml_escape(title)
    );
    let (x0, y0) = (margin, margin + size);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {m} V{y0} H{x1}" stroke="black" fill="none"/>"#,
        m = margin,
        x1 = margin + size
    );
    for k in 0..=4 {
        let v = max * k as f64 / 4.0;
        let off = size * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{v:.0}</text>"#,
            x0 + off,
            y0 + 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.0}</text>"#,
            x0 - 5.0,
            y0 - off + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">width</text>"#,
        total / 2.0,
        total - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {})">height</text>"#,
        total / 2.0,
        total / 2.0
    );
    for &(w, h) in dims {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="2" fill="steelblue" fill-opacity="0.5"/>"#,
            x0 + scale(w),
            y0 - scale(h)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
