//! Tab-separated manifests: one image per line with
//! `path <TAB> dish <TAB> category <TAB> source [<TAB> split]`.
//!
//! Empty lines and lines starting with `#` are ignored; an empty or `-`
//! category means "no category label". Relative paths are resolved against
//! the manifest's directory.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use crate::error::{DataError, Result};
use crate::record::{SampleRecord, Source, Split};

/// Records plus the derived class and category indices. Classes are keyed
/// by `(source, dish)` so that the two collections never share a class, and
/// numbered contiguously in order of first appearance.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    records: Vec<SampleRecord>,
    classes: Vec<(Source, String)>,
    class_lookup: HashMap<(Source, String), usize>,
    categories: Vec<String>,
    category_lookup: HashMap<String, usize>,
    base_dir: Option<PathBuf>,
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Manifest {
    pub fn from_records(records: Vec<SampleRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if r.dish.trim().is_empty() {
                return Err(DataError::Validation(format!("record {i} ({}) has no dish label", r.image_path)));
            }
            if !seen.insert(r.image_path.as_str()) {
                return Err(DataError::Validation(format!("duplicate image path '{}'", r.image_path)));
            }
        }
        let mut m = Self {
            records,
            ..Default::default()
        };
        for r in &m.records {
            let key = (r.source, r.dish.clone());
            if !m.class_lookup.contains_key(&key) {
                m.class_lookup.insert(key.clone(), m.classes.len());
                m.classes.push(key);
            }
            if let Some(c) = &r.category {
                if !m.category_lookup.contains_key(c) {
                    m.category_lookup.insert(c.clone(), m.categories.len());
                    m.categories.push(c.clone());
                }
            }
        }
        Ok(m)
    }

    /// Same base directory, different records.
    pub fn with_records(&self, records: Vec<SampleRecord>) -> Result<Self> {
        let mut m = Self::from_records(records)?;
        m.base_dir = self.base_dir.clone();
        Ok(m)
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn base_dir(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<SampleRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[(Source, String)] {
        &self.classes
    }

    /// Printable class name, `source:dish`.
    pub fn class_name(&self, id: usize) -> String {
        let (s, d) = &self.classes[id];
        format!("{s}:{d}")
    }

    pub fn class_id(&self, r: &SampleRecord) -> usize {
        self.class_lookup[&(r.source, r.dish.clone())]
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.records.iter().map(|r| self.class_id(r)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        for r in &self.records {
            c[self.class_id(r)] += 1;
        }
        c
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_id(&self, r: &SampleRecord) -> Option<usize> {
        r.category.as_ref().map(|c| self.category_lookup[c])
    }

    pub fn resolve(&self, r: &SampleRecord) -> PathBuf {
        let p = Path::new(&r.image_path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Records that satisfy `keep`, with indices rebuilt.
    pub fn filter(&self, keep: impl Fn(&SampleRecord) -> bool) -> Self {
        self.with_records(self.records.iter().filter(|r| keep(r)).cloned().collect())
            .expect("a subset of a valid manifest is valid")
    }

    pub fn split(&self, split: Split) -> Self {
        self.filter(|r| r.split == split)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut lines_of = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| DataError::Parse {
                path: origin.to_string(),
                line: line_no,
                msg,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() < 4 || f.len() > 5 {
                return Err(err(format!("expected 4 or 5 tab-separated fields, found {}", f.len())));
            }
            if f[0].is_empty() {
                return Err(err("missing image path".into()));
            }
            if f[1].trim().is_empty() {
                return Err(err("missing dish label".into()));
            }
            let source = f[3].parse().map_err(err)?;
            let split = f.get(4).map_or(Ok(Split::Unassigned), |s| s.parse()).map_err(err)?;
            let category = match f[2] {
                "" | "-" => None,
                c => Some(c.to_string()),
            };
            if let Some(prev) = lines_of.insert(f[0].to_string(), line_no) {
                return Err(err(format!("duplicate image path '{}' (first on line {prev})", f[0])));
            }
            records.push(SampleRecord {
                image_path: f[0].to_string(),
                dish: f[1].to_string(),
                category,
                source,
                split,
            });
        }
        Self::from_records(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let m = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m.with_base_dir(base))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}",
                r.image_path,
                r.dish,
                r.category.as_deref().unwrap_or("-"),
                r.source
            ));
            if r.split != Split::Unassigned {
                out.push_str(&format!("\t{}", r.split));
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| DataError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_empty_manifest() {
        let m = Manifest::parse("", "m.tsv").unwrap();
        assert!(m.is_empty());
        assert_eq!(m.num_classes(), 0);
    }

    #[test]
    fn classes_in_first_appearance_order() {
        let m = Manifest::parse("x.ppm\tpaella\tRice\tB\ny.ppm\tsoup\t-\tB\nz.ppm\tpaella\tRice\tB\n", "m").unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.num_classes(), 2);
        assert_eq!(m.class_ids(), vec![0, 1, 0]);
        assert_eq!(m.class_name(1), "B:soup");
        assert_eq!(m.records()[1].category, None);
        assert_eq!(m.categories(), ["Rice"]);
    }

    #[test]
    fn same_dish_in_both_sources_is_two_classes() {
        let m = Manifest::parse("a\tsoup\t-\tA\nb\tsoup\t-\tB\n", "m").unwrap();
        assert_eq!(m.num_classes(), 2);
    }

    #[test]
    fn missing_dish_names_the_line() {
        let e = Manifest::parse("# header\nx.ppm\tpaella\t-\tB\ny.ppm\t\t-\tB\n", "m.tsv").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("m.tsv:3") && msg.contains("dish"), "{msg}");
    }

    #[test]
    fn duplicates_and_bad_fields_are_rejected() {
        assert!(Manifest::parse("x\ta\t-\tA\nx\tb\t-\tA\n", "m").is_err());
        assert!(Manifest::parse("x\ta\t-\tC\n", "m").is_err());
        assert!(Manifest::parse("x\ta\t-\n", "m").is_err());
        assert!(Manifest::parse("x\ta\t-\tA\tsometimes\n", "m").is_err());
        let dup = vec![SampleRecord::new("p", "d", None, Source::A); 2];
        assert!(matches!(Manifest::from_records(dup), Err(DataError::Validation(_))));
    }

    #[test]
    fn tsv_round_trip_keeps_splits() {
        let text = "x.ppm\tpaella\tRice\tB\ttest\ny.ppm\tsoup\t-\tA\n";
        let m = Manifest::parse(text, "m").unwrap();
        assert_eq!(m.records()[0].split, Split::Test);
        assert_eq!(m.to_tsv(), text);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(Manifest::load("/nonexistent/m.tsv"), Err(DataError::Io { .. })));
    }
}
