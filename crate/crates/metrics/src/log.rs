//! Prediction logs: for every evaluated image, its true class and the
//! predicted classes ranked by descending score.
//!
//! TSV form: an optional `#classes<TAB>N` header, then one
//! `true_class<TAB>id,id,...` line per entry.

use std::fmt::Write as _;

use crate::error::{MetricsError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub truth: usize,
    pub ranked: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionLog {
    num_classes: usize,
    entries: Vec<Entry>,
}

impl PredictionLog {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            entries: Vec::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, truth: usize, ranked: Vec<usize>) -> Result<()> {
        let n = self.num_classes;
        if truth >= n {
            return Err(MetricsError::Validation(format!("true class {truth} >= {n} classes")));
        }
        if ranked.is_empty() {
            return Err(MetricsError::Validation("empty prediction ranking".into()));
        }
        let mut seen = vec![false; n];
        for &p in &ranked {
            if p >= n {
                return Err(MetricsError::Validation(format!("predicted class {p} >= {n} classes")));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(MetricsError::Validation(format!("class {p} ranked twice")));
            }
        }
        self.entries.push(Entry { truth, ranked });
        Ok(())
    }

    /// Ranking of class ids by descending score; ties keep the lower id first.
    pub fn rank_scores<T: PartialOrd>(scores: &[T]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx
    }

    /// Keeps the entries whose position satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(usize, &Entry) -> bool) -> Self {
        Self {
            num_classes: self.num_classes,
            entries: self
                .entries
                .iter()
                .enumerate()
                .filter(|(i, e)| keep(*i, e))
                .map(|(_, e)| e.clone())
                .collect(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("#classes\t{}\n", self.num_classes);
        for e in &self.entries {
            let ranked: Vec<String> = e.ranked.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{}\t{}", e.truth, ranked.join(","));
        }
        out
    }

    /// Parses the TSV form. Without a header, the class count is one more
    /// than the largest id mentioned.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut declared = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |msg: String| MetricsError::Parse { line: line_no, msg };
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#classes\t") {
                declared = Some(rest.trim().parse::<usize>().map_err(|e| err(format!("class count: {e}")))?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (truth, ranked) = line
                .split_once('\t')
                .ok_or_else(|| err("expected true_class<TAB>ranked ids".into()))?;
            let truth: usize = truth.trim().parse().map_err(|e| err(format!("true class: {e}")))?;
            let ranked = ranked
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| err(format!("ranked id '{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push((line_no, truth, ranked));
        }
        let n = declared.unwrap_or_else(|| {
            rows.iter()
                .flat_map(|(_, t, r)| std::iter::once(*t).chain(r.iter().copied()))
                .max()
                .map_or(0, |m| m + 1)
        });
        let mut log = Self::new(n);
        for (line, truth, ranked) in rows {
            log.push(truth, ranked).map_err(|e| MetricsError::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_rankings() {
        let mut log = PredictionLog::new(3);
        assert!(log.push(3, vec![0]).is_err());
        assert!(log.push(0, vec![0, 0]).is_err());
        assert!(log.push(0, vec![5]).is_err());
        assert!(log.push(0, vec![]).is_err());
        assert!(log.push(0, vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn ranking_ties_prefer_lower_ids() {
        assert_eq!(PredictionLog::rank_scores(&[0.1, 0.5, 0.5, 0.2]), vec![1, 2, 3, 0]);
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let mut log = PredictionLog::new(4);
        log.push(1, vec![1, 3, 0]).unwrap();
        log.push(3, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(PredictionLog::parse_tsv(&log.to_tsv()).unwrap(), log);
        let headerless = PredictionLog::parse_tsv("0\t2,1\n").unwrap();
        assert_eq!(headerless.num_classes(), 3);
        let e = PredictionLog::parse_tsv("0\t1\n1 2\n").unwrap_err();
        assert!(e.to_string().starts_with("line 2"), "{e}");
        assert!(PredictionLog::parse_tsv("#classes\t2\n0\t1,1\n").is_err());
    }
}
