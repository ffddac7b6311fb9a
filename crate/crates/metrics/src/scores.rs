use crate::error::{MetricsError, Result};
use crate::log::PredictionLog;

fn require_entries(log: &PredictionLog, what: &str) -> Result<()> {
    if log.is_empty() {
        return Err(MetricsError::Contract(format!("{what} of an empty prediction log is undefined")));
    }
    Ok(())
}

/// Fraction of entries whose true class is among the first `k` predictions.
pub fn accuracy_top_k(log: &PredictionLog, k: usize) -> Result<f64> {
    require_entries(log, "top-k accuracy")?;
    if k == 0 {
        return Err(MetricsError::Contract("k must be at least 1".into()));
    }
    if let Some(i) = log.entries().iter().position(|e| e.ranked.len() < k) {
        return Err(MetricsError::Contract(format!(
            "entry {i} ranks {} classes, top-{k} needs {k}",
            log.entries()[i].ranked.len()
        )));
    }
    let hits = log
        .entries()
        .iter()
        .filter(|e| e.ranked[..k].contains(&e.truth))
        .count();
    Ok(hits as f64 / log.len() as f64)
}

/// Number of entries per true class.
pub fn per_class_counts(log: &PredictionLog) -> Vec<usize> {
    let mut n = vec![0; log.num_classes()];
    for e in log.entries() {
        n[e.truth] += 1;
    }
    n
}

/// Unweighted mean of per-class top-1 accuracy over classes that occur.
pub fn normalized_accuracy_top1(log: &PredictionLog) -> Result<f64> {
    require_entries(log, "normalized accuracy")?;
    let counts = per_class_counts(log);
    let mut hits = vec![0usize; log.num_classes()];
    for e in log.entries() {
        if e.ranked[0] == e.truth {
            hits[e.truth] += 1;
        }
    }
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    let sum: f64 = present
        .iter()
        .map(|&c| hits[c] as f64 / counts[c] as f64)
        .sum();
    Ok(sum / present.len() as f64)
}

/// `N x N` matrix of (true class, top-1 prediction) counts; with `normalize`
/// every non-empty row is divided by its count.
pub fn confusion_matrix(log: &PredictionLog, normalize: bool) -> Vec<Vec<f64>> {
    let n = log.num_classes();
    let mut m = vec![vec![0f64; n]; n];
    for e in log.entries() {
        m[e.truth][e.ranked[0]] += 1.0;
    }
    if normalize {
        for row in &mut m {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub at1: f64,
    /// Top-5 accuracy; with fewer than five classes, top-N (always 1).
    pub at5: f64,
    pub nat1: f64,
    /// Row-normalised confusion matrix.
    pub confusion: Vec<Vec<f64>>,
    pub per_class_counts: Vec<usize>,
}

pub fn compute_report(log: &PredictionLog) -> Result<MetricsReport> {
    let k5 = 5.min(log.num_classes());
    Ok(MetricsReport {
        at1: accuracy_top_k(log, 1)?,
        at5: accuracy_top_k(log, k5)?,
        nat1: normalized_accuracy_top1(log)?,
        confusion: confusion_matrix(log, true),
        per_class_counts: per_class_counts(log),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(n: usize, rows: &[(usize, &[usize])]) -> PredictionLog {
        let mut l = PredictionLog::new(n);
        for (t, r) in rows {
            l.push(*t, r.to_vec()).unwrap();
        }
        l
    }

    #[test]
    fn accuracy_examples() {
        let perfect = log(3, &[(0, &[0, 1, 2]), (2, &[2, 0, 1])]);
        assert_eq!(accuracy_top_k(&perfect, 1).unwrap(), 1.0);
        let l = log(3, &[(0, &[0, 1, 2]), (1, &[1, 0, 2]), (2, &[2, 0, 1]), (2, &[0, 1, 2])]);
        assert_eq!(accuracy_top_k(&l, 1).unwrap(), 0.75);
        assert_eq!(accuracy_top_k(&l, 3).unwrap(), 1.0);
        assert!(accuracy_top_k(&l, 4).is_err());
        assert!(accuracy_top_k(&PredictionLog::new(3), 1).is_err());
    }

    #[test]
    fn nat1_weighs_classes_equally() {
        // class 0: 3/3 correct, class 1: 0/1 correct
        let l = log(2, &[(0, &[0, 1]), (0, &[0, 1]), (0, &[0, 1]), (1, &[0, 1])]);
        assert_eq!(normalized_accuracy_top1(&l).unwrap(), 0.5);
        assert_eq!(accuracy_top_k(&l, 1).unwrap(), 0.75);
        assert!(normalized_accuracy_top1(&PredictionLog::new(2)).is_err());
    }

    #[test]
    fn confusion_examples() {
        let l = log(2, &[(0, &[1, 0])]);
        let cm = confusion_matrix(&l, true);
        assert_eq!(cm, vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        let perfect = log(3, &[(0, &[0]), (1, &[1]), (2, &[2]), (2, &[2])]);
        let cm = confusion_matrix(&perfect, true);
        for (i, row) in cm.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn report_handles_few_classes() {
        let l = log(2, &[(0, &[0, 1]), (1, &[0, 1])]);
        let r = compute_report(&l).unwrap();
        assert_eq!((r.at1, r.at5, r.nat1), (0.5, 1.0, 0.5));
        assert_eq!(r.per_class_counts, vec![1, 1]);
    }
}
