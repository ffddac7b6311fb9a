//! Metrics against a direct recount on random prediction logs, plus
//! algebraic properties.

use std::collections::BTreeMap;
use std::time::Instant;

use dishnet_metrics::{
    accuracy_top_k, compute_report, confusion_matrix, normalized_accuracy_top1, PredictionLog,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A log together with its raw rows, so the oracle never reads the log type.
fn random_log(rng: &mut ChaCha8Rng) -> (PredictionLog, usize, Vec<(usize, Vec<usize>)>) {
    let classes = rng.gen_range(1..=50);
    let n = rng.gen_range(1..=1000);
    let mut log = PredictionLog::new(classes);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let truth = rng.gen_range(0..classes);
        let mut ranked: Vec<usize> = (0..classes).collect();
        ranked.shuffle(rng);
        // bias towards correct predictions so accuracies are not all tiny
        if rng.gen_bool(0.4) {
            let at = ranked.iter().position(|&c| c == truth).unwrap();
            ranked.swap(0, at);
        }
        log.push(truth, ranked.clone()).unwrap();
        rows.push((truth, ranked));
    }
    (log, classes, rows)
}

/// Position of the truth in each ranking, counted by hand.
fn oracle_topk(rows: &[(usize, Vec<usize>)], k: usize) -> (usize, usize) {
    let mut hits = 0;
    for (truth, ranked) in rows {
        let mut pos = 0;
        while ranked[pos] != *truth {
            pos += 1;
        }
        if pos < k {
            hits += 1;
        }
    }
    (hits, rows.len())
}

/// Per-class hit ratios as reduced integer fractions, summed exactly.
fn oracle_nat1(rows: &[(usize, Vec<usize>)]) -> f64 {
    let mut per: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (truth, ranked) in rows {
        let e = per.entry(*truth).or_default();
        e.1 += 1;
        if ranked[0] == *truth {
            e.0 += 1;
        }
    }
    let ratios: Vec<f64> = per.values().map(|&(h, n)| h as f64 / n as f64).collect();
    ratios.iter().sum::<f64>() / ratios.len() as f64
}

fn oracle_confusion(rows: &[(usize, Vec<usize>)], classes: usize) -> Vec<Vec<f64>> {
    let mut m = Vec::new();
    for i in 0..classes {
        let in_row: Vec<&(usize, Vec<usize>)> = rows.iter().filter(|r| r.0 == i).collect();
        let mut row = Vec::new();
        for j in 0..classes {
            let c = in_row.iter().filter(|r| r.1[0] == j).count();
            row.push(if in_row.is_empty() {
                0.0
            } else {
                c as f64 / in_row.len() as f64
            });
        }
        m.push(row);
    }
    m
}

#[test]
fn metrics_match_recount_on_200_random_logs() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let (log, classes, rows) = random_log(&mut rng);
        for k in [1, 5.min(classes), classes] {
            let (h, n) = oracle_topk(&rows, k);
            assert_eq!(accuracy_top_k(&log, k).unwrap(), h as f64 / n as f64, "case {case} k {k}");
        }
        assert_eq!(normalized_accuracy_top1(&log).unwrap(), oracle_nat1(&rows), "case {case}");
        assert_eq!(confusion_matrix(&log, true), oracle_confusion(&rows, classes), "case {case}");
    }
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn tsv_round_trip_preserves_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (log, _, _) = random_log(&mut rng);
        let back = PredictionLog::parse_tsv(&log.to_tsv()).unwrap();
        assert_eq!(back, log);
        assert_eq!(compute_report(&back).unwrap(), compute_report(&log).unwrap());
    }
}

fn arb_log() -> impl Strategy<Value = (usize, Vec<(usize, Vec<usize>)>)> {
    (2usize..12).prop_flat_map(|c| {
        let row = (0..c, Just((0..c).collect::<Vec<_>>()).prop_shuffle());
        (Just(c), prop::collection::vec(row, 1..60))
    })
}

fn build(classes: usize, rows: &[(usize, Vec<usize>)]) -> PredictionLog {
    let mut log = PredictionLog::new(classes);
    for (t, r) in rows {
        log.push(*t, r.clone()).unwrap();
    }
    log
}

proptest! {
    #[test]
    fn top1_never_exceeds_top5((c, rows) in arb_log()) {
        let log = build(c, &rows);
        let k = 5.min(c);
        prop_assert!(accuracy_top_k(&log, 1).unwrap() <= accuracy_top_k(&log, k).unwrap());
    }

    #[test]
    fn entry_order_is_irrelevant((c, rows) in arb_log(), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = compute_report(&build(c, &rows)).unwrap();
        let b = compute_report(&build(c, &shuffled)).unwrap();
        prop_assert_eq!(a.at5, b.at5);
        prop_assert_eq!(a.confusion, b.confusion);
        prop_assert!((a.at1 - b.at1).abs() < 1e-12 && (a.nat1 - b.nat1).abs() < 1e-12);
    }

    #[test]
    fn nat1_ignores_class_frequency((c, rows) in arb_log(), pick in any::<prop::sample::Index>()) {
        let class = rows[pick.index(rows.len())].0;
        let mut more = rows.clone();
        more.extend(rows.iter().filter(|r| r.0 == class).cloned());
        let a = normalized_accuracy_top1(&build(c, &rows)).unwrap();
        let b = normalized_accuracy_top1(&build(c, &more)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn confusion_diagonal_mean_is_nat1((c, rows) in arb_log()) {
        let log = build(c, &rows);
        let cm = confusion_matrix(&log, true);
        let present: Vec<usize> = (0..c).filter(|&i| rows.iter().any(|r| r.0 == i)).collect();
        let diag = present.iter().map(|&i| cm[i][i]).sum::<f64>() / present.len() as f64;
        prop_assert!((diag - normalized_accuracy_top1(&log).unwrap()).abs() < 1e-12);
        for &i in &present {
            prop_assert!((cm[i].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
