//! Dataset-level transformations. Every function is a pure, deterministic
//! function of its inputs (and seed); record order is preserved.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DataError, Result};
use crate::manifest::Manifest;
use crate::record::{Source, Split};

/// Drops every class with fewer than `threshold` images.
pub fn filter_min_images(m: &Manifest, threshold: usize) -> Result<Manifest> {
    if threshold == 0 {
        return Err(DataError::Validation("threshold must be at least 1".into()));
    }
    let counts = m.class_counts();
    Ok(m.filter(|r| counts[m.class_id(r)] >= threshold))
}

/// Concatenates `a` (tagged source A) and `b` (tagged source B). Class ids
/// of `b` follow those of `a`. Paths are made independent of either
/// manifest's directory when the two directories differ.
pub fn merge_datasets(a: &Manifest, b: &Manifest) -> Result<Manifest> {
    let same_base = a.base_dir() == b.base_dir();
    let mut records = Vec::with_capacity(a.len() + b.len());
    for (m, source) in [(a, Source::A), (b, Source::B)] {
        for r in m.records() {
            let mut r = r.clone();
            if !same_base {
                r.image_path = m.resolve(&r).display().to_string();
            }
            r.source = source;
            records.push(r);
        }
    }
    let merged = Manifest::from_records(records)?;
    Ok(match (same_base, a.base_dir()) {
        (true, Some(dir)) => merged.with_base_dir(dir),
        _ => merged,
    })
}

fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class as u64);
    rng
}

/// Keeps at most `cap` images per class, chosen uniformly without
/// replacement. Classes at or under the cap are untouched.
pub fn balance_classes(m: &Manifest, cap: usize, seed: u64) -> Result<Manifest> {
    if cap == 0 {
        return Err(DataError::Validation("cap must be at least 1".into()));
    }
    let ids = m.class_ids();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m.num_classes()];
    for (i, &c) in ids.iter().enumerate() {
        members[c].push(i);
    }
    let mut keep = vec![false; m.len()];
    for (class, idx) in members.iter().enumerate() {
        if idx.len() <= cap {
            idx.iter().for_each(|&i| keep[i] = true);
        } else {
            let mut rng = class_rng(seed, class);
            for j in index::sample(&mut rng, idx.len(), cap) {
                keep[idx[j]] = true;
            }
        }
    }
    let records = m
        .records()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    m.with_records(records)
}

/// Splits `n` items by `ratios` with largest-remainder rounding; ties in the
/// remainder go to the earlier split.
pub fn largest_remainder(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| r * n as f64);
    let mut counts = exact.map(|e| e.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| {
        let (fi, fj) = (exact[i] - exact[i].floor(), exact[j] - exact[j].floor());
        fj.partial_cmp(&fi).expect("finite ratios").then(i.cmp(&j))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

pub fn validate_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::Validation(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    Ok(())
}

/// Stratified train/val/test assignment. Each class is shuffled with its own
/// seeded stream and cut by [`largest_remainder`]. Classes with fewer than
/// three images go entirely to training; a warning names each of them.
pub fn split_dataset(m: &Manifest, ratios: [f64; 3], seed: u64) -> Result<(Manifest, Vec<String>)> {
    validate_ratios(ratios)?;
    let ids = m.class_ids();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m.num_classes()];
    for (i, &c) in ids.iter().enumerate() {
        members[c].push(i);
    }
    let mut split = vec![Split::Train; m.len()];
    let mut warnings = Vec::new();
    for (class, idx) in members.iter_mut().enumerate() {
        if idx.len() < 3 {
            warnings.push(format!(
                "class {} has only {} image(s); all assigned to train",
                m.class_name(class),
                idx.len()
            ));
            continue;
        }
        idx.shuffle(&mut class_rng(seed, class));
        let [n_train, n_val, _] = largest_remainder(idx.len(), ratios);
        for (k, &i) in idx.iter().enumerate() {
            split[i] = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let records = m
        .records()
        .iter()
        .zip(split)
        .map(|(r, s)| {
            let mut r = r.clone();
            r.split = s;
            r
        })
        .collect();
    Ok((m.with_records(records)?, warnings))
}
