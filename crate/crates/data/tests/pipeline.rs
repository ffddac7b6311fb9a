//! Dataset stages over randomly shaped manifests and on real files.

use std::collections::HashSet;

use dishnet_data::synthetic::{generate_dataset, SyntheticConfig};
use dishnet_data::{
    apply_variant, balance_classes, filter_min_images, split_dataset, DatasetVariant, Manifest, SampleRecord,
    Source, Split,
};
use dishnet_sr::{RasterImage, ScnConfig, ScnParams};
use proptest::prelude::*;

fn manifest(counts: &[usize]) -> Manifest {
    let mut recs = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        let source = if c % 2 == 0 { Source::A } else { Source::B };
        for i in 0..n {
            recs.push(SampleRecord::new(format!("{c}/{i}.ppm"), format!("d{c}"), None, source));
        }
    }
    Manifest::from_records(recs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn balance_respects_the_cap(counts in prop::collection::vec(1usize..40, 1..12), cap in 1usize..30, seed in any::<u64>()) {
        let m = manifest(&counts);
        let b = balance_classes(&m, cap, seed).unwrap();
        prop_assert_eq!(b.num_classes(), m.num_classes());
        for (before, after) in m.class_counts().iter().zip(b.class_counts()) {
            prop_assert_eq!(after, (*before).min(cap));
        }
        prop_assert_eq!(balance_classes(&b, cap, seed).unwrap(), b.clone());
        prop_assert_eq!(balance_classes(&m, cap, seed).unwrap(), b);
    }

    #[test]
    fn split_partitions_exactly(counts in prop::collection::vec(1usize..60, 1..10), seed in any::<u64>()) {
        let m = manifest(&counts);
        let (s, _) = split_dataset(&m, [0.8, 0.1, 0.1], seed).unwrap();
        prop_assert_eq!(s.len(), m.len());
        let parts: Vec<Manifest> = Split::ASSIGNED.iter().map(|&sp| s.split(sp)).collect();
        prop_assert_eq!(parts.iter().map(Manifest::len).sum::<usize>(), m.len());
        let mut seen = HashSet::new();
        for p in &parts {
            for r in p.records() {
                prop_assert!(seen.insert(r.image_path.clone()));
            }
        }
        let original: HashSet<_> = m.records().iter().map(|r| r.image_path.clone()).collect();
        prop_assert_eq!(seen, original);
        let (again, _) = split_dataset(&s, [0.8, 0.1, 0.1], seed).unwrap();
        prop_assert_eq!(again, s);
    }

    #[test]
    fn filter_is_idempotent(counts in prop::collection::vec(1usize..30, 0..10), t in 1usize..20) {
        let m = manifest(&counts);
        let once = filter_min_images(&m, t).unwrap();
        prop_assert_eq!(filter_min_images(&once, t).unwrap(), once.clone());
        prop_assert!(once.class_counts().iter().all(|&c| c >= t));
    }
}

#[test]
fn variants_materialise_into_a_mirrored_tree() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = SyntheticConfig {
        classes: 4,
        images_per_class: 3,
        a_sides: (40, 40),
        b_sides: (20, 30),
        ..Default::default()
    };
    let m = generate_dataset(data.path(), &cfg).unwrap();

    let halved = apply_variant(&m, DatasetVariant::AHalved, None, 36, out.path()).unwrap();
    assert!(halved.errors.is_empty());
    assert_eq!(halved.transformed, 6);
    for r in halved.manifest.records() {
        let img = RasterImage::read_ppm(halved.manifest.resolve(r)).unwrap();
        if r.source == Source::A {
            assert_eq!((img.width(), img.height()), (20, 20));
        }
    }
    let reloaded = Manifest::load(out.path().join("a_halved/manifest.tsv")).unwrap();
    assert_eq!(reloaded, halved.manifest);

    let scn = ScnParams::init(&ScnConfig {
        patch_size: 4,
        atoms: 16,
        ..Default::default()
    })
    .unwrap();
    // corrupt one source-B image: the run must continue and report it
    let victim = m.records().iter().find(|r| r.source == Source::B).unwrap();
    std::fs::write(m.resolve(victim), b"not an image").unwrap();
    let sr = apply_variant(&m, DatasetVariant::BSuperResolved, Some(&scn), 36, out.path()).unwrap();
    assert_eq!(sr.errors.len(), 1);
    assert_eq!(sr.errors[0].0, victim.image_path);
    assert_eq!(sr.manifest.len(), m.len() - 1);
    for r in sr.manifest.records().iter().filter(|r| r.source == Source::B) {
        let img = RasterImage::read_ppm(sr.manifest.resolve(r)).unwrap();
        assert!(img.width().min(img.height()) >= 36, "{}x{}", img.width(), img.height());
    }

    let orig = apply_variant(&m, DatasetVariant::Original, None, 36, out.path()).unwrap();
    assert_eq!(orig.manifest, m);
    assert!(!out.path().join("original").exists());
    assert!(apply_variant(&m, DatasetVariant::BSuperResolved, None, 36, out.path()).is_err());
}
