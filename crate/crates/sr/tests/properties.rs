//! Randomised properties of the image container, resampling and shrinkage.

use dishnet_sr::scn::soft_threshold_scaled;
use dishnet_sr::{histogram, resize, soft_threshold, RasterImage};
use proptest::prelude::*;

fn image() -> impl Strategy<Value = RasterImage> {
    (1usize..12, 1usize..12, prop::bool::ANY).prop_flat_map(|(w, h, rgb)| {
        let c = if rgb { 3 } else { 1 };
        prop::collection::vec(any::<u8>(), w * h * c)
            .prop_map(move |px| RasterImage::new(w, h, c, px).unwrap())
    })
}

proptest! {
    #[test]
    fn pnm_round_trip_is_bit_exact(img in image()) {
        let bytes = img.encode_pnm();
        let back = RasterImage::decode_pnm(&bytes).unwrap();
        prop_assert_eq!(&back, &img);
        prop_assert_eq!(back.encode_pnm(), bytes);
    }

    #[test]
    fn pnm_files_round_trip(img in image()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        img.write_ppm(&path).unwrap();
        prop_assert_eq!(RasterImage::read_ppm(&path).unwrap(), img);
    }

    #[test]
    fn histogram_counts_every_pixel(img in image()) {
        for h in histogram(&img) {
            prop_assert_eq!(h.iter().sum::<u64>() as usize, img.width() * img.height());
        }
    }

    #[test]
    fn resize_hits_requested_size(img in image(), w in 1usize..40, h in 1usize..40) {
        let out = resize(&img, w, h).unwrap();
        prop_assert_eq!((out.width(), out.height(), out.channels()), (w, h, img.channels()));
    }

    #[test]
    fn shrinkage_laws(a in -10.0f64..10.0, t in 1e-6f64..5.0) {
        let y = soft_threshold(&[a], &[t]).unwrap()[0];
        let y_neg = soft_threshold(&[-a], &[t]).unwrap()[0];
        prop_assert_eq!(y_neg, -y);
        prop_assert_eq!(y == 0.0, a.abs() <= t);
        if a.abs() > t {
            prop_assert_eq!(y.abs(), a.abs() - t);
        }
        let z = soft_threshold_scaled(&[a], &[t]).unwrap()[0];
        prop_assert!((y - z).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}
