//! Procedural test imagery with sharp edges, used to train and evaluate
//! super-resolution without external data.

use rand::Rng;

use crate::resize::resize_plane;
use crate::scn::PatchPair;

/// A `[0, 1]` plane of overlapping rectangles, discs and stripe patches on
/// a smooth gradient background.
pub fn synthetic_plane<R: Rng>(width: usize, height: usize, rng: &mut R) -> Vec<f32> {
    let (w, h) = (width as f32, height as f32);
    let (gx, gy, g0) = (
        rng.gen_range(-0.4..0.4),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(0.3..0.7),
    );
    let mut plane: Vec<f32> = (0..height)
        .flat_map(|y| (0..width).map(move |x| g0 + gx * x as f32 / w + gy * y as f32 / h))
        .collect();
    let shapes = rng.gen_range(6..14);
    for _ in 0..shapes {
        let v: f32 = rng.gen_range(0.0..1.0);
        let (cx, cy) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let r = rng.gen_range(0.05..0.3) * w.min(h);
        let kind = rng.gen_range(0..3);
        let period = rng.gen_range(2.0..8.0);
        let angle: f32 = rng.gen_range(0.0..std::f32::consts::PI);
        let (s, c) = angle.sin_cos();
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
                let inside = match kind {
                    0 => dx.abs() < r && dy.abs() < 0.6 * r,
                    1 => dx * dx + dy * dy < r * r,
                    _ => {
                        dx * dx + dy * dy < r * r
                            && ((dx * c + dy * s) / period).rem_euclid(2.0) < 1.0
                    }
                };
                if inside {
                    plane[y * width + x] = v;
                }
            }
        }
    }
    plane.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
    plane
}

/// Pairs every low-resolution patch (taken at `stride`) of the bicubic
/// `1 / factor` reduction of `hr` with the high-resolution region it covers.
/// `width` and `height` must be multiples of `factor`.
pub fn patch_pairs_from_plane(
    hr: &[f32],
    width: usize,
    height: usize,
    factor: usize,
    patch: usize,
    stride: usize,
) -> Vec<PatchPair> {
    assert!(width % factor == 0 && height % factor == 0, "size not divisible by factor");
    let (lw, lh) = (width / factor, height / factor);
    let lr = resize_plane(hr, width, height, lw, lh);
    let side = patch * factor;
    let mut out = Vec::new();
    if lw < patch || lh < patch {
        return out;
    }
    for y in (0..=lh - patch).step_by(stride.max(1)) {
        for x in (0..=lw - patch).step_by(stride.max(1)) {
            let lr_patch = (0..patch)
                .flat_map(|dy| lr[(y + dy) * lw + x..][..patch].iter().copied())
                .collect();
            let hr_patch = (0..side)
                .flat_map(|dy| hr[(y * factor + dy) * width + x * factor..][..side].iter().copied())
                .collect();
            out.push(PatchPair {
                lr: lr_patch,
                hr: hr_patch,
            });
        }
    }
    out
}

/// `count` patch pairs drawn from freshly generated synthetic planes.
pub fn synthetic_patch_pairs<R: Rng>(count: usize, factor: usize, patch: usize, rng: &mut R) -> Vec<PatchPair> {
    let side = 12 * patch * factor;
    let mut pairs = Vec::with_capacity(count);
    while pairs.len() < count {
        let plane = synthetic_plane(side, side, rng);
        let mut fresh = patch_pairs_from_plane(&plane, side, side, factor, patch, patch / 2 + 1);
        // keep a random subset so that one plane does not dominate
        let keep = (count - pairs.len()).min(fresh.len() / 2 + 1);
        for _ in 0..keep {
            let i = rng.gen_range(0..fresh.len());
            pairs.push(fresh.swap_remove(i));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pairs_have_consistent_sizes_and_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plane = synthetic_plane(48, 36, &mut rng);
        assert!(plane.iter().all(|v| (0.0..=1.0).contains(v)));
        let pairs = patch_pairs_from_plane(&plane, 48, 36, 3, 4, 2);
        // low-res is 16x12: x in 0..=12 step 2 (7), y in 0..=8 step 2 (5)
        assert_eq!(pairs.len(), 35);
        assert!(pairs.iter().all(|p| p.lr.len() == 16 && p.hr.len() == 144));
        assert_eq!(pairs[1].hr[0], plane[6]);
    }

    #[test]
    fn synthetic_pairs_are_deterministic() {
        let a = synthetic_patch_pairs(50, 2, 8, &mut ChaCha8Rng::seed_from_u64(4));
        let b = synthetic_patch_pairs(50, 2, 8, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
    }
}
