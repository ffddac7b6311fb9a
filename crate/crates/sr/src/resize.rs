//! Separable bicubic resampling (Keys kernel, a = -0.5) with edge clamping.
//! Downscaling widens the kernel by the scale factor to avoid aliasing.

use crate::error::{Result, SrError};
use crate::raster::RasterImage;

const A: f64 = -0.5;

fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// For every output sample, the contributing input indices and weights.
#[derive(Clone, Debug)]
pub struct AxisWeights {
    taps: Vec<Vec<(usize, f32)>>,
}

impl AxisWeights {
    pub fn new(input: usize, output: usize) -> Self {
        let scale = input as f64 / output as f64;
        let stretch = scale.max(1.0);
        let support = 2.0 * stretch;
        let taps = (0..output)
            .map(|i| {
                let centre = (i as f64 + 0.5) * scale - 0.5;
                let lo = (centre - support).floor() as i64;
                let hi = (centre + support).ceil() as i64;
                let mut raw: Vec<(usize, f64)> = Vec::new();
                for j in lo..=hi {
                    let w = cubic((j as f64 - centre) / stretch);
                    if w == 0.0 {
                        continue;
                    }
                    let idx = j.clamp(0, input as i64 - 1) as usize;
                    match raw.iter_mut().find(|(k, _)| *k == idx) {
                        Some(t) => t.1 += w,
                        None => raw.push((idx, w)),
                    }
                }
                let total: f64 = raw.iter().map(|t| t.1).sum();
                raw.into_iter()
                    .map(|(k, w)| (k, (w / total) as f32))
                    .collect()
            })
            .collect();
        Self { taps }
    }

    pub fn output_len(&self) -> usize {
        self.taps.len()
    }

    pub fn taps(&self, i: usize) -> &[(usize, f32)] {
        &self.taps[i]
    }
}

/// Resizes a row-major `h x w` plane to `out_h x out_w`.
pub fn resize_plane(plane: &[f32], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f32> {
    assert_eq!(plane.len(), w * h, "plane size");
    let xs = AxisWeights::new(w, out_w);
    let ys = AxisWeights::new(h, out_h);
    let mut tmp = vec![0f32; h * out_w];
    for (src, dst) in plane.chunks(w).zip(tmp.chunks_mut(out_w)) {
        for (x, d) in dst.iter_mut().enumerate() {
            *d = xs.taps(x).iter().map(|&(k, wt)| wt * src[k]).sum();
        }
    }
    let mut out = vec![0f32; out_h * out_w];
    for (y, dst) in out.chunks_mut(out_w).enumerate() {
        for &(k, wt) in ys.taps(y) {
            let src = &tmp[k * out_w..(k + 1) * out_w];
            dst.iter_mut().zip(src).for_each(|(d, &s)| *d += wt * s);
        }
    }
    out
}

/// Bicubic resize of every channel to exactly `width x height`.
pub fn resize(img: &RasterImage, width: usize, height: usize) -> Result<RasterImage> {
    if width == 0 || height == 0 {
        return Err(SrError::Dimension(format!(
            "cannot resize to {width}x{height}"
        )));
    }
    if (width, height) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    let planes: Vec<Vec<f32>> = (0..img.channels())
        .map(|c| resize_plane(&img.plane(c), img.width(), img.height(), width, height))
        .collect();
    RasterImage::from_planes(width, height, &planes)
}

/// Dense `(n*f)^2 x n^2` matrix of bicubic upscaling an isolated `n x n` patch.
pub fn patch_upscale_operator(n: usize, factor: usize) -> Vec<f32> {
    let axis = AxisWeights::new(n, n * factor);
    let m = n * factor;
    let mut op = vec![0f32; m * m * n * n];
    for oy in 0..m {
        for ox in 0..m {
            let row = &mut op[(oy * m + ox) * n * n..(oy * m + ox + 1) * n * n];
            for &(iy, wy) in axis.taps(oy) {
                for &(ix, wx) in axis.taps(ox) {
                    row[iy * n + ix] += wy * wx;
                }
            }
        }
    }
    op
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_interpolates_samples() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        // partition of unity at any offset
        for t in [0.1, 0.25, 0.5, 0.9] {
            let s: f64 = (-2..=2).map(|k| cubic(k as f64 + t)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for (i, o) in [(8, 24), (512, 230), (230, 460), (3, 1), (1, 5)] {
            let ax = AxisWeights::new(i, o);
            for k in 0..o {
                let s: f32 = ax.taps(k).iter().map(|t| t.1).sum();
                assert!((s - 1.0).abs() < 1e-5, "{i}->{o} at {k}: {s}");
            }
        }
    }

    #[test]
    fn constant_planes_stay_constant() {
        let p = vec![0.3f32; 7 * 5];
        for v in resize_plane(&p, 7, 5, 20, 3) {
            assert!((v - 0.3).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_ramp_is_reproduced_in_the_interior() {
        let w = 16;
        let p: Vec<f32> = (0..w).map(|x| x as f32).collect();
        let up = resize_plane(&p, w, 1, 2 * w, 1);
        // output sample i sits at input coordinate (i + 0.5) / 2 - 0.5
        for (i, &v) in up.iter().enumerate().skip(4).take(2 * w - 8) {
            let want = (i as f32 + 0.5) / 2.0 - 0.5;
            assert!((v - want).abs() < 1e-4, "{i}: {v} vs {want}");
        }
    }

    #[test]
    fn same_size_is_identity() {
        let img = RasterImage::new(2, 2, 1, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(resize(&img, 2, 2).unwrap(), img);
    }

    #[test]
    fn patch_operator_matches_plane_resize() {
        let n = 4;
        let patch: Vec<f32> = (0..n * n).map(|i| (i * 7 % 11) as f32 / 11.0).collect();
        let op = patch_upscale_operator(n, 3);
        let direct = resize_plane(&patch, n, n, 3 * n, 3 * n);
        for (r, &d) in op.chunks(n * n).zip(&direct) {
            let v: f32 = r.iter().zip(&patch).map(|(a, b)| a * b).sum();
            assert!((v - d).abs() < 1e-5);
        }
    }
}
