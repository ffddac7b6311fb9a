//! Raw convolution and pooling kernels on channel-first buffers.

use crate::real::Real;

/// Output extent of a sliding window: `floor((len + 2*pad - window) / stride) + 1`.
pub fn window_out(len: usize, window: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if stride == 0 || window == 0 || window > padded {
        return None;
    }
    Some((padded - window) / stride + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn patch_len(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn out_len(&self) -> usize {
        self.out_h * self.out_w
    }

    /// True when the column matrix equals the input buffer itself.
    pub fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    #[inline]
    fn source(&self, oy: usize, ox: usize, i: usize, j: usize) -> Option<(usize, usize)> {
        let y = (oy * self.stride + i).checked_sub(self.pad)?;
        let x = (ox * self.stride + j).checked_sub(self.pad)?;
        (y < self.height && x < self.width).then_some((y, x))
    }
}

/// Unfolds `input` into a `(C*kh*kw) x (out_h*out_w)` column matrix.
pub fn im2col<T: Real>(input: &[T], g: &ConvGeom) -> Vec<T> {
    let ohw = g.out_len();
    let mut cols = vec![T::zero(); g.patch_len() * ohw];
    for c in 0..g.channels {
        let plane = &input[c * g.height * g.width..(c + 1) * g.height * g.width];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * ohw;
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        if let Some((y, x)) = g.source(oy, ox, i, j) {
                            cols[row + oy * g.out_w + ox] = plane[y * g.width + x];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input grid.
pub fn col2im<T: Real>(cols: &[T], g: &ConvGeom, out: &mut [T]) {
    let ohw = g.out_len();
    for c in 0..g.channels {
        let base = c * g.height * g.width;
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * ohw;
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        if let Some((y, x)) = g.source(oy, ox, i, j) {
                            let dst = &mut out[base + y * g.width + x];
                            *dst = *dst + cols[row + oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Max pooling; returns the pooled values and, for each output, the flat
/// input index of the first maximal element in row-major window order.
pub fn maxpool<T: Real>(input: &[T], g: &ConvGeom) -> (Vec<T>, Vec<usize>) {
    let n = g.channels * g.out_len();
    let mut values = Vec::with_capacity(n);
    let mut argmax = Vec::with_capacity(n);
    for c in 0..g.channels {
        let base = c * g.height * g.width;
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let mut best: Option<(T, usize)> = None;
                for i in 0..g.kh {
                    for j in 0..g.kw {
                        if let Some((y, x)) = g.source(oy, ox, i, j) {
                            let idx = base + y * g.width + x;
                            let v = input[idx];
                            if best.map_or(true, |(b, _)| v > b) {
                                best = Some((v, idx));
                            }
                        }
                    }
                }
                // pad < window guarantees every window touches the input
                let (v, idx) = best.expect("window overlaps input");
                values.push(v);
                argmax.push(idx);
            }
        }
    }
    (values, argmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_formula() {
        assert_eq!(window_out(8, 2, 2, 0), Some(4));
        assert_eq!(window_out(256, 3, 1, 1), Some(256));
        assert_eq!(window_out(7, 3, 2, 1), Some(4));
        assert_eq!(window_out(2, 5, 1, 1), None);
        assert_eq!(window_out(4, 3, 0, 0), None);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = ConvGeom {
            channels: 2,
            height: 5,
            width: 4,
            kh: 3,
            kw: 2,
            stride: 2,
            pad: 1,
            out_h: window_out(5, 3, 2, 1).unwrap(),
            out_w: window_out(4, 2, 2, 1).unwrap(),
        };
        let x: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let cols = im2col(&x, &g);
        let y: Vec<f64> = (0..cols.len())
            .map(|i| ((i * 5) % 13) as f64 - 6.0)
            .collect();
        let mut back = vec![0.0; 40];
        col2im(&y, &g, &mut back);
        // <im2col(x), y> == <x, col2im(y)>
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }
}
