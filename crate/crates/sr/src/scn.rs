//! Sparse-coding network (SCN): a LISTA encoder unrolled for `k` iterations
//! followed by a linear decoder that emits high-resolution patches.
//!
//! Patches are processed with their mean removed; the mean is added back to
//! the decoded patch, so flat regions are reproduced exactly.

use std::path::Path;

use dishnet_core::{checkpoint, Graph, NodeId, ParamStore, Real, Sgd, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SrError};
use crate::raster::{rgb_to_ycbcr, ycbcr_to_rgb, RasterImage};
use crate::resize::{patch_upscale_operator, resize_plane};

/// Smallest `f >= 1` with `f * min(width, height) >= target`.
pub fn upscale_factor(width: usize, height: usize, target: usize) -> usize {
    let short = width.min(height).max(1);
    target.div_ceil(short).max(1)
}

/// `sign(a) * max(|a| - theta, 0)`, element-wise.
pub fn soft_threshold(a: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    if a.len() != theta.len() {
        return Err(SrError::Dimension(format!(
            "{} values but {} thresholds",
            a.len(),
            theta.len()
        )));
    }
    if let Some(i) = theta.iter().position(|&t| !(t > 0.0)) {
        return Err(SrError::Contract(format!(
            "threshold {i} is {}, must be > 0",
            theta[i]
        )));
    }
    Ok(a.iter()
        .zip(theta)
        .map(|(&x, &t)| x.signum() * (x.abs() - t).max(0.0))
        .collect())
}

/// The same map written as `theta * h_1(a / theta)` with the unit shrinkage
/// `h_1(u) = sign(u) * (|u| - 1)_+`.
pub fn soft_threshold_scaled(a: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    soft_threshold(a, theta)?;
    Ok(a.iter()
        .zip(theta)
        .map(|(&x, &t)| {
            let u = x / t;
            t * u.signum() * (u.abs() - 1.0).max(0.0)
        })
        .collect())
}

/// One `(low-resolution, high-resolution)` training example, samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub lr: Vec<f32>,
    pub hr: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScnConfig {
    pub patch_size: usize,
    pub atoms: usize,
    pub iterations: usize,
    pub factor: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    pub seed: u64,
}

impl Default for ScnConfig {
    fn default() -> Self {
        Self {
            patch_size: 8,
            atoms: 64,
            iterations: 3,
            factor: 2,
            epochs: 5,
            batch_size: 32,
            learning_rate: 2.0,
            momentum: 0.9,
            seed: 0,
        }
    }
}

/// Learned SCN weights for one upscale factor. Immutable once trained and
/// safe to share across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct ScnParams {
    pub patch_size: usize,
    pub factor: usize,
    pub iterations: usize,
    /// `[atoms, patch_size^2]`
    pub w_encode: Tensor<f32>,
    /// `[atoms, atoms]`
    pub s_recurrent: Tensor<f32>,
    /// `[atoms]`; thresholds are `exp(log_theta)` and hence always positive.
    pub log_theta: Tensor<f32>,
    /// `[(patch_size * factor)^2, atoms]`
    pub d_decode: Tensor<f32>,
}

const INIT_THRESHOLD: f64 = 1e-3;

impl ScnParams {
    /// Starts from an encoder that passes the (mean-free) patch through almost
    /// unchanged and a decoder equal to bicubic patch upscaling, so the
    /// untrained network already behaves like bicubic interpolation. Atoms
    /// beyond `patch_size^2` start with small random encoders and silent
    /// decoders.
    pub fn init(cfg: &ScnConfig) -> Result<Self> {
        let (p, f, m) = (cfg.patch_size, cfg.factor, cfg.atoms);
        if p == 0 || f == 0 || m == 0 {
            return Err(SrError::Contract(format!(
                "patch size {p}, factor {f} and atom count {m} must be positive"
            )));
        }
        let n = p * p;
        let hr = (p * f) * (p * f);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut w = vec![0f32; m * n];
        for (i, row) in w.chunks_mut(n).enumerate() {
            if i < n {
                row[i] = 1.0;
            } else {
                row.iter_mut()
                    .for_each(|v| *v = rng.gen_range(-0.1..0.1));
            }
        }
        let bicubic = patch_upscale_operator(p, f);
        let mut d = vec![0f32; hr * m];
        for (row, op) in d.chunks_mut(m).zip(bicubic.chunks(n)) {
            let k = n.min(m);
            row[..k].copy_from_slice(&op[..k]);
        }
        Ok(Self {
            patch_size: p,
            factor: f,
            iterations: cfg.iterations,
            w_encode: Tensor::new(&[m, n], w)?,
            s_recurrent: Tensor::zeros(&[m, m]),
            log_theta: Tensor::full(&[m], (INIT_THRESHOLD.ln()) as f32),
            d_decode: Tensor::new(&[hr, m], d)?,
        })
    }

    pub fn atoms(&self) -> usize {
        self.w_encode.shape()[0]
    }

    pub fn lr_len(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn hr_side(&self) -> usize {
        self.patch_size * self.factor
    }

    pub fn hr_len(&self) -> usize {
        self.hr_side() * self.hr_side()
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.log_theta
            .data()
            .iter()
            .map(|&l| (l as f64).exp())
            .collect()
    }

    /// Checks shape consistency between the four weight tensors.
    pub fn validate(&self) -> Result<()> {
        let m = self.atoms();
        let ok = self.patch_size > 0
            && self.factor > 0
            && self.w_encode.shape() == [m, self.lr_len()]
            && self.s_recurrent.shape() == [m, m]
            && self.log_theta.shape() == [m]
            && self.d_decode.shape() == [self.hr_len(), m];
        if !ok {
            return Err(SrError::Contract(format!(
                "inconsistent SCN weights: W {:?}, S {:?}, theta {:?}, D {:?} for patch {} factor {}",
                self.w_encode.shape(),
                self.s_recurrent.shape(),
                self.log_theta.shape(),
                self.d_decode.shape(),
                self.patch_size,
                self.factor
            )));
        }
        if self.log_theta.data().iter().any(|v| !v.is_finite()) {
            return Err(SrError::Contract("non-finite threshold".into()));
        }
        Ok(())
    }

    /// Decodes a batch of low-resolution patches (rows of `lr`) into
    /// high-resolution patches (rows of the result).
    pub fn predict_patches(&self, lr: &[f32]) -> Result<Vec<f32>> {
        let n = self.lr_len();
        if lr.len() % n != 0 {
            return Err(SrError::Dimension(format!(
                "{} samples is not a whole number of {n}-sample patches",
                lr.len()
            )));
        }
        let (m, hr) = (self.atoms(), self.hr_len());
        let theta: Vec<f32> = self.thresholds().iter().map(|&t| t as f32).collect();
        let rows = lr.len() / n;
        let mut out = vec![0f32; rows * hr];
        const CHUNK: usize = 256;
        out.par_chunks_mut(CHUNK * hr)
            .zip(lr.par_chunks(CHUNK * n))
            .for_each(|(out, lr)| {
                let b = lr.len() / n;
                let mut x = lr.to_vec();
                let means: Vec<f32> = x
                    .chunks_mut(n)
                    .map(|row| {
                        let mu = row.iter().sum::<f32>() / n as f32;
                        row.iter_mut().for_each(|v| *v -= mu);
                        mu
                    })
                    .collect();
                let mut a = vec![0f32; b * m];
                f32::gemm(b, n, m, &x, false, self.w_encode.data(), true, 0.0, &mut a);
                let mut z = shrink(&a, &theta);
                for _ in 0..self.iterations {
                    let mut pre = a.clone();
                    f32::gemm(b, m, m, &z, false, self.s_recurrent.data(), true, 1.0, &mut pre);
                    z = shrink(&pre, &theta);
                }
                f32::gemm(b, m, hr, &z, false, self.d_decode.data(), true, 0.0, out);
                for (row, mu) in out.chunks_mut(hr).zip(means) {
                    row.iter_mut().for_each(|v| *v += mu);
                }
            });
        Ok(out)
    }

    /// Mean squared error over every high-resolution sample of `pairs`.
    pub fn mse(&self, pairs: &[PatchPair]) -> Result<f64> {
        check_pairs(pairs, self.patch_size, self.factor)?;
        let lr: Vec<f32> = pairs.iter().flat_map(|p| p.lr.iter().copied()).collect();
        let pred = self.predict_patches(&lr)?;
        let err: f64 = pred
            .chunks(self.hr_len())
            .zip(pairs)
            .map(|(y, p)| {
                y.iter()
                    .zip(&p.hr)
                    .map(|(&a, &b)| ((a - b) as f64).powi(2))
                    .sum::<f64>()
            })
            .sum();
        Ok(err / (pairs.len() * self.hr_len()) as f64)
    }

    fn to_store(&self) -> ParamStore<f32> {
        let mut s = ParamStore::new();
        s.push("scn.w_encode", self.w_encode.clone().with_grad());
        s.push("scn.s_recurrent", self.s_recurrent.clone().with_grad());
        s.push("scn.log_theta", self.log_theta.clone().with_grad());
        s.push("scn.d_decode", self.d_decode.clone().with_grad());
        s
    }

    fn load_store(&mut self, s: &ParamStore<f32>) {
        let take = |k: usize| {
            let mut t = s.get(k).clone();
            t.requires_grad = false;
            t.zero_grad();
            t
        };
        self.w_encode = take(0);
        self.s_recurrent = take(1);
        self.log_theta = take(2);
        self.d_decode = take(3);
    }

    /// Serialises into the tensor checkpoint format. Geometry is stored as a
    /// three-element `scn.meta` tensor `[patch_size, factor, iterations]`.
    pub fn to_named(&self) -> Vec<(String, Tensor<f32>)> {
        let meta = Tensor::new(
            &[3],
            vec![
                self.patch_size as f32,
                self.factor as f32,
                self.iterations as f32,
            ],
        )
        .expect("fixed shape");
        let mut out = vec![("scn.meta".to_string(), meta)];
        out.extend(self.to_store().to_named_f32());
        out
    }

    pub fn from_named(tensors: &[(String, Tensor<f32>)]) -> Result<Self> {
        let get = |name: &str| {
            tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| {
                    let mut t = t.clone();
                    t.requires_grad = false;
                    t.zero_grad();
                    t
                })
                .ok_or_else(|| SrError::Contract(format!("checkpoint lacks '{name}'")))
        };
        let meta = get("scn.meta")?;
        let m = meta.data();
        if m.len() != 3 || m.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
            return Err(SrError::Contract(format!("bad scn.meta {m:?}")));
        }
        let params = Self {
            patch_size: m[0] as usize,
            factor: m[1] as usize,
            iterations: m[2] as usize,
            w_encode: get("scn.w_encode")?,
            s_recurrent: get("scn.s_recurrent")?,
            log_theta: get("scn.log_theta")?,
            d_decode: get("scn.d_decode")?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::save(path, &self.to_named())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_named(&checkpoint::load(path)?)
    }
}

fn shrink(a: &[f32], theta: &[f32]) -> Vec<f32> {
    let m = theta.len();
    a.iter()
        .enumerate()
        .map(|(i, &x)| {
            let t = theta[i % m];
            if x > t {
                x - t
            } else if x < -t {
                x + t
            } else {
                0.0
            }
        })
        .collect()
}

/// LISTA encoding of one patch: `z_0 = h(W x)`, `z_{t+1} = h(W x + S z_t)`.
/// The patch is used as given (no mean removal).
pub fn lista_encode(patch: &[f64], params: &ScnParams) -> Result<Vec<f64>> {
    let n = params.lr_len();
    if patch.len() != n {
        return Err(SrError::Dimension(format!(
            "patch of {} samples, encoder expects {n}",
            patch.len()
        )));
    }
    let m = params.atoms();
    let theta = params.thresholds();
    let w = params.w_encode.data();
    let s = params.s_recurrent.data();
    let a: Vec<f64> = (0..m)
        .map(|i| (0..n).map(|j| w[i * n + j] as f64 * patch[j]).sum())
        .collect();
    let mut z = soft_threshold(&a, &theta)?;
    for _ in 0..params.iterations {
        let pre: Vec<f64> = (0..m)
            .map(|i| a[i] + (0..m).map(|j| s[i * m + j] as f64 * z[j]).sum::<f64>())
            .collect();
        z = soft_threshold(&pre, &theta)?;
    }
    Ok(z)
}

/// Graph nodes of the four SCN weight tensors.
#[derive(Clone, Copy, Debug)]
pub struct ScnNodes {
    pub w_encode: NodeId,
    pub s_recurrent: NodeId,
    pub log_theta: NodeId,
    pub d_decode: NodeId,
}

/// Mean squared reconstruction loss of a batch, recorded in `g`.
/// `lr` is `[B, patch^2]` and `hr` is `[B, (patch*factor)^2]`, both mean-free.
pub fn scn_loss<T: Real>(
    g: &mut Graph<T>,
    w: &ScnNodes,
    lr: NodeId,
    hr: NodeId,
    iterations: usize,
) -> dishnet_core::Result<NodeId> {
    let a = g.matvec(w.w_encode, lr)?;
    let theta = g.exp(w.log_theta);
    let mut z = g.soft_threshold(a, theta)?;
    for _ in 0..iterations {
        let s = g.matvec(w.s_recurrent, z)?;
        let pre = g.add(a, s)?;
        z = g.soft_threshold(pre, theta)?;
    }
    let y = g.matvec(w.d_decode, z)?;
    let diff = g.sub(y, hr)?;
    let sq = g.mul(diff, diff)?;
    Ok(g.mean(sq))
}

fn check_pairs(pairs: &[PatchPair], patch: usize, factor: usize) -> Result<()> {
    let (n, hr) = (patch * patch, (patch * factor).pow(2));
    if let Some(i) = pairs
        .iter()
        .position(|p| p.lr.len() != n || p.hr.len() != hr)
    {
        return Err(SrError::Dimension(format!(
            "pair {i} has {}/{} samples, expected {n}/{hr} for patch {patch} factor {factor}",
            pairs[i].lr.len(),
            pairs[i].hr.len()
        )));
    }
    Ok(())
}

/// Trained parameters with the training-set loss before training and after
/// every epoch.
#[derive(Clone, Debug)]
pub struct TrainedScn {
    pub params: ScnParams,
    pub losses: Vec<f64>,
}

/// Minibatch SGD on the mean squared error through the unrolled encoder.
///
/// After each epoch the full training loss is re-evaluated; an epoch that
/// would increase it is rolled back and the learning rate halved, so the
/// reported losses never increase.
pub fn train_scn(pairs: &[PatchPair], cfg: &ScnConfig) -> Result<TrainedScn> {
    if pairs.is_empty() {
        return Err(SrError::Contract("no training pairs".into()));
    }
    if cfg.batch_size == 0 {
        return Err(SrError::Contract("batch size must be positive".into()));
    }
    check_pairs(pairs, cfg.patch_size, cfg.factor)?;
    let mut params = ScnParams::init(cfg)?;
    let centred: Vec<PatchPair> = pairs.iter().map(centre).collect();
    let mut best = params.mse(pairs)?;
    let mut losses = vec![best];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5c4e);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        let mut store = params.to_store();
        let mut opt = Sgd::new(lr, cfg.momentum);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            sgd_step(&mut store, &mut opt, &centred, batch, params.iterations)?;
        }
        let mut candidate = params.clone();
        candidate.load_store(&store);
        let loss = candidate.mse(pairs)?;
        if loss.is_finite() && loss <= best {
            params = candidate;
            best = loss;
        } else {
            lr *= 0.5;
            log::info!("epoch {epoch}: loss {loss:.3e} > {best:.3e}, rolled back, lr -> {lr}");
        }
        log::debug!("epoch {epoch}: training mse {best:.6e}");
        losses.push(best);
    }
    Ok(TrainedScn { params, losses })
}

fn centre(p: &PatchPair) -> PatchPair {
    let mu = p.lr.iter().sum::<f32>() / p.lr.len() as f32;
    PatchPair {
        lr: p.lr.iter().map(|v| v - mu).collect(),
        hr: p.hr.iter().map(|v| v - mu).collect(),
    }
}

fn sgd_step(
    store: &mut ParamStore<f32>,
    opt: &mut Sgd<f32>,
    pairs: &[PatchPair],
    batch: &[usize],
    iterations: usize,
) -> Result<()> {
    let mut g = Graph::new();
    let nodes = ScnNodes {
        w_encode: g.param(0, store.get(0)),
        s_recurrent: g.param(1, store.get(1)),
        log_theta: g.param(2, store.get(2)),
        d_decode: g.param(3, store.get(3)),
    };
    let (n, hr) = (pairs[0].lr.len(), pairs[0].hr.len());
    let x: Vec<f32> = batch.iter().flat_map(|&i| pairs[i].lr.iter().copied()).collect();
    let y: Vec<f32> = batch.iter().flat_map(|&i| pairs[i].hr.iter().copied()).collect();
    let x = g.constant(&[batch.len(), n], x)?;
    let y = g.constant(&[batch.len(), hr], y)?;
    let loss = scn_loss(&mut g, &nodes, x, y, iterations)?;
    let grads = g.backward(loss)?;
    for (key, grad) in grads.params() {
        store.get_mut(key).set_grad(grad.to_vec())?;
    }
    opt.step(store)?;
    store.zero_grad();
    Ok(())
}

/// Upscales `image` by `factor`: luminance through the SCN on every
/// overlapping patch (stride 1, overlaps averaged), chroma by bicubic.
pub fn super_resolve(image: &RasterImage, factor: usize, params: &ScnParams) -> Result<RasterImage> {
    if factor < 2 {
        return Err(SrError::Contract(format!(
            "super-resolution factor must be at least 2, got {factor}"
        )));
    }
    params.validate()?;
    if params.factor != factor {
        return Err(SrError::Contract(format!(
            "parameters were trained for factor {}, not {factor}",
            params.factor
        )));
    }
    let (w, h) = (image.width(), image.height());
    let (ow, oh) = (w * factor, h * factor);
    let [y, cb, cr] = rgb_to_ycbcr(image);
    let y_hr = super_resolve_plane(&y, w, h, params)?;
    let planes = if image.channels() == 1 {
        vec![y_hr]
    } else {
        let cb = resize_plane(&cb, w, h, ow, oh);
        let cr = resize_plane(&cr, w, h, ow, oh);
        ycbcr_to_rgb(&y_hr, &cb, &cr).to_vec()
    };
    RasterImage::from_planes(ow, oh, &planes)
}

/// SCN upscaling of a single `[0, 1]` plane. Planes smaller than one patch
/// are edge-padded first and cropped afterwards.
pub fn super_resolve_plane(plane: &[f32], w: usize, h: usize, params: &ScnParams) -> Result<Vec<f32>> {
    let (p, f) = (params.patch_size, params.factor);
    let (pw, ph) = (w.max(p), h.max(p));
    let padded: Vec<f32> = (0..ph)
        .flat_map(|y| (0..pw).map(move |x| (x.min(w - 1), y.min(h - 1))))
        .map(|(x, y)| plane[y * w + x])
        .collect();
    let (rows, cols) = (ph - p + 1, pw - p + 1);
    let (hw, side) = (pw * f, p * f);
    const BAND: usize = 8;
    let bands: Vec<(usize, Vec<f32>)> = (0..rows.div_ceil(BAND))
        .into_par_iter()
        .map(|b| -> Result<(usize, Vec<f32>)> {
            let r0 = b * BAND;
            let r1 = (r0 + BAND).min(rows);
            let mut lr = Vec::with_capacity((r1 - r0) * cols * p * p);
            for r in r0..r1 {
                for c in 0..cols {
                    for dy in 0..p {
                        let s = (r + dy) * pw + c;
                        lr.extend_from_slice(&padded[s..s + p]);
                    }
                }
            }
            let pred = params.predict_patches(&lr)?;
            let band_rows = (r1 - r0 - 1) * f + side;
            let mut acc = vec![0f32; band_rows * hw];
            for (i, patch) in pred.chunks(side * side).enumerate() {
                let (r, c) = (i / cols, i % cols);
                for dy in 0..side {
                    let row = &mut acc[(r * f + dy) * hw + c * f..][..side];
                    row.iter_mut()
                        .zip(&patch[dy * side..(dy + 1) * side])
                        .for_each(|(a, &v)| *a += v);
                }
            }
            Ok((r0 * f, acc))
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0f32; ph * f * hw];
    for (start, acc) in bands {
        sum[start * hw..start * hw + acc.len()]
            .iter_mut()
            .zip(&acc)
            .for_each(|(s, &a)| *s += a);
    }
    let cover = |i: usize, n_pos: usize| {
        // number of patch positions whose high-res span contains sample i
        let lo = (i + 1).saturating_sub(side).div_ceil(f);
        let hi = (i / f).min(n_pos - 1);
        (hi + 1 - lo) as f32
    };
    let (ow, oh) = (w * f, h * f);
    let mut out = Vec::with_capacity(ow * oh);
    for yy in 0..oh {
        let cy = cover(yy, rows);
        for xx in 0..ow {
            out.push(sum[yy * hw + xx] / (cy * cover(xx, cols)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_rule() {
        assert_eq!(upscale_factor(402, 125, 256), 3);
        assert_eq!(upscale_factor(512, 512, 256), 1);
        assert_eq!(upscale_factor(250, 250, 256), 2);
        assert_eq!(upscale_factor(256, 1000, 256), 1);
        assert_eq!(upscale_factor(1, 1, 256), 256);
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[0.0], &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(soft_threshold(&[2.0], &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(soft_threshold(&[-0.3, -2.0], &[0.5, 0.5]).unwrap(), vec![0.0, -1.5]);
        assert_eq!(
            soft_threshold_scaled(&[-0.3, -2.0], &[0.5, 0.5]).unwrap(),
            vec![0.0, -1.5]
        );
        assert!(matches!(soft_threshold(&[1.0], &[0.0]), Err(SrError::Contract(_))));
        assert!(matches!(soft_threshold(&[1.0], &[1.0, 2.0]), Err(SrError::Dimension(_))));
    }

    fn toy(iterations: usize) -> ScnParams {
        let t = |shape: &[usize], v: Vec<f32>| Tensor::new(shape, v).unwrap();
        ScnParams {
            patch_size: 1,
            factor: 1,
            iterations,
            w_encode: t(&[2, 1], vec![1.0, -2.0]),
            s_recurrent: t(&[2, 2], vec![0.0, 0.5, -0.25, 0.0]),
            log_theta: t(&[2], vec![0.1f32.ln(), 0.2f32.ln()]),
            d_decode: t(&[1, 2], vec![1.0, 1.0]),
        }
    }

    #[test]
    fn lista_matches_hand_unrolled_recurrence() {
        let params = toy(2);
        let x = 0.8;
        let th = params.thresholds();
        let h = |v: f64, t: f64| v.signum() * (v.abs() - t).max(0.0);
        let a = [x, -2.0 * x];
        let z0 = [h(a[0], th[0]), h(a[1], th[1])];
        let z1 = [h(a[0] + 0.5 * z0[1], th[0]), h(a[1] - 0.25 * z0[0], th[1])];
        let z2 = [h(a[0] + 0.5 * z1[1], th[0]), h(a[1] - 0.25 * z1[0], th[1])];
        let got = lista_encode(&[x], &params).unwrap();
        for (g, w) in got.iter().zip(z2) {
            assert!((g - w).abs() < 1e-6, "{got:?} vs {z2:?}");
        }
        assert_eq!(
            lista_encode(&[x], &toy(0)).unwrap(),
            soft_threshold(&a, &th).unwrap()
        );
    }

    #[test]
    fn zero_encoder_gives_zero_code() {
        let mut params = toy(3);
        params.w_encode = Tensor::zeros(&[2, 1]);
        assert_eq!(lista_encode(&[5.0], &params).unwrap(), vec![0.0, 0.0]);
        assert!(lista_encode(&[1.0, 2.0], &params).is_err());
    }

    #[test]
    fn large_thresholds_silence_every_atom() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = ScnConfig {
            patch_size: 3,
            atoms: 12,
            ..Default::default()
        };
        let mut params = ScnParams::init(&cfg).unwrap();
        params.w_encode.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        params.s_recurrent.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        params.log_theta = Tensor::full(&[12], 100f32.ln());
        let patch: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..1.0)).collect();
        assert!(lista_encode(&patch, &params).unwrap().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn untrained_network_is_close_to_bicubic() {
        let cfg = ScnConfig::default();
        let params = ScnParams::init(&cfg).unwrap();
        let patch: Vec<f32> = (0..64).map(|i| ((i * 37) % 64) as f32 / 64.0).collect();
        let got = params.predict_patches(&patch).unwrap();
        let want = resize_plane(&patch, 8, 8, 16, 16);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 0.01, "{g} vs {w}");
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let cfg = ScnConfig {
            patch_size: 2,
            atoms: 4,
            epochs: 0,
            ..Default::default()
        };
        let pairs = vec![PatchPair {
            lr: vec![0.1; 4],
            hr: vec![0.2; 16],
        }];
        let t = train_scn(&pairs, &cfg).unwrap();
        assert_eq!(t.params, ScnParams::init(&cfg).unwrap());
        assert_eq!(t.losses.len(), 1);
        assert!(matches!(train_scn(&[], &cfg), Err(SrError::Contract(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let params = ScnParams::init(&ScnConfig {
            factor: 3,
            ..Default::default()
        })
        .unwrap();
        let back = ScnParams::from_named(&params.to_named()).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn coverage_counts_match_brute_force() {
        // every sample of a constant plane must come back unchanged, which
        // only happens when the overlap counts are right
        let cfg = ScnConfig {
            patch_size: 3,
            atoms: 9,
            factor: 2,
            ..Default::default()
        };
        let params = ScnParams::init(&cfg).unwrap();
        for (w, h) in [(3, 3), (5, 4), (1, 2), (7, 3)] {
            let plane = vec![0.4f32; w * h];
            let up = super_resolve_plane(&plane, w, h, &params).unwrap();
            assert_eq!(up.len(), 4 * w * h);
            assert!(up.iter().all(|v| (v - 0.4).abs() < 1e-6), "{w}x{h}");
        }
    }
}
