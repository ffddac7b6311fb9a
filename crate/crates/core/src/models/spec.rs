//! Declarative network descriptions and their plain-text config form.

use std::fmt::Write as _;

use super::inception::{validate_branches, BranchKind, InceptionBranchSpec};
use crate::error::{CoreError, Result};
use crate::kernels::window_out;

pub const DEFAULT_AUX_DISCOUNT: f64 = 0.3;
pub const DEFAULT_HIDDEN: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        window: usize,
        stride: usize,
        padding: usize,
    },
    Inception([InceptionBranchSpec; 4]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Global average pool followed by one linear classifier.
    AvgPoolLinear,
    /// Flatten followed by three linear layers (two hidden ReLU layers).
    Mlp { hidden: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxHeadSpec {
    /// Index of the block whose output feeds the auxiliary classifier.
    pub after_block: usize,
    pub discount: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub input: [usize; 3],
    pub blocks: Vec<Block>,
    pub aux_heads: Vec<AuxHeadSpec>,
    pub num_classes: usize,
    pub head: Head,
}

impl ModelSpec {
    /// Three inception modules behind a small stem, one auxiliary head on the
    /// second module.
    pub fn toy_inception(num_classes: usize, input: [usize; 3]) -> Self {
        use InceptionBranchSpec as B;
        Self {
            input,
            blocks: vec![
                Block::Conv {
                    out_channels: 16,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                },
                Block::MaxPool {
                    window: 3,
                    stride: 2,
                    padding: 1,
                },
                Block::Inception([
                    B::conv1x1(8),
                    B::conv3x3(8, 16),
                    B::conv5x5(4, 8),
                    B::pool_proj(8),
                ]),
                Block::Inception([
                    B::conv1x1(12),
                    B::conv3x3(12, 24),
                    B::conv5x5(4, 8),
                    B::pool_proj(8),
                ]),
                Block::MaxPool {
                    window: 3,
                    stride: 2,
                    padding: 1,
                },
                Block::Inception([
                    B::conv1x1(16),
                    B::conv3x3(16, 32),
                    B::conv5x5(4, 8),
                    B::pool_proj(8),
                ]),
            ],
            aux_heads: vec![AuxHeadSpec {
                after_block: 3,
                discount: DEFAULT_AUX_DISCOUNT,
            }],
            num_classes,
            head: Head::AvgPoolLinear,
        }
    }

    /// The full nine-module layout with the original branch widths
    /// (22 weighted layers deep), for 224x224 inputs.
    pub fn googlenet(num_classes: usize) -> Self {
        use InceptionBranchSpec as B;
        let inc = |a, r3, b, r5, c, d| {
            Block::Inception([
                B::conv1x1(a),
                B::conv3x3(r3, b),
                B::conv5x5(r5, c),
                B::pool_proj(d),
            ])
        };
        let pool = Block::MaxPool {
            window: 3,
            stride: 2,
            padding: 1,
        };
        Self {
            input: [3, 224, 224],
            blocks: vec![
                Block::Conv {
                    out_channels: 64,
                    kernel: 7,
                    stride: 2,
                    padding: 3,
                },
                pool.clone(),
                Block::Conv {
                    out_channels: 64,
                    kernel: 1,
                    stride: 1,
                    padding: 0,
                },
                Block::Conv {
                    out_channels: 192,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                },
                pool.clone(),
                inc(64, 96, 128, 16, 32, 32),
                inc(128, 128, 192, 32, 96, 64),
                pool.clone(),
                inc(192, 96, 208, 16, 48, 64),
                inc(160, 112, 224, 24, 64, 64),
                inc(128, 128, 256, 24, 64, 64),
                inc(112, 144, 288, 32, 64, 64),
                inc(256, 160, 320, 32, 128, 128),
                pool,
                inc(256, 160, 320, 32, 128, 128),
                inc(384, 192, 384, 48, 128, 128),
            ],
            aux_heads: vec![
                AuxHeadSpec {
                    after_block: 8,
                    discount: DEFAULT_AUX_DISCOUNT,
                },
                AuxHeadSpec {
                    after_block: 11,
                    discount: DEFAULT_AUX_DISCOUNT,
                },
            ],
            num_classes,
            head: Head::AvgPoolLinear,
        }
    }

    /// Plain stack: block `i` is `depths[i]` 3x3 convolutions at
    /// `channels[i]` followed by a 2x2 stride-2 max pool, then three FC layers.
    pub fn vgg_style(
        depths: &[usize],
        channels: &[usize],
        num_classes: usize,
        input: [usize; 3],
        hidden: usize,
    ) -> Result<Self> {
        if depths.len() != channels.len() || depths.is_empty() {
            return Err(CoreError::Construction(format!(
                "{} block depths but {} block widths",
                depths.len(),
                channels.len()
            )));
        }
        let factor = 1usize << depths.len();
        if input[1] % factor != 0 || input[2] % factor != 0 {
            return Err(CoreError::Construction(format!(
                "input {}x{} is not divisible by 2^{} = {factor}",
                input[1],
                input[2],
                depths.len()
            )));
        }
        let mut blocks = Vec::new();
        for (&d, &c) in depths.iter().zip(channels) {
            if d == 0 || c == 0 {
                return Err(CoreError::Construction(
                    "block depth and width must be positive".into(),
                ));
            }
            for _ in 0..d {
                blocks.push(Block::Conv {
                    out_channels: c,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                });
            }
            blocks.push(Block::MaxPool {
                window: 2,
                stride: 2,
                padding: 0,
            });
        }
        let spec = Self {
            input,
            blocks,
            aux_heads: Vec::new(),
            num_classes,
            head: Head::Mlp { hidden },
        };
        spec.block_shapes()?;
        Ok(spec)
    }

    /// VGG-19 layout: depths (2,2,4,4,4), widths (64,128,256,512,512).
    pub fn vgg19(num_classes: usize) -> Self {
        Self::vgg_style(
            &[2, 2, 4, 4, 4],
            &[64, 128, 256, 512, 512],
            num_classes,
            [3, 224, 224],
            4096,
        )
        .expect("valid preset")
    }

    /// Output shape `(C, H, W)` after every block.
    pub fn block_shapes(&self) -> Result<Vec<[usize; 3]>> {
        if self.input.contains(&0) {
            return Err(CoreError::Construction(format!(
                "input shape {:?} has a zero extent",
                self.input
            )));
        }
        if self.num_classes == 0 {
            return Err(CoreError::Construction(
                "num_classes must be positive".into(),
            ));
        }
        let mut shape = self.input;
        let mut out = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate() {
            let err = |what: String| CoreError::Construction(format!("block {i}: {what}"));
            shape = match block {
                Block::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => {
                    let h = window_out(shape[1], *kernel, *stride, *padding);
                    let w = window_out(shape[2], *kernel, *stride, *padding);
                    match (h, w, *out_channels > 0) {
                        (Some(h), Some(w), true) => [*out_channels, h, w],
                        _ => return Err(err(format!("convolution does not fit input {shape:?}"))),
                    }
                }
                Block::MaxPool {
                    window,
                    stride,
                    padding,
                } => {
                    let h = window_out(shape[1], *window, *stride, *padding);
                    let w = window_out(shape[2], *window, *stride, *padding);
                    match (h, w, padding < window) {
                        (Some(h), Some(w), true) => [shape[0], h, w],
                        _ => return Err(err(format!("pooling does not fit input {shape:?}"))),
                    }
                }
                Block::Inception(branches) => {
                    validate_branches(shape[0], branches).map_err(|e| err(e.to_string()))?;
                    [
                        branches.iter().map(|b| b.out_channels).sum(),
                        shape[1],
                        shape[2],
                    ]
                }
            };
            out.push(shape);
        }
        for aux in &self.aux_heads {
            if aux.after_block >= self.blocks.len() {
                return Err(CoreError::Construction(format!(
                    "auxiliary head attached to block {} but the model has {} blocks",
                    aux.after_block,
                    self.blocks.len()
                )));
            }
            if !(aux.discount > 0.0 && aux.discount <= 1.0) {
                return Err(CoreError::Construction(format!(
                    "aux discount {} outside (0, 1]",
                    aux.discount
                )));
            }
        }
        if let Head::Mlp { hidden: 0 } = self.head {
            return Err(CoreError::Construction(
                "hidden width must be positive".into(),
            ));
        }
        Ok(out)
    }

    /// Depth counted in layers that carry weights, along the main path.
    pub fn weighted_depth(&self) -> usize {
        let body: usize = self
            .blocks
            .iter()
            .map(|b| match b {
                Block::Conv { .. } => 1,
                Block::MaxPool { .. } => 0,
                Block::Inception(_) => 2,
            })
            .sum();
        body + match self.head {
            Head::AvgPoolLinear => 1,
            Head::Mlp { .. } => 3,
        }
    }

    pub fn set_aux_discount(&mut self, discount: f64) {
        self.aux_heads
            .iter_mut()
            .for_each(|a| a.discount = discount);
    }

    /// Renders the spec in the plain-text config format read by [`ModelSpec::parse`].
    pub fn to_config(&self) -> String {
        let mut s = String::new();
        let [c, h, w] = self.input;
        let _ = writeln!(s, "input = {c} {h} {w}");
        let _ = writeln!(s, "classes = {}", self.num_classes);
        match self.head {
            Head::AvgPoolLinear => s.push_str("head = avgpool\n"),
            Head::Mlp { hidden } => {
                let _ = writeln!(s, "head = mlp {hidden}");
            }
        }
        for a in &self.aux_heads {
            let _ = writeln!(s, "aux = {} {}", a.after_block, a.discount);
        }
        for b in &self.blocks {
            match b {
                Block::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => {
                    let _ = writeln!(s, "block conv {out_channels} {kernel} {stride} {padding}");
                }
                Block::MaxPool {
                    window,
                    stride,
                    padding,
                } => {
                    let _ = writeln!(s, "block pool {window} {stride} {padding}");
                }
                Block::Inception(br) => {
                    let find = |k: BranchKind| br.iter().find(|b| b.kind == k).expect("validated");
                    let (a, b3, b5, p) = (
                        find(BranchKind::Conv1x1),
                        find(BranchKind::ReduceConv3x3),
                        find(BranchKind::ReduceConv5x5),
                        find(BranchKind::Pool3x3Conv1x1),
                    );
                    let _ = writeln!(
                        s,
                        "block inception {} {}:{} {}:{} {}",
                        a.out_channels,
                        b3.reduce_channels.unwrap_or(0),
                        b3.out_channels,
                        b5.reduce_channels.unwrap_or(0),
                        b5.out_channels,
                        p.out_channels
                    );
                }
            }
        }
        s
    }

    /// Parses the plain-text config format:
    ///
    /// ```text
    /// input = 3 32 32
    /// classes = 8
    /// head = avgpool            # or: mlp 256
    /// aux = 3 0.3               # attach after block 3 with discount 0.3
    /// block conv 16 3 1 1       # out kernel stride padding
    /// block pool 3 2 1          # window stride padding
    /// block inception 8 8:16 4:8 8   # 1x1, reduce:3x3, reduce:5x5, pool-proj
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut input = None;
        let mut classes = None;
        let mut head = Head::AvgPoolLinear;
        let mut aux_heads = Vec::new();
        let mut blocks = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| {
                CoreError::Construction(format!("line {}: {what}: '{raw}'", lineno + 1))
            };
            let nums = |s: &str| -> Result<Vec<usize>> {
                s.split_whitespace()
                    .map(|t| t.parse::<usize>().map_err(|_| bad("expected integers")))
                    .collect()
            };
            if let Some(rest) = line.strip_prefix("block") {
                let mut words = rest.split_whitespace();
                let kind = words.next().ok_or_else(|| bad("missing block kind"))?;
                let args: Vec<&str> = words.collect();
                let block = match kind {
                    "conv" => match nums(&args.join(" "))?.as_slice() {
                        [o, k, s, p] => Block::Conv {
                            out_channels: *o,
                            kernel: *k,
                            stride: *s,
                            padding: *p,
                        },
                        _ => return Err(bad("conv takes: out kernel stride padding")),
                    },
                    "pool" => match nums(&args.join(" "))?.as_slice() {
                        [w, s, p] => Block::MaxPool {
                            window: *w,
                            stride: *s,
                            padding: *p,
                        },
                        _ => return Err(bad("pool takes: window stride padding")),
                    },
                    "inception" => {
                        if args.len() != 4 {
                            return Err(bad("inception takes: 1x1 r3:3x3 r5:5x5 pool"));
                        }
                        let pair = |s: &str| -> Result<(usize, usize)> {
                            let (r, o) = s
                                .split_once(':')
                                .ok_or_else(|| bad("expected reduce:out"))?;
                            Ok((
                                r.parse().map_err(|_| bad("bad reduce width"))?,
                                o.parse().map_err(|_| bad("bad width"))?,
                            ))
                        };
                        let one = args[0].parse().map_err(|_| bad("bad 1x1 width"))?;
                        let (r3, o3) = pair(args[1])?;
                        let (r5, o5) = pair(args[2])?;
                        let pp = args[3].parse().map_err(|_| bad("bad pool width"))?;
                        Block::Inception([
                            InceptionBranchSpec::conv1x1(one),
                            InceptionBranchSpec::conv3x3(r3, o3),
                            InceptionBranchSpec::conv5x5(r5, o5),
                            InceptionBranchSpec::pool_proj(pp),
                        ])
                    }
                    other => return Err(bad(&format!("unknown block kind '{other}'"))),
                };
                blocks.push(block);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key = value"))?;
            let value = value.trim();
            match key.trim() {
                "input" => match nums(value)?.as_slice() {
                    [c, h, w] => input = Some([*c, *h, *w]),
                    _ => return Err(bad("input takes three integers")),
                },
                "classes" => classes = Some(value.parse().map_err(|_| bad("bad class count"))?),
                "head" => {
                    let mut w = value.split_whitespace();
                    head = match (w.next(), w.next()) {
                        (Some("avgpool"), None) => Head::AvgPoolLinear,
                        (Some("mlp"), None) => Head::Mlp {
                            hidden: DEFAULT_HIDDEN,
                        },
                        (Some("mlp"), Some(h)) => Head::Mlp {
                            hidden: h.parse().map_err(|_| bad("bad hidden width"))?,
                        },
                        _ => return Err(bad("head is 'avgpool' or 'mlp [hidden]'")),
                    };
                }
                "aux" => {
                    let mut w = value.split_whitespace();
                    let after_block = w
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("aux needs a block index"))?;
                    let discount = match w.next() {
                        Some(t) => t.parse().map_err(|_| bad("bad discount"))?,
                        None => DEFAULT_AUX_DISCOUNT,
                    };
                    aux_heads.push(AuxHeadSpec {
                        after_block,
                        discount,
                    });
                }
                other => return Err(bad(&format!("unknown key '{other}'"))),
            }
        }
        let spec = Self {
            input: input.ok_or_else(|| CoreError::Construction("config lacks 'input'".into()))?,
            blocks,
            aux_heads,
            num_classes: classes
                .ok_or_else(|| CoreError::Construction("config lacks 'classes'".into()))?,
            head,
        };
        spec.block_shapes()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg19_has_nineteen_weighted_layers() {
        let spec = ModelSpec::vgg19(101);
        assert_eq!(spec.weighted_depth(), 2 * 2 + 3 * 4 + 3);
        assert_eq!(spec.weighted_depth(), 19);
    }

    #[test]
    fn googlenet_is_twenty_two_deep() {
        let spec = ModelSpec::googlenet(216);
        assert_eq!(spec.weighted_depth(), 22);
        let shapes = spec.block_shapes().unwrap();
        assert_eq!(*shapes.last().unwrap(), [1024, 7, 7]);
    }

    #[test]
    fn vgg_toy_feature_map() {
        let spec = ModelSpec::vgg_style(&[1, 1], &[8, 16], 4, [3, 32, 32], 64).unwrap();
        assert_eq!(*spec.block_shapes().unwrap().last().unwrap(), [16, 8, 8]);
    }

    #[test]
    fn vgg_spatial_halves_per_block() {
        let spec = ModelSpec::vgg_style(&[2, 1, 3], &[4, 8, 8], 3, [3, 48, 40], 16).unwrap();
        let shapes = spec.block_shapes().unwrap();
        let mut block = 0;
        for (b, s) in spec.blocks.iter().zip(&shapes) {
            if matches!(b, Block::MaxPool { .. }) {
                block += 1;
                assert_eq!(s[1], 48 >> block);
                assert_eq!(s[2], 40 >> block);
            }
        }
        assert_eq!(block, 3);
    }

    #[test]
    fn vgg_rejects_indivisible_input() {
        let err = ModelSpec::vgg_style(&[1, 1, 1], &[4, 4, 4], 2, [3, 36, 36], 8).unwrap_err();
        assert!(matches!(err, CoreError::Construction(_)));
        assert!(ModelSpec::vgg_style(&[1, 1], &[4], 2, [3, 32, 32], 8).is_err());
    }

    #[test]
    fn aux_index_out_of_range() {
        let mut spec = ModelSpec::toy_inception(4, [3, 32, 32]);
        spec.aux_heads[0].after_block = 6;
        assert!(spec.block_shapes().is_err());
        spec.aux_heads[0].after_block = 5;
        spec.aux_heads[0].discount = 0.0;
        assert!(spec.block_shapes().is_err());
    }

    #[test]
    fn config_roundtrip() {
        for spec in [
            ModelSpec::toy_inception(8, [3, 64, 64]),
            ModelSpec::vgg_style(&[1, 2], &[8, 16], 5, [3, 32, 32], 32).unwrap(),
            ModelSpec::googlenet(12),
        ] {
            let text = spec.to_config();
            assert_eq!(ModelSpec::parse(&text).unwrap(), spec, "{text}");
        }
    }

    #[test]
    fn config_errors_name_the_line() {
        let err = ModelSpec::parse("input = 3 8 8\nclasses = 2\nblock warp 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(ModelSpec::parse("classes = 2\n").is_err());
    }
}
