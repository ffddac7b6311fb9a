//! Inception modules: four parallel branches concatenated along channels.

use rand::Rng;

use super::layers::ConvLayer;
use crate::error::{CoreError, Result};
use crate::graph::{Graph, NodeId};
use crate::params::ParamStore;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BranchKind {
    Conv1x1,
    ReduceConv3x3,
    ReduceConv5x5,
    Pool3x3Conv1x1,
}

impl BranchKind {
    pub const ALL: [BranchKind; 4] = [
        BranchKind::Conv1x1,
        BranchKind::ReduceConv3x3,
        BranchKind::ReduceConv5x5,
        BranchKind::Pool3x3Conv1x1,
    ];

    fn tag(self) -> &'static str {
        match self {
            BranchKind::Conv1x1 => "b1x1",
            BranchKind::ReduceConv3x3 => "b3x3",
            BranchKind::ReduceConv5x5 => "b5x5",
            BranchKind::Pool3x3Conv1x1 => "bpool",
        }
    }

    /// Kernel size and padding of the branch's main convolution.
    fn kernel(self) -> (usize, usize) {
        match self {
            BranchKind::Conv1x1 | BranchKind::Pool3x3Conv1x1 => (1, 0),
            BranchKind::ReduceConv3x3 => (3, 1),
            BranchKind::ReduceConv5x5 => (5, 2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InceptionBranchSpec {
    pub kind: BranchKind,
    /// Width of the 1x1 reduction in front of 3x3 / 5x5 convolutions.
    pub reduce_channels: Option<usize>,
    pub out_channels: usize,
}

impl InceptionBranchSpec {
    pub fn conv1x1(out: usize) -> Self {
        Self {
            kind: BranchKind::Conv1x1,
            reduce_channels: None,
            out_channels: out,
        }
    }
    pub fn conv3x3(reduce: usize, out: usize) -> Self {
        Self {
            kind: BranchKind::ReduceConv3x3,
            reduce_channels: Some(reduce),
            out_channels: out,
        }
    }
    pub fn conv5x5(reduce: usize, out: usize) -> Self {
        Self {
            kind: BranchKind::ReduceConv5x5,
            reduce_channels: Some(reduce),
            out_channels: out,
        }
    }
    pub fn pool_proj(out: usize) -> Self {
        Self {
            kind: BranchKind::Pool3x3Conv1x1,
            reduce_channels: None,
            out_channels: out,
        }
    }

    /// Weight count (biases excluded) of this branch for `in_channels` inputs.
    pub fn weight_count(&self, in_channels: usize) -> usize {
        let (k, _) = self.kind.kernel();
        match self.reduce_channels {
            Some(r) => in_channels * r + r * self.out_channels * k * k,
            None => in_channels * self.out_channels * k * k,
        }
    }
}

/// Checks that `branches` holds one branch of each kind with valid widths.
pub fn validate_branches(in_channels: usize, branches: &[InceptionBranchSpec; 4]) -> Result<()> {
    for kind in BranchKind::ALL {
        let n = branches.iter().filter(|b| b.kind == kind).count();
        if n != 1 {
            return Err(CoreError::Construction(format!(
                "inception module needs exactly one {kind:?} branch, found {n}"
            )));
        }
    }
    for b in branches {
        if b.out_channels == 0 {
            return Err(CoreError::Construction(format!(
                "{:?} branch has zero output channels",
                b.kind
            )));
        }
        match (b.kind, b.reduce_channels) {
            (BranchKind::ReduceConv3x3 | BranchKind::ReduceConv5x5, Some(r)) => {
                if r == 0 || r >= in_channels {
                    return Err(CoreError::Construction(format!(
                        "{:?} reduction to {r} channels must be in 1..{in_channels}",
                        b.kind
                    )));
                }
            }
            (BranchKind::ReduceConv3x3 | BranchKind::ReduceConv5x5, None) => {
                return Err(CoreError::Construction(format!(
                    "{:?} branch needs a 1x1 reduction width",
                    b.kind
                )))
            }
            (_, Some(_)) => {
                return Err(CoreError::Construction(format!(
                    "{:?} branch takes no reduction width",
                    b.kind
                )))
            }
            (_, None) => {}
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
struct Branch {
    spec: InceptionBranchSpec,
    reduce: Option<ConvLayer>,
    conv: ConvLayer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InceptionModule {
    pub in_channels: usize,
    branches: Vec<Branch>,
}

impl InceptionModule {
    pub fn build<T: Real, R: Rng>(
        params: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        in_channels: usize,
        branch_specs: &[InceptionBranchSpec; 4],
    ) -> Result<Self> {
        validate_branches(in_channels, branch_specs)?;
        let branches = branch_specs
            .iter()
            .map(|&spec| {
                let tag = format!("{name}.{}", spec.kind.tag());
                let (k, pad) = spec.kind.kernel();
                let reduce = spec.reduce_channels.map(|r| {
                    ConvLayer::init(
                        params,
                        rng,
                        &format!("{tag}.reduce"),
                        in_channels,
                        r,
                        1,
                        1,
                        0,
                    )
                });
                let conv_in = spec.reduce_channels.unwrap_or(in_channels);
                let conv = ConvLayer::init(
                    params,
                    rng,
                    &format!("{tag}.conv"),
                    conv_in,
                    spec.out_channels,
                    k,
                    1,
                    pad,
                );
                Branch { spec, reduce, conv }
            })
            .collect();
        Ok(Self {
            in_channels,
            branches,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.branches.iter().map(|b| b.spec.out_channels).sum()
    }

    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        nodes: &[NodeId],
        x: NodeId,
    ) -> Result<NodeId> {
        let mut outs = Vec::with_capacity(4);
        for b in &self.branches {
            let mut h = x;
            if b.spec.kind == BranchKind::Pool3x3Conv1x1 {
                h = g.maxpool2d(h, 3, 1, 1)?;
            }
            if let Some(r) = &b.reduce {
                h = r.forward(g, nodes, h)?;
            }
            outs.push(b.conv.forward(g, nodes, h)?);
        }
        let spatial = g.shape(outs[0])[1..].to_vec();
        if let Some(i) = outs.iter().position(|&o| g.shape(o)[1..] != spatial[..]) {
            return Err(CoreError::Construction(format!(
                "branch {i} produced spatial dims {:?}, branch 0 produced {spatial:?}",
                &g.shape(outs[i])[1..]
            )));
        }
        g.concat_channels(&outs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn branches(a: usize, b: usize, c: usize, d: usize) -> [InceptionBranchSpec; 4] {
        [
            InceptionBranchSpec::conv1x1(a),
            InceptionBranchSpec::conv3x3(4, b),
            InceptionBranchSpec::conv5x5(2, c),
            InceptionBranchSpec::pool_proj(d),
        ]
    }

    #[test]
    fn output_channels_and_spatial_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamStore::<f32>::new();
        let m = InceptionModule::build(&mut ps, &mut rng, "m", 6, &branches(16, 32, 8, 8)).unwrap();
        assert_eq!(m.out_channels(), 64);
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::full(&[6, 28, 28], 0.5));
        let nodes: Vec<_> = (0..ps.len()).map(|k| g.param(k, ps.get(k))).collect();
        let y = m.forward(&mut g, &nodes, x).unwrap();
        assert_eq!(g.shape(y), &[64, 28, 28]);
    }

    #[test]
    fn reduction_saves_parameters() {
        let direct = 64 * 32 * 9;
        let reduced = InceptionBranchSpec::conv3x3(8, 32).weight_count(64);
        assert_eq!(direct, 18432);
        assert_eq!(reduced, 512 + 2304);
        assert!(reduced < direct);
        // in*r + 9*r*out < 9*in*out  <=>  r < 9*in*out / (in + 9*out)
        let bound = (9.0 * 64.0 * 32.0) / (64.0 + 9.0 * 32.0);
        assert!(8.0 < bound);
        for r in 1..64 {
            let saves = InceptionBranchSpec::conv3x3(r, 32).weight_count(64) < direct;
            assert_eq!(saves, (r as f64) < bound, "r = {r}");
        }
    }

    #[test]
    fn built_parameters_match_weight_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamStore::<f32>::new();
        let spec = branches(3, 5, 7, 2);
        InceptionModule::build(&mut ps, &mut rng, "m", 10, &spec).unwrap();
        let weights: usize = ps
            .iter()
            .filter(|(n, _)| n.ends_with(".w"))
            .map(|(_, t)| t.numel())
            .sum();
        let expected: usize = spec.iter().map(|b| b.weight_count(10)).sum();
        assert_eq!(weights, expected);
    }

    #[test]
    fn rejects_bad_branch_sets() {
        let mut b = branches(1, 1, 1, 1);
        b[3] = InceptionBranchSpec::conv1x1(4);
        assert!(validate_branches(8, &b).is_err());
        // reduction must shrink the channel count
        assert!(validate_branches(4, &branches(1, 1, 1, 1)).is_err());
        assert!(validate_branches(5, &branches(1, 1, 1, 1)).is_ok());
    }
}
