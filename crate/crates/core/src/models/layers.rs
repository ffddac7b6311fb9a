use rand::Rng;

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::params::ParamStore;
use crate::real::Real;
use crate::tensor::Tensor;

/// Zero-mean uniform weights with variance `2 / fan_in`.
pub fn scaled_uniform<T: Real, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::of(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::new(shape, data)
        .expect("shape/product agree")
        .with_grad()
}

/// A convolution followed by ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub weight: usize,
    pub bias: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn init<T: Real, R: Rng>(
        params: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let weight = params.push(
            format!("{name}.w"),
            scaled_uniform(rng, &[out_channels, in_channels, kernel, kernel], fan_in),
        );
        let bias = params.push(
            format!("{name}.b"),
            Tensor::zeros(&[out_channels]).with_grad(),
        );
        Self {
            weight,
            bias,
            stride,
            padding,
        }
    }

    /// `nodes[key]` is the graph node bound to parameter `key`.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        nodes: &[NodeId],
        x: NodeId,
    ) -> Result<NodeId> {
        let y = g.conv2d(
            x,
            nodes[self.weight],
            nodes[self.bias],
            self.stride,
            self.padding,
        )?;
        Ok(g.relu(y))
    }
}

/// Fully-connected layer; the activation is left to the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: usize,
    pub bias: usize,
}

impl Dense {
    pub fn init<T: Real, R: Rng>(
        params: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        inputs: usize,
        outputs: usize,
    ) -> Self {
        let weight = params.push(
            format!("{name}.w"),
            scaled_uniform(rng, &[outputs, inputs], inputs),
        );
        let bias = params.push(format!("{name}.b"), Tensor::zeros(&[outputs]).with_grad());
        Self { weight, bias }
    }

    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        nodes: &[NodeId],
        x: NodeId,
    ) -> Result<NodeId> {
        g.linear(x, nodes[self.weight], nodes[self.bias])
    }
}
