//! Tape-style computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the insertion order is already
//! a topological order and `backward` simply walks the tape in reverse.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use crate::error::{dim_err, CoreError, Result};
use crate::kernels::{self, ConvGeom};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d {
        geom: ConvGeom,
        out_channels: usize,
        cols: Vec<T>,
    },
    MaxPool {
        argmax: Vec<usize>,
    },
    Concat {
        channels: Vec<usize>,
    },
    Linear {
        batch: usize,
        has_bias: bool,
    },
    Relu,
    SoftmaxXent {
        target: usize,
        probs: Vec<T>,
    },
    GlobalAvgPool {
        plane: usize,
    },
    Reshape,
    Add,
    Sub,
    Mul,
    Scale(T),
    Sum,
    Mean,
    Exp,
    SoftThreshold,
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool { .. } => "maxpool2d",
            Op::Concat { .. } => "concat_channels",
            Op::Linear { .. } => "linear",
            Op::Relu => "relu",
            Op::SoftmaxXent { .. } => "softmax_cross_entropy",
            Op::GlobalAvgPool { .. } => "global_avg_pool",
            Op::Reshape => "reshape",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::Exp => "exp",
            Op::SoftThreshold => "soft_threshold",
        }
    }
}

#[derive(Debug)]
struct Node<T> {
    op: Op<T>,
    inputs: Vec<NodeId>,
    shape: Vec<usize>,
    value: Vec<T>,
    requires_grad: bool,
    param: Option<usize>,
}

/// A single forward evaluation, recorded for differentiation.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    params: Vec<(usize, NodeId)>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to `node`, if the node requires one.
    pub fn wrt(&self, node: NodeId) -> Option<&[T]> {
        self.grads.get(node.0).and_then(|g| g.as_deref())
    }

    /// `(parameter key, gradient)` for every parameter leaf that requires a gradient.
    pub fn params(&self) -> impl Iterator<Item = (usize, &[T])> + '_ {
        self.params
            .iter()
            .filter_map(move |&(key, id)| self.wrt(id).map(|g| (key, g)))
    }
}

fn shape_str(s: &[usize]) -> String {
    format!("{s:?}")
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Copies the node's value out as a standalone tensor.
    pub fn tensor(&self, id: NodeId) -> Tensor<T> {
        let n = &self.nodes[id.0];
        Tensor::new(&n.shape, n.value.clone()).expect("node invariant")
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> T {
        self.nodes[id.0].value[0]
    }

    pub fn inputs(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].inputs
    }

    pub fn op_name(&self, id: NodeId) -> &'static str {
        self.nodes[id.0].op.name()
    }

    fn push(&mut self, op: Op<T>, inputs: Vec<NodeId>, shape: Vec<usize>, value: Vec<T>) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        debug_assert!(inputs.iter().all(|i| i.0 < self.nodes.len()));
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            inputs,
            shape,
            value,
            requires_grad,
            param: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf holding a copy of `t`; differentiable iff `t.requires_grad`.
    pub fn leaf(&mut self, t: &Tensor<T>) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            shape: t.shape().to_vec(),
            value: t.data().to_vec(),
            requires_grad: t.requires_grad,
            param: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, shape: &[usize], value: Vec<T>) -> Result<NodeId> {
        let t = Tensor::new(shape, value)?;
        Ok(self.leaf(&t))
    }

    /// Leaf bound to parameter `key`, reported back through [`Gradients::params`].
    pub fn param(&mut self, key: usize, t: &Tensor<T>) -> NodeId {
        let id = self.leaf(t);
        self.nodes[id.0].param = Some(key);
        id
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernels: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let (xs, ks, bs) = (self.shape(input), self.shape(kernels), self.shape(bias));
        if xs.len() != 3 || ks.len() != 4 {
            return dim_err(
                "conv2d",
                format!(
                    "input {} and kernels {} must be [C,H,W] and [Co,C,kH,kW]",
                    shape_str(xs),
                    shape_str(ks)
                ),
            );
        }
        if xs[0] != ks[1] {
            return dim_err(
                "conv2d",
                format!(
                    "input {} has {} channels but kernels {} expect {}",
                    shape_str(xs),
                    xs[0],
                    shape_str(ks),
                    ks[1]
                ),
            );
        }
        if bs != [ks[0]] {
            return dim_err(
                "conv2d",
                format!(
                    "bias {} does not match kernels {}",
                    shape_str(bs),
                    shape_str(ks)
                ),
            );
        }
        let (out_h, out_w) =
            match (
                kernels::window_out(xs[1], ks[2], stride, padding),
                kernels::window_out(xs[2], ks[3], stride, padding),
            ) {
                (Some(h), Some(w)) => (h, w),
                _ => return dim_err(
                    "conv2d",
                    format!(
                        "kernels {} do not fit input {} with padding {padding}, stride {stride}",
                        shape_str(ks),
                        shape_str(xs)
                    ),
                ),
            };
        let geom = ConvGeom {
            channels: xs[0],
            height: xs[1],
            width: xs[2],
            kh: ks[2],
            kw: ks[3],
            stride,
            pad: padding,
            out_h,
            out_w,
        };
        let co = ks[0];
        let ohw = geom.out_len();
        let mut out = vec![T::zero(); co * ohw];
        for (row, &b) in out.chunks_mut(ohw).zip(self.value(bias)) {
            row.iter_mut().for_each(|v| *v = b);
        }
        let cols = if geom.is_pointwise() {
            Vec::new()
        } else {
            kernels::im2col(self.value(input), &geom)
        };
        {
            let src = if geom.is_pointwise() {
                self.value(input)
            } else {
                &cols
            };
            T::gemm(
                co,
                geom.patch_len(),
                ohw,
                self.value(kernels),
                false,
                src,
                false,
                T::one(),
                &mut out,
            );
        }
        Ok(self.push(
            Op::Conv2d {
                geom,
                out_channels: co,
                cols,
            },
            vec![input, kernels, bias],
            vec![co, out_h, out_w],
            out,
        ))
    }

    pub fn maxpool2d(
        &mut self,
        input: NodeId,
        window: usize,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let xs = self.shape(input);
        if xs.len() != 3 {
            return dim_err(
                "maxpool2d",
                format!("input {} must be [C,H,W]", shape_str(xs)),
            );
        }
        if padding >= window {
            return dim_err(
                "maxpool2d",
                format!("padding {padding} must be smaller than window {window}"),
            );
        }
        let (out_h, out_w) =
            match (
                kernels::window_out(xs[1], window, stride, padding),
                kernels::window_out(xs[2], window, stride, padding),
            ) {
                (Some(h), Some(w)) => (h, w),
                _ => return dim_err(
                    "maxpool2d",
                    format!(
                        "window {window} (stride {stride}, padding {padding}) larger than input {}",
                        shape_str(xs)
                    ),
                ),
            };
        let geom = ConvGeom {
            channels: xs[0],
            height: xs[1],
            width: xs[2],
            kh: window,
            kw: window,
            stride,
            pad: padding,
            out_h,
            out_w,
        };
        let (value, argmax) = kernels::maxpool(self.value(input), &geom);
        Ok(self.push(
            Op::MaxPool { argmax },
            vec![input],
            vec![xs[0], out_h, out_w],
            value,
        ))
    }

    pub fn concat_channels(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = inputs.first() else {
            return dim_err("concat_channels", "no inputs");
        };
        let s0 = self.shape(first).to_vec();
        if s0.len() != 3 {
            return dim_err(
                "concat_channels",
                format!("input 0 {} must be [C,H,W]", shape_str(&s0)),
            );
        }
        let mut channels = Vec::with_capacity(inputs.len());
        let mut value = Vec::new();
        for (i, &id) in inputs.iter().enumerate() {
            let s = self.shape(id);
            if s.len() != 3 || s[1..] != s0[1..] {
                return dim_err(
                    "concat_channels",
                    format!(
                        "input {i} has shape {} but input 0 has spatial dims {:?}",
                        shape_str(s),
                        &s0[1..]
                    ),
                );
            }
            channels.push(s[0]);
            value.extend_from_slice(self.value(id));
        }
        let total = channels.iter().sum();
        Ok(self.push(
            Op::Concat { channels },
            inputs.to_vec(),
            vec![total, s0[1], s0[2]],
            value,
        ))
    }

    /// `x W^T + b` for `x` of shape `[D]` or `[B, D]` and `W` of shape `[K, D]`.
    pub fn linear(&mut self, input: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId> {
        self.linear_impl(input, weights, Some(bias))
    }

    /// `x W^T` without a bias term.
    pub fn matvec(&mut self, weights: NodeId, input: NodeId) -> Result<NodeId> {
        self.linear_impl(input, weights, None)
    }

    fn linear_impl(
        &mut self,
        input: NodeId,
        weights: NodeId,
        bias: Option<NodeId>,
    ) -> Result<NodeId> {
        let xs = self.shape(input).to_vec();
        let ws = self.shape(weights).to_vec();
        if ws.len() != 2 {
            return dim_err(
                "linear",
                format!("weights {} must be [K,D]", shape_str(&ws)),
            );
        }
        let (k, d) = (ws[0], ws[1]);
        let (batch, out_shape) = match xs.as_slice() {
            [n] if *n == d => (1, vec![k]),
            [b, n] if *n == d => (*b, vec![*b, k]),
            _ => {
                return dim_err(
                    "linear",
                    format!(
                        "input {} incompatible with weights {}",
                        shape_str(&xs),
                        shape_str(&ws)
                    ),
                )
            }
        };
        let mut out = vec![T::zero(); batch * k];
        if let Some(b) = bias {
            let bs = self.shape(b);
            if bs != [k] {
                return dim_err(
                    "linear",
                    format!(
                        "bias {} does not match weights {}",
                        shape_str(bs),
                        shape_str(&ws)
                    ),
                );
            }
            for row in out.chunks_mut(k) {
                row.copy_from_slice(self.value(b));
            }
        }
        T::gemm(
            batch,
            d,
            k,
            self.value(input),
            false,
            self.value(weights),
            true,
            T::one(),
            &mut out,
        );
        let mut inputs = vec![input, weights];
        inputs.extend(bias);
        Ok(self.push(
            Op::Linear {
                batch,
                has_bias: bias.is_some(),
            },
            inputs,
            out_shape,
            out,
        ))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let value = self
            .value(input)
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        let shape = self.shape(input).to_vec();
        self.push(Op::Relu, vec![input], shape, value)
    }

    /// `-log softmax(logits)[target]`, evaluated with max subtraction.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let ls = self.shape(logits);
        if ls.len() != 1 {
            return dim_err(
                "softmax_cross_entropy",
                format!("logits {} must be rank 1", shape_str(ls)),
            );
        }
        let k = ls[0];
        if target >= k {
            return Err(CoreError::Index {
                op: "softmax_cross_entropy",
                detail: format!("class {target} out of range for {k} logits"),
            });
        }
        let z = self.value(logits);
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        let loss = total.ln() - (z[target] - max);
        let probs = exps.into_iter().map(|e| e / total).collect();
        Ok(self.push(
            Op::SoftmaxXent { target, probs },
            vec![logits],
            vec![1],
            vec![loss],
        ))
    }

    /// Mean over the spatial plane of each channel: `[C,H,W] -> [C]`.
    pub fn global_avg_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let xs = self.shape(input).to_vec();
        if xs.len() != 3 {
            return dim_err(
                "global_avg_pool",
                format!("input {} must be [C,H,W]", shape_str(&xs)),
            );
        }
        let plane = xs[1] * xs[2];
        let inv = T::one() / T::of(plane as f64);
        let value = self
            .value(input)
            .chunks(plane)
            .map(|c| c.iter().copied().sum::<T>() * inv)
            .collect();
        Ok(self.push(Op::GlobalAvgPool { plane }, vec![input], vec![xs[0]], value))
    }

    pub fn reshape(&mut self, input: NodeId, shape: &[usize]) -> Result<NodeId> {
        let n: usize = shape.iter().product();
        if n != self.value(input).len() || shape.contains(&0) {
            return dim_err(
                "reshape",
                format!(
                    "cannot view {} as {}",
                    shape_str(self.shape(input)),
                    shape_str(shape)
                ),
            );
        }
        let value = self.value(input).to_vec();
        Ok(self.push(Op::Reshape, vec![input], shape.to_vec(), value))
    }

    pub fn flatten(&mut self, input: NodeId) -> NodeId {
        let n = self.value(input).len();
        self.reshape(input, &[n]).expect("flatten preserves size")
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return dim_err(
                op,
                format!(
                    "operand shapes {} and {} differ",
                    shape_str(self.shape(a)),
                    shape_str(self.shape(b))
                ),
            );
        }
        Ok(())
    }

    fn zip_with(
        &mut self,
        op: Op<T>,
        a: NodeId,
        b: NodeId,
        f: impl Fn(T, T) -> T,
    ) -> Result<NodeId> {
        self.same_shape(op.name(), a, b)?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(op, vec![a, b], shape, value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(Op::Add, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(Op::Sub, a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(Op::Mul, a, b, |x, y| x * y)
    }

    pub fn scale(&mut self, input: NodeId, factor: T) -> NodeId {
        let value = self.value(input).iter().map(|&x| x * factor).collect();
        let shape = self.shape(input).to_vec();
        self.push(Op::Scale(factor), vec![input], shape, value)
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let s: T = self.value(input).iter().copied().sum();
        self.push(Op::Sum, vec![input], vec![1], vec![s])
    }

    pub fn mean(&mut self, input: NodeId) -> NodeId {
        let v = self.value(input);
        let m = v.iter().copied().sum::<T>() / T::of(v.len() as f64);
        self.push(Op::Mean, vec![input], vec![1], vec![m])
    }

    pub fn exp(&mut self, input: NodeId) -> NodeId {
        let value = self.value(input).iter().map(|x| x.exp()).collect();
        let shape = self.shape(input).to_vec();
        self.push(Op::Exp, vec![input], shape, value)
    }

    /// `sign(a) * max(|a| - theta, 0)` element-wise.
    ///
    /// `theta` either matches the shape of `a` or is rank 1 matching its last
    /// axis, in which case it is shared across rows. All thresholds must be
    /// strictly positive. At the kink `|a| == theta` the subgradient 0 is used.
    pub fn soft_threshold(&mut self, a: NodeId, theta: NodeId) -> Result<NodeId> {
        let (as_, ts) = (self.shape(a).to_vec(), self.shape(theta).to_vec());
        let period = if as_ == ts {
            self.value(a).len()
        } else if ts.len() == 1 && as_.last() == Some(&ts[0]) {
            ts[0]
        } else {
            return dim_err(
                "soft_threshold",
                format!(
                    "thresholds {} incompatible with input {}",
                    shape_str(&ts),
                    shape_str(&as_)
                ),
            );
        };
        if let Some(i) = self.value(theta).iter().position(|&t| !(t > T::zero())) {
            return Err(CoreError::Contract(format!(
                "soft_threshold: threshold {i} is {}, must be > 0",
                self.value(theta)[i]
            )));
        }
        let th = self.value(theta);
        let value = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let t = th[i % period];
                if x > t {
                    x - t
                } else if x < -t {
                    x + t
                } else {
                    T::zero()
                }
            })
            .collect();
        Ok(self.push(Op::SoftThreshold, vec![a, theta], as_, value))
    }

    /// Hash of every discrete branch decision taken during the forward pass
    /// (ReLU activity, pooling argmax, soft-threshold active set).
    ///
    /// Two evaluations with equal signatures lie on the same smooth piece of
    /// the function, which is what finite-difference checks rely on.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu => {
                    for &x in &self.nodes[node.inputs[0].0].value {
                        h.write_u8((x > T::zero()) as u8);
                    }
                }
                Op::MaxPool { argmax } => argmax.iter().for_each(|&i| h.write_usize(i)),
                Op::SoftThreshold => {
                    for &x in &node.value {
                        h.write_u8(if x > T::zero() {
                            2
                        } else if x < T::zero() {
                            1
                        } else {
                            0
                        });
                    }
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Back-propagates from the scalar node `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(CoreError::Contract(format!(
                "backward needs a scalar loss, node {} has shape {:?}",
                loss.0, self.nodes[loss.0].shape
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![T::one()]);
        }
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(up) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &up, &mut grads);
            grads[idx] = Some(up);
        }
        // leaves that require a gradient but were not reached get zeros
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) && grads[i].is_none() {
                grads[i] = Some(vec![T::zero(); node.value.len()]);
            }
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.filter(|_| n.requires_grad).map(|k| (k, NodeId(i))))
            .collect();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node<T>, up: &[T], grads: &mut [Option<Vec<T>>]) {
        let ins = &node.inputs;
        let wants = |i: usize| self.nodes[ins[i].0].requires_grad;
        let acc = |grads: &mut [Option<Vec<T>>], i: usize, f: &mut dyn FnMut(&mut [T])| {
            let id = ins[i].0;
            let len = self.nodes[id].value.len();
            let g = grads[id].get_or_insert_with(|| vec![T::zero(); len]);
            f(g);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                geom,
                out_channels,
                cols,
            } => {
                let (co, ck, ohw) = (*out_channels, geom.patch_len(), geom.out_len());
                let x = &self.nodes[ins[0].0].value;
                let w = &self.nodes[ins[1].0].value;
                if wants(1) {
                    let src = if geom.is_pointwise() {
                        x.as_slice()
                    } else {
                        cols.as_slice()
                    };
                    acc(grads, 1, &mut |g| {
                        T::gemm(co, ohw, ck, up, false, src, true, T::one(), g)
                    });
                }
                if wants(2) {
                    acc(grads, 2, &mut |g| {
                        for (gb, row) in g.iter_mut().zip(up.chunks(ohw)) {
                            *gb = *gb + row.iter().copied().sum::<T>();
                        }
                    });
                }
                if wants(0) {
                    if geom.is_pointwise() {
                        acc(grads, 0, &mut |g| {
                            T::gemm(ck, co, ohw, w, true, up, false, T::one(), g)
                        });
                    } else {
                        let mut dcols = vec![T::zero(); ck * ohw];
                        T::gemm(ck, co, ohw, w, true, up, false, T::zero(), &mut dcols);
                        acc(grads, 0, &mut |g| kernels::col2im(&dcols, geom, g));
                    }
                }
            }
            Op::MaxPool { argmax } => {
                if wants(0) {
                    acc(grads, 0, &mut |g| {
                        for (&i, &u) in argmax.iter().zip(up) {
                            g[i] = g[i] + u;
                        }
                    });
                }
            }
            Op::Concat { channels } => {
                let plane = node.shape[1] * node.shape[2];
                let mut offset = 0;
                for (i, &c) in channels.iter().enumerate() {
                    let len = c * plane;
                    if wants(i) {
                        let part = &up[offset..offset + len];
                        acc(grads, i, &mut |g| {
                            g.iter_mut().zip(part).for_each(|(a, &b)| *a = *a + b)
                        });
                    }
                    offset += len;
                }
            }
            Op::Linear { batch, has_bias } => {
                let ws = &self.nodes[ins[1].0].shape;
                let (k, d) = (ws[0], ws[1]);
                let x = &self.nodes[ins[0].0].value;
                let w = &self.nodes[ins[1].0].value;
                if wants(0) {
                    acc(grads, 0, &mut |g| {
                        T::gemm(*batch, k, d, up, false, w, false, T::one(), g)
                    });
                }
                if wants(1) {
                    acc(grads, 1, &mut |g| {
                        T::gemm(k, *batch, d, up, true, x, false, T::one(), g)
                    });
                }
                if *has_bias && wants(2) {
                    acc(grads, 2, &mut |g| {
                        for row in up.chunks(k) {
                            g.iter_mut().zip(row).for_each(|(a, &b)| *a = *a + b);
                        }
                    });
                }
            }
            Op::Relu => {
                let x = &self.nodes[ins[0].0].value;
                acc(grads, 0, &mut |g| {
                    for ((a, &xi), &u) in g.iter_mut().zip(x).zip(up) {
                        if xi > T::zero() {
                            *a = *a + u;
                        }
                    }
                });
            }
            Op::SoftmaxXent { target, probs } => {
                let u = up[0];
                acc(grads, 0, &mut |g| {
                    for (i, (a, &p)) in g.iter_mut().zip(probs).enumerate() {
                        let d = if i == *target { p - T::one() } else { p };
                        *a = *a + u * d;
                    }
                });
            }
            Op::GlobalAvgPool { plane } => {
                let inv = T::one() / T::of(*plane as f64);
                acc(grads, 0, &mut |g| {
                    for (chunk, &u) in g.chunks_mut(*plane).zip(up) {
                        chunk.iter_mut().for_each(|a| *a = *a + u * inv);
                    }
                });
            }
            Op::Reshape => acc(grads, 0, &mut |g| {
                g.iter_mut().zip(up).for_each(|(a, &b)| *a = *a + b)
            }),
            Op::Add | Op::Sub => {
                let sign = if matches!(node.op, Op::Sub) {
                    -T::one()
                } else {
                    T::one()
                };
                if wants(0) {
                    acc(grads, 0, &mut |g| {
                        g.iter_mut().zip(up).for_each(|(a, &b)| *a = *a + b)
                    });
                }
                if wants(1) {
                    acc(grads, 1, &mut |g| {
                        g.iter_mut().zip(up).for_each(|(a, &b)| *a = *a + sign * b)
                    });
                }
            }
            Op::Mul => {
                let (x, y) = (&self.nodes[ins[0].0].value, &self.nodes[ins[1].0].value);
                if wants(0) {
                    acc(grads, 0, &mut |g| {
                        for i in 0..g.len() {
                            g[i] = g[i] + up[i] * y[i];
                        }
                    });
                }
                if wants(1) {
                    acc(grads, 1, &mut |g| {
                        for i in 0..g.len() {
                            g[i] = g[i] + up[i] * x[i];
                        }
                    });
                }
            }
            Op::Scale(c) => acc(grads, 0, &mut |g| {
                g.iter_mut().zip(up).for_each(|(a, &b)| *a = *a + *c * b)
            }),
            Op::Sum => acc(grads, 0, &mut |g| {
                g.iter_mut().for_each(|a| *a = *a + up[0])
            }),
            Op::Mean => {
                let u = up[0] / T::of(self.nodes[ins[0].0].value.len() as f64);
                acc(grads, 0, &mut |g| g.iter_mut().for_each(|a| *a = *a + u));
            }
            Op::Exp => acc(grads, 0, &mut |g| {
                for ((a, &y), &u) in g.iter_mut().zip(&node.value).zip(up) {
                    *a = *a + u * y;
                }
            }),
            Op::SoftThreshold => {
                let a = &self.nodes[ins[0].0].value;
                let period = self.nodes[ins[1].0].value.len();
                // active where the output is nonzero; derivative is 1 wrt a
                // and -sign(a) wrt theta there, 0 in the dead zone
                if wants(0) {
                    acc(grads, 0, &mut |g| {
                        for i in 0..g.len() {
                            if node.value[i] != T::zero() {
                                g[i] = g[i] + up[i];
                            }
                        }
                    });
                }
                if wants(1) {
                    acc(grads, 1, &mut |g| {
                        for i in 0..a.len() {
                            if node.value[i] != T::zero() {
                                let j = i % period;
                                g[j] = g[j] - a[i].signum() * up[i];
                            }
                        }
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, data).unwrap()
    }

    #[test]
    fn conv_identity_kernel() {
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::full(&[1, 4, 4], 1.0));
        let k = g.leaf(&t(&[1, 1, 1, 1], &[1.0]));
        let b = g.leaf(&t(&[1], &[0.0]));
        let y = g.conv2d(x, k, b, 1, 0).unwrap();
        assert_eq!(g.shape(y), &[1, 4, 4]);
        assert_eq!(g.value(y), &[1.0; 16]);
    }

    #[test]
    fn conv_hand_sum() {
        let mut g = Graph::new();
        let x = g.leaf(&t(&[1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]));
        let k = g.leaf(&Tensor::full(&[1, 1, 3, 3], 1.0));
        let b = g.leaf(&t(&[1], &[0.0]));
        let y = g.conv2d(x, k, b, 1, 0).unwrap();
        assert_eq!(g.value(y), &[45.0]);
    }

    #[test]
    fn conv_preserves_resolution_with_padding() {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(&Tensor::zeros(&[3, 256, 256]));
        let k = g.leaf(&Tensor::zeros(&[4, 3, 3, 3]));
        let b = g.leaf(&Tensor::zeros(&[4]));
        let y = g.conv2d(x, k, b, 1, 1).unwrap();
        assert_eq!(g.shape(y), &[4, 256, 256]);
    }

    #[test]
    fn conv_channel_mismatch_reports_shapes() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(&Tensor::zeros(&[2, 5, 5]));
        let k = g.leaf(&Tensor::zeros(&[1, 3, 3, 3]));
        let b = g.leaf(&Tensor::zeros(&[1]));
        let err = g.conv2d(x, k, b, 1, 0).unwrap_err().to_string();
        assert!(
            err.contains("[2, 5, 5]") && err.contains("[1, 3, 3, 3]"),
            "{err}"
        );
    }

    #[test]
    fn maxpool_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(&Tensor::full(&[1, 8, 8], 0.25));
        let y = g.maxpool2d(x, 2, 2, 0).unwrap();
        assert_eq!(g.shape(y), &[1, 4, 4]);
        assert!(g.value(y).iter().all(|&v| v == 0.25));

        let x = g.leaf(&t(&[1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]));
        let y = g.maxpool2d(x, 3, 1, 0).unwrap();
        assert_eq!(g.value(y), &[9.0]);

        assert!(g.maxpool2d(x, 5, 1, 0).is_err());
    }

    #[test]
    fn maxpool_ties_route_to_first() {
        let mut g = Graph::new();
        let x = g.leaf(&t(&[1, 2, 2], &[3., 3., 3., 3.]).with_grad());
        let y = g.maxpool2d(x, 2, 2, 0).unwrap();
        let l = g.sum(y);
        let gr = g.backward(l).unwrap();
        assert_eq!(gr.wrt(x).unwrap(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn concat_examples() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(&Tensor::zeros(&[1, 2, 3]));
        let b = g.leaf(&Tensor::full(&[1, 2, 3], 1.0));
        let single = g.concat_channels(&[a]).unwrap();
        assert_eq!(g.value(single), g.value(a));
        let c = g.concat_channels(&[a, b]).unwrap();
        assert_eq!(g.shape(c), &[2, 2, 3]);
        assert_eq!(&g.value(c)[..6], &[0.0; 6]);
        assert_eq!(&g.value(c)[6..], &[1.0; 6]);

        let ids: Vec<_> = [64, 128, 32, 32]
            .iter()
            .map(|&ch| g.leaf(&Tensor::zeros(&[ch, 2, 2])))
            .collect();
        let c = g.concat_channels(&ids).unwrap();
        assert_eq!(g.shape(c)[0], 256);

        let bad = g.leaf(&Tensor::zeros(&[1, 3, 3]));
        let err = g.concat_channels(&[a, b, bad]).unwrap_err().to_string();
        assert!(err.contains("input 2"), "{err}");
    }

    #[test]
    fn linear_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(&t(&[2], &[1.0, 2.0]));
        let w = g.leaf(&t(&[1, 2], &[3.0, 4.0]));
        let b = g.leaf(&t(&[1], &[1.0]));
        let y = g.linear(x, w, b).unwrap();
        assert_eq!(g.value(y), &[12.0]);

        let eye = g.leaf(&t(&[2, 2], &[1., 0., 0., 1.]));
        let zb = g.leaf(&Tensor::zeros(&[2]));
        let y = g.linear(x, eye, zb).unwrap();
        assert_eq!(g.value(y), &[1.0, 2.0]);

        let zw = g.leaf(&Tensor::zeros(&[2, 2]));
        let bias = g.leaf(&t(&[2], &[-1.0, 7.0]));
        let y = g.linear(x, zw, bias).unwrap();
        assert_eq!(g.value(y), &[-1.0, 7.0]);

        let w3 = g.leaf(&Tensor::zeros(&[3, 3]));
        assert!(g.linear(x, w3, zb).is_err());
    }

    #[test]
    fn relu_examples() {
        let mut g = Graph::new();
        let x = g.leaf(&t(&[3], &[-1.0, 0.0, 2.0]));
        let y = g.relu(x);
        assert_eq!(g.value(y), &[0.0, 0.0, 2.0]);
        let n = g.leaf(&t(&[2], &[-3.0, -0.5]));
        let y = g.relu(n);
        assert_eq!(g.value(y), &[0.0, 0.0]);
    }

    #[test]
    fn cross_entropy_examples() {
        let mut g = Graph::new();
        let u = g.leaf(&t(&[5], &[0.3; 5]));
        let l = g.softmax_cross_entropy(u, 2).unwrap();
        assert!((g.scalar(l) - 5f64.ln()).abs() < 1e-12);

        let s = g.leaf(&t(&[3], &[100.0, 0.0, 0.0]));
        let l = g.softmax_cross_entropy(s, 0).unwrap();
        assert!(g.scalar(l) < 1e-6);

        let z = g.leaf(&t(&[2], &[1.0, 2.0]));
        let l = g.softmax_cross_entropy(z, 0).unwrap();
        // -log(e / (e + e^2)) = ln(1 + e)
        let want = (1.0 + std::f64::consts::E).ln();
        assert!((g.scalar(l) - want).abs() < 1e-12);
        assert!((g.scalar(l) - 1.3133).abs() < 1e-4);

        assert!(matches!(
            g.softmax_cross_entropy(z, 2),
            Err(CoreError::Index { .. })
        ));
    }

    #[test]
    fn backward_sum_and_constant() {
        let mut g = Graph::new();
        let x = g.leaf(&t(&[2, 3], &[1., -2., 3., 0.5, 0., 9.]).with_grad());
        let l = g.sum(x);
        let gr = g.backward(l).unwrap();
        assert_eq!(gr.wrt(x).unwrap(), &[1.0; 6]);

        let mut g = Graph::new();
        let x = g.leaf(&t(&[3], &[1., 2., 3.]).with_grad());
        let c = g.constant(&[1], vec![4.0]).unwrap();
        let gr = g.backward(c).unwrap();
        assert_eq!(gr.wrt(x).unwrap(), &[0.0; 3]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(&t(&[3], &[1., 2., 3.]).with_grad());
        let y = g.relu(x);
        assert!(matches!(g.backward(y), Err(CoreError::Contract(_))));
    }

    #[test]
    fn soft_threshold_rejects_nonpositive() {
        let mut g = Graph::new();
        let a = g.leaf(&t(&[2], &[1.0, 2.0]));
        let th = g.leaf(&t(&[2], &[0.5, 0.0]));
        assert!(matches!(
            g.soft_threshold(a, th),
            Err(CoreError::Contract(_))
        ));
    }

    #[test]
    fn soft_threshold_broadcasts_rows() {
        let mut g = Graph::new();
        let a = g.leaf(&t(&[2, 2], &[2.0, -2.0, 0.5, -3.0]));
        let th = g.leaf(&t(&[2], &[1.0, 2.5]));
        let y = g.soft_threshold(a, th).unwrap();
        assert_eq!(g.value(y), &[1.0, 0.0, 0.0, -0.5]);
    }
}
