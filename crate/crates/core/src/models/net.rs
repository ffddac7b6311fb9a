use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::inception::InceptionModule;
use super::layers::{ConvLayer, Dense};
use super::spec::{Block, Head, ModelSpec};
use crate::error::{CoreError, Result};
use crate::graph::{Gradients, Graph, NodeId};
use crate::params::ParamStore;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FreezeMode {
    /// Every parameter is trained.
    AllLayers,
    /// Only the final classifier's weight and bias are trained.
    LastFcOnly,
}

impl std::str::FromStr for FreezeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all_layers" | "all" => Ok(FreezeMode::AllLayers),
            "last_fc_only" | "fc" => Ok(FreezeMode::LastFcOnly),
            _ => Err(format!(
                "unknown freeze mode '{s}' (all_layers | last_fc_only)"
            )),
        }
    }
}

impl std::fmt::Display for FreezeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FreezeMode::AllLayers => "all_layers",
            FreezeMode::LastFcOnly => "last_fc_only",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Layer {
    Conv(ConvLayer),
    Pool {
        window: usize,
        stride: usize,
        padding: usize,
    },
    Inception(InceptionModule),
}

/// Node ids of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub logits: NodeId,
    pub aux_logits: Vec<NodeId>,
}

/// A network instantiated from a [`ModelSpec`].
#[derive(Clone, Debug)]
pub struct Model<T> {
    spec: ModelSpec,
    params: ParamStore<T>,
    layers: Vec<Layer>,
    classifier: Vec<Dense>,
    aux: Vec<Dense>,
    freeze: FreezeMode,
}

/// Mean loss and summed-then-averaged gradients of one minibatch.
#[derive(Clone, Debug)]
pub struct BatchGradients<T> {
    pub mean_loss: f64,
    /// Indexed by parameter key; `None` for frozen parameters.
    pub grads: Vec<Option<Vec<T>>>,
}

/// `main + discount * sum(aux)`. Auxiliary losses only exist during training.
pub fn total_loss(main_loss: f64, aux_losses: &[f64], discount: f64) -> f64 {
    main_loss + discount * aux_losses.iter().sum::<f64>()
}

impl<T: Real> Model<T> {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let shapes = spec.block_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(spec.blocks.len());
        let mut in_shape = spec.input;
        for (i, (block, out_shape)) in spec.blocks.iter().zip(&shapes).enumerate() {
            let name = format!("block{i}");
            layers.push(match block {
                Block::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => Layer::Conv(ConvLayer::init(
                    &mut params,
                    &mut rng,
                    &format!("{name}.conv"),
                    in_shape[0],
                    *out_channels,
                    *kernel,
                    *stride,
                    *padding,
                )),
                Block::MaxPool {
                    window,
                    stride,
                    padding,
                } => Layer::Pool {
                    window: *window,
                    stride: *stride,
                    padding: *padding,
                },
                Block::Inception(branches) => Layer::Inception(InceptionModule::build(
                    &mut params,
                    &mut rng,
                    &name,
                    in_shape[0],
                    branches,
                )?),
            });
            in_shape = *out_shape;
        }
        let aux = spec
            .aux_heads
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let c = shapes[a.after_block][0];
                Dense::init(
                    &mut params,
                    &mut rng,
                    &format!("aux{j}.fc"),
                    c,
                    spec.num_classes,
                )
            })
            .collect();
        let classifier = match spec.head {
            Head::AvgPoolLinear => vec![Dense::init(
                &mut params,
                &mut rng,
                "head.fc",
                in_shape[0],
                spec.num_classes,
            )],
            Head::Mlp { hidden } => {
                let flat = in_shape.iter().product();
                vec![
                    Dense::init(&mut params, &mut rng, "head.fc0", flat, hidden),
                    Dense::init(&mut params, &mut rng, "head.fc1", hidden, hidden),
                    Dense::init(&mut params, &mut rng, "head.fc2", hidden, spec.num_classes),
                ]
            }
        };
        Ok(Self {
            spec,
            params,
            layers,
            classifier,
            aux,
            freeze: FreezeMode::AllLayers,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.spec.input
    }

    pub fn freeze_mode(&self) -> FreezeMode {
        self.freeze
    }

    /// Weight of every auxiliary loss in [`Model::training_loss`].
    pub fn set_aux_discount(&mut self, discount: f64) {
        self.spec.set_aux_discount(discount);
    }

    /// Keys of the final classifier layer's weight and bias.
    pub fn final_layer(&self) -> [usize; 2] {
        let last = self
            .classifier
            .last()
            .expect("classifier has at least one layer");
        [last.weight, last.bias]
    }

    /// Per-parameter freeze mask (true = frozen), in parameter-key order.
    pub fn freeze_mask(&self) -> Vec<bool> {
        self.params.iter().map(|(_, t)| !t.requires_grad).collect()
    }

    /// Sets which parameters receive gradients. Values are never modified.
    pub fn apply_freeze_mode(&mut self, mode: FreezeMode) {
        let trainable = self.final_layer();
        for key in 0..self.params.len() {
            let t = self.params.get_mut(key);
            t.requires_grad = match mode {
                FreezeMode::AllLayers => true,
                FreezeMode::LastFcOnly => trainable.contains(&key),
            };
            t.zero_grad();
        }
        self.freeze = mode;
    }

    /// Inserts every parameter into `g`; the result is indexed by parameter key.
    pub fn bind(&self, g: &mut Graph<T>) -> Vec<NodeId> {
        (0..self.params.len())
            .map(|k| g.param(k, self.params.get(k)))
            .collect()
    }

    /// Runs the network on the `[C, H, W]` node `input`.
    pub fn forward(&self, g: &mut Graph<T>, input: NodeId) -> Result<ForwardOutput> {
        let nodes = self.bind(g);
        self.forward_bound(g, &nodes, input)
    }

    /// Like [`Model::forward`] with parameters already present in the graph
    /// as `nodes` (indexed by parameter key).
    pub fn forward_bound(
        &self,
        g: &mut Graph<T>,
        nodes: &[NodeId],
        input: NodeId,
    ) -> Result<ForwardOutput> {
        if nodes.len() != self.params.len() {
            return Err(CoreError::Contract(format!(
                "{} parameter nodes bound for {} parameters",
                nodes.len(),
                self.params.len()
            )));
        }
        if g.shape(input) != self.spec.input {
            return Err(CoreError::Dimension {
                op: "model.forward",
                detail: format!(
                    "input {:?} but the model expects {:?}",
                    g.shape(input),
                    self.spec.input
                ),
            });
        }
        let ps = nodes;
        let mut x = input;
        let mut block_out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            x = match layer {
                Layer::Conv(c) => c.forward(g, ps, x)?,
                Layer::Pool {
                    window,
                    stride,
                    padding,
                } => g.maxpool2d(x, *window, *stride, *padding)?,
                Layer::Inception(m) => m.forward(g, ps, x)?,
            };
            block_out.push(x);
        }
        let mut aux_logits = Vec::with_capacity(self.aux.len());
        for (head, spec) in self.aux.iter().zip(&self.spec.aux_heads) {
            let pooled = g.global_avg_pool(block_out[spec.after_block])?;
            aux_logits.push(head.forward(g, ps, pooled)?);
        }
        let logits = match self.spec.head {
            Head::AvgPoolLinear => {
                let pooled = g.global_avg_pool(x)?;
                self.classifier[0].forward(g, ps, pooled)?
            }
            Head::Mlp { .. } => {
                let mut h = g.flatten(x);
                for fc in &self.classifier[..2] {
                    let y = fc.forward(g, ps, h)?;
                    h = g.relu(y);
                }
                self.classifier[2].forward(g, ps, h)?
            }
        };
        Ok(ForwardOutput { logits, aux_logits })
    }

    /// Training objective for one sample: main cross-entropy plus every
    /// auxiliary cross-entropy scaled by its discount weight.
    pub fn training_loss(
        &self,
        g: &mut Graph<T>,
        input: NodeId,
        target: usize,
    ) -> Result<(NodeId, ForwardOutput)> {
        let nodes = self.bind(g);
        self.training_loss_bound(g, &nodes, input, target)
    }

    pub fn training_loss_bound(
        &self,
        g: &mut Graph<T>,
        nodes: &[NodeId],
        input: NodeId,
        target: usize,
    ) -> Result<(NodeId, ForwardOutput)> {
        let out = self.forward_bound(g, nodes, input)?;
        let mut loss = g.softmax_cross_entropy(out.logits, target)?;
        for (&aux, spec) in out.aux_logits.iter().zip(&self.spec.aux_heads) {
            let l = g.softmax_cross_entropy(aux, target)?;
            let scaled = g.scale(l, T::of(spec.discount));
            loss = g.add(loss, scaled)?;
        }
        Ok((loss, out))
    }

    /// Evaluates every `(input, target)` sample in its own graph (in parallel)
    /// and averages the results. Per-sample gradients are summed in batch
    /// order, so the outcome does not depend on thread scheduling.
    pub fn batch_gradients(&self, batch: &[(&[T], usize)]) -> Result<BatchGradients<T>> {
        if batch.is_empty() {
            return Err(CoreError::Contract("empty minibatch".into()));
        }
        let per_sample: Vec<(f64, Gradients<T>)> = batch
            .par_iter()
            .map(|&(input, target)| {
                let mut g = Graph::new();
                let x = g.constant(&self.spec.input, input.to_vec())?;
                let (loss, _) = self.training_loss(&mut g, x, target)?;
                Ok((g.scalar(loss).as_f64(), g.backward(loss)?))
            })
            .collect::<Result<_>>()?;
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.params.len()];
        let mut loss_sum = 0.0;
        for (loss, sample) in &per_sample {
            loss_sum += loss;
            for (key, g) in sample.params() {
                match &mut grads[key] {
                    Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
                    slot => *slot = Some(g.to_vec()),
                }
            }
        }
        let inv = T::of(1.0 / batch.len() as f64);
        for acc in grads.iter_mut().flatten() {
            acc.iter_mut().for_each(|a| *a = *a * inv);
        }
        Ok(BatchGradients {
            mean_loss: loss_sum / batch.len() as f64,
            grads,
        })
    }

    /// Stores `grads` on the parameter tensors, ready for an optimizer step.
    pub fn set_gradients(&mut self, grads: BatchGradients<T>) -> Result<()> {
        for (key, g) in grads.grads.into_iter().enumerate() {
            if let Some(g) = g {
                self.params.get_mut(key).set_grad(g)?;
            }
        }
        Ok(())
    }

    /// Main-head logits for a `[C, H, W]` buffer, without recording gradients.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        let mut g = Graph::new();
        let x = g.constant(&self.spec.input, input.to_vec())?;
        let out = self.forward(&mut g, x)?;
        Ok(g.value(out.logits).to_vec())
    }

    /// Same architecture and values in another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut params = ParamStore::new();
        for (name, t) in self.params.iter() {
            params.push(name, t.cast());
        }
        Model {
            spec: self.spec.clone(),
            params,
            layers: self.layers.clone(),
            classifier: self.classifier.clone(),
            aux: self.aux.clone(),
            freeze: self.freeze,
        }
    }
}
