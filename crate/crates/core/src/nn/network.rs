use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::layer::{Cache, Layer, LayerSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named reference to the output of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tap {
    pub name: String,
    pub layer: usize,
}

/// Layer chain plus tap names, without parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Per-sample input shape, e.g. `[1, 28, 28]`.
    pub input: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub taps: Vec<Tap>,
}

impl Architecture {
    pub fn new(input: &[usize]) -> Self {
        Architecture {
            input: input.to_vec(),
            layers: Vec::new(),
            taps: Vec::new(),
        }
    }

    pub fn layer(mut self, spec: LayerSpec) -> Self {
        self.layers.push(spec);
        self
    }

    /// Names the output of the most recently added layer.
    pub fn tap(mut self, name: &str) -> Self {
        let layer = self.layers.len().saturating_sub(1);
        self.taps.push(Tap {
            name: name.to_string(),
            layer,
        });
        self
    }

    /// The MNIST network: two conv/pool stages, a 200-unit hidden layer
    /// with dropout, and a 10-way softmax readout. Taps sit after each
    /// pooling layer and after the hidden layer's ReLU.
    pub fn mnist_cnn() -> Self {
        Architecture::new(&[1, 28, 28])
            .layer(LayerSpec::Conv {
                kernel: 5,
                stride: 1,
                features: 32,
            })
            .layer(LayerSpec::Relu)
            .layer(LayerSpec::MaxPool { kernel: 3, stride: 3 })
            .tap("pool1")
            .layer(LayerSpec::Conv {
                kernel: 5,
                stride: 1,
                features: 64,
            })
            .layer(LayerSpec::Relu)
            .layer(LayerSpec::MaxPool { kernel: 2, stride: 2 })
            .tap("pool2")
            .layer(LayerSpec::FullyConnected { features: 200 })
            .layer(LayerSpec::Relu)
            .tap("fc")
            .layer(LayerSpec::Dropout { p: 0.5 })
            .layer(LayerSpec::LinearReadout { features: 10 })
            .layer(LayerSpec::Softmax)
    }

    /// Propagates shapes through the chain and checks the taps.
    /// Returns the per-sample output shape of every layer.
    pub fn resolve_shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input.is_empty() || self.input.contains(&0) {
            return Err(Error::shape(format!("invalid input shape {:?}", self.input)));
        }
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input.clone();
        for (i, spec) in self.layers.iter().enumerate() {
            cur = spec
                .output_shape(&cur)
                .map_err(|e| Error::shape(format!("layer {} ({}): {}", i, spec.name(), e)))?;
            shapes.push(cur.clone());
        }
        let mut seen = BTreeMap::new();
        for tap in &self.taps {
            if tap.layer >= self.layers.len() {
                return Err(Error::UnknownTap(format!(
                    "{} (layer {} of {})",
                    tap.name,
                    tap.layer,
                    self.layers.len()
                )));
            }
            if seen.insert(tap.name.clone(), ()).is_some() {
                return Err(Error::invalid(format!("duplicate tap name `{}`", tap.name)));
            }
        }
        Ok(shapes)
    }
}

/// Ordered layer chain with materialized parameters and named taps.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: Vec<usize>,
    layers: Vec<Layer>,
    taps: Vec<Tap>,
}

/// Everything a forward pass produced, including backward caches.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    input: Tensor,
    outputs: Vec<Tensor>,
    caches: Vec<Cache>,
    mode: Mode,
}

impl ForwardPass {
    /// Final network output.
    pub fn output(&self) -> &Tensor {
        self.outputs.last().unwrap_or(&self.input)
    }

    /// Output of layer `i`.
    pub fn layer_output(&self, i: usize) -> &Tensor {
        &self.outputs[i]
    }

    pub fn input(&self) -> &Tensor {
        &self.input
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

/// Where the backward pass starts and with what gradient.
#[derive(Debug, Clone)]
pub enum GradSeed<'a> {
    /// Gradient w.r.t. the final output.
    Output(&'a Tensor),
    /// Gradient w.r.t. the input of a final `Softmax` layer (the logits).
    Logits(&'a Tensor),
    /// Gradient w.r.t. the output of layer `layer`; later layers get none.
    Layer { layer: usize, grad: &'a Tensor },
    /// No output gradient; only tap gradients drive the pass.
    None,
}

/// Parameter gradients, one slot per layer (`None` when the layer received
/// no gradient or has no parameters), plus the input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<Vec<Tensor>>>,
    pub input: Option<Tensor>,
}

impl Gradients {
    /// Gradients flattened in parameter order; layers without a gradient
    /// contribute `None` entries.
    pub fn flat(&self, net: &Network) -> Vec<Option<&Tensor>> {
        let mut out = Vec::new();
        for (layer, g) in net.layers.iter().zip(&self.layers) {
            for p in 0..layer.params.len() {
                out.push(g.as_ref().map(|g| &g[p]));
            }
        }
        out
    }
}

impl Network {
    pub fn new(arch: &Architecture, init_seed: u64) -> Result<Self> {
        arch.resolve_shapes()?;
        let mut layers = Vec::with_capacity(arch.layers.len());
        let mut cur = arch.input.clone();
        for (i, spec) in arch.layers.iter().enumerate() {
            let mut r = rng::stream(init_seed, "init", &[i as u64]);
            let layer = Layer::new(spec.clone(), &cur, &mut r)?;
            cur = layer.out_shape.clone();
            layers.push(layer);
        }
        Ok(Network {
            input: arch.input.clone(),
            layers,
            taps: arch.taps.clone(),
        })
    }

    /// Assembles a network from already-materialized parts (checkpoints).
    pub(crate) fn from_parts(input: Vec<usize>, layers: Vec<Layer>, taps: Vec<Tap>) -> Result<Self> {
        let net = Network { input, layers, taps };
        let shapes = net.architecture().resolve_shapes()?;
        for (i, (layer, shape)) in net.layers.iter().zip(&shapes).enumerate() {
            if &layer.out_shape != shape {
                return Err(Error::shape(format!("layer {} output shape inconsistent", i)));
            }
        }
        Ok(net)
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input: self.input.clone(),
            layers: self.layers.iter().map(|l| l.spec.clone()).collect(),
            taps: self.taps.clone(),
        }
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers.last().map_or(&self.input, |l| &l.out_shape)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn tap_layer(&self, name: &str) -> Result<usize> {
        self.taps
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.layer)
            .ok_or_else(|| Error::UnknownTap(name.to_string()))
    }

    /// Per-sample shape at a tap.
    pub fn tap_shape(&self, name: &str) -> Result<&[usize]> {
        Ok(&self.layers[self.tap_layer(name)?].out_shape)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    /// Runs the network on `batch` (`[n, ..input shape]`). Dropout masks in
    /// train mode are drawn from a stream derived from `seed`.
    pub fn forward(&self, batch: &Tensor, mode: Mode, seed: u64) -> Result<ForwardPass> {
        self.forward_to(batch, mode, seed, self.layers.len())
    }

    /// Like [`Network::forward`] but stops after `end` layers.
    pub fn forward_to(&self, batch: &Tensor, mode: Mode, seed: u64, end: usize) -> Result<ForwardPass> {
        if batch.shape().len() != self.input.len() + 1 || batch.shape()[1..] != self.input[..] {
            return Err(Error::shape(format!(
                "batch shape {:?} does not match network input {:?}",
                batch.shape(),
                self.input
            )));
        }
        batch.check_finite("forward", || "network input".into())?;
        let train = mode == Mode::Train;
        let mut outputs = Vec::with_capacity(end);
        let mut caches = Vec::with_capacity(end);
        for (i, layer) in self.layers[..end].iter().enumerate() {
            let x = outputs.last().unwrap_or(batch);
            let mut r = rng::stream(seed, "dropout", &[i as u64]);
            let (y, cache) = layer.forward(x, train, &mut r);
            y.check_finite("forward", || format!("layer {} ({})", i, layer.spec.name()))?;
            outputs.push(y);
            caches.push(cache);
        }
        Ok(ForwardPass {
            input: batch.clone(),
            outputs,
            caches,
            mode,
        })
    }

    /// Activations at every tap of a finished pass.
    pub fn tap_activations(&self, pass: &ForwardPass) -> BTreeMap<String, Tensor> {
        self.taps
            .iter()
            .filter(|t| t.layer < pass.outputs.len())
            .map(|t| (t.name.clone(), pass.outputs[t.layer].clone()))
            .collect()
    }

    /// Reverse-mode pass. Tap gradients are added to the gradient flowing
    /// into their layer's output before that layer is backpropagated.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        seed: GradSeed<'_>,
        tap_grads: &BTreeMap<String, Tensor>,
        need_input_grad: bool,
    ) -> Result<Gradients> {
        if pass.mode != Mode::Train {
            return Err(Error::invalid("backward needs a train-mode forward pass"));
        }
        let n_layers = pass.outputs.len();
        let mut injected: Vec<Option<&Tensor>> = vec![None; n_layers];
        for (name, g) in tap_grads {
            let l = self.tap_layer(name)?;
            if l >= n_layers {
                return Err(Error::invalid(format!("tap `{}` beyond the forward pass", name)));
            }
            g.ensure_same_shape(&pass.outputs[l], &format!("gradient for tap `{}`", name))?;
            injected[l] = Some(g);
        }

        let (start, mut grad): (usize, Option<Tensor>) = match seed {
            GradSeed::Output(g) => {
                if n_layers == 0 {
                    return Err(Error::invalid("empty network"));
                }
                g.ensure_same_shape(pass.output(), "output gradient")?;
                (n_layers - 1, Some(g.clone()))
            }
            GradSeed::Logits(g) => {
                if n_layers < 2 || self.layers[n_layers - 1].spec != LayerSpec::Softmax {
                    return Err(Error::invalid("logit gradient needs a final softmax layer"));
                }
                if injected[n_layers - 1].is_some() {
                    return Err(Error::invalid("tap on the softmax output with a logit seed"));
                }
                g.ensure_same_shape(&pass.outputs[n_layers - 2], "logit gradient")?;
                (n_layers - 2, Some(g.clone()))
            }
            GradSeed::Layer { layer, grad } => {
                if layer >= n_layers {
                    return Err(Error::invalid(format!("seed layer {} out of range", layer)));
                }
                grad.ensure_same_shape(&pass.outputs[layer], "seed gradient")?;
                (layer, Some(grad.clone()))
            }
            GradSeed::None => (n_layers.saturating_sub(1), None),
        };
        if let Some(g) = &grad {
            g.check_finite("backward", || "seed gradient".into())?;
        }
        if let Some(last_tap) = injected.iter().rposition(Option::is_some) {
            if last_tap > start {
                return Err(Error::invalid("tap gradient above the seed layer"));
            }
        }

        let mut layers = vec![None; self.layers.len()];
        for i in (0..=start).rev() {
            if n_layers == 0 {
                break;
            }
            if let Some(t) = injected[i] {
                match grad.as_mut() {
                    Some(g) => g.add_scaled(t, 1.0)?,
                    None => grad = Some(t.clone()),
                }
            }
            let Some(gy) = grad.take() else { continue };
            let layer = &self.layers[i];
            let x = if i == 0 { &pass.input } else { &pass.outputs[i - 1] };
            let need_gx = i > 0 || need_input_grad;
            let (gx, pgrads) = layer.backward(x, &pass.outputs[i], &pass.caches[i], &gy, need_gx);
            for g in &pgrads {
                g.check_finite("backward", || format!("layer {} ({}) parameters", i, layer.spec.name()))?;
            }
            if !pgrads.is_empty() {
                layers[i] = Some(pgrads);
            }
            if let Some(gx) = &gx {
                gx.check_finite("backward", || format!("layer {} ({}) input", i, layer.spec.name()))?;
            }
            grad = gx;
        }
        let input = if need_input_grad { grad } else { None };
        Ok(Gradients { layers, input })
    }

    /// Class predictions (argmax of the final output) in eval mode,
    /// computed in chunks of `chunk` samples.
    pub fn predict(&self, images: &Tensor, chunk: usize) -> Result<Vec<usize>> {
        let mut preds = Vec::with_capacity(images.rows());
        let chunk = chunk.max(1);
        let mut start = 0;
        while start < images.rows() {
            let end = (start + chunk).min(images.rows());
            let idx: Vec<usize> = (start..end).collect();
            let pass = self.forward(&images.select_rows(&idx), Mode::Eval, 0)?;
            let out = pass.output();
            for i in 0..out.rows() {
                preds.push(argmax(out.row(i)));
            }
            start = end;
        }
        Ok(preds)
    }

    /// Eval-mode activations at `tap` for all images, in chunks.
    pub fn activations(&self, images: &Tensor, tap: &str, chunk: usize) -> Result<Tensor> {
        let layer = self.tap_layer(tap)?;
        let shape = self.layers[layer].out_shape.clone();
        let k: usize = shape.iter().product();
        let mut data = Vec::with_capacity(images.rows() * k);
        let chunk = chunk.max(1);
        let mut start = 0;
        while start < images.rows() {
            let end = (start + chunk).min(images.rows());
            let idx: Vec<usize> = (start..end).collect();
            let pass = self.forward_to(&images.select_rows(&idx), Mode::Eval, 0, layer + 1)?;
            data.extend_from_slice(pass.layer_output(layer).data());
            start = end;
        }
        let mut full = vec![images.rows()];
        full.extend(shape);
        Tensor::new(full, data)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
