use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gemm::{gemm, Op};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Declarative description of one layer. Kernels are square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    /// Valid (unpadded) 2-D convolution over `[channels, h, w]` input.
    Conv {
        kernel: usize,
        stride: usize,
        features: usize,
    },
    MaxPool { kernel: usize, stride: usize },
    /// Affine map of the flattened input.
    FullyConnected { features: usize },
    Relu,
    Dropout { p: f64 },
    Softmax,
    /// Affine map used as a classifier readout; same arithmetic as
    /// `FullyConnected`, tagged separately so it can be swapped out.
    LinearReadout { features: usize },
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::MaxPool { .. } => "max_pool",
            LayerSpec::FullyConnected { .. } => "fully_connected",
            LayerSpec::Relu => "relu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Softmax => "softmax",
            LayerSpec::LinearReadout { .. } => "linear_readout",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv { .. } | LayerSpec::FullyConnected { .. } | LayerSpec::LinearReadout { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::invalid(format!("{}: {} must be positive", self.name(), name)))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Conv {
                kernel,
                stride,
                features,
            } => {
                positive("kernel", kernel)?;
                positive("stride", stride)?;
                positive("features", features)
            }
            LayerSpec::MaxPool { kernel, stride } => {
                positive("kernel", kernel)?;
                positive("stride", stride)
            }
            LayerSpec::FullyConnected { features } | LayerSpec::LinearReadout { features } => {
                positive("features", features)
            }
            LayerSpec::Dropout { p } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("dropout: p = {} outside [0, 1]", p)))
                }
            }
            LayerSpec::Relu | LayerSpec::Softmax => Ok(()),
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        match *self {
            LayerSpec::Conv {
                kernel,
                stride,
                features,
            } => {
                let (_, h, w) = spatial(self, input)?;
                let (oh, ow) = window_out(self, h, w, kernel, stride)?;
                Ok(vec![features, oh, ow])
            }
            LayerSpec::MaxPool { kernel, stride } => {
                let (c, h, w) = spatial(self, input)?;
                let (oh, ow) = window_out(self, h, w, kernel, stride)?;
                Ok(vec![c, oh, ow])
            }
            LayerSpec::FullyConnected { features } | LayerSpec::LinearReadout { features } => {
                Ok(vec![features])
            }
            LayerSpec::Relu | LayerSpec::Dropout { .. } | LayerSpec::Softmax => Ok(input.to_vec()),
        }
    }
}

fn spatial(spec: &LayerSpec, input: &[usize]) -> Result<(usize, usize, usize)> {
    match *input {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::shape(format!(
            "{} needs a [channels, height, width] input, got {:?}",
            spec.name(),
            input
        ))),
    }
}

fn window_out(spec: &LayerSpec, h: usize, w: usize, k: usize, s: usize) -> Result<(usize, usize)> {
    if h < k || w < k {
        return Err(Error::shape(format!(
            "{}: kernel {} larger than input {}x{}",
            spec.name(),
            k,
            h,
            w
        )));
    }
    Ok(((h - k) / s + 1, (w - k) / s + 1))
}

/// Train-mode state a layer keeps for its backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    None,
    /// im2col buffer, one `[C·k·k, oh·ow]` block per sample.
    Cols(Vec<f64>),
    /// Flat input offset (within the sample) of each pooled maximum.
    Argmax(Vec<u32>),
    /// Per-unit multiplier: 0 for dropped units, `1/(1-p)` for survivors.
    Mask(Vec<f64>),
}

/// A layer with materialized parameters and resolved shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) spec: LayerSpec,
    pub(crate) in_shape: Vec<usize>,
    pub(crate) out_shape: Vec<usize>,
    /// `[weight, bias]` for parameterized layers, empty otherwise.
    pub(crate) params: Vec<Tensor>,
}

impl Layer {
    pub(crate) fn new(spec: LayerSpec, in_shape: &[usize], rng: &mut rng::Rng) -> Result<Self> {
        let out_shape = spec.output_shape(in_shape)?;
        let params = match spec {
            LayerSpec::Conv {
                kernel, features, ..
            } => {
                let c = in_shape[0];
                let fan_in = c * kernel * kernel;
                let fan_out = features * kernel * kernel;
                vec![
                    glorot(&[features, c, kernel, kernel], fan_in, fan_out, rng),
                    Tensor::zeros(&[features]),
                ]
            }
            LayerSpec::FullyConnected { features } | LayerSpec::LinearReadout { features } => {
                let fan_in: usize = in_shape.iter().product();
                vec![
                    glorot(&[features, fan_in], fan_in, features, rng),
                    Tensor::zeros(&[features]),
                ]
            }
            _ => Vec::new(),
        };
        Ok(Layer {
            spec,
            in_shape: in_shape.to_vec(),
            out_shape,
            params,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.in_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.out_shape
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn in_len(&self) -> usize {
        self.in_shape.iter().product()
    }

    fn out_len(&self) -> usize {
        self.out_shape.iter().product()
    }

    /// Runs the layer on a batch. `train` enables dropout; `rng` feeds it.
    pub(crate) fn forward(&self, x: &Tensor, train: bool, rng: &mut rng::Rng) -> (Tensor, Cache) {
        let b = x.rows();
        let mut out_shape = Vec::with_capacity(self.out_shape.len() + 1);
        out_shape.push(b);
        out_shape.extend_from_slice(&self.out_shape);
        let mut y = vec![0.0; b * self.out_len()];
        let cache = match self.spec {
            LayerSpec::Conv { kernel, stride, .. } => {
                let cols = self.conv_forward(x.data(), b, kernel, stride, &mut y);
                if train {
                    Cache::Cols(cols)
                } else {
                    Cache::None
                }
            }
            LayerSpec::MaxPool { kernel, stride } => {
                let arg = self.pool_forward(x.data(), b, kernel, stride, &mut y);
                Cache::Argmax(arg)
            }
            LayerSpec::FullyConnected { features } | LayerSpec::LinearReadout { features } => {
                let k = self.in_len();
                let w = &self.params[0];
                let bias = self.params[1].data();
                for row in y.chunks_exact_mut(features) {
                    row.copy_from_slice(bias);
                }
                gemm(b, k, features, x.data(), Op::N, w.data(), Op::T, 1.0, &mut y);
                Cache::None
            }
            LayerSpec::Relu => {
                for (o, &v) in y.iter_mut().zip(x.data()) {
                    *o = if v > 0.0 { v } else { 0.0 };
                }
                Cache::None
            }
            LayerSpec::Dropout { p } => {
                if train && p > 0.0 {
                    let keep = 1.0 - p;
                    let scale = if keep > 0.0 { 1.0 / keep } else { 0.0 };
                    let mask: Vec<f64> = (0..x.len())
                        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { scale })
                        .collect();
                    for ((o, &v), &m) in y.iter_mut().zip(x.data()).zip(&mask) {
                        *o = v * m;
                    }
                    Cache::Mask(mask)
                } else {
                    y.copy_from_slice(x.data());
                    Cache::None
                }
            }
            LayerSpec::Softmax => {
                let k = self.out_len();
                for (o, xi) in y.chunks_exact_mut(k).zip(x.data().chunks_exact(k)) {
                    softmax_row(xi, o);
                }
                Cache::None
            }
        };
        (Tensor::new(out_shape, y).expect("layer output shape"), cache)
    }

    /// Backpropagates `gy` (gradient w.r.t. this layer's output). Returns the
    /// gradient w.r.t. the input (if requested) and the parameter gradients.
    pub(crate) fn backward(
        &self,
        x: &Tensor,
        y: &Tensor,
        cache: &Cache,
        gy: &Tensor,
        need_input_grad: bool,
    ) -> (Option<Tensor>, Vec<Tensor>) {
        let b = x.rows();
        let mut gx = if need_input_grad {
            Some(vec![0.0; x.len()])
        } else {
            None
        };
        let mut pgrads = Vec::new();
        match self.spec {
            LayerSpec::Conv { kernel, stride, .. } => {
                let cols = match cache {
                    Cache::Cols(c) => c,
                    _ => panic!("conv backward without train-mode cache"),
                };
                pgrads = self.conv_backward(gy.data(), b, kernel, stride, cols, gx.as_deref_mut());
            }
            LayerSpec::MaxPool { .. } => {
                if let (Some(gx), Cache::Argmax(arg)) = (gx.as_mut(), cache) {
                    let (il, ol) = (self.in_len(), self.out_len());
                    for s in 0..b {
                        let gxs = &mut gx[s * il..(s + 1) * il];
                        for (o, &g) in gy.data()[s * ol..(s + 1) * ol].iter().enumerate() {
                            gxs[arg[s * ol + o] as usize] += g;
                        }
                    }
                }
            }
            LayerSpec::FullyConnected { features } | LayerSpec::LinearReadout { features } => {
                let k = self.in_len();
                let mut gw = vec![0.0; features * k];
                gemm(features, b, k, gy.data(), Op::T, x.data(), Op::N, 0.0, &mut gw);
                let mut gb = vec![0.0; features];
                for row in gy.data().chunks_exact(features) {
                    for (a, &v) in gb.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                if let Some(gx) = gx.as_mut() {
                    gemm(b, features, k, gy.data(), Op::N, self.params[0].data(), Op::N, 0.0, gx);
                }
                pgrads = vec![
                    Tensor::new(self.params[0].shape().to_vec(), gw).unwrap(),
                    Tensor::new(vec![features], gb).unwrap(),
                ];
            }
            LayerSpec::Relu => {
                if let Some(gx) = gx.as_mut() {
                    for ((g, &yv), &gv) in gx.iter_mut().zip(y.data()).zip(gy.data()) {
                        *g = if yv > 0.0 { gv } else { 0.0 };
                    }
                }
            }
            LayerSpec::Dropout { .. } => {
                if let Some(gx) = gx.as_mut() {
                    match cache {
                        Cache::Mask(mask) => {
                            for ((g, &m), &gv) in gx.iter_mut().zip(mask).zip(gy.data()) {
                                *g = gv * m;
                            }
                        }
                        _ => gx.copy_from_slice(gy.data()),
                    }
                }
            }
            LayerSpec::Softmax => {
                if let Some(gx) = gx.as_mut() {
                    let k = self.out_len();
                    for ((g, yr), gr) in gx
                        .chunks_exact_mut(k)
                        .zip(y.data().chunks_exact(k))
                        .zip(gy.data().chunks_exact(k))
                    {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, &yv), &gv) in g.iter_mut().zip(yr).zip(gr) {
                            *o = yv * (gv - dot);
                        }
                    }
                }
            }
        }
        let gx = gx.map(|d| Tensor::new(x.shape().to_vec(), d).unwrap());
        (gx, pgrads)
    }

    fn conv_forward(&self, x: &[f64], b: usize, k: usize, s: usize, y: &mut [f64]) -> Vec<f64> {
        let (c, h, w) = (self.in_shape[0], self.in_shape[1], self.in_shape[2]);
        let (o, oh, ow) = (self.out_shape[0], self.out_shape[1], self.out_shape[2]);
        let ckk = c * k * k;
        let hw = oh * ow;
        let mut cols = vec![0.0; b * ckk * hw];
        let weight = self.params[0].data();
        let bias = self.params[1].data();
        for n in 0..b {
            let xs = &x[n * c * h * w..(n + 1) * c * h * w];
            let cs = &mut cols[n * ckk * hw..(n + 1) * ckk * hw];
            im2col(xs, (c, h, w), k, s, (oh, ow), cs);
            let ys = &mut y[n * o * hw..(n + 1) * o * hw];
            for (row, &bv) in ys.chunks_exact_mut(hw).zip(bias) {
                row.fill(bv);
            }
            gemm(o, ckk, hw, weight, Op::N, cs, Op::N, 1.0, ys);
        }
        cols
    }

    fn conv_backward(
        &self,
        gy: &[f64],
        b: usize,
        k: usize,
        s: usize,
        cols: &[f64],
        mut gx: Option<&mut [f64]>,
    ) -> Vec<Tensor> {
        let (c, h, w) = (self.in_shape[0], self.in_shape[1], self.in_shape[2]);
        let (o, oh, ow) = (self.out_shape[0], self.out_shape[1], self.out_shape[2]);
        let ckk = c * k * k;
        let hw = oh * ow;
        let weight = self.params[0].data();
        let mut gw = vec![0.0; o * ckk];
        let mut gb = vec![0.0; o];
        let mut gcols = vec![0.0; ckk * hw];
        for n in 0..b {
            let gys = &gy[n * o * hw..(n + 1) * o * hw];
            let cs = &cols[n * ckk * hw..(n + 1) * ckk * hw];
            gemm(o, hw, ckk, gys, Op::N, cs, Op::T, 1.0, &mut gw);
            for (acc, row) in gb.iter_mut().zip(gys.chunks_exact(hw)) {
                *acc += row.iter().sum::<f64>();
            }
            if let Some(gx) = gx.as_deref_mut() {
                gemm(ckk, o, hw, weight, Op::T, gys, Op::N, 0.0, &mut gcols);
                let gxs = &mut gx[n * c * h * w..(n + 1) * c * h * w];
                col2im(&gcols, (c, h, w), k, s, (oh, ow), gxs);
            }
        }
        vec![
            Tensor::new(self.params[0].shape().to_vec(), gw).unwrap(),
            Tensor::new(vec![o], gb).unwrap(),
        ]
    }

    fn pool_forward(&self, x: &[f64], b: usize, k: usize, s: usize, y: &mut [f64]) -> Vec<u32> {
        let (c, h, w) = (self.in_shape[0], self.in_shape[1], self.in_shape[2]);
        let (oh, ow) = (self.out_shape[1], self.out_shape[2]);
        let mut arg = vec![0u32; y.len()];
        let mut idx = 0;
        for n in 0..b {
            let xs = &x[n * c * h * w..(n + 1) * c * h * w];
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        // Row-major scan with strict `>` keeps the lowest flat index on ties.
                        let mut best = ch * h * w + (oy * s) * w + ox * s;
                        let mut best_v = xs[best];
                        for ky in 0..k {
                            let row = ch * h * w + (oy * s + ky) * w + ox * s;
                            for kx in 0..k {
                                let v = xs[row + kx];
                                if v > best_v {
                                    best_v = v;
                                    best = row + kx;
                                }
                            }
                        }
                        y[idx] = best_v;
                        arg[idx] = best as u32;
                        idx += 1;
                    }
                }
            }
        }
        arg
    }
}

fn im2col(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    k: usize,
    s: usize,
    (oh, ow): (usize, usize),
    cols: &mut [f64],
) {
    let hw = oh * ow;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ch * k + ky) * k + kx;
                let dst = &mut cols[r * hw..(r + 1) * hw];
                for oy in 0..oh {
                    let src = ch * h * w + (oy * s + ky) * w + kx;
                    let drow = &mut dst[oy * ow..(oy + 1) * ow];
                    if s == 1 {
                        drow.copy_from_slice(&x[src..src + ow]);
                    } else {
                        for (ox, d) in drow.iter_mut().enumerate() {
                            *d = x[src + ox * s];
                        }
                    }
                }
            }
        }
    }
}

fn col2im(
    cols: &[f64],
    (c, h, w): (usize, usize, usize),
    k: usize,
    s: usize,
    (oh, ow): (usize, usize),
    gx: &mut [f64],
) {
    let hw = oh * ow;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ch * k + ky) * k + kx;
                let src = &cols[r * hw..(r + 1) * hw];
                for oy in 0..oh {
                    let dst = ch * h * w + (oy * s + ky) * w + kx;
                    for ox in 0..ow {
                        gx[dst + ox * s] += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

pub(crate) fn softmax_row(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut rng::Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}
