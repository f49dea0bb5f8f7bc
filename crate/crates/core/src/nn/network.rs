use rand::Rng;

use super::layers::{
    Activation, BatchNorm2d, BatchNormCache, Conv2d, ConvCache, Dense, DenseCache, MaxPool2d,
    PoolCache,
};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::preprocess::{FrameStack, OBS_PIXELS, OBS_SIZE, STACK_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        kernel: usize,
        stride: usize,
        out_channels: usize,
        activation: Activation,
    },
    MaxPool,
    BatchNorm,
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn conv_relu(kernel: usize, stride: usize, out_channels: usize) -> Self {
        LayerSpec::Conv2d {
            kernel,
            stride,
            out_channels,
            activation: Activation::Relu,
        }
    }

    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec::Dense { units, activation }
    }
}

/// The Q-network layer stack: three same-padded convolutions, each followed
/// by 2x2 max pooling, batch norm after the second and third pools, and a
/// 512-512-`n_actions` fully connected head.
pub fn q_network_layers(n_actions: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv_relu(8, 4, 32),
        LayerSpec::MaxPool,
        LayerSpec::conv_relu(4, 2, 64),
        LayerSpec::MaxPool,
        LayerSpec::BatchNorm,
        LayerSpec::conv_relu(3, 2, 128),
        LayerSpec::MaxPool,
        LayerSpec::BatchNorm,
        LayerSpec::Flatten,
        LayerSpec::dense(512, Activation::Relu),
        LayerSpec::dense(512, Activation::Relu),
        LayerSpec::dense(n_actions, Activation::Linear),
    ]
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    MaxPool(MaxPool2d),
    BatchNorm(BatchNorm2d<T>),
    Flatten,
    Dense(Dense<T>),
}

impl<T> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv",
            Layer::MaxPool(_) => "maxpool",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
        }
    }
}

#[derive(Debug, Clone)]
enum Cache<T> {
    Conv(ConvCache<T>),
    Pool(PoolCache),
    BatchNorm(BatchNormCache<T>),
    Flatten(Vec<usize>),
    Dense(DenseCache<T>),
}

/// One gradient tensor per trainable parameter, in [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T>(pub Vec<Tensor<T>>);

impl<T: Scalar> Gradients<T> {
    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.0
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.0
    }

    /// L2 norm over all tensors, accumulated in f64 in a fixed order.
    pub fn global_norm(&self) -> f64 {
        self.0.iter().map(Tensor::sum_squares).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        self.0.iter_mut().for_each(|t| t.scale(factor));
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| t.data().iter().all(|v| v.is_zero()))
    }
}

/// A feed-forward stack over `[N, C, H, W]` inputs.
#[derive(Debug, Clone)]
pub struct Network<T> {
    input_shape: [usize; 3],
    layers: Vec<Layer<T>>,
    cache: Option<Vec<Cache<T>>>,
}

pub type QNetwork = Network<f32>;

impl<T: Scalar> Network<T> {
    /// Build the layer stack for `input_shape = [C, H, W]`; weights start at
    /// zero until [`Network::init_weights`].
    pub fn new(input_shape: [usize; 3], specs: &[LayerSpec]) -> Result<Self> {
        let mut shape: Vec<usize> = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let bad = |m: &str| Error::Config(format!("layer {i} ({spec:?}): {m}"));
            let layer = match *spec {
                LayerSpec::Conv2d {
                    kernel,
                    stride,
                    out_channels,
                    activation,
                } => {
                    if shape.len() != 3 {
                        return Err(bad("convolution needs a spatial input"));
                    }
                    if kernel == 0 || stride == 0 || out_channels == 0 {
                        return Err(bad("parameters must be positive"));
                    }
                    let conv = Conv2d::new(shape[0], out_channels, kernel, stride, activation);
                    let (h, w) = conv.output_hw(shape[1], shape[2]);
                    shape = vec![out_channels, h, w];
                    Layer::Conv2d(conv)
                }
                LayerSpec::MaxPool => {
                    if shape.len() != 3 {
                        return Err(bad("pooling needs a spatial input"));
                    }
                    let (h, w) = MaxPool2d::output_hw(shape[1], shape[2]);
                    shape = vec![shape[0], h, w];
                    Layer::MaxPool(MaxPool2d)
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm2d::new(shape[0])),
                LayerSpec::Flatten => {
                    shape = vec![shape.iter().product()];
                    Layer::Flatten
                }
                LayerSpec::Dense { units, activation } => {
                    if shape.len() != 1 {
                        return Err(bad("dense layers need a flattened input"));
                    }
                    if units == 0 {
                        return Err(bad("units must be positive"));
                    }
                    let d = Dense::new(shape[0], units, activation);
                    shape = vec![units];
                    Layer::Dense(d)
                }
            };
            layers.push(layer);
        }
        if let Some(Layer::Dense(d)) = layers.last() {
            if d.activation != Activation::Linear {
                return Err(Error::Config("output layer must be linear".into()));
            }
        }
        Ok(Network {
            input_shape,
            layers,
            cache: None,
        })
    }

    /// The 84x84x4 Q-network.
    pub fn q_network(n_actions: usize) -> Result<Self> {
        Self::new(
            [STACK_LEN, OBS_SIZE, OBS_SIZE],
            &q_network_layers(n_actions),
        )
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn n_outputs(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense(d)) => d.out_features,
            _ => self
                .output_shapes()
                .last()
                .map_or(0, |s| s.iter().product()),
        }
    }

    /// Per-sample output shape of every layer, spatial ones as `[C, H, W]`.
    pub fn output_shapes(&self) -> Vec<Vec<usize>> {
        let mut shape = self.input_shape.to_vec();
        self.layers
            .iter()
            .map(|layer| {
                shape = match layer {
                    Layer::Conv2d(c) => {
                        let (h, w) = c.output_hw(shape[1], shape[2]);
                        vec![c.out_channels, h, w]
                    }
                    Layer::MaxPool(_) => {
                        let (h, w) = MaxPool2d::output_hw(shape[1], shape[2]);
                        vec![shape[0], h, w]
                    }
                    Layer::BatchNorm(_) => shape.clone(),
                    Layer::Flatten => vec![shape.iter().product()],
                    Layer::Dense(d) => vec![d.out_features],
                };
                shape.clone()
            })
            .collect()
    }

    /// conv/dense ReLU layers: He-uniform; linear head: Glorot-uniform;
    /// biases zero; batch norm reset to identity.
    pub fn init_weights<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(c) => c.init_he_uniform(rng),
                Layer::Dense(d) => d.init_uniform(rng),
                Layer::BatchNorm(bn) => bn.reset_parameters(),
                Layer::MaxPool(_) | Layer::Flatten => {}
            }
        }
        self.cache = None;
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv2d(c) => out.extend([&c.weight, &c.bias]),
                Layer::BatchNorm(bn) => out.extend([&bn.gamma, &bn.beta]),
                Layer::Dense(d) => out.extend([&d.weight, &d.bias]),
                Layer::MaxPool(_) | Layer::Flatten => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(c) => out.extend([&mut c.weight, &mut c.bias]),
                Layer::BatchNorm(bn) => out.extend([&mut bn.gamma, &mut bn.beta]),
                Layer::Dense(d) => out.extend([&mut d.weight, &mut d.bias]),
                Layer::MaxPool(_) | Layer::Flatten => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Every persistent tensor (parameters and batch-norm running
    /// statistics) with a stable name.
    pub fn named_state(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let k = layer.kind();
            match layer {
                Layer::Conv2d(c) => {
                    out.push((format!("{i}.{k}.weight"), &c.weight));
                    out.push((format!("{i}.{k}.bias"), &c.bias));
                }
                Layer::BatchNorm(bn) => {
                    out.push((format!("{i}.{k}.gamma"), &bn.gamma));
                    out.push((format!("{i}.{k}.beta"), &bn.beta));
                    out.push((format!("{i}.{k}.running_mean"), &bn.running_mean));
                    out.push((format!("{i}.{k}.running_var"), &bn.running_var));
                }
                Layer::Dense(d) => {
                    out.push((format!("{i}.{k}.weight"), &d.weight));
                    out.push((format!("{i}.{k}.bias"), &d.bias));
                }
                Layer::MaxPool(_) | Layer::Flatten => {}
            }
        }
        out
    }

    pub fn named_state_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let k = layer.kind();
            match layer {
                Layer::Conv2d(c) => {
                    out.push((format!("{i}.{k}.weight"), &mut c.weight));
                    out.push((format!("{i}.{k}.bias"), &mut c.bias));
                }
                Layer::BatchNorm(bn) => {
                    out.push((format!("{i}.{k}.gamma"), &mut bn.gamma));
                    out.push((format!("{i}.{k}.beta"), &mut bn.beta));
                    out.push((format!("{i}.{k}.running_mean"), &mut bn.running_mean));
                    out.push((format!("{i}.{k}.running_var"), &mut bn.running_var));
                }
                Layer::Dense(d) => {
                    out.push((format!("{i}.{k}.weight"), &mut d.weight));
                    out.push((format!("{i}.{k}.bias"), &mut d.bias));
                }
                Layer::MaxPool(_) | Layer::Flatten => {}
            }
        }
        out
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        if s.len() != 4 || s[1..] != self.input_shape {
            return Err(Error::Usage(format!(
                "network expects [N, {}, {}, {}], got {s:?}",
                self.input_shape[0], self.input_shape[1], self.input_shape[2]
            )));
        }
        Ok(())
    }

    /// Forward pass with batch norm on running statistics. Pure.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.infer_traced(x).map(|(y, _)| y)
    }

    /// Like [`Network::infer`], also returning each layer's output shape
    /// (batch dimension included).
    pub fn infer_traced(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<Vec<usize>>)> {
        self.check_input(x)?;
        let mut trace = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Conv2d(c) => c.infer(&h),
                Layer::MaxPool(_) => MaxPool2d::infer(&h),
                Layer::BatchNorm(bn) => bn.infer(&h),
                Layer::Flatten => {
                    let n = h.shape()[0];
                    let f = h.len() / n;
                    h.reshape(&[n, f])?
                }
                Layer::Dense(d) => d.infer(&h),
            };
            trace.push(h.shape().to_vec());
        }
        Ok((h, trace))
    }

    /// Training-mode forward: batch statistics, running-stat update, and a
    /// cache for [`Network::backward`].
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &mut self.layers {
            let (out, cache) = match layer {
                Layer::Conv2d(c) => {
                    let (o, k) = c.forward_train(&h);
                    (o, Cache::Conv(k))
                }
                Layer::MaxPool(_) => {
                    let (o, k) = MaxPool2d::forward_train(&h);
                    (o, Cache::Pool(k))
                }
                Layer::BatchNorm(bn) => {
                    let (o, k) = bn.forward_train(&h);
                    (o, Cache::BatchNorm(k))
                }
                Layer::Flatten => {
                    let shape = h.shape().to_vec();
                    let n = shape[0];
                    let f = h.len() / n;
                    (h.reshape(&[n, f])?, Cache::Flatten(shape))
                }
                Layer::Dense(d) => {
                    let (o, k) = d.forward_train(&h);
                    (o, Cache::Dense(k))
                }
            };
            caches.push(cache);
            h = out;
        }
        self.cache = Some(caches);
        Ok(h)
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => self.forward_train(x),
            Mode::Eval => self.infer(x),
        }
    }

    /// Reverse pass for the cached training forward; consumes the cache.
    pub fn backward(&mut self, upstream: &Tensor<T>) -> Result<Gradients<T>> {
        let caches = self
            .cache
            .take()
            .ok_or_else(|| Error::Usage("backward called without a training forward".into()))?;
        let mut grad = upstream.clone();
        let mut per_layer: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        for (i, (layer, cache)) in self.layers.iter().zip(&caches).enumerate().rev() {
            let need_input = i > 0;
            match (layer, cache) {
                (Layer::Conv2d(c), Cache::Conv(k)) => {
                    let (dx, dw, db) = c.backward(k, &grad, need_input);
                    per_layer.push(vec![dw, db]);
                    if let Some(dx) = dx {
                        grad = dx;
                    }
                }
                (Layer::MaxPool(_), Cache::Pool(k)) => {
                    grad = MaxPool2d::backward(k, &grad);
                    per_layer.push(Vec::new());
                }
                (Layer::BatchNorm(bn), Cache::BatchNorm(k)) => {
                    let (dx, dg, db) = bn.backward(k, &grad);
                    per_layer.push(vec![dg, db]);
                    grad = dx;
                }
                (Layer::Flatten, Cache::Flatten(shape)) => {
                    grad = grad.reshape(shape)?;
                    per_layer.push(Vec::new());
                }
                (Layer::Dense(d), Cache::Dense(k)) => {
                    let (dx, dw, db) = d.backward(k, &grad, need_input);
                    per_layer.push(vec![dw, db]);
                    if let Some(dx) = dx {
                        grad = dx;
                    }
                }
                _ => unreachable!("cache kinds follow layer kinds"),
            }
        }
        Ok(Gradients(per_layer.into_iter().rev().flatten().collect()))
    }

    /// Copy parameters and running statistics from `src`.
    pub fn copy_weights_from(&mut self, src: &Network<T>) -> Result<()> {
        if !self.same_architecture(src) {
            return Err(Error::Usage("copy_weights: architectures differ".into()));
        }
        for ((_, dst), (_, s)) in self.named_state_mut().into_iter().zip(src.named_state()) {
            dst.data_mut().copy_from_slice(s.data());
        }
        Ok(())
    }

    pub fn same_architecture(&self, other: &Network<T>) -> bool {
        self.input_shape == other.input_shape
            && self.layers.len() == other.layers.len()
            && self
                .named_state()
                .iter()
                .zip(other.named_state())
                .all(|((a, ta), (b, tb))| *a == b && ta.shape() == tb.shape())
            && self.output_shapes() == other.output_shapes()
    }

    /// Same network in another precision (used for gradient checks).
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv2d(c) => Layer::Conv2d(Conv2d {
                    in_channels: c.in_channels,
                    out_channels: c.out_channels,
                    kernel: c.kernel,
                    stride: c.stride,
                    activation: c.activation,
                    weight: c.weight.cast(),
                    bias: c.bias.cast(),
                }),
                Layer::MaxPool(p) => Layer::MaxPool(*p),
                Layer::BatchNorm(bn) => Layer::BatchNorm(BatchNorm2d {
                    channels: bn.channels,
                    eps: bn.eps,
                    momentum: bn.momentum,
                    gamma: bn.gamma.cast(),
                    beta: bn.beta.cast(),
                    running_mean: bn.running_mean.cast(),
                    running_var: bn.running_var.cast(),
                }),
                Layer::Flatten => Layer::Flatten,
                Layer::Dense(d) => Layer::Dense(Dense {
                    in_features: d.in_features,
                    out_features: d.out_features,
                    activation: d.activation,
                    weight: d.weight.cast(),
                    bias: d.bias.cast(),
                }),
            })
            .collect();
        Network {
            input_shape: self.input_shape,
            layers,
            cache: None,
        }
    }
}

/// Channels-first batch tensor `[N, 4, 84, 84]` from frame stacks.
pub fn stacks_to_tensor<'a, T: Scalar>(
    stacks: impl ExactSizeIterator<Item = &'a FrameStack>,
) -> Tensor<T> {
    let n = stacks.len();
    let per = STACK_LEN * OBS_PIXELS;
    let mut data = vec![T::zero(); n * per];
    for (stack, chunk) in stacks.zip(data.chunks_mut(per)) {
        stack.write_tensor(chunk);
    }
    Tensor::from_vec(&[n, STACK_LEN, OBS_SIZE, OBS_SIZE], data).expect("shape computed")
}
