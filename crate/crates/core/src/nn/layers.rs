//! Layer kernels with hand-written backward passes.

use rand::Rng;

use super::{gemm, Scalar, Tensor};

/// Output size and `(before, after)` zero padding for "same" padding:
/// `out = ceil(input / stride)`, with the odd padding element placed after.
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out.saturating_sub(1)) * stride + kernel).saturating_sub(input);
    (out, total / 2, total - total / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

fn relu_in_place<T: Scalar>(xs: &mut [T]) {
    for v in xs {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zero upstream gradient wherever the ReLU output was clamped.
fn relu_mask<T: Scalar>(grad: &mut [T], output: &[T]) {
    for (g, &y) in grad.iter_mut().zip(output) {
        if y <= T::zero() {
            *g = T::zero();
        }
    }
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, limit: f64) -> Vec<T> {
    (0..n)
        .map(|_| T::lit(rng.random_range(-limit..limit)))
        .collect()
}

// ---------------------------------------------------------------------------
// Convolution

#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub activation: Activation,
    /// `[out_channels, in_channels * kernel * kernel]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    input_shape: [usize; 4],
    /// im2col matrix `[K, N * P]`.
    cols: Vec<T>,
    output: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
    ) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            activation,
            weight: Tensor::zeros(&[out_channels, in_channels * kernel * kernel]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            same_padding(h, self.kernel, self.stride).0,
            same_padding(w, self.kernel, self.stride).0,
        )
    }

    pub fn init_he_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let limit = (6.0 / self.fan_in() as f64).sqrt();
        let data = uniform(rng, self.weight.len(), limit);
        self.weight.data_mut().copy_from_slice(&data);
        self.bias.data_mut().fill(T::zero());
    }

    fn im2col(&self, x: &Tensor<T>) -> (Vec<T>, usize, usize) {
        let [n, c, h, w] = dims4(x);
        let k = self.kernel;
        let (oh, pt, _) = same_padding(h, k, self.stride);
        let (ow, pl, _) = same_padding(w, k, self.stride);
        let p = oh * ow;
        let cols_w = n * p;
        let mut cols = vec![T::zero(); c * k * k * cols_w];
        let xd = x.data();
        for b in 0..n {
            for ch in 0..c {
                let plane = &xd[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                for ky in 0..k {
                    for kx in 0..k {
                        let row = (ch * k + ky) * k + kx;
                        let dst = &mut cols[row * cols_w + b * p..row * cols_w + (b + 1) * p];
                        for oy in 0..oh {
                            let iy = (oy * self.stride + ky) as isize - pt as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                            for ox in 0..ow {
                                let ix = (ox * self.stride + kx) as isize - pl as isize;
                                if ix >= 0 && ix < w as isize {
                                    dst[oy * ow + ox] = src[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        (cols, oh, ow)
    }

    fn col2im(&self, dcols: &[T], shape: [usize; 4]) -> Tensor<T> {
        let [n, c, h, w] = shape;
        let k = self.kernel;
        let (oh, pt, _) = same_padding(h, k, self.stride);
        let (ow, pl, _) = same_padding(w, k, self.stride);
        let p = oh * ow;
        let cols_w = n * p;
        let mut dx = Tensor::zeros(&shape);
        let dxd = dx.data_mut();
        for b in 0..n {
            for ch in 0..c {
                let plane = &mut dxd[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                for ky in 0..k {
                    for kx in 0..k {
                        let row = (ch * k + ky) * k + kx;
                        let src = &dcols[row * cols_w + b * p..row * cols_w + (b + 1) * p];
                        for oy in 0..oh {
                            let iy = (oy * self.stride + ky) as isize - pt as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for ox in 0..ow {
                                let ix = (ox * self.stride + kx) as isize - pl as isize;
                                if ix >= 0 && ix < w as isize {
                                    let d = &mut plane[iy as usize * w + ix as usize];
                                    *d = *d + src[oy * ow + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    fn forward_impl(&self, x: &Tensor<T>) -> (Tensor<T>, Vec<T>) {
        let [n, c, _, _] = dims4(x);
        assert_eq!(c, self.in_channels, "conv2d: channel mismatch");
        let (cols, oh, ow) = self.im2col(x);
        let p = oh * ow;
        let kk = self.fan_in();
        // [out_c, N * P]
        let mut wide = vec![T::zero(); self.out_channels * n * p];
        gemm(
            self.out_channels,
            kk,
            n * p,
            self.weight.data(),
            false,
            &cols,
            false,
            &mut wide,
            false,
        );
        let mut out = vec![T::zero(); n * self.out_channels * p];
        for oc in 0..self.out_channels {
            let bias = self.bias.data()[oc];
            for b in 0..n {
                let src = &wide[oc * n * p + b * p..oc * n * p + (b + 1) * p];
                let dst = &mut out
                    [(b * self.out_channels + oc) * p..(b * self.out_channels + oc + 1) * p];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = s + bias;
                }
            }
        }
        if self.activation == Activation::Relu {
            relu_in_place(&mut out);
        }
        let out = Tensor::from_vec(&[n, self.out_channels, oh, ow], out).expect("shape computed");
        (out, cols)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        self.forward_impl(x).0
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> (Tensor<T>, ConvCache<T>) {
        let (out, cols) = self.forward_impl(x);
        let cache = ConvCache {
            input_shape: dims4(x),
            cols,
            output: out.data().to_vec(),
        };
        (out, cache)
    }

    /// Returns `(d_input, d_weight, d_bias)`; `d_input` only when requested.
    pub fn backward(
        &self,
        cache: &ConvCache<T>,
        grad_out: &Tensor<T>,
        need_input_grad: bool,
    ) -> (Option<Tensor<T>>, Tensor<T>, Tensor<T>) {
        let [n, _, _, _] = cache.input_shape;
        let oc = self.out_channels;
        let p = grad_out.len() / (n * oc);
        let mut g = grad_out.data().to_vec();
        if self.activation == Activation::Relu {
            relu_mask(&mut g, &cache.output);
        }
        // Regroup [N, oc, P] into [oc, N * P].
        let mut wide = vec![T::zero(); oc * n * p];
        let mut dbias = Tensor::zeros(&[oc]);
        for b in 0..n {
            for o in 0..oc {
                let src = &g[(b * oc + o) * p..(b * oc + o + 1) * p];
                wide[o * n * p + b * p..o * n * p + (b + 1) * p].copy_from_slice(src);
                let db = &mut dbias.data_mut()[o];
                *db = src.iter().fold(*db, |acc, &v| acc + v);
            }
        }
        let kk = self.fan_in();
        let mut dweight = Tensor::zeros(self.weight.shape());
        gemm(
            oc,
            n * p,
            kk,
            &wide,
            false,
            &cache.cols,
            true,
            dweight.data_mut(),
            false,
        );
        let dinput = need_input_grad.then(|| {
            let mut dcols = vec![T::zero(); kk * n * p];
            gemm(
                kk,
                oc,
                n * p,
                self.weight.data(),
                true,
                &wide,
                false,
                &mut dcols,
                false,
            );
            self.col2im(&dcols, cache.input_shape)
        });
        (dinput, dweight, dbias)
    }
}

fn dims4<T: Scalar>(x: &Tensor<T>) -> [usize; 4] {
    match *x.shape() {
        [n, c, h, w] => [n, c, h, w],
        ref other => panic!("expected a 4-d tensor, got shape {other:?}"),
    }
}

// ---------------------------------------------------------------------------
// Max pooling, 2x2 window, stride 2, same padding

#[derive(Debug, Clone, Copy, Default)]
pub struct MaxPool2d;

#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: [usize; 4],
    /// Flat input index of the winner for every output element.
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub const WINDOW: usize = 2;
    pub const STRIDE: usize = 2;

    pub fn output_hw(h: usize, w: usize) -> (usize, usize) {
        (
            same_padding(h, Self::WINDOW, Self::STRIDE).0,
            same_padding(w, Self::WINDOW, Self::STRIDE).0,
        )
    }

    fn forward_impl<T: Scalar>(x: &Tensor<T>, keep: bool) -> (Tensor<T>, Vec<usize>) {
        let [n, c, h, w] = dims4(x);
        let (oh, pt, _) = same_padding(h, Self::WINDOW, Self::STRIDE);
        let (ow, pl, _) = same_padding(w, Self::WINDOW, Self::STRIDE);
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(if keep { n * c * oh * ow } else { 0 });
        let xd = x.data();
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    // Padded positions are skipped, i.e. act as -inf.
                    let mut best = T::neg_infinity();
                    let mut best_idx = usize::MAX;
                    for dy in 0..Self::WINDOW {
                        let iy = (oy * Self::STRIDE + dy) as isize - pt as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for dx in 0..Self::WINDOW {
                            let ix = (ox * Self::STRIDE + dx) as isize - pl as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = base + iy as usize * w + ix as usize;
                            if best_idx == usize::MAX || xd[idx] > best {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    if keep {
                        argmax.push(best_idx);
                    }
                }
            }
        }
        let out = Tensor::from_vec(&[n, c, oh, ow], out).expect("shape computed");
        (out, argmax)
    }

    pub fn infer<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
        Self::forward_impl(x, false).0
    }

    pub fn forward_train<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, PoolCache) {
        let (out, argmax) = Self::forward_impl(x, true);
        (
            out,
            PoolCache {
                input_shape: dims4(x),
                argmax,
            },
        )
    }

    pub fn backward<T: Scalar>(cache: &PoolCache, grad_out: &Tensor<T>) -> Tensor<T> {
        let mut dx = Tensor::zeros(&cache.input_shape);
        let d = dx.data_mut();
        for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
            d[idx] = d[idx] + g;
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Batch normalization over (N, H, W) per channel

#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    pub channels: usize,
    pub eps: f64,
    /// Weight of the old running value in the exponential average.
    pub momentum: f64,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    shape: Vec<usize>,
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub const DEFAULT_EPS: f64 = 1e-3;
    pub const DEFAULT_MOMENTUM: f64 = 0.99;

    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            channels,
            eps: Self::DEFAULT_EPS,
            momentum: Self::DEFAULT_MOMENTUM,
            gamma: Tensor::filled(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
        }
    }

    pub fn reset_parameters(&mut self) {
        *self = BatchNorm2d {
            eps: self.eps,
            momentum: self.momentum,
            ..Self::new(self.channels)
        };
    }

    /// `(N, C, spatial)` for `[N, C]` or `[N, C, H, W]` inputs.
    fn layout(&self, x: &Tensor<T>) -> (usize, usize, usize) {
        let s = x.shape();
        assert!(
            s.len() >= 2 && s[1] == self.channels,
            "batchnorm: channel mismatch"
        );
        (s[0], s[1], s[2..].iter().product())
    }

    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let (n, c, sp) = self.layout(x);
        let eps = T::lit(self.eps);
        let mut out = x.clone();
        let d = out.data_mut();
        for ch in 0..c {
            let scale = self.gamma.data()[ch] / (self.running_var.data()[ch] + eps).sqrt();
            let shift = self.beta.data()[ch] - self.running_mean.data()[ch] * scale;
            for b in 0..n {
                for v in &mut d[(b * c + ch) * sp..(b * c + ch + 1) * sp] {
                    *v = *v * scale + shift;
                }
            }
        }
        out
    }

    /// Normalizes with batch statistics and updates the running averages.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> (Tensor<T>, BatchNormCache<T>) {
        let (n, c, sp) = self.layout(x);
        let m = (n * sp) as f64;
        let eps = T::lit(self.eps);
        let mom = T::lit(self.momentum);
        let one_minus = T::lit(1.0 - self.momentum);
        let xd = x.data();
        let mut out = vec![T::zero(); xd.len()];
        let mut xhat = vec![T::zero(); xd.len()];
        let mut inv_std = vec![T::zero(); c];
        for ch in 0..c {
            let mut sum = T::zero();
            for b in 0..n {
                for &v in &xd[(b * c + ch) * sp..(b * c + ch + 1) * sp] {
                    sum = sum + v;
                }
            }
            let mean = sum / T::lit(m);
            let mut sq = T::zero();
            for b in 0..n {
                for &v in &xd[(b * c + ch) * sp..(b * c + ch + 1) * sp] {
                    sq = sq + (v - mean) * (v - mean);
                }
            }
            let var = sq / T::lit(m);
            let istd = T::one() / (var + eps).sqrt();
            inv_std[ch] = istd;
            let (g, be) = (self.gamma.data()[ch], self.beta.data()[ch]);
            for b in 0..n {
                let r = (b * c + ch) * sp..(b * c + ch + 1) * sp;
                for i in r {
                    let xh = (xd[i] - mean) * istd;
                    xhat[i] = xh;
                    out[i] = g * xh + be;
                }
            }
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = mom * *rm + one_minus * mean;
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = mom * *rv + one_minus * var;
        }
        let out = Tensor::from_vec(x.shape(), out).expect("same shape");
        (
            out,
            BatchNormCache {
                shape: x.shape().to_vec(),
                xhat,
                inv_std,
            },
        )
    }

    /// Returns `(d_input, d_gamma, d_beta)`, differentiating through the
    /// batch mean and variance.
    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        grad_out: &Tensor<T>,
    ) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
        let n = cache.shape[0];
        let c = self.channels;
        let sp: usize = cache.shape[2..].iter().product();
        let m = T::lit((n * sp) as f64);
        let g = grad_out.data();
        let mut dx = vec![T::zero(); g.len()];
        let mut dgamma = Tensor::zeros(&[c]);
        let mut dbeta = Tensor::zeros(&[c]);
        for ch in 0..c {
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for b in 0..n {
                for i in (b * c + ch) * sp..(b * c + ch + 1) * sp {
                    sum_dy = sum_dy + g[i];
                    sum_dy_xhat = sum_dy_xhat + g[i] * cache.xhat[i];
                }
            }
            dgamma.data_mut()[ch] = sum_dy_xhat;
            dbeta.data_mut()[ch] = sum_dy;
            let k = self.gamma.data()[ch] * cache.inv_std[ch] / m;
            for b in 0..n {
                for i in (b * c + ch) * sp..(b * c + ch + 1) * sp {
                    dx[i] = k * (m * g[i] - sum_dy - cache.xhat[i] * sum_dy_xhat);
                }
            }
        }
        let dx = Tensor::from_vec(&cache.shape, dx).expect("same shape");
        (dx, dgamma, dbeta)
    }
}

// ---------------------------------------------------------------------------
// Fully connected

#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub in_features: usize,
    pub out_features: usize,
    pub activation: Activation,
    /// `[out_features, in_features]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    input: Tensor<T>,
    output: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_features: usize, out_features: usize, activation: Activation) -> Self {
        Dense {
            in_features,
            out_features,
            activation,
            weight: Tensor::zeros(&[out_features, in_features]),
            bias: Tensor::zeros(&[out_features]),
        }
    }

    /// He-uniform for ReLU layers, Glorot-uniform for the linear head.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let limit = match self.activation {
            Activation::Relu => (6.0 / self.in_features as f64).sqrt(),
            Activation::Linear => (6.0 / (self.in_features + self.out_features) as f64).sqrt(),
        };
        let data = uniform(rng, self.weight.len(), limit);
        self.weight.data_mut().copy_from_slice(&data);
        self.bias.data_mut().fill(T::zero());
    }

    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let n = x.shape()[0];
        assert_eq!(x.len(), n * self.in_features, "dense: feature mismatch");
        let mut out = vec![T::zero(); n * self.out_features];
        gemm(
            n,
            self.in_features,
            self.out_features,
            x.data(),
            false,
            self.weight.data(),
            true,
            &mut out,
            false,
        );
        for row in out.chunks_mut(self.out_features) {
            for (v, &b) in row.iter_mut().zip(self.bias.data()) {
                *v = *v + b;
            }
        }
        if self.activation == Activation::Relu {
            relu_in_place(&mut out);
        }
        Tensor::from_vec(&[n, self.out_features], out).expect("shape computed")
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> (Tensor<T>, DenseCache<T>) {
        let out = self.infer(x);
        let cache = DenseCache {
            input: x.clone(),
            output: out.data().to_vec(),
        };
        (out, cache)
    }

    pub fn backward(
        &self,
        cache: &DenseCache<T>,
        grad_out: &Tensor<T>,
        need_input_grad: bool,
    ) -> (Option<Tensor<T>>, Tensor<T>, Tensor<T>) {
        let n = cache.input.shape()[0];
        let mut g = grad_out.data().to_vec();
        if self.activation == Activation::Relu {
            relu_mask(&mut g, &cache.output);
        }
        let mut dweight = Tensor::zeros(self.weight.shape());
        gemm(
            self.out_features,
            n,
            self.in_features,
            &g,
            true,
            cache.input.data(),
            false,
            dweight.data_mut(),
            false,
        );
        let mut dbias = Tensor::zeros(&[self.out_features]);
        for row in g.chunks(self.out_features) {
            for (d, &v) in dbias.data_mut().iter_mut().zip(row) {
                *d = *d + v;
            }
        }
        let dinput = need_input_grad.then(|| {
            let mut dx = vec![T::zero(); n * self.in_features];
            gemm(
                n,
                self.out_features,
                self.in_features,
                &g,
                false,
                self.weight.data(),
                false,
                &mut dx,
                false,
            );
            Tensor::from_vec(cache.input.shape(), dx).expect("same shape")
        });
        (dinput, dweight, dbias)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Direct nested-loop convolution with explicit padding offsets.
    fn conv_oracle(
        x: &[f64],
        h: usize,
        w: usize,
        kern: &[f64],
        k: usize,
        s: usize,
        pad_top: usize,
        pad_left: usize,
        oh: usize,
        ow: usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0; oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for ky in 0..k {
                    for kx in 0..k {
                        let iy = (oy * s + ky) as i64 - pad_top as i64;
                        let ix = (ox * s + kx) as i64 - pad_left as i64;
                        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                            acc += x[iy as usize * w + ix as usize] * kern[ky * k + kx];
                        }
                    }
                }
                out[oy * ow + ox] = acc;
            }
        }
        out
    }

    #[test]
    fn padding_reproduces_layer_table_sizes() {
        assert_eq!(same_padding(84, 8, 4), (21, 2, 2));
        assert_eq!(same_padding(21, 2, 2), (11, 0, 1));
        assert_eq!(same_padding(11, 4, 2), (6, 1, 2));
        assert_eq!(same_padding(6, 2, 2), (3, 0, 0));
        assert_eq!(same_padding(3, 3, 2), (2, 1, 1));
        assert_eq!(same_padding(2, 2, 2), (1, 0, 0));
        assert_eq!(same_padding(1, 2, 2), (1, 0, 1));
    }

    #[test]
    fn conv_shape_first_layer() {
        let conv = Conv2d::<f32>::new(4, 32, 8, 4, Activation::Relu);
        let out = conv.infer(&Tensor::zeros(&[1, 4, 84, 84]));
        assert_eq!(out.shape(), &[1, 32, 21, 21]);
    }

    #[test]
    fn conv_identity_kernel() {
        let mut conv = Conv2d::<f64>::new(2, 2, 1, 1, Activation::Linear);
        conv.weight
            .data_mut()
            .copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let x = Tensor::from_vec(&[1, 2, 3, 3], (0..18).map(|v| v as f64 - 9.0).collect()).unwrap();
        assert_eq!(conv.infer(&x), x);
    }

    #[test]
    fn conv_ones_stride_two() {
        let mut conv = Conv2d::<f64>::new(1, 1, 3, 2, Activation::Linear);
        conv.weight.data_mut().fill(1.0);
        let x = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let got = conv.infer(&x);
        let (oh, pt, _) = same_padding(3, 3, 2);
        let want = conv_oracle(&[1.0; 9], 3, 3, &[1.0; 9], 3, 2, pt, pt, oh, oh);
        // Each output window overlaps a 2x2 corner of the padded 3x3 input.
        assert_eq!(want, vec![4.0, 4.0, 4.0, 4.0]);
        assert_eq!(got.data(), &want[..]);
    }

    #[test]
    fn conv_matches_oracle_on_random_input() {
        use rand::SeedableRng;
        let mut rng = rand_pcg::Pcg64::seed_from_u64(3);
        let mut conv = Conv2d::<f64>::new(1, 1, 4, 2, Activation::Linear);
        conv.init_he_uniform(&mut rng);
        let x: Vec<f64> = (0..11 * 11).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = conv.infer(&Tensor::from_vec(&[1, 1, 11, 11], x.clone()).unwrap());
        let (oh, pt, _) = same_padding(11, 4, 2);
        let want = conv_oracle(&x, 11, 11, conv.weight.data(), 4, 2, pt, pt, oh, oh);
        for (a, b) in got.data().iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn maxpool_windows() {
        let x = Tensor::from_vec(&[1, 1, 3, 3], (1..=9).map(|v| v as f64).collect()).unwrap();
        let y = MaxPool2d::infer(&x);
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[5.0, 6.0, 8.0, 9.0]);

        let c = Tensor::filled(&[2, 3, 5, 5], -7.5f64);
        assert!(MaxPool2d::infer(&c).data().iter().all(|&v| v == -7.5));

        let big = MaxPool2d::infer(&Tensor::<f32>::zeros(&[1, 32, 21, 21]));
        assert_eq!(big.shape(), &[1, 32, 11, 11]);
    }

    #[test]
    fn maxpool_padding_never_wins_over_negatives() {
        let x = Tensor::filled(&[1, 1, 3, 3], -1.0f64);
        assert!(MaxPool2d::infer(&x).data().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn batchnorm_eval_identity() {
        let bn = BatchNorm2d::<f64>::new(3);
        let x = Tensor::from_vec(&[2, 3, 1, 2], (0..12).map(|v| v as f64).collect()).unwrap();
        let y = bn.infer(&x);
        let scale = 1.0 / (1.0f64 + 1e-3).sqrt();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert_abs_diff_eq!(*a, b * scale, epsilon = 1e-12);
        }
    }

    #[test]
    fn batchnorm_train_normalizes() {
        let mut bn = BatchNorm2d::<f64>::new(2);
        bn.eps = 1e-12;
        let x = Tensor::from_vec(
            &[3, 2, 2, 2],
            (0..24).map(|v| ((v * 7) % 11) as f64 * 0.3 - 1.0).collect(),
        )
        .unwrap();
        let (y, _) = bn.forward_train(&x);
        for ch in 0..2 {
            let vals: Vec<f64> = (0..3)
                .flat_map(|b| y.data()[(b * 2 + ch) * 4..(b * 2 + ch + 1) * 4].to_vec())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-5);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn batchnorm_two_values() {
        let mut bn = BatchNorm2d::<f64>::new(1);
        let x = Tensor::from_vec(&[2, 1], vec![0.0, 2.0]).unwrap();
        let (y, _) = bn.forward_train(&x);
        let want = 1.0 / 1.001f64.sqrt();
        assert_abs_diff_eq!(y.data()[0], -want, epsilon = 1e-12);
        assert_abs_diff_eq!(y.data()[1], want, epsilon = 1e-12);
        assert_abs_diff_eq!(want, 0.9995, epsilon = 1e-4);
        // Running stats moved 1% toward the batch statistics.
        assert_abs_diff_eq!(bn.running_mean.data()[0], 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(bn.running_var.data()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn batchnorm_single_sample_is_finite() {
        let mut bn = BatchNorm2d::<f32>::new(4);
        let (y, _) = bn.forward_train(&Tensor::filled(&[1, 4], 3.0));
        assert!(y.all_finite());
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_forward() {
        let mut d = Dense::<f64>::new(2, 3, Activation::Relu);
        d.weight
            .data_mut()
            .copy_from_slice(&[1.0, 0.0, 0.0, 1.0, -1.0, -1.0]);
        d.bias.data_mut().copy_from_slice(&[0.0, 0.5, 0.0]);
        let x = Tensor::from_vec(&[1, 2], vec![2.0, 3.0]).unwrap();
        assert_eq!(d.infer(&x).data(), &[2.0, 3.5, 0.0]);
    }
}
