//! Central finite differences against the analytic backward passes, in f64.

use rand::Rng;
use rand_pcg::Pcg64;
use snake_dqn::nn::layers::{Activation, BatchNorm2d, Conv2d, Dense, MaxPool2d};
use snake_dqn::nn::{LayerSpec, Network, Tensor};
use snake_dqn::rng::seeded;

pub const H: f64 = 1e-5;
/// Denominator floor for relative errors on near-zero gradients.
pub const REL_FLOOR: f64 = 1e-3;
pub const LAYER_TOL: f64 = 1e-6;
pub const NETWORK_TOL: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn random_tensor(rng: &mut Pcg64, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::from_vec(shape, data).unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// d loss / d slot by central differences; the state is cloned per side.
pub fn central_diff<S: Clone>(
    state: &S,
    slot: impl Fn(&mut S) -> &mut f64,
    loss: impl Fn(&S) -> f64,
) -> f64 {
    let mut plus = state.clone();
    *slot(&mut plus) += H;
    let mut minus = state.clone();
    *slot(&mut minus) -= H;
    (loss(&plus) - loss(&minus)) / (2.0 * H)
}

fn max_err(analytic: &[f64], numeric: impl Fn(usize) -> f64) -> f64 {
    analytic
        .iter()
        .enumerate()
        .map(|(i, &a)| rel_err(a, numeric(i)))
        .fold(0.0, f64::max)
}

/// Max relative error over every weight, bias and input entry of a
/// strided, same-padded convolution with ReLU.
pub fn conv_error(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut conv = Conv2d::<f64>::new(3, 4, 3, 2, Activation::Relu);
    conv.init_he_uniform(&mut rng);
    conv.bias = random_tensor(&mut rng, &[4], 0.1);
    let x = random_tensor(&mut rng, &[2, 3, 7, 7], 1.0);
    let (out, cache) = conv.forward_train(&x);
    let r = random_tensor(&mut rng, out.shape(), 1.0);
    let (dx, dw, db) = conv.backward(&cache, &r, true);
    let state = (conv, x);
    let loss = |s: &(Conv2d<f64>, Tensor<f64>)| dot(&s.0.infer(&s.1), &r);
    let ew = max_err(dw.data(), |i| {
        central_diff(&state, |s| &mut s.0.weight.data_mut()[i], loss)
    });
    let eb = max_err(db.data(), |i| {
        central_diff(&state, |s| &mut s.0.bias.data_mut()[i], loss)
    });
    let ex = max_err(dx.unwrap().data(), |i| {
        central_diff(&state, |s| &mut s.1.data_mut()[i], loss)
    });
    ew.max(eb).max(ex)
}

/// Input gradient of 2x2/2 max pooling on an odd-sized input.
pub fn pool_error(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let x = random_tensor(&mut rng, &[2, 3, 5, 5], 1.0);
    let (out, cache) = MaxPool2d::forward_train(&x);
    let r = random_tensor(&mut rng, out.shape(), 1.0);
    let dx = MaxPool2d::backward(&cache, &r);
    let loss = |s: &Tensor<f64>| dot(&MaxPool2d::infer(s), &r);
    max_err(dx.data(), |i| {
        central_diff(&x, |s| &mut s.data_mut()[i], loss)
    })
}

/// Training-mode batch norm: input, gamma and beta.
pub fn batchnorm_error(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut bn = BatchNorm2d::<f64>::new(3);
    bn.gamma = random_tensor(&mut rng, &[3], 2.0);
    bn.beta = random_tensor(&mut rng, &[3], 1.0);
    let x = random_tensor(&mut rng, &[4, 3, 3, 3], 2.0);
    let (out, cache) = bn.clone().forward_train(&x);
    let r = random_tensor(&mut rng, out.shape(), 1.0);
    let (dx, dg, db) = bn.backward(&cache, &r);
    let state = (bn, x);
    let loss = |s: &(BatchNorm2d<f64>, Tensor<f64>)| dot(&s.0.clone().forward_train(&s.1).0, &r);
    let eg = max_err(dg.data(), |i| {
        central_diff(&state, |s| &mut s.0.gamma.data_mut()[i], loss)
    });
    let eb = max_err(db.data(), |i| {
        central_diff(&state, |s| &mut s.0.beta.data_mut()[i], loss)
    });
    let ex = max_err(dx.data(), |i| {
        central_diff(&state, |s| &mut s.1.data_mut()[i], loss)
    });
    eg.max(eb).max(ex)
}

pub fn dense_error(seed: u64, activation: Activation) -> f64 {
    let mut rng = seeded(seed);
    let mut d = Dense::<f64>::new(6, 5, activation);
    d.init_uniform(&mut rng);
    d.bias = random_tensor(&mut rng, &[5], 0.2);
    let x = random_tensor(&mut rng, &[3, 6], 1.0);
    let (out, cache) = d.forward_train(&x);
    let r = random_tensor(&mut rng, out.shape(), 1.0);
    let (dx, dw, db) = d.backward(&cache, &r, true);
    let state = (d, x);
    let loss = |s: &(Dense<f64>, Tensor<f64>)| dot(&s.0.infer(&s.1), &r);
    let ew = max_err(dw.data(), |i| {
        central_diff(&state, |s| &mut s.0.weight.data_mut()[i], loss)
    });
    let eb = max_err(db.data(), |i| {
        central_diff(&state, |s| &mut s.0.bias.data_mut()[i], loss)
    });
    let ex = max_err(dx.unwrap().data(), |i| {
        central_diff(&state, |s| &mut s.1.data_mut()[i], loss)
    });
    ew.max(eb).max(ex)
}

/// Relative error of selected parameter gradients of a network under the
/// loss `sum(forward_train(x) * r)`. `probes` lists `(tensor, index)`.
pub fn network_error(
    net: &Network<f64>,
    x: &Tensor<f64>,
    r: &Tensor<f64>,
    probes: &[(usize, usize)],
) -> f64 {
    let mut work = net.clone();
    work.forward_train(x).unwrap();
    let grads = work.backward(r).unwrap();
    let loss = |n: &Network<f64>| dot(&n.clone().forward_train(x).unwrap(), r);
    probes
        .iter()
        .map(|&(t, i)| {
            let numeric = central_diff(
                net,
                |n| &mut n.params_mut().into_iter().nth(t).unwrap().data_mut()[i],
                loss,
            );
            rel_err(grads.tensors()[t].data()[i], numeric)
        })
        .fold(0.0, f64::max)
}

/// Every parameter of a small conv-pool-BN-dense network on 2x8x8 inputs.
pub fn reduced_network_error(seed: u64) -> f64 {
    let specs = [
        LayerSpec::conv_relu(3, 1, 4),
        LayerSpec::MaxPool,
        LayerSpec::BatchNorm,
        LayerSpec::conv_relu(2, 2, 3),
        LayerSpec::BatchNorm,
        LayerSpec::Flatten,
        LayerSpec::dense(6, Activation::Relu),
        LayerSpec::dense(3, Activation::Linear),
    ];
    let mut rng = seeded(seed);
    let mut net = Network::<f64>::new([2, 8, 8], &specs).unwrap();
    net.init_weights(&mut rng);
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let x = random_tensor(&mut rng, &[4, 2, 8, 8], 1.0);
    let r = random_tensor(&mut rng, &[4, 3], 1.0);
    let probes: Vec<(usize, usize)> = net
        .params()
        .iter()
        .enumerate()
        .flat_map(|(t, p)| (0..p.len()).map(move |i| (t, i)))
        .collect();
    network_error(&net, &x, &r, &probes)
}

/// The full Q-network in f64 with binary inputs; two random probes per
/// parameter tensor.
pub fn full_network_error(seed: u64) -> (f64, usize) {
    let mut rng = seeded(seed);
    let mut net = Network::<f64>::q_network(4).unwrap();
    net.init_weights(&mut rng);
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.01..0.01);
        }
    }
    let n = 3;
    let data = (0..n * 4 * 84 * 84)
        .map(|_| if rng.random_bool(0.15) { 1.0 } else { 0.0 })
        .collect();
    let x = Tensor::from_vec(&[n, 4, 84, 84], data).unwrap();
    let r = random_tensor(&mut rng, &[n, 4], 1.0);
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let probes: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(t, &len)| {
            let a = rng.random_range(0..len);
            let b = rng.random_range(0..len);
            [(t, a), (t, b)]
        })
        .collect();
    (network_error(&net, &x, &r, &probes), probes.len())
}
