use super::{Gradients, Scalar, Tensor};
use crate::error::{Error, Result};

/// Rescale all gradients together so their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut Gradients<T>, max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(T::lit(max_norm / norm));
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-7;

    /// Zeroed moments shaped like `params`.
    pub fn new(params: &[&Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Adam {
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            eps: Self::EPS,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One bias-corrected Adam update.
    pub fn step(
        &mut self,
        params: Vec<&mut Tensor<T>>,
        grads: &Gradients<T>,
        lr: f64,
    ) -> Result<()> {
        let congruent = params.len() == grads.tensors().len()
            && params.len() == self.m.len()
            && params
                .iter()
                .zip(grads.tensors())
                .zip(&self.m)
                .all(|((p, g), m)| p.shape() == g.shape() && p.shape() == m.shape());
        if !congruent {
            return Err(Error::Usage(
                "adam: parameter/gradient shapes differ".into(),
            ));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - self.beta1), T::lit(1.0 - self.beta2));
        let step = T::lit(lr / bc1);
        let inv_bc2 = T::lit(1.0 / bc2);
        let eps = T::lit(self.eps);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                *p = *p - step * *m / ((*v * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grads(vals: &[&[f64]]) -> Gradients<f64> {
        Gradients(
            vals.iter()
                .map(|v| Tensor::from_vec(&[v.len()], v.to_vec()).unwrap())
                .collect(),
        )
    }

    #[test]
    fn clip_leaves_small_norms() {
        let mut g = grads(&[&[0.3], &[0.4]]);
        let norm = clip_global_norm(&mut g, 1.0);
        assert_abs_diff_eq!(norm, 0.5, epsilon = 1e-12);
        assert_eq!(g, grads(&[&[0.3], &[0.4]]));
    }

    #[test]
    fn clip_scales_large_norms() {
        // norm = sqrt(4 + 12) = 4
        let mut g = grads(&[&[2.0, 2.0], &[2.0, 2.0]]);
        clip_global_norm(&mut g, 1.0);
        assert_eq!(g, grads(&[&[0.5, 0.5], &[0.5, 0.5]]));
        assert_abs_diff_eq!(g.global_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn clip_zero_gradients() {
        let mut g = grads(&[&[0.0, 0.0]]);
        assert_eq!(clip_global_norm(&mut g, 1.0), 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn adam_zero_gradient_no_move() {
        let mut p = Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap();
        let mut adam = Adam::new(&[&p]);
        adam.step(vec![&mut p], &grads(&[&[0.0, 0.0]]), 0.0025)
            .unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let mut p = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let mut adam = Adam::new(&[&p]);
        adam.step(vec![&mut p], &grads(&[&[1.0]]), 0.0025).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        assert_abs_diff_eq!(p.data()[0], -0.0025 / (1.0 + 1e-7), epsilon = 1e-15);
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut p = Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap();
            let mut adam = Adam::new(&[&p]);
            for _ in 0..5 {
                adam.step(vec![&mut p], &grads(&[&[0.5, -1.0, 2.0]]), 0.01)
                    .unwrap();
            }
            (p, adam)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut p = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let mut adam = Adam::new(&[&p]);
        assert!(adam
            .step(vec![&mut p], &grads(&[&[1.0, 2.0]]), 0.1)
            .is_err());
    }
}
