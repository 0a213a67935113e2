use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Bias-corrected Adam with per-parameter first/second moment buffers.
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    pub step_count: u64,
    first_moment: Vec<Vec<S>>,
    second_moment: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    /// Zeroed moments matching `params`.
    pub fn new(config: AdamConfig, params: &[Tensor<S>]) -> Self {
        let zeros = || params.iter().map(|p| vec![S::zero(); p.len()]).collect();
        Self { config, step_count: 0, first_moment: zeros(), second_moment: zeros() }
    }

    pub fn first_moment(&self) -> &[Vec<S>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<S>] {
        &self.second_moment
    }

    pub fn step(&mut self, params: &mut [Tensor<S>], grads: &[Vec<S>]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::dim(format!(
                "Adam tracks {} parameters, got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first_moment[i].len() || g.len() != p.len() {
                return Err(Error::dim(format!(
                    "parameter {i}: {} values, {} moments, {} gradients",
                    p.len(),
                    self.first_moment[i].len(),
                    g.len()
                )));
            }
        }
        self.step_count += 1;
        let c = self.config;
        let t = self.step_count as i32;
        let b1 = S::from_f64_lossy(c.beta1);
        let b2 = S::from_f64_lossy(c.beta2);
        let one_b1 = S::from_f64_lossy(1.0 - c.beta1);
        let one_b2 = S::from_f64_lossy(1.0 - c.beta2);
        let corr1 = S::from_f64_lossy(1.0 - c.beta1.powi(t));
        let corr2 = S::from_f64_lossy(1.0 - c.beta2.powi(t));
        let lr = S::from_f64_lossy(c.learning_rate);
        let eps = S::from_f64_lossy(c.epsilon);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + one_b1 * gi;
                *vi = b2 * *vi + one_b2 * gi * gi;
                let m_hat = *mi / corr1;
                let v_hat = *vi / corr2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.ensure_finite("adam step")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = vec![Tensor::<f64>::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap()];
        let before = params.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &params);
        adam.step(&mut params, &[vec![0.0; 3]]).unwrap();
        assert_eq!(params, before);
        assert!(adam.first_moment()[0].iter().all(|&m| m == 0.0));
        assert!(adam.second_moment()[0].iter().all(|&v| v == 0.0));
        assert_eq!(adam.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = vec![Tensor::<f64>::scalar(0.0)];
        let mut adam = AdamState::new(AdamConfig::default(), &params);
        adam.step(&mut params, &[vec![1.0]]).unwrap();
        // m_hat = 1, v_hat = 1 -> delta = -lr / (1 + eps)
        assert!((params[0].item() + 1e-4).abs() < 1e-8);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = vec![Tensor::<f32>::zeros(&[2])];
        let mut adam = AdamState::new(AdamConfig::default(), &params);
        assert!(matches!(adam.step(&mut params, &[vec![0.0; 3]]), Err(Error::Dimension(_))));
        assert_eq!(adam.step_count, 0);
    }
}
