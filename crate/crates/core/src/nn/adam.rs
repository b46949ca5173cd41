use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState::with_config(n_params, AdamConfig::default())
    }

    pub fn with_config(n_params: usize, config: AdamConfig) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            config,
        }
    }

    /// One bias-corrected Adam update in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape {
                context: "adam update",
                expected: self.m.len(),
                got: if params.len() != self.m.len() { params.len() } else { grads.len() },
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                epoch: 0,
                reason: format!("non-finite gradient component {i} at optimizer step {}", self.step + 1),
            });
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    state.update(params, grads, lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.25, -1.0, 3.0];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, 0.01).unwrap();
        assert_eq!(p, vec![0.25, -1.0, 3.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = 1, v_hat = 1  =>  step = lr / (1 + eps)
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 0.005).unwrap();
        assert!((p[0] + 0.005 / (1.0 + 1e-8)).abs() < 1e-18);
        assert!((p[0] + 0.005).abs() < 1e-10);
    }

    #[test]
    fn repeated_from_same_state_is_identical() {
        let s0 = AdamState {
            m: vec![0.1, -0.2],
            v: vec![0.01, 0.04],
            step: 5,
            config: AdamConfig::default(),
        };
        let run = || {
            let mut s = s0.clone();
            let mut p = vec![1.0, 2.0];
            adam_step(&mut p, &[0.3, -0.7], &mut s, 1e-3).unwrap();
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut p = vec![0.0, 0.0];
        let mut s = AdamState::new(2);
        let err = adam_step(&mut p, &[1.0, f64::NAN], &mut s, 0.1).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
        assert_eq!(p, vec![0.0, 0.0]);
    }
}
