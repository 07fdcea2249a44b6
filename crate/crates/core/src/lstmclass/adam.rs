//! Adam optimizer over a flat parameter vector.

use serde::{Deserialize, Serialize};

/// Adam hyperparameters (published defaults).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators plus the step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of `params` in place; advances the state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], hyper: &AdamHyper) {
        assert_eq!(params.len(), self.m.len(), "parameter count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - hyper.beta1.powf(t);
        let bc2 = 1.0 - hyper.beta2.powf(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = hyper.beta1 * self.m[i] + (1.0 - hyper.beta1) * g;
            self.v[i] = hyper.beta2 * self.v[i] + (1.0 - hyper.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= hyper.alpha * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_alpha_times_sign() {
        let hyper = AdamHyper::default();
        let mut state = AdamState::new(3);
        let mut params = vec![1.0, -2.0, 0.5];
        let grads = vec![3.0, -0.04, 1e-3];
        let before = params.clone();
        state.step(&mut params, &grads, &hyper);
        for i in 0..3 {
            let delta = params[i] - before[i];
            // bias-corrected first step: -alpha * g / (|g| + eps)
            let expect = -hyper.alpha * grads[i].signum();
            assert!(
                (delta - expect).abs() < 1e-5,
                "coord {i}: delta {delta} vs {expect}"
            );
        }
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let hyper = AdamHyper::default();
        let mut state = AdamState::new(2);
        let mut params = vec![0.7, -0.3];
        let grads = vec![0.0, 0.0];
        for _ in 0..10 {
            state.step(&mut params, &grads, &hyper);
        }
        assert_eq!(params, vec![0.7, -0.3]);
    }

    #[test]
    fn converges_on_anisotropic_quadratic() {
        // f(x) = 0.5 (x0^2 + 10 x1^2)
        let hyper = AdamHyper {
            alpha: 1e-2,
            ..Default::default()
        };
        let mut state = AdamState::new(2);
        let mut x = vec![3.0, -2.0];
        let loss = |x: &[f64]| 0.5 * (x[0] * x[0] + 10.0 * x[1] * x[1]);
        let initial = loss(&x);
        for _ in 0..500 {
            let grads = vec![x[0], 10.0 * x[1]];
            state.step(&mut x, &grads, &hyper);
        }
        let final_loss = loss(&x);
        assert!(
            final_loss < 1e-3 * initial,
            "loss {final_loss} vs initial {initial}"
        );
    }
}
