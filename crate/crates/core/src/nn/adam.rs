//! Adam optimizer state and update rule (bias-corrected first and second
//! moments, as published).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment accumulators mirroring the parameter slices, plus the
/// shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(param_lens: &[usize]) -> AdamState {
        AdamState {
            m: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn for_params(params: &[&[f32]]) -> AdamState {
        AdamState::new(&params.iter().map(|s| s.len()).collect::<Vec<_>>())
    }

    /// One optimizer step over every parameter slice.
    pub fn step_all(
        &mut self,
        params: &mut [&mut [f32]],
        grads: &[&[f32]],
        learning_rate: f32,
        cfg: &AdamConfig,
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state holds {} slices, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Shape("adam slice length mismatch".to_string()));
            }
            adam_update_slice(m, v, self.step, p, g, learning_rate, cfg);
        }
        Ok(())
    }
}

/// The element-wise Adam update:
///
/// ```text
/// m <- b1 m + (1-b1) g         mhat = m / (1 - b1^t)
/// v <- b2 v + (1-b2) g^2       vhat = v / (1 - b2^t)
/// p <- p - lr mhat / (sqrt(vhat) + eps)
/// ```
pub fn adam_update_slice(
    m: &mut [f32],
    v: &mut [f32],
    step: u64,
    params: &mut [f32],
    grads: &[f32],
    learning_rate: f32,
    cfg: &AdamConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        params[i] -= learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut m = vec![0.0];
        let mut v = vec![0.0];
        let mut p = vec![1.0f32];
        adam_update_slice(&mut m, &mut v, 1, &mut p, &[1.0], 1e-3, &cfg);
        // bias-corrected first step is lr * sign(g) up to epsilon
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-6, "p after step {}", p[0]);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged_and_decays_moments() {
        let cfg = AdamConfig::default();
        let mut m = vec![0.5f32];
        let mut v = vec![0.25f32];
        let mut p = vec![2.0f32];
        // zero moments in, zero grad: parameter stays exactly put
        let mut m0 = vec![0.0f32];
        let mut v0 = vec![0.0f32];
        adam_update_slice(&mut m0, &mut v0, 1, &mut p, &[0.0], 1e-3, &cfg);
        assert_eq!(p[0], 2.0);
        // non-zero moments decay toward zero
        let before = (m[0], v[0]);
        adam_update_slice(&mut m, &mut v, 1, &mut vec![0.0f32], &[0.0], 1e-3, &cfg);
        assert!(m[0] < before.0 && v[0] < before.1);
    }

    /// Two Adam steps on the scalar quadratic f(p) = p^2/2 (gradient p),
    /// compared against an independently written recursion.
    #[test]
    fn two_steps_match_hand_recursion() {
        let cfg = AdamConfig::default();
        let lr = 0.1f32;
        let mut p = vec![0.7f32];
        let mut m = vec![0.0];
        let mut v = vec![0.0];
        adam_update_slice(&mut m, &mut v, 1, &mut p, &[0.7], lr, &cfg);
        let g2 = p[0];
        adam_update_slice(&mut m, &mut v, 2, &mut p, &[g2], lr, &cfg);

        // hand recursion
        let (b1, b2, eps) = (0.9f32, 0.999f32, 1e-8f32);
        let mut hp = 0.7f32;
        let mut hm = 0.0f32;
        let mut hv = 0.0f32;
        for t in 1..=2u32 {
            let g = hp;
            hm = b1 * hm + (1.0 - b1) * g;
            hv = b2 * hv + (1.0 - b2) * g * g;
            let mhat = hm / (1.0 - b1.powi(t as i32));
            let vhat = hv / (1.0 - b2.powi(t as i32));
            hp -= lr * mhat / (vhat.sqrt() + eps);
        }
        assert!((p[0] - hp).abs() < 1e-9, "impl {} vs oracle {}", p[0], hp);
    }

    #[test]
    fn state_shape_mismatch_is_rejected() {
        let mut state = AdamState::new(&[2]);
        let mut p1 = vec![0.0f32; 2];
        let mut params: Vec<&mut [f32]> = vec![&mut p1];
        let grads: Vec<&[f32]> = vec![&[1.0]];
        assert!(state.step_all(&mut params, &grads, 1e-3, &AdamConfig::default()).is_err());
    }
}
