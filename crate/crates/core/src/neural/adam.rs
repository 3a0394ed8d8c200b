use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    state: AdamState,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            state: AdamState {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                t: 0,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        }
    }

    pub fn from_state(state: AdamState) -> Self {
        Adam { state }
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    pub fn lr(&self) -> f64 {
        self.state.lr
    }

    /// One update. Rejects non-finite gradients before touching any state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let s = &mut self.state;
        if params.len() != s.m.len() || grads.len() != s.m.len() {
            return Err(Error::Dimension {
                expected: s.m.len(),
                got: grads.len().min(params.len()),
            });
        }
        if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index, value });
        }
        s.t += 1;
        let c1 = 1.0 - s.beta1.powi(s.t as i32);
        let c2 = 1.0 - s.beta2.powi(s.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
            s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
            let mh = s.m[i] / c1;
            let vh = s.v[i] / c2;
            params[i] -= s.lr * mh / (vh.sqrt() + s.eps);
        }
        debug_assert!(params.iter().all(|p| p.is_finite()));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0, 3.5];
        let mut a = Adam::new(3, 0.01);
        for _ in 0..10 {
            a.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn constant_gradient_saturates_to_lr_sign() {
        // With g constant, m̂ = g and v̂ = g² exactly after bias correction,
        // so every step moves by lr·g/(|g| + eps).
        let g = [0.3, -2.0, 1e-2];
        let lr = 1e-3;
        let mut p = vec![0.0; 3];
        let mut a = Adam::new(3, lr);
        for _ in 0..200 {
            let before = p.clone();
            a.step(&mut p, &g).unwrap();
            for i in 0..3 {
                let expected = -lr * g[i] / (g[i].abs() + 1e-8);
                assert!(((p[i] - before[i]) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut p = vec![0.0; 2];
        let mut a = Adam::new(2, 0.1);
        let err = a.step(&mut p, &[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 1, .. }));
        assert_eq!(a.state().t, 0);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.5; 4];
            let mut a = Adam::new(4, 0.01);
            for k in 0..50 {
                let g: Vec<f64> = (0..4).map(|i| ((k * 4 + i) as f64).sin()).collect();
                a.step(&mut p, &g).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
