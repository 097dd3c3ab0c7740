use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ClassifierHead, LearnError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 1e-5,
            batch_size: 128,
        }
    }
}

/// Velocity buffers shaped like the head parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub velocity_weights: Vec<f64>,
    pub velocity_bias: Vec<f64>,
}

fn nesterov(params: &mut [f64], grads: &[f64], velocity: &mut [f64], lr: f64, cfg: &SgdConfig) {
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        let g = g + cfg.weight_decay * *p;
        *v = cfg.momentum * *v + g;
        *p -= lr * (g + cfg.momentum * *v);
    }
}

impl OptimState {
    pub fn new(head: &ClassifierHead) -> Self {
        Self {
            velocity_weights: vec![0.0; head.weights.len()],
            velocity_bias: vec![0.0; head.bias.len()],
        }
    }

    /// One Nesterov step with L2 weight decay folded into the gradient.
    pub fn step(&mut self, head: &mut ClassifierHead, grad_w: &[f64], grad_b: &[f64], lr: f64, cfg: &SgdConfig) {
        nesterov(&mut head.weights, grad_w, &mut self.velocity_weights, lr, cfg);
        nesterov(&mut head.bias, grad_b, &mut self.velocity_bias, lr, cfg);
    }
}

/// Linear warmup followed by cosine annealing to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub warmup_start: f64,
    pub warmup_end: f64,
    pub warmup_iters: u64,
    pub total_iters: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            warmup_start: 0.01,
            warmup_end: 0.1,
            warmup_iters: 10_000,
            total_iters: 100_000,
        }
    }
}

impl LrSchedule {
    /// Same shape over `total` iterations, warmup kept at a tenth.
    pub fn scaled(total: u64) -> Self {
        Self {
            warmup_iters: total / 10,
            total_iters: total,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), LearnError> {
        if self.warmup_iters > self.total_iters {
            return Err(LearnError::Config("warmup longer than schedule"));
        }
        if !(self.warmup_start >= 0.0 && self.warmup_end >= 0.0) {
            return Err(LearnError::Config("negative learning rate"));
        }
        Ok(())
    }

    pub fn lr_at(&self, iter: u64) -> Result<f64, LearnError> {
        if iter > self.total_iters {
            return Err(LearnError::OutOfSchedule {
                iter,
                total: self.total_iters,
            });
        }
        if iter <= self.warmup_iters {
            if self.warmup_iters == 0 {
                return Ok(self.warmup_end);
            }
            let f = iter as f64 / self.warmup_iters as f64;
            return Ok(self.warmup_start * (1.0 - f) + self.warmup_end * f);
        }
        let t = (iter - self.warmup_iters) as f64 / (self.total_iters - self.warmup_iters) as f64;
        Ok(self.warmup_end * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_anchors() {
        let s = LrSchedule::default();
        assert_eq!(s.lr_at(0).unwrap(), 0.01);
        assert_eq!(s.lr_at(10_000).unwrap(), 0.1);
        assert_eq!(s.lr_at(55_000).unwrap(), 0.05);
        assert_eq!(s.lr_at(100_000).unwrap(), 0.0);
        assert!(matches!(s.lr_at(100_001), Err(LearnError::OutOfSchedule { .. })));
        // both sides of the warmup boundary approach 0.1
        let left = s.lr_at(9_999).unwrap();
        let right = s.lr_at(10_001).unwrap();
        assert!((left - 0.1).abs() < 1e-5 && (right - 0.1).abs() < 1e-8);
    }

    #[test]
    fn scaled_schedule() {
        let s = LrSchedule::scaled(2000);
        assert_eq!(s.warmup_iters, 200);
        assert_eq!(s.lr_at(200).unwrap(), 0.1);
        assert_eq!(s.lr_at(2000).unwrap(), 0.0);
    }

    #[test]
    fn nesterov_matches_reference_update() {
        // two steps on f(p) = p^2 / 2 written out by hand
        let cfg = SgdConfig {
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 1,
        };
        let mut head = ClassifierHead::zeros(1, 1);
        head.weights[0] = 1.0;
        let mut st = OptimState::new(&head);
        let g = head.weights[0];
        st.step(&mut head, &[g], &[0.0], 0.1, &cfg);
        // v = 1, p = 1 - 0.1 (1 + 0.9) = 0.81
        assert!((head.weights[0] - 0.81).abs() < 1e-15);
        let g = head.weights[0];
        st.step(&mut head, &[g], &[0.0], 0.1, &cfg);
        // v = 0.9 + 0.81 = 1.71, p = 0.81 - 0.1 (0.81 + 0.9 * 1.71) = 0.5751
        assert!((head.weights[0] - 0.5751).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_shrinks_at_zero_gradient() {
        let cfg = SgdConfig {
            momentum: 0.0,
            weight_decay: 0.5,
            batch_size: 1,
        };
        let mut head = ClassifierHead::zeros(1, 1);
        head.weights[0] = 2.0;
        let mut st = OptimState::new(&head);
        st.step(&mut head, &[0.0], &[0.0], 0.1, &cfg);
        assert!((head.weights[0] - 1.9).abs() < 1e-15);
    }
}
