use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, LearnError};

/// Probabilities are kept in `[EPS, 1 - EPS]` so logarithms stay finite.
pub const EPS: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Affine layer followed by a sigmoid. `weights` is row-major with one row
/// per input feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ClassifierHead {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            weights: vec![0.0; input_dim * output_dim],
            bias: vec![0.0; output_dim],
        }
    }

    /// Weights uniform in `±1/sqrt(input_dim)`, zero bias.
    pub fn init(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / libm::sqrt(input_dim.max(1) as f64);
        let weights = (0..input_dim * output_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            input_dim,
            output_dim,
            weights,
            bias: vec![0.0; output_dim],
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        check_len("features", self.input_dim, x.len())?;
        let mut z = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.output_dim..(i + 1) * self.output_dim];
            for (zj, wij) in z.iter_mut().zip(row) {
                *zj += xi * wij;
            }
        }
        Ok(z)
    }

    /// Clamped sigmoid outputs.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        Ok(self
            .logits(x)?
            .into_iter()
            .map(|z| clamp_probability(sigmoid(z)))
            .collect())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Accumulates `scale * dL/dparams` for one sample into `gw`, `gb`,
    /// given the gradient of the loss with respect to the clamped outputs.
    /// Clamped outputs pass no gradient.
    pub(crate) fn backward_into(
        &self,
        x: &[f64],
        y_hat: &[f64],
        d_out: &[f64],
        scale: f64,
        gw: &mut [f64],
        gb: &mut [f64],
    ) {
        let delta: Vec<f64> = y_hat
            .iter()
            .zip(d_out)
            .map(|(&p, &g)| {
                if p <= EPS || p >= 1.0 - EPS {
                    0.0
                } else {
                    scale * g * p * (1.0 - p)
                }
            })
            .collect();
        for (b, d) in gb.iter_mut().zip(&delta) {
            *b += d;
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &mut gw[i * self.output_dim..(i + 1) * self.output_dim];
            for (g, d) in row.iter_mut().zip(&delta) {
                *g += xi * d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_head_outputs_half() {
        let h = ClassifierHead::zeros(4, 3);
        assert_eq!(h.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), [0.5; 3]);
        assert!(matches!(h.forward(&[1.0]), Err(LearnError::Shape { .. })));
    }

    #[test]
    fn saturated_logit_is_clamped() {
        let mut h = ClassifierHead::zeros(1, 2);
        h.bias = vec![100.0, -100.0];
        assert_eq!(h.forward(&[0.0]).unwrap(), [1.0 - EPS, EPS]);
    }

    #[test]
    fn forward_matches_direct_formula() {
        let h = ClassifierHead::init(4, 3, 7);
        let mut h = h;
        h.bias = vec![0.1, -0.2, 0.3];
        let x = [0.5, -1.0, 2.0, 0.25];
        let y = h.forward(&x).unwrap();
        for j in 0..3 {
            let mut z = h.bias[j];
            for i in 0..4 {
                z += x[i] * h.weights[i * 3 + j];
            }
            let direct = 1.0 / (1.0 + libm::exp(-z));
            assert!((y[j] - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = ClassifierHead::init(16, 5, 1);
        assert_eq!(a, ClassifierHead::init(16, 5, 1));
        assert_ne!(a, ClassifierHead::init(16, 5, 2));
        assert!(a.weights.iter().all(|w| w.abs() <= 0.25));
        assert!(a.bias.iter().all(|&b| b == 0.0));
    }
}
