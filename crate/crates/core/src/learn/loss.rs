use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_len, LearnError};
use crate::encoding::WeightVector;
use crate::ontology::Ontology;

/// `-Σ y ln ŷ + (1 - y) ln(1 - ŷ)`.
pub fn bce(y_hat: &[f64], y: &[f64]) -> f64 {
    y_hat
        .iter()
        .zip(y)
        .map(|(&p, &t)| -(t * libm::log(p) + (1.0 - t) * libm::log(1.0 - p)))
        .sum()
}

pub fn bce_grad(y_hat: &[f64], y: &[f64]) -> Vec<f64> {
    y_hat
        .iter()
        .zip(y)
        .map(|(&p, &t)| -t / p + (1.0 - t) / (1.0 - p))
        .collect()
}

/// Binary cross-entropy with every term scaled by its node weight.
pub fn weighted_bce(y_hat: &[f64], y: &[f64], w: &[f64]) -> f64 {
    y_hat
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&p, &t), &wi)| -wi * (t * libm::log(p) + (1.0 - t) * libm::log(1.0 - p)))
        .sum()
}

pub fn weighted_bce_grad(y_hat: &[f64], y: &[f64], w: &[f64]) -> Vec<f64> {
    y_hat
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&p, &t), &wi)| wi * (-t / p + (1.0 - t) / (1.0 - p)))
        .collect()
}

fn weighted_parts(y_hat: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for ((&p, &t), &wi) in y_hat.iter().zip(y).zip(w) {
        let (a, b) = (wi * t, wi * p);
        dot += a * b;
        na += a * a;
        nb += b * b;
    }
    (dot, libm::sqrt(na), libm::sqrt(nb))
}

/// `1 - cos(w ⊙ y, w ⊙ ŷ)`.
pub fn cosine_loss(y_hat: &[f64], y: &[f64], w: &[f64]) -> Result<f64, LearnError> {
    let (dot, na, nb) = weighted_parts(y_hat, y, w);
    if na == 0.0 || nb == 0.0 {
        return Err(LearnError::ZeroVector);
    }
    Ok(1.0 - dot / (na * nb))
}

pub fn cosine_loss_grad(y_hat: &[f64], y: &[f64], w: &[f64]) -> Result<Vec<f64>, LearnError> {
    let (dot, na, nb) = weighted_parts(y_hat, y, w);
    if na == 0.0 || nb == 0.0 {
        return Err(LearnError::ZeroVector);
    }
    let inv = 1.0 / (na * nb);
    let c = dot / (na * nb * nb * nb);
    Ok(y_hat
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&p, &t), &wi)| {
            let (a, b) = (wi * t, wi * p);
            -wi * (a * inv - c * b)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    /// Cross-entropy over leaves.
    #[serde(rename = "c")]
    C,
    /// Weighted cross-entropy over the subgraph vector.
    #[serde(rename = "cel")]
    Cel,
    /// Weighted cosine distance over the subgraph vector.
    #[serde(rename = "cos")]
    Cos,
    #[serde(rename = "c+cel")]
    CCel,
    #[serde(rename = "c+cos")]
    CCos,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [LossKind::C, LossKind::Cel, LossKind::Cos, LossKind::CCel, LossKind::CCos];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::C => "c",
            LossKind::Cel => "cel",
            LossKind::Cos => "cos",
            LossKind::CCel => "c+cel",
            LossKind::CCos => "c+cos",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn has_leaf_block(self) -> bool {
        matches!(self, LossKind::C | LossKind::CCel | LossKind::CCos)
    }

    pub fn has_subgraph_block(self) -> bool {
        !matches!(self, LossKind::C)
    }
}

/// A loss bound to an ontology. The head output is the leaf block, the
/// subgraph block, or the leaf block followed by the subgraph block for the
/// combined losses; combined losses add their parts with unit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: LossKind,
    pub leaf_dim: usize,
    pub weights: WeightVector,
}

impl Objective {
    pub fn new(kind: LossKind, ont: &Ontology, weights: WeightVector) -> Result<Self, LearnError> {
        let hash = ont.content_hash();
        if weights.ontology_hash != hash {
            return Err(LearnError::HashMismatch {
                weights: weights.ontology_hash,
                ontology: hash,
            });
        }
        check_len("weights", ont.len(), weights.len())?;
        Ok(Self {
            kind,
            leaf_dim: ont.leaf_count(),
            weights,
        })
    }

    pub fn ontology_hash(&self) -> &str {
        &self.weights.ontology_hash
    }

    pub fn subgraph_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn output_dim(&self) -> usize {
        let mut d = 0;
        if self.kind.has_leaf_block() {
            d += self.leaf_dim;
        }
        if self.kind.has_subgraph_block() {
            d += self.subgraph_dim();
        }
        d
    }

    /// Splits a head output into its leaf and subgraph blocks.
    pub fn split<'a>(&self, y_hat: &'a [f64]) -> (Option<&'a [f64]>, Option<&'a [f64]>) {
        match self.kind {
            LossKind::C => (Some(y_hat), None),
            LossKind::Cel | LossKind::Cos => (None, Some(y_hat)),
            LossKind::CCel | LossKind::CCos => {
                let (l, s) = y_hat.split_at(self.leaf_dim.min(y_hat.len()));
                (Some(l), Some(s))
            }
        }
    }

    fn check(&self, y_hat: &[f64], y_leaf: &[f64], y_sub: &[f64]) -> Result<(), LearnError> {
        check_len("prediction", self.output_dim(), y_hat.len())?;
        if self.kind.has_leaf_block() {
            check_len("leaf target", self.leaf_dim, y_leaf.len())?;
        }
        if self.kind.has_subgraph_block() {
            check_len("subgraph target", self.subgraph_dim(), y_sub.len())?;
        }
        Ok(())
    }

    pub fn loss(&self, y_hat: &[f64], y_leaf: &[f64], y_sub: &[f64]) -> Result<f64, LearnError> {
        self.check(y_hat, y_leaf, y_sub)?;
        let (l, s) = self.split(y_hat);
        let w = &self.weights.values;
        let mut total = 0.0;
        if let Some(l) = l {
            total += bce(l, y_leaf);
        }
        if let Some(s) = s {
            total += match self.kind {
                LossKind::Cel | LossKind::CCel => weighted_bce(s, y_sub, w),
                _ => cosine_loss(s, y_sub, w)?,
            };
        }
        Ok(total)
    }

    /// Loss together with its gradient with respect to the head outputs.
    pub fn loss_and_grad(&self, y_hat: &[f64], y_leaf: &[f64], y_sub: &[f64]) -> Result<(f64, Vec<f64>), LearnError> {
        self.check(y_hat, y_leaf, y_sub)?;
        let (l, s) = self.split(y_hat);
        let w = &self.weights.values;
        let mut total = 0.0;
        let mut grad = vec![];
        if let Some(l) = l {
            total += bce(l, y_leaf);
            grad.extend(bce_grad(l, y_leaf));
        }
        if let Some(s) = s {
            match self.kind {
                LossKind::Cel | LossKind::CCel => {
                    total += weighted_bce(s, y_sub, w);
                    grad.extend(weighted_bce_grad(s, y_sub, w));
                }
                _ => {
                    total += cosine_loss(s, y_sub, w)?;
                    grad.extend(cosine_loss_grad(s, y_sub, w)?);
                }
            }
        }
        Ok((total, grad))
    }

    pub fn describe(&self) -> String {
        alloc::format!("{} ({} weights)", self.kind.as_str(), self.weights.scheme.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{centrality_weights, distance_weights, encode_leaf, encode_subgraph};
    use crate::learn::{clamp_probability, EPS};
    use crate::synthetic::toy5;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    const LN2: f64 = core::f64::consts::LN_2;

    fn sub(ids: &[&str]) -> Vec<f64> {
        encode_subgraph(&toy5(), ids.iter().copied()).unwrap().to_f64()
    }

    #[test]
    fn bce_anchors() {
        assert!(bce(&[1.0 - EPS, EPS], &[1.0, 0.0]) <= 1e-9);
        assert!((bce(&[0.5, 0.5], &[1.0, 0.0]) - 2.0 * LN2).abs() < 1e-12);
        let mut y = vec![0.0; 148];
        y[17] = 1.0;
        assert!((bce(&[0.5; 148], &y) - 148.0 * LN2).abs() < 1e-12);
    }

    #[test]
    fn weighted_bce_on_toy5() {
        let ont = toy5();
        let w = centrality_weights(&ont, 1.0).unwrap();
        let loss = weighted_bce(&[0.5; 6], &sub(&["L1"]), &w.values);
        assert!((loss - LN2 * 5.0).abs() < 1e-12);
        let twice: Vec<f64> = w.values.iter().map(|v| 2.0 * v).collect();
        assert!((weighted_bce(&[0.3; 6], &sub(&["L1"]), &twice) - 2.0 * weighted_bce(&[0.3; 6], &sub(&["L1"]), &w.values)).abs() < 1e-12);
        let exact: Vec<f64> = sub(&["L3"]).into_iter().map(clamp_probability).collect();
        assert!(weighted_bce(&exact, &sub(&["L3"]), &distance_weights(&ont).values) <= 1e-9);
    }

    #[test]
    fn cosine_anchors() {
        let unit = [1.0; 6];
        let y = sub(&["L1"]);
        assert!(cosine_loss(&y, &y, &unit).unwrap().abs() < 1e-15);
        let l2 = sub(&["L2"]);
        assert!((cosine_loss(&l2, &y, &unit).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let a = [1.0, 0.0, 0.0];
        assert_eq!(cosine_loss(&[0.0, 0.7, 0.2], &a, &[1.0; 3]).unwrap(), 1.0);
        assert_eq!(cosine_loss(&[0.1; 3], &a, &[0.0, 1.0, 1.0]), Err(LearnError::ZeroVector));
    }

    #[test]
    fn combined_is_the_sum() {
        let ont = toy5();
        let w = distance_weights(&ont);
        let y_l = encode_leaf(&ont, ["L2"]).unwrap().to_f64();
        let y_s = sub(&["L2"]);
        let out = [0.2, 0.7, 0.1, 0.9, 0.8, 0.3, 0.2, 0.6, 0.1];
        for (kind, part) in [(LossKind::CCel, LossKind::Cel), (LossKind::CCos, LossKind::Cos)] {
            let both = Objective::new(kind, &ont, w.clone()).unwrap();
            let c = Objective::new(LossKind::C, &ont, w.clone()).unwrap();
            let o = Objective::new(part, &ont, w.clone()).unwrap();
            let total = both.loss(&out, &y_l, &y_s).unwrap();
            let sum = c.loss(&out[..3], &y_l, &[]).unwrap() + o.loss(&out[3..], &[], &y_s).unwrap();
            assert_eq!(total, sum);
        }
        let clamped = |v: &[f64]| v.iter().copied().map(clamp_probability).collect::<Vec<f64>>();
        for kind in LossKind::ALL {
            let obj = Objective::new(kind, &ont, w.clone()).unwrap();
            let mut y = Vec::new();
            if kind.has_leaf_block() {
                y.extend(clamped(&y_l));
            }
            if kind.has_subgraph_block() {
                y.extend(clamped(&y_s));
            }
            assert!(obj.loss(&y, &y_l, &y_s).unwrap() <= 1e-9, "{kind:?}");
        }
    }

    #[test]
    fn loss_kinds_parse() {
        for k in LossKind::ALL {
            assert_eq!(LossKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(LossKind::parse("c+x"), None);
        let other = crate::synthetic::star(2, 1);
        assert!(matches!(
            Objective::new(LossKind::Cel, &toy5(), WeightVector::unit(&other)),
            Err(LearnError::HashMismatch { .. })
        ));
    }

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn close(analytic: &[f64], numeric: &[f64]) -> bool {
        analytic
            .iter()
            .zip(numeric)
            .all(|(a, n)| (a - n).abs() <= 1e-6 * (1.0 + a.abs()))
    }

    proptest! {
        #[test]
        fn output_gradients_match_finite_differences(
            p in proptest::collection::vec(0.05f64..0.95, 6),
            w in proptest::collection::vec(0.1f64..6.0, 6),
            leaf in 0usize..3,
        ) {
            let y = sub(&[["L1", "L2", "L3"][leaf]]);
            prop_assert!(close(&bce_grad(&p, &y), &fd(|q| bce(q, &y), &p, 1e-5)));
            prop_assert!(close(&weighted_bce_grad(&p, &y, &w), &fd(|q| weighted_bce(q, &y, &w), &p, 1e-5)));
            let g = cosine_loss_grad(&p, &y, &w).unwrap();
            prop_assert!(close(&g, &fd(|q| cosine_loss(q, &y, &w).unwrap(), &p, 1e-5)));
            // scale invariance of the cosine: no gradient along ŷ
            let along: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            prop_assert!(along.abs() < 1e-12);
        }

        #[test]
        fn cosine_gradient_vanishes_at_collinear_points(c in 0.05f64..0.95, leaf in 0usize..3) {
            let y = sub(&[["L1", "L2", "L3"][leaf]]);
            let p: Vec<f64> = y.iter().map(|v| v * c).collect();
            let g = cosine_loss_grad(&p, &y, &[1.0; 6]).unwrap();
            prop_assert!(g.iter().all(|v| v.abs() < 1e-12));
            prop_assert!(cosine_loss(&p, &y, &[1.0; 6]).unwrap().abs() < 1e-15);
        }

        #[test]
        fn losses_are_non_negative(p in proptest::collection::vec(1e-6f64..(1.0 - 1e-6), 6), leaf in 0usize..3) {
            let ont = toy5();
            let y = sub(&[["L1", "L2", "L3"][leaf]]);
            let w = centrality_weights(&ont, 6.0).unwrap().values;
            prop_assert!(bce(&p, &y) >= 0.0);
            prop_assert!(weighted_bce(&p, &y, &w) >= 0.0);
            prop_assert!(cosine_loss(&p, &y, &w).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn heavy_leaf_weight_aligns_cel_with_leaf_loss() {
        let ont = toy5();
        let p = [0.3, 0.6, 0.2, 0.7, 0.4, 0.1];
        let y = sub(&["L2"]);
        let leaf_pos = [3, 4, 5];
        let yl: Vec<f64> = leaf_pos.iter().map(|&i| y[i]).collect();
        let pl: Vec<f64> = leaf_pos.iter().map(|&i| p[i]).collect();
        // logit gradients: dL/dz = dL/dŷ · ŷ(1 - ŷ)
        let to_logit = |g: Vec<f64>, q: &[f64]| -> Vec<f64> { g.iter().zip(q).map(|(g, q)| g * q * (1.0 - q)).collect() };
        let gc = to_logit(bce_grad(&pl, &yl), &pl);
        let mut embedded = vec![0.0; 6];
        for (k, &i) in leaf_pos.iter().enumerate() {
            embedded[i] = gc[k];
        }
        let cos_to_c = |omega: f64| {
            let w = centrality_weights(&ont, omega).unwrap().values;
            let g = to_logit(weighted_bce_grad(&p, &y, &w), &p);
            let dot: f64 = g.iter().zip(&embedded).map(|(a, b)| a * b).sum();
            let n1: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            let n2: f64 = embedded.iter().map(|a| a * a).sum::<f64>().sqrt();
            dot / (n1 * n2)
        };
        let (a, b, c) = (cos_to_c(1.0), cos_to_c(6.0), cos_to_c(1e6));
        assert!(a < b && b < c);
        assert!(1.0 - c < 1e-10);
    }
}
