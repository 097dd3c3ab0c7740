use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_len, ClassifierHead, LearnError, Objective};
use crate::encoding::WeightVector;
use crate::ontology::Ontology;

/// Per-leaf scores read off a predicted subgraph vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    /// Predicted probabilities at the leaf positions.
    pub y_o: Vec<f64>,
    /// Cosine similarity of the weighted prediction to each weighted leaf
    /// subgraph.
    pub y_cos: Vec<f64>,
    /// `y_o ⊙ y_cos`.
    pub y_final: Vec<f64>,
}

/// Weighted leaf subgraph prototypes for one ontology and weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceModel {
    node_count: usize,
    leaf_positions: Vec<usize>,
    subgraphs: Vec<Vec<usize>>,
    proto_norms: Vec<f64>,
    weights: Vec<f64>,
}

impl InferenceModel {
    pub fn new(ont: &Ontology, w: &WeightVector) -> Result<Self, LearnError> {
        let hash = ont.content_hash();
        if w.ontology_hash != hash {
            return Err(LearnError::HashMismatch {
                weights: w.ontology_hash.clone(),
                ontology: hash,
            });
        }
        check_len("weights", ont.len(), w.len())?;
        let leaf_positions = ont.leaf_indices();
        let subgraphs: Vec<Vec<usize>> = leaf_positions.iter().map(|&l| ont.subgraph_indices(l)).collect();
        let proto_norms = subgraphs
            .iter()
            .map(|s| libm::sqrt(s.iter().map(|&i| w.values[i] * w.values[i]).sum()))
            .collect();
        Ok(Self {
            node_count: ont.len(),
            leaf_positions,
            subgraphs,
            proto_norms,
            weights: w.values.clone(),
        })
    }

    pub fn infer(&self, y_hat_s: &[f64]) -> Result<InferenceResult, LearnError> {
        check_len("subgraph prediction", self.node_count, y_hat_s.len())?;
        let norm = libm::sqrt(
            y_hat_s
                .iter()
                .zip(&self.weights)
                .map(|(p, w)| (w * p) * (w * p))
                .sum(),
        );
        let y_o: Vec<f64> = self.leaf_positions.iter().map(|&i| y_hat_s[i]).collect();
        let y_cos: Vec<f64> = self
            .subgraphs
            .iter()
            .zip(&self.proto_norms)
            .map(|(s, &pn)| {
                if norm == 0.0 || pn == 0.0 {
                    return 0.0;
                }
                let dot: f64 = s.iter().map(|&i| self.weights[i] * self.weights[i] * y_hat_s[i]).sum();
                dot / (norm * pn)
            })
            .collect();
        let y_final = y_o.iter().zip(&y_cos).map(|(a, b)| a * b).collect();
        Ok(InferenceResult { y_o, y_cos, y_final })
    }
}

/// Turns head outputs into per-leaf scores: the leaf probabilities for the
/// leaf-only loss, ontology-driven inference on the subgraph block otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    objective: Objective,
    model: Option<InferenceModel>,
}

impl Predictor {
    pub fn new(objective: &Objective, ont: &Ontology) -> Result<Self, LearnError> {
        let model = InferenceModel::new(ont, &objective.weights)?;
        Ok(Self {
            objective: objective.clone(),
            model: objective.kind.has_subgraph_block().then_some(model),
        })
    }

    pub fn scores_from_output(&self, y_hat: &[f64]) -> Result<Vec<f64>, LearnError> {
        check_len("prediction", self.objective.output_dim(), y_hat.len())?;
        let (leaf, sub) = self.objective.split(y_hat);
        match (&self.model, sub) {
            (Some(m), Some(s)) => Ok(m.infer(s)?.y_final),
            _ => Ok(leaf.unwrap_or_default().to_vec()),
        }
    }

    pub fn scores(&self, head: &ClassifierHead, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        self.scores_from_output(&head.forward(x)?)
    }
}

pub fn infer(y_hat_s: &[f64], ont: &Ontology, w: &WeightVector) -> Result<InferenceResult, LearnError> {
    InferenceModel::new(ont, w)?.infer(y_hat_s)
}
