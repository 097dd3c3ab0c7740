//! Multi-hot label encodings over the frozen node order and the two node
//! weighting schemes (distance and degree of centrality).
//!
//! Every vector carries the content hash of the ontology it was encoded
//! against, so that labels, weights and models built on different ontologies
//! cannot be mixed silently.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ontology::{Ontology, OntologyError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafVector {
    pub values: Vec<bool>,
    pub ontology_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphVector {
    pub values: Vec<bool>,
    pub ontology_hash: String,
}

fn as_f64(bits: &[bool]) -> Vec<f64> {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

impl LeafVector {
    pub fn to_f64(&self) -> Vec<f64> {
        as_f64(&self.values)
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }
}

impl SubgraphVector {
    pub fn to_f64(&self) -> Vec<f64> {
        as_f64(&self.values)
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }
}

fn leaf_positions<'a>(
    ont: &Ontology,
    leaf_ids: impl IntoIterator<Item = &'a str>,
) -> Result<Vec<usize>, OntologyError> {
    leaf_ids
        .into_iter()
        .map(|id| {
            let i = ont
                .index_of(id)
                .ok_or_else(|| OntologyError::UnknownNode(id.into()))?;
            if ont.nodes()[i].is_leaf() {
                Ok(i)
            } else {
                Err(OntologyError::NotALeaf(id.into()))
            }
        })
        .collect()
}

/// Multi-hot vector over the leaf sub-order of `node_order`. The empty set
/// gives an all-zero probe vector.
pub fn encode_leaf<'a>(
    ont: &Ontology,
    leaf_ids: impl IntoIterator<Item = &'a str>,
) -> Result<LeafVector, OntologyError> {
    let positions = leaf_positions(ont, leaf_ids)?;
    let leaves = ont.leaf_indices();
    let values = leaves.iter().map(|i| positions.contains(i)).collect();
    Ok(LeafVector {
        values,
        ontology_hash: ont.content_hash(),
    })
}

/// Multi-hot vector over `node_order` marking the union of the leaves'
/// subgraphs.
pub fn encode_subgraph<'a>(
    ont: &Ontology,
    leaf_ids: impl IntoIterator<Item = &'a str>,
) -> Result<SubgraphVector, OntologyError> {
    let positions = leaf_positions(ont, leaf_ids)?;
    let mut values = vec![false; ont.len()];
    for leaf in positions {
        for i in ont.subgraph_indices(leaf) {
            values[i] = true;
        }
    }
    Ok(SubgraphVector {
        values,
        ontology_hash: ont.content_hash(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// 2^-(mean shortest-path node count to connected leaves - 1)
    Distance,
    /// 1 - (connected leaves - 1) / |N_L|, leaves overridden
    Centrality,
    /// All ones (unweighted losses).
    Unit,
}

impl WeightScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightScheme::Distance => "distance",
            WeightScheme::Centrality => "centrality",
            WeightScheme::Unit => "unit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "distance" => Some(Self::Distance),
            "centrality" => Some(Self::Centrality),
            "unit" => Some(Self::Unit),
            _ => None,
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub scheme: WeightScheme,
    pub leaf_weight: f64,
    pub ontology_hash: String,
}

impl WeightVector {
    pub fn unit(ont: &Ontology) -> Self {
        Self {
            values: vec![1.0; ont.len()],
            scheme: WeightScheme::Unit,
            leaf_weight: 1.0,
            ontology_hash: ont.content_hash(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Shortest downward path lengths from `from` to every node, counted in
/// nodes (so `from` itself has length 1). `usize::MAX` marks unreachable.
fn downward_path_nodes(ont: &Ontology, from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; ont.len()];
    dist[from] = 1;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for &c in ont.child_indices(v) {
            if dist[c] == usize::MAX {
                dist[c] = dist[v] + 1;
                queue.push_back(c);
            }
        }
    }
    dist
}

/// Mean over connected leaves of the shortest path node count, as an exact
/// `(sum, count)` pair.
pub fn mean_leaf_path(ont: &Ontology, node: usize) -> (usize, usize) {
    let dist = downward_path_nodes(ont, node);
    let leaves = ont.leaf_indices_under(node);
    let sum = leaves.iter().map(|&l| dist[l]).sum();
    (sum, leaves.len())
}

/// `1 / 2^(mean - 1)` for a mean path node count.
pub fn distance_weight(mean: f64) -> f64 {
    1.0 / libm::pow(2.0, mean - 1.0)
}

/// `1 - (c - 1) / |N_L|`, written as `(|N_L| - c + 1) / |N_L|` so integral
/// inputs round once.
pub fn centrality_weight(connected_leaves: usize, total_leaves: usize) -> f64 {
    (total_leaves + 1 - connected_leaves) as f64 / total_leaves as f64
}

pub fn distance_weights(ont: &Ontology) -> WeightVector {
    let values = (0..ont.len())
        .map(|i| {
            let (sum, count) = mean_leaf_path(ont, i);
            if count == 0 {
                // root of a leafless ontology
                1.0
            } else {
                distance_weight(sum as f64 / count as f64)
            }
        })
        .collect();
    WeightVector {
        values,
        scheme: WeightScheme::Distance,
        leaf_weight: 1.0,
        ontology_hash: ont.content_hash(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum WeightError {
    #[error("leaf weight must be positive and finite, got {0}")]
    BadLeafWeight(f64),
}

pub fn centrality_weights(ont: &Ontology, leaf_weight: f64) -> Result<WeightVector, WeightError> {
    if !(leaf_weight > 0.0 && leaf_weight.is_finite()) {
        return Err(WeightError::BadLeafWeight(leaf_weight));
    }
    let total = ont.leaf_count();
    let values = (0..ont.len())
        .map(|i| {
            if ont.nodes()[i].is_leaf() {
                leaf_weight
            } else if total == 0 {
                1.0
            } else {
                centrality_weight(ont.leaf_indices_under(i).len(), total)
            }
        })
        .collect();
    Ok(WeightVector {
        values,
        scheme: WeightScheme::Centrality,
        leaf_weight,
        ontology_hash: ont.content_hash(),
    })
}

/// Leaf ids set in a leaf vector, in leaf order.
pub fn decode_leaf<'a>(ont: &'a Ontology, v: &LeafVector) -> BTreeSet<&'a str> {
    ont.leaf_ids()
        .into_iter()
        .zip(&v.values)
        .filter_map(|(id, &b)| b.then_some(id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::remove_redundant;
    use crate::synthetic::{random_dag, star, toy5};

    fn bits(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn leaf_vectors_toy5() {
        let ont = toy5();
        assert_eq!(encode_leaf(&ont, ["L1"]).unwrap().values, bits(&[1, 0, 0]));
        assert_eq!(encode_leaf(&ont, ["L1", "L3"]).unwrap().values, bits(&[1, 0, 1]));
        assert_eq!(encode_leaf(&ont, []).unwrap().values, bits(&[0, 0, 0]));
        assert_eq!(encode_leaf(&ont, ["B1"]), Err(OntologyError::NotALeaf("B1".into())));
        assert_eq!(encode_leaf(&ont, ["Q"]), Err(OntologyError::UnknownNode("Q".into())));
    }

    #[test]
    fn subgraph_vectors_toy5() {
        let ont = toy5();
        assert_eq!(encode_subgraph(&ont, ["L1"]).unwrap().values, bits(&[1, 1, 0, 1, 0, 0]));
        // union oracle: OR of single-leaf encodings
        let or = |a: &[bool], b: &[bool]| a.iter().zip(b).map(|(x, y)| *x || *y).collect::<Vec<_>>();
        let l1 = encode_subgraph(&ont, ["L1"]).unwrap().values;
        let l2 = encode_subgraph(&ont, ["L2"]).unwrap().values;
        let l3 = encode_subgraph(&ont, ["L3"]).unwrap().values;
        assert_eq!(encode_subgraph(&ont, ["L1", "L3"]).unwrap().values, or(&l1, &l3));
        assert_eq!(or(&l1, &l3), bits(&[1, 1, 1, 1, 0, 1]));
        assert_eq!(encode_subgraph(&ont, ["L1", "L2"]).unwrap().values, bits(&[1, 1, 0, 1, 1, 0]));
        assert_eq!(or(&l1, &l2), bits(&[1, 1, 0, 1, 1, 0]));
    }

    #[test]
    fn subgraph_restricted_to_leaves_is_leaf_vector() {
        for seed in 0..10 {
            let ont = random_dag(25, seed);
            let leaves = ont.leaf_indices();
            for leaf in ont.leaf_ids() {
                let s = encode_subgraph(&ont, [leaf]).unwrap().values;
                let l = encode_leaf(&ont, [leaf]).unwrap().values;
                let restricted: Vec<bool> = leaves.iter().map(|&i| s[i]).collect();
                assert_eq!(restricted, l);
            }
        }
    }

    #[test]
    fn distance_weights_toy5() {
        let w = distance_weights(&toy5());
        // order R, B1, B2, L1, L2, L3
        assert_eq!(w.values, [0.25, 0.5, 0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn centrality_weights_toy5() {
        let w = centrality_weights(&toy5(), 1.0).unwrap();
        assert_eq!(w.values, [1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0, 1.0, 1.0]);
        let w6 = centrality_weights(&toy5(), 6.0).unwrap();
        assert_eq!(&w6.values[3..], [6.0, 6.0, 6.0]);
        assert!(centrality_weights(&toy5(), 0.0).is_err());
        assert!(centrality_weights(&toy5(), f64::NAN).is_err());
    }

    #[test]
    fn root_of_148_leaves() {
        let ont = star(148, 1);
        let w = centrality_weights(&ont, 6.0).unwrap();
        let root = w.values[ont.root_index()];
        assert_eq!(root, 1.0 / 148.0);
        assert!((root - (1.0 - 147.0 / 148.0)).abs() < 1e-15);
        assert!((root - 0.00676).abs() < 1e-5);
    }

    #[test]
    fn weight_ranges_and_antitone() {
        for seed in 0..10 {
            let ont = random_dag(40, seed);
            let d = distance_weights(&ont);
            let c = centrality_weights(&ont, 6.0).unwrap();
            let nodes = ont.nodes();
            for i in 0..ont.len() {
                if nodes[i].is_leaf() {
                    assert_eq!(d.values[i], 1.0);
                    assert_eq!(c.values[i], 6.0);
                } else {
                    assert!(d.values[i] > 0.0 && d.values[i] <= 0.5);
                    assert!(c.values[i] > 0.0 && c.values[i] <= 1.0);
                }
            }
            for i in 0..ont.len() {
                for j in 0..ont.len() {
                    let (si, ni) = mean_leaf_path(&ont, i);
                    let (sj, nj) = mean_leaf_path(&ont, j);
                    if si * nj < sj * ni {
                        assert!(d.values[i] > d.values[j]);
                    }
                    let (ci, cj) = (ont.leaf_indices_under(i).len(), ont.leaf_indices_under(j).len());
                    if !nodes[i].is_leaf() && !nodes[j].is_leaf() && ci < cj {
                        assert!(c.values[i] > c.values[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn reduced_weights_change_only_where_path_lengths_change() {
        for seed in 0..10 {
            let full = random_dag(40, seed);
            let reduced = remove_redundant(&full).unwrap().ontology;
            let wf = distance_weights(&full);
            let wr = distance_weights(&reduced);
            for (ri, node) in reduced.nodes().iter().enumerate() {
                let fi = full.index_of(&node.id).unwrap();
                let same_mean = mean_leaf_path(&full, fi) == mean_leaf_path(&reduced, ri);
                assert_eq!(same_mean, wf.values[fi] == wr.values[ri]);
            }
            let cf = centrality_weights(&full, 1.0).unwrap();
            let cr = centrality_weights(&reduced, 1.0).unwrap();
            for (ri, node) in reduced.nodes().iter().enumerate() {
                let fi = full.index_of(&node.id).unwrap();
                // leaf sets are preserved, so centrality never changes
                assert_eq!(cf.values[fi], cr.values[ri]);
            }
        }
    }
}
