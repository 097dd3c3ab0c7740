//! Synthetic ontologies and feature sets: the toy-5 hierarchy, seeded random
//! DAGs and trees, and Gaussian feature clusters that follow the hierarchy.
//! These stand in for a CNN backbone when training classifier heads.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ontology::{Edge, NodeSpec, Ontology};

/// Root `R`; branches `B1`, `B2` under `R`; leaves `L1`, `L2` under `B1`;
/// leaf `L3` under `B2`.
pub fn toy5() -> Ontology {
    let nodes = ["R", "B1", "B2", "L1", "L2", "L3"]
        .iter()
        .map(|id| NodeSpec::new(*id, *id))
        .collect();
    let edges = [("R", "B1"), ("R", "B2"), ("B1", "L1"), ("B1", "L2"), ("B2", "L3")]
        .iter()
        .map(|(p, c)| Edge::new(*p, *c, "P279"));
    // explicit order so that vectors read [R, B1, B2, L1, L2, L3]
    let order: Vec<String> = ["R", "B1", "B2", "L1", "L2", "L3"].map(String::from).to_vec();
    Ontology::from_parts("R", nodes, edges, Some(&order), false).expect("toy-5 is well formed")
}

fn node_id(i: usize) -> String {
    format!("N{i:04}")
}

/// A random rooted DAG on `n` nodes. Node `i` picks one to three parents
/// among nodes `0..i`, so every node reaches the root `N0000`.
pub fn random_dag(n: usize, seed: u64) -> Ontology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 1..n {
        let roll: f64 = rng.random();
        let want = if roll < 0.6 {
            1
        } else if roll < 0.9 {
            2
        } else {
            3
        };
        let mut picked: Vec<usize> = Vec::new();
        for _ in 0..want.min(i) {
            let p = rng.random_range(0..i);
            if !picked.contains(&p) {
                picked.push(p);
            }
        }
        for p in picked {
            edges.push(Edge::new(node_id(p), node_id(i), "P279"));
        }
    }
    assemble(n, edges)
}

/// A random recursive tree: node `i` attaches to a uniformly chosen node in
/// `0..i`.
pub fn random_tree(n: usize, seed: u64) -> Ontology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = (1..n)
        .map(|i| Edge::new(node_id(rng.random_range(0..i)), node_id(i), "P279"))
        .collect();
    assemble(n, edges)
}

/// Root with `leaves` direct leaf children, optionally grouped under
/// intermediate branches of `group` leaves each.
pub fn star(leaves: usize, group: usize) -> Ontology {
    let mut edges = Vec::new();
    let mut count = 1;
    let group = group.max(1);
    let mut branch = None;
    for l in 0..leaves {
        if group > 1 && l % group == 0 {
            let b = node_id(count);
            count += 1;
            edges.push(Edge::new(node_id(0), b.clone(), "P279"));
            branch = Some(b);
        }
        let parent = branch.clone().unwrap_or_else(|| node_id(0));
        edges.push(Edge::new(parent, node_id(count), "P279"));
        count += 1;
    }
    assemble(count, edges)
}

fn assemble(n: usize, edges: Vec<Edge>) -> Ontology {
    let nodes = (0..n.max(1)).map(|i| NodeSpec::new(node_id(i), node_id(i))).collect();
    Ontology::from_parts(&node_id(0), nodes, edges, None, false).expect("generated ontology is well formed")
}

/// Gaussian features that mirror the hierarchy: every node owns a random
/// direction and a sample of leaf `l` is the sum of the directions on
/// `l`'s subgraph plus isotropic noise. Siblings differ only by their leaf
/// directions, so a large `noise` makes them overlap while other branches
/// stay apart.
#[derive(Debug, Clone, Copy)]
pub struct HierarchicalClusters {
    pub dim: usize,
    /// Norm scale of branch and root directions.
    pub branch_scale: f64,
    /// Norm scale of leaf directions.
    pub leaf_scale: f64,
    pub noise: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub features: Vec<f64>,
    /// Index into `Ontology::leaf_indices()`.
    pub leaf: usize,
}

impl HierarchicalClusters {
    /// Per-node mean directions, indexed like `ont.nodes()`.
    pub fn directions(&self, ont: &Ontology, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = libm::sqrt(self.dim as f64);
        ont.nodes()
            .iter()
            .map(|n| {
                let scale = if n.is_leaf() { self.leaf_scale } else { self.branch_scale };
                (0..self.dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z / norm
                    })
                    .collect()
            })
            .collect()
    }

    /// `per_leaf` samples for every leaf, leaf-major. Cluster geometry comes
    /// from `geometry_seed`, noise from `noise_seed`, so train and test sets
    /// can share geometry.
    pub fn sample(
        &self,
        ont: &Ontology,
        per_leaf: usize,
        geometry_seed: u64,
        noise_seed: u64,
    ) -> Vec<SyntheticSample> {
        let dirs = self.directions(ont, geometry_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let mut out = Vec::new();
        for (li, &leaf) in ont.leaf_indices().iter().enumerate() {
            let mut mean = alloc::vec![0.0; self.dim];
            for n in ont.subgraph_indices(leaf) {
                for (m, d) in mean.iter_mut().zip(&dirs[n]) {
                    *m += d;
                }
            }
            for _ in 0..per_leaf {
                let features = mean
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + self.noise * z
                    })
                    .collect();
                out.push(SyntheticSample { features, leaf: li });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(random_dag(30, 3), random_dag(30, 3));
        assert_ne!(random_dag(30, 3), random_dag(30, 4));
        assert_eq!(random_tree(50, 1).edge_count(), 49);
    }

    #[test]
    fn star_counts() {
        let flat = star(148, 1);
        assert_eq!(flat.leaf_count(), 148);
        assert_eq!(flat.len(), 149);
        let grouped = star(6, 3);
        assert_eq!(grouped.leaf_count(), 6);
        assert_eq!(grouped.len(), 9);
    }

    #[test]
    fn cluster_sampling_is_deterministic() {
        let cfg = HierarchicalClusters {
            dim: 4,
            branch_scale: 3.0,
            leaf_scale: 1.0,
            noise: 0.5,
        };
        let ont = toy5();
        let a = cfg.sample(&ont, 3, 1, 2);
        let b = cfg.sample(&ont, 3, 1, 2);
        assert_eq!(a.len(), 9);
        assert_eq!(a[4].features, b[4].features);
        assert_eq!(a[4].leaf, 1);
    }
}
