//! Evaluation metrics: top-k accuracy over leaf scores and the Jaccard and
//! cosine similarities between predicted and true subgraphs, always in the
//! full (non-reduced) ontology dimension.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ontology::{Ontology, OntologyError};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    /// Scores in leaf order.
    pub prediction: Vec<f64>,
    pub truth_leaves: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("k = {k} exceeds the {leaves} leaves")]
    KTooLarge { k: usize, leaves: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("prediction has {got} scores, ontology has {expected} leaves")]
    LengthMismatch { got: usize, expected: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

/// Leaf positions ordered by descending score; ties keep leaf order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Position of the best score, first on ties.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    ranking(scores).first().copied()
}

fn check_len(ont: &Ontology, s: &EvalSample) -> Result<(), EvalError> {
    let expected = ont.leaf_count();
    if s.prediction.len() != expected {
        return Err(EvalError::LengthMismatch {
            got: s.prediction.len(),
            expected,
        });
    }
    Ok(())
}

fn hit_at(ont: &Ontology, leaf_ids: &[&str], s: &EvalSample, k: usize) -> bool {
    let _ = ont;
    ranking(&s.prediction)
        .into_iter()
        .take(k)
        .any(|p| s.truth_leaves.contains(leaf_ids[p]))
}

/// Fraction of samples with any true leaf among the `k` best scores.
pub fn topk_accuracy(ont: &Ontology, samples: &[EvalSample], k: usize) -> Result<f64, EvalError> {
    let leaves = ont.leaf_count();
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if k > leaves {
        return Err(EvalError::KTooLarge { k, leaves });
    }
    if samples.is_empty() {
        return Err(EvalError::Empty);
    }
    let leaf_ids = ont.leaf_ids();
    let mut hits = 0usize;
    for s in samples {
        check_len(ont, s)?;
        if hit_at(ont, &leaf_ids, s, k) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

fn union_subgraph<'a>(ont: &Ontology, leaves: impl IntoIterator<Item = &'a str>) -> Result<BTreeSet<usize>, OntologyError> {
    let mut out = BTreeSet::new();
    for id in leaves {
        let i = ont
            .index_of(id)
            .ok_or_else(|| OntologyError::UnknownNode(id.into()))?;
        if !ont.nodes()[i].is_leaf() {
            return Err(OntologyError::NotALeaf(id.into()));
        }
        out.extend(ont.subgraph_indices(i));
    }
    Ok(out)
}

/// `|A ∩ B| / |A ∪ B|` of the predicted leaf's subgraph and the union of the
/// true leaves' subgraphs.
pub fn jsc(ont_full: &Ontology, predicted_leaf: &str, truth_leaves: &BTreeSet<String>) -> Result<f64, EvalError> {
    let a = union_subgraph(ont_full, [predicted_leaf])?;
    let b = union_subgraph(ont_full, truth_leaves.iter().map(String::as_str))?;
    let inter = a.intersection(&b).count();
    let union = a.union(&b).count();
    Ok(inter as f64 / union as f64)
}

/// Cosine similarity of the two binary subgraph vectors.
pub fn cs(ont_full: &Ontology, predicted_leaf: &str, truth_leaves: &BTreeSet<String>) -> Result<f64, EvalError> {
    let a = union_subgraph(ont_full, [predicted_leaf])?;
    let b = union_subgraph(ont_full, truth_leaves.iter().map(String::as_str))?;
    let inter = a.intersection(&b).count() as f64;
    Ok(inter / libm::sqrt(a.len() as f64 * b.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub id: String,
    pub label: String,
    pub support: usize,
    pub top1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRow {
    pub id: String,
    pub label: String,
    /// Descendant leaves with at least one test sample.
    pub leaves: usize,
    /// Unweighted mean of those leaves' top-1 accuracies.
    pub top1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub samples: usize,
    pub top1: f64,
    /// `None` when the ontology has fewer than 3 leaves.
    pub top3: Option<f64>,
    pub top5: Option<f64>,
    pub jsc: f64,
    pub cs: f64,
    pub per_leaf: Vec<ClassRow>,
    pub per_branch: Vec<BranchRow>,
}

/// Aggregate metrics, per-leaf top-1 and branch rollups. Samples with
/// several true leaves count toward each of them in the per-leaf table.
pub fn evaluate(samples: &[EvalSample], ont_full: &Ontology) -> Result<MetricReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Empty);
    }
    let leaf_idx = ont_full.leaf_indices();
    let leaf_ids = ont_full.leaf_ids();
    let n = samples.len() as f64;

    let mut support = alloc::vec![0usize; leaf_idx.len()];
    let mut correct = alloc::vec![0usize; leaf_idx.len()];
    let (mut top1, mut jsc_sum, mut cs_sum) = (0usize, 0.0, 0.0);
    for s in samples {
        check_len(ont_full, s)?;
        let best = argmax(&s.prediction).ok_or(EvalError::LengthMismatch { got: 0, expected: 1 })?;
        let hit = s.truth_leaves.contains(leaf_ids[best]);
        if hit {
            top1 += 1;
        }
        jsc_sum += jsc(ont_full, leaf_ids[best], &s.truth_leaves)?;
        cs_sum += cs(ont_full, leaf_ids[best], &s.truth_leaves)?;
        for (p, id) in leaf_ids.iter().enumerate() {
            if s.truth_leaves.contains(*id) {
                support[p] += 1;
                if hit {
                    correct[p] += 1;
                }
            }
        }
    }

    let optional_topk = |k: usize| {
        if k <= leaf_idx.len() {
            topk_accuracy(ont_full, samples, k).map(Some)
        } else {
            Ok(None)
        }
    };

    let per_leaf: Vec<ClassRow> = leaf_idx
        .iter()
        .enumerate()
        .filter(|(p, _)| support[*p] > 0)
        .map(|(p, &i)| ClassRow {
            id: ont_full.nodes()[i].id.clone(),
            label: ont_full.nodes()[i].label.clone(),
            support: support[p],
            top1: correct[p] as f64 / support[p] as f64,
        })
        .collect();

    let mut per_branch = Vec::new();
    for (i, node) in ont_full.nodes().iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        let accs: Vec<f64> = ont_full
            .leaf_indices_under(i)
            .into_iter()
            .filter_map(|l| {
                let p = leaf_idx.binary_search(&l).ok()?;
                (support[p] > 0).then(|| correct[p] as f64 / support[p] as f64)
            })
            .collect();
        if accs.is_empty() {
            continue;
        }
        per_branch.push(BranchRow {
            id: node.id.clone(),
            label: node.label.clone(),
            leaves: accs.len(),
            top1: accs.iter().sum::<f64>() / accs.len() as f64,
        });
    }

    Ok(MetricReport {
        samples: samples.len(),
        top1: top1 as f64 / n,
        top3: optional_topk(3)?,
        top5: optional_topk(5)?,
        jsc: jsc_sum / n,
        cs: cs_sum / n,
        per_leaf,
        per_branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::toy5;
    use alloc::string::ToString;
    use alloc::vec;

    fn truth(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn sample(p: &[f64], t: &[&str]) -> EvalSample {
        EvalSample {
            prediction: p.to_vec(),
            truth_leaves: truth(t),
        }
    }

    #[test]
    fn topk_rules() {
        let ont = toy5();
        let peaked = [sample(&[0.9, 0.1, 0.0], &["L1"])];
        assert_eq!(topk_accuracy(&ont, &peaked, 1).unwrap(), 1.0);
        let third = [sample(&[0.1, 0.5, 0.9], &["L1"])];
        assert_eq!(topk_accuracy(&ont, &third, 1).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&ont, &third, 3).unwrap(), 1.0);
        let multi = [sample(&[0.1, 0.2, 0.7], &["L1", "L3"])];
        assert_eq!(topk_accuracy(&ont, &multi, 1).unwrap(), 1.0);
        assert_eq!(
            topk_accuracy(&ont, &multi, 4),
            Err(EvalError::KTooLarge { k: 4, leaves: 3 })
        );
        let short = [sample(&[0.1], &["L1"])];
        assert!(matches!(topk_accuracy(&ont, &short, 1), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn ties_follow_node_order() {
        let ont = toy5();
        let tie = [sample(&[0.5, 0.5, 0.5], &["L1"])];
        assert_eq!(topk_accuracy(&ont, &tie, 1).unwrap(), 1.0);
        let tie2 = [sample(&[0.5, 0.5, 0.5], &["L2"])];
        assert_eq!(topk_accuracy(&ont, &tie2, 1).unwrap(), 0.0);
    }

    #[test]
    fn similarities_on_toy5() {
        let ont = toy5();
        let l1 = truth(&["L1"]);
        assert_eq!(jsc(&ont, "L1", &l1).unwrap(), 1.0);
        assert_eq!(jsc(&ont, "L2", &l1).unwrap(), 0.5);
        assert_eq!(jsc(&ont, "L3", &l1).unwrap(), 0.2);
        assert_eq!(cs(&ont, "L1", &l1).unwrap(), 1.0);
        assert_eq!(cs(&ont, "L2", &l1).unwrap(), 2.0 / 3.0);
        assert_eq!(cs(&ont, "L3", &l1).unwrap(), 1.0 / 3.0);
        assert!(jsc(&ont, "B1", &l1).is_err());
    }

    #[test]
    fn all_correct_report() {
        let ont = toy5();
        let samples = vec![
            sample(&[0.9, 0.0, 0.0], &["L1"]),
            sample(&[0.0, 0.9, 0.0], &["L2"]),
            sample(&[0.0, 0.0, 0.9], &["L3"]),
        ];
        let r = evaluate(&samples, &ont).unwrap();
        assert_eq!((r.top1, r.top3, r.top5), (1.0, Some(1.0), None));
        assert_eq!((r.jsc, r.cs), (1.0, 1.0));
    }

    #[test]
    fn handcrafted_four_samples() {
        let ont = toy5();
        // predicted (top-1): L1, L2, L3, L1 ; truths: L1, L1, L1, L3
        let samples = vec![
            sample(&[0.8, 0.1, 0.1], &["L1"]),
            sample(&[0.3, 0.6, 0.1], &["L1"]),
            sample(&[0.1, 0.2, 0.7], &["L1"]),
            sample(&[0.5, 0.4, 0.45], &["L3"]),
        ];
        let r = evaluate(&samples, &ont).unwrap();
        assert_eq!(r.top1, 0.25);
        // top-3 covers everything with 3 leaves
        assert_eq!(r.top3, Some(1.0));
        // jsc: 1, 0.5, 0.2, 0.2 ; cs: 1, 2/3, 1/3, 1/3
        assert!((r.jsc - (1.0 + 0.5 + 0.2 + 0.2) / 4.0).abs() < 1e-15);
        assert!((r.cs - (1.0 + 2.0 / 3.0 + 1.0 / 3.0 + 1.0 / 3.0) / 4.0).abs() < 1e-15);
        assert_eq!(r.per_leaf.len(), 2);
        assert_eq!((r.per_leaf[0].id.as_str(), r.per_leaf[0].support), ("L1", 3));
        assert!((r.per_leaf[0].top1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((r.per_leaf[1].id.as_str(), r.per_leaf[1].top1), ("L3", 0.0));
        // support-weighted per-leaf accuracy gives the aggregate
        let weighted: f64 = r.per_leaf.iter().map(|c| c.top1 * c.support as f64).sum::<f64>() / 4.0;
        assert!((weighted - r.top1).abs() < 1e-15);
        // branch rollups: unweighted mean over supported leaves
        let b1 = r.per_branch.iter().find(|b| b.id == "B1").unwrap();
        assert_eq!(b1.leaves, 1);
        let root = r.per_branch.iter().find(|b| b.id == "R").unwrap();
        assert!((root.top1 - (1.0 / 3.0 + 0.0) / 2.0).abs() < 1e-15);
    }
}
