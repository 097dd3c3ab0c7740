//! Dense vector files: one header line, then one vector per line.
//!
//! ```text
//! # ontology=<hash> dim=<n> kind=leaf|subgraph|weights [scheme=<s> leaf_weight=<w>]
//! 1 0 0
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use evontology_core::encoding::{decode_leaf, LeafVector};
use evontology_core::{Ontology, WeightScheme, WeightVector};

use super::tables::join_reals;
use super::{data_lines, header_fields, DataError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorKind {
    Leaf,
    Subgraph,
    Weights,
}

impl VectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VectorKind::Leaf => "leaf",
            VectorKind::Subgraph => "subgraph",
            VectorKind::Weights => "weights",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [VectorKind::Leaf, VectorKind::Subgraph, VectorKind::Weights]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub ontology_hash: String,
    pub kind: VectorKind,
    pub dim: usize,
    pub scheme: Option<WeightScheme>,
    pub leaf_weight: Option<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl VectorFile {
    pub fn to_text(&self) -> String {
        let mut out = format!("# ontology={} dim={} kind={}", self.ontology_hash, self.dim, self.kind.as_str());
        if let Some(s) = self.scheme {
            let _ = write!(out, " scheme={}", s.as_str());
        }
        if let Some(w) = self.leaf_weight {
            let _ = write!(out, " leaf_weight={w}");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&join_reals(r));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, DataError> {
        let header = text
            .lines()
            .next()
            .filter(|l| l.starts_with('#'))
            .ok_or_else(|| DataError::format(path, 1, "missing # ontology=... header"))?;
        let f = header_fields(header);
        let need = |k: &str| f.get(k).copied().ok_or_else(|| DataError::format(path, 1, format!("header lacks {k}")));
        let ontology_hash = need("ontology")?.to_string();
        let dim: usize = need("dim")?.parse().map_err(|_| DataError::format(path, 1, "dim is not a number"))?;
        let kind = VectorKind::parse(need("kind")?).ok_or_else(|| DataError::format(path, 1, "unknown kind"))?;
        let scheme = match f.get("scheme") {
            Some(s) => Some(WeightScheme::parse(s).ok_or_else(|| DataError::format(path, 1, "unknown scheme"))?),
            None => None,
        };
        let leaf_weight = match f.get("leaf_weight") {
            Some(s) => Some(s.parse().map_err(|_| DataError::format(path, 1, "leaf_weight is not a number"))?),
            None => None,
        };
        let mut rows = Vec::new();
        for (n, line) in data_lines(text) {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| DataError::format(path, n, "not a finite number"))?;
            if row.len() != dim {
                return Err(DataError::format(path, n, format!("expected {dim} values, found {}", row.len())));
            }
            if kind != VectorKind::Weights && row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(DataError::format(path, n, "label vectors hold 0 or 1 only"));
            }
            rows.push(row);
        }
        Ok(Self {
            ontology_hash,
            kind,
            dim,
            scheme,
            leaf_weight,
            rows,
        })
    }

    pub fn check_hash(&self, ont: &Ontology, path: &Path) -> Result<(), DataError> {
        let expected = ont.content_hash();
        if self.ontology_hash != expected {
            return Err(DataError::HashMismatch {
                path: path.to_path_buf(),
                found: self.ontology_hash.clone(),
                expected,
            });
        }
        Ok(())
    }
}

pub fn weights_file(w: &WeightVector) -> VectorFile {
    VectorFile {
        ontology_hash: w.ontology_hash.clone(),
        kind: VectorKind::Weights,
        dim: w.len(),
        scheme: Some(w.scheme),
        leaf_weight: Some(w.leaf_weight),
        rows: vec![w.values.clone()],
    }
}

pub fn weights_from_file(v: &VectorFile, path: &Path) -> Result<WeightVector, DataError> {
    if v.kind != VectorKind::Weights || v.rows.len() != 1 {
        return Err(DataError::format(path, 1, "expected a single weights vector"));
    }
    if v.rows[0].iter().any(|&x| x < 0.0) {
        return Err(DataError::format(path, 2, "weights must be non-negative"));
    }
    Ok(WeightVector {
        values: v.rows[0].clone(),
        scheme: v.scheme.unwrap_or(WeightScheme::Unit),
        leaf_weight: v.leaf_weight.unwrap_or(1.0),
        ontology_hash: v.ontology_hash.clone(),
    })
}

/// Leaf label sets encoded in a leaf or subgraph vector file. Leaves of a
/// subgraph vector are exactly the labelled leaves.
pub fn leaf_sets(v: &VectorFile, ont: &Ontology, path: &Path) -> Result<Vec<BTreeSet<String>>, DataError> {
    v.check_hash(ont, path)?;
    // columns holding the leaves, in leaf order
    let (want, cols): (usize, Vec<usize>) = match v.kind {
        VectorKind::Leaf => (ont.leaf_count(), (0..ont.leaf_count()).collect()),
        VectorKind::Subgraph => (ont.len(), ont.leaf_indices()),
        VectorKind::Weights => return Err(DataError::format(path, 1, "weights are not labels")),
    };
    if v.dim != want {
        return Err(DataError::format(path, 1, format!("dimension {} does not fit the ontology ({want})", v.dim)));
    }
    Ok(v.rows
        .iter()
        .map(|r| {
            let lv = LeafVector {
                values: cols.iter().map(|&i| r[i] == 1.0).collect(),
                ontology_hash: v.ontology_hash.clone(),
            };
            decode_leaf(ont, &lv).into_iter().map(String::from).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use evontology_core::encoding::{centrality_weights, encode_subgraph};
    use evontology_core::synthetic::toy5;

    #[test]
    fn weights_round_trip_exactly() {
        let ont = toy5();
        let w = centrality_weights(&ont, 6.0).unwrap();
        let text = weights_file(&w).to_text();
        assert!(text.starts_with(&format!("# ontology={} dim=6 kind=weights scheme=centrality leaf_weight=6", ont.content_hash())));
        let back = weights_from_file(&VectorFile::parse(&text, Path::new("w")).unwrap(), Path::new("w")).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn subgraph_rows_decode_to_leaves() {
        let ont = toy5();
        let v = VectorFile {
            ontology_hash: ont.content_hash(),
            kind: VectorKind::Subgraph,
            dim: 6,
            scheme: None,
            leaf_weight: None,
            rows: vec![encode_subgraph(&ont, ["L1", "L3"]).unwrap().to_f64()],
        };
        let parsed = VectorFile::parse(&v.to_text(), Path::new("v")).unwrap();
        let sets = leaf_sets(&parsed, &ont, Path::new("v")).unwrap();
        assert_eq!(sets[0], BTreeSet::from(["L1".to_string(), "L3".to_string()]));
        let other = evontology_core::synthetic::star(3, 1);
        assert!(matches!(leaf_sets(&parsed, &other, Path::new("v")), Err(DataError::HashMismatch { .. })));
        assert!(VectorFile::parse("# ontology=x dim=2 kind=leaf\n1 0.5\n", Path::new("v")).is_err());
    }
}
