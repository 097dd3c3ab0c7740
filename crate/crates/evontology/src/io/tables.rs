//! Merge lists, sample label tables, feature matrices and prediction files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use evontology_core::MergeList;

use super::{data_lines, header_fields, DataError};

/// `survivor_id<TAB>absorbed_id` pairs.
pub fn parse_merges(text: &str, path: &Path) -> Result<MergeList, DataError> {
    let mut pairs = Vec::new();
    for (n, line) in data_lines(text) {
        match line.split('\t').map(str::trim).collect::<Vec<_>>().as_slice() {
            [s, a] if !s.is_empty() && !a.is_empty() => pairs.push((s.to_string(), a.to_string())),
            _ => return Err(DataError::format(path, n, "expected survivor_id<TAB>absorbed_id")),
        }
    }
    MergeList::from_pairs(pairs).map_err(|e| DataError::format(path, 0, e.to_string()))
}

pub type SampleLabels = Vec<(String, BTreeSet<String>)>;

/// `sample_id<TAB>leaf_id[,leaf_id...]` lines.
pub fn parse_sample_labels(text: &str, path: &Path) -> Result<SampleLabels, DataError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in data_lines(text) {
        let (id, leaves) = line
            .split_once('\t')
            .ok_or_else(|| DataError::format(path, n, "expected sample_id<TAB>leaf_ids"))?;
        let leaves: BTreeSet<String> = leaves.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        let id = id.trim();
        if id.is_empty() || leaves.is_empty() {
            return Err(DataError::format(path, n, "empty sample id or leaf list"));
        }
        if !seen.insert(id.to_string()) {
            return Err(DataError::format(path, n, format!("duplicate sample id {id}")));
        }
        out.push((id.to_string(), leaves));
    }
    Ok(out)
}

pub fn sample_labels_to_tsv(labels: &[(String, BTreeSet<String>)]) -> String {
    let mut out = String::new();
    for (id, leaves) in labels {
        let l: Vec<&str> = leaves.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{id}\t{}", l.join(","));
    }
    out
}

fn parse_reals(tokens: &[&str], path: &Path, n: usize) -> Result<Vec<f64>, DataError> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::format(path, n, format!("not a finite number: {t}")))
        })
        .collect()
}

pub(crate) fn join_reals(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    parts.join(" ")
}

/// Header `dim=<d> count=<n>` followed by `n` rows of `d` reals.
pub fn parse_features(text: &str, path: &Path) -> Result<Vec<Vec<f64>>, DataError> {
    let mut lines = data_lines(text);
    let (hn, header) = lines.next().ok_or_else(|| DataError::format(path, 1, "missing dim=<d> count=<n> header"))?;
    let fields = header_fields(header);
    let get = |k: &str| -> Result<usize, DataError> {
        fields
            .get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| DataError::format(path, hn, format!("header lacks a numeric {k}")))
    };
    let (dim, count) = (get("dim")?, get("count")?);
    let mut rows = Vec::with_capacity(count);
    for (n, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != dim {
            return Err(DataError::format(path, n, format!("expected {dim} values, found {}", tokens.len())));
        }
        rows.push(parse_reals(&tokens, path, n)?);
    }
    if rows.len() != count {
        return Err(DataError::format(path, hn, format!("header promises {count} rows, found {}", rows.len())));
    }
    Ok(rows)
}

pub fn features_to_text(rows: &[Vec<f64>]) -> String {
    let dim = rows.first().map_or(0, Vec::len);
    let mut out = format!("dim={dim} count={}\n", rows.len());
    for r in rows {
        out.push_str(&join_reals(r));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub ontology_hash: Option<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

/// Optional `# ontology=<hash> leaves=<n>` header, then `sample_id` and the
/// leaf scores per line.
pub fn parse_predictions(text: &str, path: &Path) -> Result<Predictions, DataError> {
    let mut ontology_hash = None;
    if let Some(first) = text.lines().next().filter(|l| l.starts_with('#')) {
        ontology_hash = header_fields(first).get("ontology").map(|s| s.to_string());
    }
    let mut rows = Vec::new();
    let mut width = None;
    for (n, line) in data_lines(text) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let (id, values) = tokens.split_first().ok_or_else(|| DataError::format(path, n, "empty row"))?;
        let values = parse_reals(values, path, n)?;
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(DataError::format(path, n, "rows differ in length"));
        }
        rows.push((id.to_string(), values));
    }
    Ok(Predictions { ontology_hash, rows })
}

pub fn predictions_to_text(p: &Predictions) -> String {
    let mut out = String::new();
    if let Some(h) = &p.ontology_hash {
        let leaves = p.rows.first().map_or(0, |r| r.1.len());
        let _ = writeln!(out, "# ontology={h} leaves={leaves}");
    }
    for (id, values) in &p.rows {
        let _ = writeln!(out, "{id} {}", join_reals(values));
    }
    out
}
