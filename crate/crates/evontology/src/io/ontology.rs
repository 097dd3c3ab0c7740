//! The ontology document (JSON) and its companion event-link table.
//!
//! ```json
//! {
//!   "format": "evontology/ontology-1",
//!   "hash": "<content hash>",
//!   "root": "Q1190554",
//!   "reduced": false,
//!   "node_order": ["Q1190554", "..."],
//!   "nodes": [{"id": "...", "label": "...", "kind": "root|branch|leaf", "merged_ids": []}],
//!   "edges": [{"parent": "...", "child": "...", "provenance": "P279"}]
//! }
//! ```
//!
//! `hash` is optional on input; when present it must match the content. The
//! links table lives next to the document as `<file>.links.tsv` with lines
//! `event_id<TAB>node_id[,node_id...]`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use evontology_core::{Edge, EventLink, NodeKind, NodeSpec, Ontology};
use serde::{Deserialize, Serialize};

use super::{data_lines, read_text, sibling, write_text, DataError};

pub const FORMAT: &str = "evontology/ontology-1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    label: String,
    kind: NodeKind,
    #[serde(default)]
    merged_ids: BTreeSet<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyDoc {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hash: Option<String>,
    root: String,
    reduced: bool,
    node_order: Vec<String>,
    nodes: Vec<NodeDoc>,
    edges: Vec<Edge>,
}

pub fn to_json(ont: &Ontology) -> String {
    let doc = OntologyDoc {
        format: FORMAT.into(),
        hash: Some(ont.content_hash()),
        root: ont.root_id().into(),
        reduced: ont.is_reduced(),
        node_order: ont.node_order().map(String::from).collect(),
        nodes: ont
            .nodes()
            .iter()
            .map(|n| NodeDoc {
                id: n.id.clone(),
                label: n.label.clone(),
                kind: n.kind,
                merged_ids: n.merged_ids.clone(),
            })
            .collect(),
        edges: ont.edges().to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("ontology document serializes");
    s.push('\n');
    s
}

fn schema(path: &Path, location: impl Into<String>, message: impl Into<String>) -> DataError {
    DataError::Schema {
        path: path.to_path_buf(),
        location: location.into(),
        message: message.into(),
    }
}

pub fn from_json(text: &str, path: &Path) -> Result<Ontology, DataError> {
    let doc: OntologyDoc = serde_json::from_str(text).map_err(|e| {
        schema(path, format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    if doc.format != FORMAT {
        return Err(schema(path, "format", format!("unsupported format {:?}", doc.format)));
    }
    let known: BTreeSet<&str> = doc.nodes.iter().map(|n| n.id.as_str()).collect();
    for (i, e) in doc.edges.iter().enumerate() {
        for end in [&e.parent, &e.child] {
            if !known.contains(end.as_str()) {
                return Err(schema(path, format!("edges[{i}]"), format!("unknown node {end}")));
            }
        }
    }
    let specs = doc
        .nodes
        .iter()
        .map(|n| NodeSpec {
            id: n.id.clone(),
            label: n.label.clone(),
            merged_ids: n.merged_ids.clone(),
        })
        .collect();
    let ont = Ontology::from_parts(&doc.root, specs, doc.edges, Some(&doc.node_order), doc.reduced)
        .map_err(|e| schema(path, "document", e.to_string()))?;
    for (i, n) in doc.nodes.iter().enumerate() {
        let actual = ont.node(&n.id).expect("node was just added").kind;
        if actual != n.kind {
            return Err(schema(
                path,
                format!("nodes[{i}]"),
                format!("{} is declared {} but is a {}", n.id, n.kind.as_str(), actual.as_str()),
            ));
        }
    }
    if let Some(h) = doc.hash {
        let actual = ont.content_hash();
        if h != actual {
            return Err(schema(path, "hash", format!("stored hash {h} does not match content {actual}")));
        }
    }
    Ok(ont)
}

pub fn links_path(ontology_path: &Path) -> PathBuf {
    sibling(ontology_path, ".links.tsv")
}

pub fn links_to_tsv(links: &[EventLink]) -> String {
    let mut out = String::new();
    for l in links {
        let ids: Vec<&str> = l.node_ids.iter().map(String::as_str).collect();
        out.push_str(&l.event_id);
        out.push('\t');
        out.push_str(&ids.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_links(text: &str, path: &Path) -> Result<Vec<EventLink>, DataError> {
    let mut links = Vec::new();
    for (n, line) in data_lines(text) {
        let (event, ids) = line
            .split_once('\t')
            .ok_or_else(|| DataError::format(path, n, "expected event_id<TAB>node_ids"))?;
        let ids: BTreeSet<String> = ids.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        if event.trim().is_empty() || ids.is_empty() {
            return Err(DataError::format(path, n, "empty event id or node list"));
        }
        links.push(EventLink {
            event_id: event.trim().into(),
            node_ids: ids,
        });
    }
    Ok(links)
}

/// Writes the document and, when given, its links table.
pub fn write(path: &Path, ont: &Ontology, links: Option<&[EventLink]>) -> Result<(), DataError> {
    write_text(path, &to_json(ont))?;
    if let Some(links) = links {
        write_text(&links_path(path), &links_to_tsv(links))?;
    }
    Ok(())
}

pub fn read(path: &Path) -> Result<Ontology, DataError> {
    from_json(&read_text(path)?, path)
}

/// The links table next to `ontology_path`; empty when there is none.
pub fn read_links(ontology_path: &Path) -> Result<Vec<EventLink>, DataError> {
    let p = links_path(ontology_path);
    if !p.exists() {
        return Ok(Vec::new());
    }
    parse_links(&read_text(&p)?, &p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use evontology_core::synthetic::{random_dag, toy5};

    #[test]
    fn round_trip_keeps_order_and_flags() {
        let p = Path::new("mem.json");
        let ont = toy5();
        assert_eq!(from_json(&to_json(&ont), p).unwrap(), ont);
        let mut draft = random_dag(20, 4).to_draft();
        draft.node_mut("N0003").unwrap().merged_ids.insert("Q9".into());
        draft.set_reduced(true);
        let custom = draft.finish().unwrap();
        let back = from_json(&to_json(&custom), p).unwrap();
        assert_eq!(back, custom);
        assert!(back.is_reduced());
        assert!(back.node("N0003").unwrap().merged_ids.contains("Q9"));
    }

    #[test]
    fn schema_errors_carry_positions() {
        let p = Path::new("bad.json");
        let text = to_json(&toy5()).replacen("\"branch\"", "\"twig\"", 1);
        match from_json(&text, p) {
            Err(DataError::Schema { location, .. }) => assert!(location.starts_with("line ")),
            other => panic!("{other:?}"),
        }
        let text = to_json(&toy5()).replacen("\"kind\": \"leaf\"", "\"kind\": \"branch\"", 1);
        let text = text.lines().filter(|l| !l.contains("\"hash\"")).collect::<Vec<_>>().join("\n");
        match from_json(&text, p) {
            Err(DataError::Schema { location, .. }) => assert_eq!(location, "nodes[3]"),
            other => panic!("{other:?}"),
        }
        let tampered = to_json(&toy5()).replacen("\"label\": \"L1\"", "\"label\": \"renamed\"", 1);
        assert!(matches!(from_json(&tampered, p), Err(DataError::Schema { location, .. }) if location == "hash"));
    }

    #[test]
    fn links_round_trip() {
        let links = vec![
            EventLink::new("e1", ["L1".to_string(), "L2".to_string()]),
            EventLink::new("e2", ["L3".to_string()]),
        ];
        let p = Path::new("x.links.tsv");
        assert_eq!(parse_links(&links_to_tsv(&links), p).unwrap(), links);
        assert!(matches!(parse_links("e1\n", p), Err(DataError::Format { line: 1, .. })));
    }
}
