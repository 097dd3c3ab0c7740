//! Append-only refinement log: `timestamp<TAB>annotator<TAB>node_id<TAB>action`
//! where `action` is `select_leaf`, `reject`, `skip` or `undo` (the node of an
//! undo line is the node whose decision was withdrawn).

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use evontology_core::refine::{Action, Decision};

use super::{data_lines, DataError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogEntry {
    Decision(Decision),
    Undo { node_id: String, annotator: String, timestamp: u64 },
}

impl LogEntry {
    pub fn to_line(&self) -> String {
        match self {
            LogEntry::Decision(d) => format!("{}\t{}\t{}\t{}", d.timestamp, d.annotator, d.node_id, d.action.as_str()),
            LogEntry::Undo {
                node_id,
                annotator,
                timestamp,
            } => format!("{timestamp}\t{annotator}\t{node_id}\tundo"),
        }
    }
}

pub fn parse(text: &str, path: &Path) -> Result<Vec<LogEntry>, DataError> {
    let mut out = Vec::new();
    for (n, line) in data_lines(text) {
        let cols: Vec<&str> = line.split('\t').collect();
        let [ts, annotator, node, action] = cols.as_slice() else {
            return Err(DataError::format(path, n, "expected 4 tab-separated columns"));
        };
        let timestamp: u64 = ts.parse().map_err(|_| DataError::format(path, n, "bad timestamp"))?;
        let entry = if *action == "undo" {
            LogEntry::Undo {
                node_id: node.to_string(),
                annotator: annotator.to_string(),
                timestamp,
            }
        } else {
            let action = Action::parse(action).ok_or_else(|| DataError::format(path, n, format!("unknown action {action}")))?;
            LogEntry::Decision(Decision::new(*node, action, *annotator, timestamp))
        };
        out.push(entry);
    }
    Ok(out)
}

/// The decisions still in effect after applying undo lines.
pub fn effective_decisions(entries: &[LogEntry], path: &Path) -> Result<Vec<Decision>, DataError> {
    let mut out: Vec<Decision> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        match e {
            LogEntry::Decision(d) => out.push(d.clone()),
            LogEntry::Undo { .. } => {
                out.pop()
                    .ok_or_else(|| DataError::format(path, i + 1, "undo without a decision to withdraw"))?;
            }
        }
    }
    Ok(out)
}

/// Appends one line and flushes it to disk.
pub fn append(path: &Path, entry: &LogEntry) -> Result<(), DataError> {
    let err = |source| DataError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
    writeln!(f, "{}", entry.to_line()).map_err(err)?;
    f.sync_data().map_err(err)
}
