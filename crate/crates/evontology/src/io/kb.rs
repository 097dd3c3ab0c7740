//! Triple dumps, label tables and event seed lists.

use std::collections::BTreeSet;
use std::path::Path;

use evontology_core::kb::{dedup_seeds, CalendarDate};
use evontology_core::{EventSeed, TripleIndex, TripleRecord};

use super::{data_lines, read_text, DataError, LoadStats};

fn finish(path: &Path, stats: LoadStats) -> Result<LoadStats, DataError> {
    let total = stats.accepted + stats.filtered + stats.malformed.len();
    if total > 0 && stats.malformed.len() == total {
        return Err(DataError::AllMalformed {
            path: path.to_path_buf(),
            lines: total,
        });
    }
    Ok(stats)
}

pub fn parse_triples(text: &str, allowed: &BTreeSet<String>) -> (TripleIndex, LoadStats) {
    let mut index = TripleIndex::new();
    let mut stats = LoadStats::default();
    for (n, line) in data_lines(text) {
        let cols: Vec<&str> = line.split('\t').collect();
        let record = match cols.as_slice() {
            [s, p, o] => TripleRecord::new(s.trim(), p.trim(), o.trim()),
            _ => None,
        };
        match record {
            None => stats.malformed.push(n),
            Some(t) if !allowed.contains(&t.property) => stats.filtered += 1,
            Some(t) => {
                index.insert(t);
                stats.accepted += 1;
            }
        }
    }
    (index, stats)
}

/// Loads `subject<TAB>property<TAB>object` lines, keeping allowed
/// properties only.
pub fn load_triples(path: &Path, allowed: &BTreeSet<String>) -> Result<(TripleIndex, LoadStats), DataError> {
    let (index, stats) = parse_triples(&read_text(path)?, allowed);
    Ok((index, finish(path, stats)?))
}

/// Applies `entity<TAB>label` lines to the index.
pub fn load_labels(path: &Path, index: &mut TripleIndex) -> Result<LoadStats, DataError> {
    let text = read_text(path)?;
    let mut stats = LoadStats::default();
    for (n, line) in data_lines(&text) {
        match line.split_once('\t') {
            Some((id, label)) if !id.trim().is_empty() && !label.trim().is_empty() => {
                index.set_label(id.trim(), label.trim());
                stats.accepted += 1;
            }
            _ => stats.malformed.push(n),
        }
    }
    finish(path, stats)
}

fn parse_seed(line: &str) -> Option<EventSeed> {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    if cols.len() < 2 || cols.len() > 4 || cols[0].is_empty() || cols[1].is_empty() {
        return None;
    }
    let popularity = match cols.get(2) {
        Some(p) if !p.is_empty() => Some(p.parse().ok()?),
        _ => None,
    };
    let date = match cols.get(3) {
        Some(d) if !d.is_empty() => Some(CalendarDate::parse_iso(d)?),
        _ => None,
    };
    Some(EventSeed {
        event_id: cols[0].into(),
        label: cols[1].into(),
        popularity,
        date,
    })
}

pub fn parse_seeds(text: &str) -> (Vec<EventSeed>, LoadStats) {
    let mut stats = LoadStats::default();
    let mut seeds = Vec::new();
    for (n, line) in data_lines(text) {
        match parse_seed(line) {
            Some(s) => seeds.push(s),
            None => stats.malformed.push(n),
        }
    }
    let seeds = dedup_seeds(seeds);
    stats.accepted = seeds.len();
    (seeds, stats)
}

/// Loads `event_id<TAB>label[<TAB>popularity[<TAB>date]]` lines; repeated
/// ids keep their first line.
pub fn load_seeds(path: &Path) -> Result<(Vec<EventSeed>, LoadStats), DataError> {
    let (seeds, stats) = parse_seeds(&read_text(path)?);
    Ok((seeds, finish(path, stats)?))
}
