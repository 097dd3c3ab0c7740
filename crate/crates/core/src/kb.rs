//! In-memory knowledge-base stores: property-filtered triples, entity labels
//! and event seeds.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Wikidata "subclass of".
pub const SUBCLASS_OF: &str = "P279";
/// Wikidata "instance of".
pub const INSTANCE_OF: &str = "P31";
/// Wikidata "part of".
pub const PART_OF: &str = "P361";
/// Wikidata "sport".
pub const SPORT: &str = "P641";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleRecord {
    pub subject: String,
    pub property: String,
    pub object: String,
}

impl TripleRecord {
    /// Returns `None` when any component is empty.
    pub fn new(subject: &str, property: &str, object: &str) -> Option<Self> {
        if subject.is_empty() || property.is_empty() || object.is_empty() {
            return None;
        }
        Some(Self {
            subject: subject.into(),
            property: property.into(),
            object: object.into(),
        })
    }
}

/// A proleptic Gregorian calendar date. Negative years are allowed for
/// historical events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CalendarDate {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

impl CalendarDate {
    /// Parses `YYYY-MM-DD` (optionally `-YYYY-MM-DD`). A trailing time part
    /// starting with `T` is ignored.
    pub fn parse_iso(s: &str) -> Option<Self> {
        let s = s.split('T').next()?;
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let mut parts = body.split('-');
        let y = parts.next()?;
        let m = parts.next()?;
        let d = parts.next()?;
        if parts.next().is_some() || y.len() < 4 || m.len() != 2 || d.len() != 2 {
            return None;
        }
        let mut year: i32 = y.parse().ok()?;
        if neg {
            year = -year;
        }
        let month: u8 = m.parse().ok()?;
        let day: u8 = d.parse().ok()?;
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return None;
        }
        Some(Self { year, month, day })
    }
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        4 | 6 | 9 | 11 => 30,
        2 => {
            let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
            if leap {
                29
            } else {
                28
            }
        }
        _ => 31,
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.year < 0 {
            write!(f, "-{:04}-{:02}-{:02}", -self.year, self.month, self.day)
        } else {
            write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
        }
    }
}

/// A real-world event used to seed the bottom-up ontology construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSeed {
    pub event_id: String,
    pub label: String,
    pub popularity: Option<u64>,
    pub date: Option<CalendarDate>,
}

/// Keeps the first seed for every event id.
pub fn dedup_seeds(seeds: impl IntoIterator<Item = EventSeed>) -> Vec<EventSeed> {
    let mut seen = BTreeSet::new();
    seeds
        .into_iter()
        .filter(|s| seen.insert(s.event_id.clone()))
        .collect()
}

/// Triples grouped by `(subject, property)` plus an entity label table.
///
/// Lookups of absent keys return empty results rather than errors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleIndex {
    by_subject: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    labels: BTreeMap<String, String>,
    entities: BTreeSet<String>,
    triple_count: usize,
}

impl TripleIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triple; returns `false` if it was already present.
    pub fn insert(&mut self, triple: TripleRecord) -> bool {
        let objects = self
            .by_subject
            .entry(triple.subject.clone())
            .or_default()
            .entry(triple.property)
            .or_default();
        if objects.contains(&triple.object) {
            return false;
        }
        objects.push(triple.object.clone());
        self.entities.insert(triple.subject);
        self.entities.insert(triple.object);
        self.triple_count += 1;
        true
    }

    pub fn set_label(&mut self, entity: &str, label: &str) {
        self.labels.insert(entity.into(), label.into());
    }

    /// Objects of `(subject, property)` in insertion order.
    pub fn objects(&self, subject: &str, property: &str) -> &[String] {
        self.by_subject
            .get(subject)
            .and_then(|props| props.get(property))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Label of an entity, falling back to the raw id.
    pub fn label<'a>(&'a self, entity: &'a str) -> &'a str {
        self.labels.get(entity).map(String::as_str).unwrap_or(entity)
    }

    pub fn has_label(&self, entity: &str) -> bool {
        self.labels.contains_key(entity)
    }

    /// Whether the entity appears as subject or object of any triple.
    pub fn contains_entity(&self, entity: &str) -> bool {
        self.entities.contains(entity)
    }

    pub fn len(&self) -> usize {
        self.triple_count
    }

    pub fn is_empty(&self) -> bool {
        self.triple_count == 0
    }

    /// All stored triples, ordered by subject then property.
    pub fn triples(&self) -> impl Iterator<Item = TripleRecord> + '_ {
        self.by_subject.iter().flat_map(|(s, props)| {
            props.iter().flat_map(move |(p, objs)| {
                objs.iter().map(move |o| TripleRecord {
                    subject: s.clone(),
                    property: p.clone(),
                    object: o.clone(),
                })
            })
        })
    }
}

impl FromIterator<TripleRecord> for TripleIndex {
    fn from_iter<T: IntoIterator<Item = TripleRecord>>(iter: T) -> Self {
        let mut index = TripleIndex::new();
        for t in iter {
            index.insert(t);
        }
        index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn duplicate_triples_are_stored_once() {
        let mut index = TripleIndex::new();
        let t = TripleRecord::new("Q1", "P279", "Q2").unwrap();
        assert!(index.insert(t.clone()));
        assert!(!index.insert(t));
        assert_eq!(index.len(), 1);
        assert_eq!(index.objects("Q1", "P279"), &["Q2".to_string()]);
    }

    #[test]
    fn absent_lookup_is_empty() {
        let index = TripleIndex::new();
        assert!(index.objects("Q9", "P279").is_empty());
        assert_eq!(index.label("Q9"), "Q9");
    }

    #[test]
    fn empty_components_rejected() {
        assert!(TripleRecord::new("", "P279", "Q2").is_none());
        assert!(TripleRecord::new("Q1", "P279", "").is_none());
    }

    #[test]
    fn dates() {
        let d = CalendarDate::parse_iso("2011-06-12").unwrap();
        assert_eq!((d.year, d.month, d.day), (2011, 6, 12));
        assert_eq!(d.to_string(), "2011-06-12");
        assert!(CalendarDate::parse_iso("2011-02-29").is_none());
        assert!(CalendarDate::parse_iso("2012-02-29").is_some());
        assert!(CalendarDate::parse_iso("2011-13-01").is_none());
        assert_eq!(CalendarDate::parse_iso("-0490-09-12").unwrap().year, -490);
        assert!(CalendarDate::parse_iso("2011-06-12T00:00:00Z").is_some());
        assert!(CalendarDate::parse_iso("june").is_none());
    }

    #[test]
    fn seed_dedup_keeps_first() {
        let mk = |id: &str, label: &str| EventSeed {
            event_id: id.into(),
            label: label.into(),
            popularity: None,
            date: None,
        };
        let seeds = dedup_seeds([mk("e1", "a"), mk("e1", "b"), mk("e2", "c")]);
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds[0].label, "a");
    }
}
