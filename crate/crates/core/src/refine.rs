//! Human-in-the-loop refinement. Annotators walk a candidate queue and
//! either select a node as a leaf (its descendants collapse into it and its
//! ancestors are confirmed as branches), reject it (it and everything left
//! without a root path disappear) or skip it. The derived ontology is always
//! a pure function of the base and the decision log.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ontology::{EventLink, Ontology, OntologyError};

/// Children listed in a [`CandidateView`].
pub const CHILD_SAMPLE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    SelectLeaf,
    Reject,
    Skip,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::SelectLeaf => "select_leaf",
            Action::Reject => "reject",
            Action::Skip => "skip",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "select_leaf" => Some(Action::SelectLeaf),
            "reject" => Some(Action::Reject),
            "skip" => Some(Action::Skip),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub node_id: String,
    pub action: Action,
    pub annotator: String,
    /// Seconds since the Unix epoch, supplied by the caller.
    pub timestamp: u64,
}

impl Decision {
    pub fn new(node_id: impl Into<String>, action: Action, annotator: impl Into<String>, timestamp: u64) -> Self {
        Self {
            node_id: node_id.into(),
            action,
            annotator: annotator.into(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefineError {
    #[error("{0} is not a candidate")]
    NotACandidate(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("{remaining} candidates remain")]
    Unfinished { remaining: usize },
    #[error("decision {index} could not be replayed: {source}")]
    Replay {
        index: usize,
        #[source]
        source: alloc::boxed::Box<RefineError>,
    },
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRef {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateView {
    pub node: NodeRef,
    /// Ancestors nearest first, ties in node order.
    pub ancestors: Vec<NodeRef>,
    /// Up to [`CHILD_SAMPLE`] children in node order.
    pub children: Vec<NodeRef>,
    pub child_count: usize,
    pub descendant_count: usize,
    /// Distinct events linked to the node or below it.
    pub linked_events: usize,
    /// 1-based position in the queue.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next {
    Candidate(CandidateView),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextView {
    pub node: NodeRef,
    pub ancestors: Vec<NodeRef>,
    pub children: Vec<NodeRef>,
    pub linked_events: usize,
    pub is_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationSummary {
    pub node_id: String,
    pub action: Action,
    /// Every id that left the candidate set, sorted.
    pub removed_candidates: Vec<String>,
    /// Nodes deleted from the derived ontology, sorted.
    pub removed_nodes: Vec<String>,
    /// Events whose links moved to the selected node.
    pub relinked_events: usize,
    /// Events left without any link.
    pub dropped_events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    /// Decisions in the log, skips included.
    pub decided: usize,
    pub remaining: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct RefinementSession {
    base: Ontology,
    base_links: Vec<EventLink>,
    decisions: Vec<Decision>,
    derived: Ontology,
    links: BTreeMap<String, BTreeSet<String>>,
    candidates: BTreeSet<String>,
    /// Skipped candidates in skip order; they follow every other candidate.
    deferred: VecDeque<String>,
    total: usize,
}

impl RefinementSession {
    pub fn start(ontology: Ontology, links: Vec<EventLink>) -> Self {
        let candidates: BTreeSet<String> = ontology
            .nodes()
            .iter()
            .filter(|n| n.id != ontology.root_id())
            .map(|n| n.id.clone())
            .collect();
        let link_map = links
            .iter()
            .filter(|l| !l.node_ids.is_empty())
            .map(|l| (l.event_id.clone(), l.node_ids.clone()))
            .collect();
        Self {
            total: candidates.len(),
            derived: ontology.clone(),
            base: ontology,
            base_links: links,
            decisions: Vec::new(),
            links: link_map,
            candidates,
            deferred: VecDeque::new(),
        }
    }

    /// Rebuilds a session by applying `decisions` in order.
    pub fn replay(ontology: Ontology, links: Vec<EventLink>, decisions: &[Decision]) -> Result<Self, RefineError> {
        let mut s = Self::start(ontology, links);
        for (index, d) in decisions.iter().enumerate() {
            s.decide(d.clone()).map_err(|e| RefineError::Replay {
                index,
                source: alloc::boxed::Box::new(e),
            })?;
        }
        Ok(s)
    }

    pub fn base(&self) -> &Ontology {
        &self.base
    }

    pub fn derived(&self) -> &Ontology {
        &self.derived
    }

    pub fn derived_links(&self) -> Vec<EventLink> {
        self.links
            .iter()
            .map(|(e, ns)| EventLink {
                event_id: e.clone(),
                node_ids: ns.clone(),
            })
            .collect()
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn candidates(&self) -> &BTreeSet<String> {
        &self.candidates
    }

    pub fn is_candidate(&self, id: &str) -> bool {
        self.candidates.contains(id)
    }

    pub fn is_complete(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn progress(&self) -> Progress {
        Progress {
            decided: self.decisions.len(),
            remaining: self.candidates.len(),
            total: self.total,
        }
    }

    /// Candidate ids in presentation order: most descendants first, ties by
    /// id, then skipped nodes in the order they were skipped.
    pub fn queue(&self) -> Vec<String> {
        let ont = &self.derived;
        let deferred: BTreeSet<&String> = self.deferred.iter().collect();
        let mut fresh: Vec<(usize, &String)> = self
            .candidates
            .iter()
            .filter(|id| !deferred.contains(id))
            .map(|id| {
                let i = ont.index_of(id).expect("candidates live in the derived ontology");
                (ont.descendant_indices(i).len(), id)
            })
            .collect();
        fresh.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        let mut out: Vec<String> = fresh.into_iter().map(|(_, id)| id.clone()).collect();
        out.extend(self.deferred.iter().cloned());
        out
    }

    pub fn next_candidate(&self) -> Next {
        match self.queue().first() {
            None => Next::Done,
            Some(id) => {
                let i = self.derived.index_of(id).expect("candidate present");
                let children = self.children_refs(i);
                Next::Candidate(CandidateView {
                    node: self.node_ref(i),
                    ancestors: self.ancestor_chain(i),
                    child_count: children.len(),
                    children: children.into_iter().take(CHILD_SAMPLE).collect(),
                    descendant_count: self.derived.descendant_indices(i).len(),
                    linked_events: self.linked_events(i),
                    rank: 1,
                })
            }
        }
    }

    /// Context of any node of the derived ontology.
    pub fn context(&self, id: &str) -> Result<ContextView, RefineError> {
        let i = self
            .derived
            .index_of(id)
            .ok_or_else(|| RefineError::UnknownNode(id.into()))?;
        Ok(ContextView {
            node: self.node_ref(i),
            ancestors: self.ancestor_chain(i),
            children: self.children_refs(i),
            linked_events: self.linked_events(i),
            is_candidate: self.is_candidate(id),
        })
    }

    pub fn decide(&mut self, decision: Decision) -> Result<PropagationSummary, RefineError> {
        let id = decision.node_id.clone();
        if !self.candidates.contains(&id) {
            return Err(RefineError::NotACandidate(id));
        }
        let summary = match decision.action {
            Action::SelectLeaf => self.select_leaf(&id)?,
            Action::Reject => self.reject(&id)?,
            Action::Skip => {
                self.deferred.retain(|d| d != &id);
                self.deferred.push_back(id.clone());
                PropagationSummary {
                    node_id: id,
                    action: Action::Skip,
                    removed_candidates: Vec::new(),
                    removed_nodes: Vec::new(),
                    relinked_events: 0,
                    dropped_events: 0,
                }
            }
        };
        self.decisions.push(decision);
        Ok(summary)
    }

    /// Drops the last decision and rebuilds the session from the base.
    pub fn undo(&mut self) -> Result<Decision, RefineError> {
        let mut log = self.decisions.clone();
        let last = log.pop().ok_or(RefineError::NothingToUndo)?;
        *self = Self::replay(self.base.clone(), self.base_links.clone(), &log)?;
        Ok(last)
    }

    /// The refined ontology and links once no candidate is left.
    pub fn finalize(&self) -> Result<(Ontology, Vec<EventLink>), RefineError> {
        if !self.is_complete() {
            return Err(RefineError::Unfinished {
                remaining: self.candidates.len(),
            });
        }
        Ok((self.derived.clone(), self.derived_links()))
    }

    fn select_leaf(&mut self, id: &str) -> Result<PropagationSummary, RefineError> {
        let below = self.derived.descendants(id)?;
        let above = self.derived.ancestors(id)?;
        let mut draft = self.derived.to_draft();
        for d in &below {
            draft.remove_node(d);
        }
        self.derived = draft.finish()?;

        let mut relinked = 0;
        for nodes in self.links.values_mut() {
            if nodes.iter().any(|n| below.contains(n)) {
                nodes.retain(|n| !below.contains(n));
                nodes.insert(id.into());
                relinked += 1;
            }
        }

        let mut gone: BTreeSet<String> = below.clone();
        gone.insert(id.into());
        gone.extend(above);
        let removed_candidates = self.retire(&gone);
        Ok(PropagationSummary {
            node_id: id.into(),
            action: Action::SelectLeaf,
            removed_candidates,
            removed_nodes: below.into_iter().collect(),
            relinked_events: relinked,
            dropped_events: 0,
        })
    }

    fn reject(&mut self, id: &str) -> Result<PropagationSummary, RefineError> {
        let mut draft = self.derived.to_draft();
        draft.remove_node(id);
        let mut removed: BTreeSet<String> = draft.prune_disconnected().into_iter().collect();
        removed.insert(id.into());
        self.derived = draft.finish()?;

        let before = self.links.len();
        for nodes in self.links.values_mut() {
            nodes.retain(|n| !removed.contains(n));
        }
        self.links.retain(|_, nodes| !nodes.is_empty());
        let dropped = before - self.links.len();

        let removed_candidates = self.retire(&removed);
        Ok(PropagationSummary {
            node_id: id.into(),
            action: Action::Reject,
            removed_candidates,
            removed_nodes: removed.into_iter().collect(),
            relinked_events: 0,
            dropped_events: dropped,
        })
    }

    fn retire(&mut self, ids: &BTreeSet<String>) -> Vec<String> {
        let out: Vec<String> = ids.iter().filter(|i| self.candidates.contains(*i)).cloned().collect();
        for i in &out {
            self.candidates.remove(i);
        }
        self.deferred.retain(|d| !ids.contains(d));
        out
    }

    fn node_ref(&self, i: usize) -> NodeRef {
        let n = &self.derived.nodes()[i];
        NodeRef {
            id: n.id.clone(),
            label: n.label.clone(),
        }
    }

    fn children_refs(&self, i: usize) -> Vec<NodeRef> {
        let mut ch = self.derived.child_indices(i).to_vec();
        ch.sort_unstable();
        ch.into_iter().map(|c| self.node_ref(c)).collect()
    }

    fn ancestor_chain(&self, i: usize) -> Vec<NodeRef> {
        let mut seen = BTreeSet::from([i]);
        let mut level = alloc::vec![i];
        let mut out = Vec::new();
        while !level.is_empty() {
            let mut next: Vec<usize> = level
                .iter()
                .flat_map(|&v| self.derived.parent_indices(v).iter().copied())
                .filter(|p| seen.insert(*p))
                .collect();
            next.sort_unstable();
            out.extend(next.iter().map(|&p| self.node_ref(p)));
            level = next;
        }
        out
    }

    fn linked_events(&self, i: usize) -> usize {
        let mut under: BTreeSet<&str> = self
            .derived
            .descendant_indices(i)
            .into_iter()
            .map(|d| self.derived.nodes()[d].id.as_str())
            .collect();
        under.insert(self.derived.nodes()[i].id.as_str());
        self.links
            .values()
            .filter(|ns| ns.iter().any(|n| under.contains(n.as_str())))
            .count()
    }
}
