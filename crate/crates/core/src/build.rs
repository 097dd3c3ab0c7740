//! Ontology construction pipeline: bottom-up extraction from triples, sport
//! disambiguation, minimum-event filtering, manual merges and redundancy
//! removal. Every stage is a pure function from one ontology to the next.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::kb::{EventSeed, TripleIndex, INSTANCE_OF, PART_OF, SPORT, SUBCLASS_OF};
use crate::ontology::{EventLink, NodeSpec, Ontology, OntologyDraft, OntologyError};

/// Wikidata "occurrence".
pub const DEFAULT_ROOT: &str = "Q1190554";
pub const DEFAULT_MIN_EVENTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildConfig {
    pub root_id: String,
    /// Properties followed one hop from an event to its first nodes.
    pub event_properties: Vec<String>,
    /// Property followed transitively between nodes.
    pub node_property: String,
    pub sport_property: String,
    /// Nodes that are a parent of fewer events are removed.
    pub min_events: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            root_id: DEFAULT_ROOT.into(),
            event_properties: vec![INSTANCE_OF.into(), PART_OF.into(), SUBCLASS_OF.into()],
            node_property: SUBCLASS_OF.into(),
            sport_property: SPORT.into(),
            min_events: DEFAULT_MIN_EVENTS,
        }
    }
}

impl BuildConfig {
    pub fn check(&self) -> Result<(), BuildError> {
        if self.root_id.is_empty() {
            return Err(BuildError::InvalidConfig("root id is empty".into()));
        }
        if self.min_events == 0 {
            return Err(BuildError::InvalidConfig("min_events must be at least 1".into()));
        }
        Ok(())
    }

    /// Every property the pipeline reads from a triple dump.
    pub fn properties(&self) -> BTreeSet<String> {
        let mut all: BTreeSet<String> = self.event_properties.iter().cloned().collect();
        all.insert(self.node_property.clone());
        all.insert(self.sport_property.clone());
        all
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("root `{0}` does not occur in the triples")]
    RootAbsent(String),
    #[error("no event seeds given")]
    NoSeeds,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Merge(#[from] MergeError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MergeError {
    #[error("`{0}` appears in more than one merge group")]
    Overlap(String),
    #[error("`{0}` cannot absorb itself")]
    SelfMerge(String),
    #[error("merge references unknown node `{0}`")]
    UnknownNode(String),
    #[error("the root cannot be absorbed")]
    AbsorbsRoot,
    #[error("merging `{absorbed}` into `{survivor}` would create a cycle")]
    WouldCreateCycle { survivor: String, absorbed: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeGroup {
    pub survivor: String,
    pub absorbed: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeList {
    pub groups: Vec<MergeGroup>,
}

impl MergeList {
    /// Groups `(survivor, absorbed)` pairs by survivor, in order of first
    /// appearance.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, MergeError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut groups: Vec<MergeGroup> = Vec::new();
        for (s, a) in pairs {
            let (s, a) = (s.into(), a.into());
            match groups.iter_mut().find(|g| g.survivor == s) {
                Some(g) => g.absorbed.push(a),
                None => groups.push(MergeGroup {
                    survivor: s,
                    absorbed: vec![a],
                }),
            }
        }
        let list = Self { groups };
        list.check()?;
        Ok(list)
    }

    pub fn check(&self) -> Result<(), MergeError> {
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            if g.absorbed.contains(&g.survivor) {
                return Err(MergeError::SelfMerge(g.survivor.clone()));
            }
            for id in core::iter::once(&g.survivor).chain(&g.absorbed) {
                if !seen.insert(id.as_str()) {
                    return Err(MergeError::Overlap(id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    /// `(parent, child)` edges dropped to break cycles.
    pub dropped_back_edges: Vec<(String, String)>,
    /// Collected nodes without a path to the root.
    pub pruned_nodes: Vec<String>,
    pub unlinked_events: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Stage<R> {
    pub ontology: Ontology,
    pub links: Vec<EventLink>,
    pub report: R,
}

/// Follows the event properties one hop from each seed, then the node
/// property transitively upward, and keeps what reaches the root.
pub fn build_initial(
    seeds: &[EventSeed],
    triples: &TripleIndex,
    cfg: &BuildConfig,
) -> Result<Stage<BuildReport>, BuildError> {
    cfg.check()?;
    if seeds.is_empty() {
        return Err(BuildError::NoSeeds);
    }
    if !triples.contains_entity(&cfg.root_id) {
        return Err(BuildError::RootAbsent(cfg.root_id.clone()));
    }

    let mut draft = OntologyDraft::new(NodeSpec::new(cfg.root_id.as_str(), triples.label(&cfg.root_id)));
    let mut first_hops: Vec<(&EventSeed, BTreeSet<String>)> = Vec::with_capacity(seeds.len());
    let mut queue = VecDeque::new();
    for seed in seeds {
        let mut hop = BTreeSet::new();
        for prop in &cfg.event_properties {
            for target in triples.objects(&seed.event_id, prop) {
                hop.insert(target.clone());
                if draft.add_node(NodeSpec::new(target.as_str(), triples.label(target))) {
                    queue.push_back(target.clone());
                }
            }
        }
        first_hops.push((seed, hop));
    }
    expand_upward(&mut draft, triples, &cfg.node_property, queue);

    let mut report = BuildReport {
        dropped_back_edges: break_cycles(&mut draft),
        ..BuildReport::default()
    };
    report.pruned_nodes = draft.prune_disconnected();

    let mut links = Vec::new();
    for (seed, hop) in first_hops {
        let kept: BTreeSet<String> = hop.into_iter().filter(|id| draft.contains(id)).collect();
        if kept.is_empty() {
            report.unlinked_events.push(seed.event_id.clone());
        } else {
            links.push(EventLink {
                event_id: seed.event_id.clone(),
                node_ids: kept,
            });
        }
    }

    Ok(Stage {
        ontology: draft.finish()?,
        links,
        report,
    })
}

/// Adds parents of queued nodes via `property` until nothing new appears.
/// Expansion stops at the root and at nodes already expanded.
fn expand_upward(draft: &mut OntologyDraft, triples: &TripleIndex, property: &str, mut queue: VecDeque<String>) {
    while let Some(v) = queue.pop_front() {
        if v == draft.root_id() {
            continue;
        }
        for p in triples.objects(&v, property) {
            if draft.add_node(NodeSpec::new(p.as_str(), triples.label(p))) {
                queue.push_back(p.clone());
            }
            draft.add_edge(p, &v, property);
        }
    }
}

/// Upward depth-first search from every node in id order; each edge that
/// closes a cycle is dropped. Returns the dropped `(parent, child)` pairs.
fn break_cycles(draft: &mut OntologyDraft) -> Vec<(String, String)> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut mark: BTreeMap<String, Mark> = BTreeMap::new();
    let mut dropped = Vec::new();
    let ids: Vec<String> = draft.node_ids().cloned().collect();
    for start in ids {
        if mark.contains_key(&start) {
            continue;
        }
        let parents_of = |d: &OntologyDraft, v: &str| -> Vec<String> { d.parents(v).map(|(p, _)| p.clone()).collect() };
        let mut stack: Vec<(String, Vec<String>, usize)> = vec![(start.clone(), parents_of(draft, &start), 0)];
        mark.insert(start, Mark::Open);
        while let Some((v, ps, pos)) = stack.last_mut() {
            if *pos < ps.len() {
                let p = ps[*pos].clone();
                *pos += 1;
                match mark.get(&p) {
                    Some(Mark::Open) => {
                        let child = v.clone();
                        draft.remove_edge(&p, &child);
                        dropped.push((p, child));
                    }
                    Some(Mark::Done) => {}
                    None => {
                        mark.insert(p.clone(), Mark::Open);
                        let next = parents_of(draft, &p);
                        stack.push((p, next, 0));
                    }
                }
            } else {
                mark.insert(v.clone(), Mark::Done);
                stack.pop();
            }
        }
    }
    dropped
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRewire {
    pub subject: String,
    pub target: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    NoPathToRoot,
    WouldCreateCycle,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SportReport {
    pub rewired_nodes: Vec<String>,
    pub rewired_events: Vec<String>,
    pub added_nodes: Vec<String>,
    pub skipped: Vec<SkippedRewire>,
}

/// Re-parents every node and event that has sport values under those sport
/// nodes, importing each sport's upward chain from the triples.
///
/// Sport values of nodes imported along the way are not followed.
pub fn disambiguate_sport(
    ont: &Ontology,
    links: &[EventLink],
    triples: &TripleIndex,
    cfg: &BuildConfig,
) -> Result<Stage<SportReport>, BuildError> {
    cfg.check()?;
    let mut draft = ont.to_draft();
    let mut report = SportReport::default();

    let node_ids: Vec<String> = ont
        .node_order()
        .filter(|id| *id != ont.root_id())
        .map(String::from)
        .collect();
    let mut targets: BTreeSet<String> = BTreeSet::new();
    for id in &node_ids {
        targets.extend(triples.objects(id, &cfg.sport_property).iter().cloned());
    }
    for link in links {
        targets.extend(triples.objects(&link.event_id, &cfg.sport_property).iter().cloned());
    }

    let mut unreachable: BTreeSet<String> = BTreeSet::new();
    for target in &targets {
        if draft.contains(target) {
            continue;
        }
        match import_chain(&draft, triples, &cfg.node_property, target) {
            Some(chain) => {
                for spec in chain.nodes {
                    report.added_nodes.push(spec.id.clone());
                    draft.add_node(spec);
                }
                for (p, c) in chain.edges {
                    draft.add_edge(&p, &c, &cfg.node_property);
                }
            }
            None => {
                unreachable.insert(target.clone());
            }
        }
    }

    for id in &node_ids {
        let sports = triples.objects(id, &cfg.sport_property);
        if sports.is_empty() {
            continue;
        }
        let below = draft.descendants(id);
        let mut usable = Vec::new();
        for s in sports {
            let reason = if unreachable.contains(s) {
                Some(SkipReason::NoPathToRoot)
            } else if s == id || below.contains(s) {
                Some(SkipReason::WouldCreateCycle)
            } else {
                None
            };
            match reason {
                Some(reason) => report.skipped.push(SkippedRewire {
                    subject: id.clone(),
                    target: s.clone(),
                    reason,
                }),
                None => usable.push(s.clone()),
            }
        }
        if usable.is_empty() {
            continue;
        }
        let old: Vec<String> = draft.parents(id).map(|(p, _)| p.clone()).collect();
        for p in old {
            draft.remove_edge(&p, id);
        }
        for s in &usable {
            draft.add_edge(s, id, &cfg.sport_property);
        }
        report.rewired_nodes.push(id.clone());
    }

    let mut new_links = Vec::with_capacity(links.len());
    for link in links {
        let sports = triples.objects(&link.event_id, &cfg.sport_property);
        let usable: BTreeSet<String> = sports
            .iter()
            .filter(|s| {
                let ok = !unreachable.contains(*s);
                if !ok {
                    report.skipped.push(SkippedRewire {
                        subject: link.event_id.clone(),
                        target: (*s).clone(),
                        reason: SkipReason::NoPathToRoot,
                    });
                }
                ok
            })
            .cloned()
            .collect();
        if usable.is_empty() {
            new_links.push(link.clone());
        } else {
            report.rewired_events.push(link.event_id.clone());
            new_links.push(EventLink {
                event_id: link.event_id.clone(),
                node_ids: usable,
            });
        }
    }

    // rewiring only ever attaches to connected nodes; this is a no-op unless
    // the input was already broken
    let gone: BTreeSet<String> = draft.prune_disconnected().into_iter().collect();
    if !gone.is_empty() {
        for link in &mut new_links {
            link.node_ids.retain(|n| !gone.contains(n));
        }
        new_links.retain(|l| !l.node_ids.is_empty());
    }

    Ok(Stage {
        ontology: draft.finish()?,
        links: new_links,
        report,
    })
}

struct Chain {
    nodes: Vec<NodeSpec>,
    edges: Vec<(String, String)>,
}

/// The upward `property` closure of `start` that connects to the draft (or
/// its root). Nodes of the closure that do not connect are left out. `None`
/// when `start` itself cannot connect.
fn import_chain(draft: &OntologyDraft, triples: &TripleIndex, property: &str, start: &str) -> Option<Chain> {
    let mut found: BTreeSet<String> = BTreeSet::from([start.to_string()]);
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(v) = queue.pop_front() {
        for p in triples.objects(&v, property) {
            edges.push((p.clone(), v.clone()));
            if !draft.contains(p) && found.insert(p.clone()) {
                queue.push_back(p.clone());
            }
        }
    }
    // connected = in the draft, or has a parent that is connected
    let mut connected: BTreeSet<String> = BTreeSet::new();
    let mut changed = true;
    while changed {
        changed = false;
        for (p, c) in &edges {
            if found.contains(c) && !connected.contains(c) && (draft.contains(p) || connected.contains(p)) {
                connected.insert(c.clone());
                changed = true;
            }
        }
    }
    if !connected.contains(start) {
        return None;
    }
    let mut tmp = draft.clone();
    let nodes: Vec<NodeSpec> = connected
        .iter()
        .map(|id| NodeSpec::new(id.as_str(), triples.label(id)))
        .collect();
    for n in &nodes {
        tmp.add_node(n.clone());
    }
    let edges: Vec<(String, String)> = edges
        .into_iter()
        .filter(|(p, c)| connected.contains(c) && (connected.contains(p) || draft.contains(p)))
        .collect();
    for (p, c) in &edges {
        tmp.add_edge(p, c, property);
    }
    let dropped = break_cycles(&mut tmp);
    let edges = edges.into_iter().filter(|e| !dropped.contains(e)).collect();
    Some(Chain { nodes, edges })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub removed: Vec<String>,
    pub relinked_events: usize,
}

/// Distinct events linked at or below every node, indexed like `ont.nodes()`.
pub fn event_counts(ont: &Ontology, links: &[EventLink]) -> Vec<usize> {
    let mut per_node: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ont.len()];
    for (e, link) in links.iter().enumerate() {
        let mut reached: BTreeSet<usize> = BTreeSet::new();
        for id in &link.node_ids {
            if let Some(i) = ont.index_of(id) {
                reached.insert(i);
                reached.extend(ont.ancestor_indices(i));
            }
        }
        for i in reached {
            per_node[i].insert(e);
        }
    }
    per_node.iter().map(BTreeSet::len).collect()
}

/// Removes every non-root node that is a parent of fewer than
/// `cfg.min_events` events; their events move to the nearest surviving
/// ancestors.
pub fn filter_min_events(
    ont: &Ontology,
    links: &[EventLink],
    cfg: &BuildConfig,
) -> Result<Stage<FilterReport>, BuildError> {
    cfg.check()?;
    let counts = event_counts(ont, links);
    let removed: BTreeSet<usize> = (0..ont.len())
        .filter(|&i| i != ont.root_index() && counts[i] < cfg.min_events)
        .collect();

    let nodes = ont.nodes();
    let survivors_above = |start: usize| -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            if removed.contains(&v) {
                stack.extend(ont.parent_indices(v).iter().copied());
            } else {
                out.insert(nodes[v].id.clone());
            }
        }
        out
    };

    let mut report = FilterReport::default();
    let mut new_links = Vec::with_capacity(links.len());
    for link in links {
        let mut ids = BTreeSet::new();
        let mut moved = false;
        for id in &link.node_ids {
            match ont.index_of(id) {
                Some(i) if removed.contains(&i) => {
                    ids.extend(survivors_above(i));
                    moved = true;
                }
                Some(_) => {
                    ids.insert(id.clone());
                }
                None => {}
            }
        }
        if moved {
            report.relinked_events += 1;
        }
        if !ids.is_empty() {
            new_links.push(EventLink {
                event_id: link.event_id.clone(),
                node_ids: ids,
            });
        }
    }

    let mut draft = ont.to_draft();
    for &i in &removed {
        draft.remove_node(&nodes[i].id);
        report.removed.push(nodes[i].id.clone());
    }
    Ok(Stage {
        ontology: draft.finish()?,
        links: new_links,
        report,
    })
}

/// Fuses each absorbed node into its survivor: edges, event links and
/// merge history move over.
pub fn apply_merges(
    ont: &Ontology,
    links: &[EventLink],
    merges: &MergeList,
) -> Result<(Ontology, Vec<EventLink>), BuildError> {
    merges.check()?;
    for g in &merges.groups {
        for id in core::iter::once(&g.survivor).chain(&g.absorbed) {
            if !ont.contains(id) {
                return Err(MergeError::UnknownNode(id.clone()).into());
            }
        }
        if g.absorbed.iter().any(|a| a == ont.root_id()) {
            return Err(MergeError::AbsorbsRoot.into());
        }
    }

    let mut draft = ont.to_draft();
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    for g in &merges.groups {
        let s = &g.survivor;
        for a in &g.absorbed {
            if draft.ancestors(s).contains(a) || draft.descendants(s).contains(a) {
                return Err(MergeError::WouldCreateCycle {
                    survivor: s.clone(),
                    absorbed: a.clone(),
                }
                .into());
            }
            let parents: Vec<(String, String)> = draft.parents(a).map(|(p, v)| (p.clone(), v.clone())).collect();
            let children: Vec<(String, String)> = draft
                .children(a)
                .map(|c| (c.clone(), draft.edge_provenance(a, c).unwrap_or_default().to_string()))
                .collect();
            let spec = draft.remove_node(a).expect("checked above");
            for (p, prov) in parents {
                draft.add_edge(&p, s, &prov);
            }
            for (c, prov) in children {
                draft.add_edge(s, &c, &prov);
            }
            let survivor = draft.node_mut(s).expect("survivor present");
            survivor.merged_ids.insert(spec.id.clone());
            survivor.merged_ids.extend(spec.merged_ids);
            rename.insert(a.clone(), s.clone());
        }
    }

    let merged = draft.finish()?;
    if let Some(cycle) = merged.validate().cycles().next() {
        return Err(MergeError::WouldCreateCycle {
            survivor: cycle[0].clone(),
            absorbed: cycle.last().cloned().unwrap_or_default(),
        }
        .into());
    }
    let new_links = links
        .iter()
        .map(|l| EventLink {
            event_id: l.event_id.clone(),
            node_ids: l
                .node_ids
                .iter()
                .map(|id| rename.get(id).cloned().unwrap_or_else(|| id.clone()))
                .collect(),
        })
        .collect();
    Ok((merged, new_links))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub ontology: Ontology,
    /// Removed node ids in removal order.
    pub removed: Vec<String>,
}

/// Branch nodes whose reachable-leaf set equals that of one of their
/// children, given per-node leaf sets.
fn redundant_nodes(ont: &Ontology, leaf_sets: &[BTreeSet<String>]) -> Vec<usize> {
    (0..ont.len())
        .filter(|&i| {
            !ont.nodes()[i].is_leaf()
                && i != ont.root_index()
                && ont.child_indices(i).iter().any(|&c| leaf_sets[c] == leaf_sets[i])
        })
        .collect()
}

/// Deletes every branch node that covers the same leaves as one of its
/// children, connecting its parents to its children, until no such node is
/// left. Root and leaves are never removed.
pub fn remove_redundant(ont: &Ontology) -> Result<Reduction, OntologyError> {
    let mut current = ont.clone();
    let mut removed = Vec::new();
    let leaf_cache: BTreeMap<String, BTreeSet<String>> = {
        let sets = current.all_leaf_sets()?;
        current
            .nodes()
            .iter()
            .zip(&sets)
            .map(|(n, s)| (n.id.clone(), s.iter().map(|&i| current.nodes()[i].id.clone()).collect()))
            .collect()
    };

    loop {
        let sets: Vec<BTreeSet<String>> = current.nodes().iter().map(|n| leaf_cache[&n.id].clone()).collect();
        let mut flagged = redundant_nodes(&current, &sets);
        if flagged.is_empty() {
            break;
        }
        let depth = longest_depth(&current)?;
        flagged.sort_by(|&a, &b| {
            depth[b]
                .cmp(&depth[a])
                .then_with(|| current.nodes()[a].id.cmp(&current.nodes()[b].id))
        });

        let mut draft = current.to_draft();
        for i in flagged {
            let id = current.nodes()[i].id.clone();
            let still = draft.contains(&id)
                && draft.child_count(&id) > 0
                && draft.children(&id).any(|c| leaf_cache[c] == leaf_cache[&id]);
            if !still {
                continue;
            }
            let parents: Vec<String> = draft.parents(&id).map(|(p, _)| p.clone()).collect();
            let children: Vec<(String, String)> = draft
                .children(&id)
                .map(|c| (c.clone(), draft.edge_provenance(&id, c).unwrap_or_default().to_string()))
                .collect();
            draft.remove_node(&id);
            for p in &parents {
                for (c, prov) in &children {
                    draft.add_edge(p, c, prov);
                }
            }
            removed.push(id);
        }
        draft.set_reduced(true);
        current = draft.finish()?;
    }

    let mut draft = current.to_draft();
    draft.set_reduced(true);
    Ok(Reduction {
        ontology: draft.finish()?,
        removed,
    })
}

/// Longest child-to-parent path length (in edges) from each node to a
/// parentless node.
fn longest_depth(ont: &Ontology) -> Result<Vec<usize>, OntologyError> {
    let mut depth = vec![0usize; ont.len()];
    for v in ont.topological_order()? {
        for &c in ont.child_indices(v) {
            depth[c] = depth[c].max(depth[v] + 1);
        }
    }
    Ok(depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OntologyStats {
    /// |N|
    pub nodes: usize,
    /// |N_L|
    pub leaves: usize,
    /// |R|
    pub relations: usize,
    /// Events linked to any node.
    pub events: usize,
    /// Events linked to exactly one node, which is a leaf.
    pub unambiguous_events: usize,
}

pub fn stats(ont: &Ontology, links: &[EventLink]) -> OntologyStats {
    let mut s = OntologyStats {
        nodes: ont.len(),
        leaves: ont.leaf_count(),
        relations: ont.edge_count(),
        ..OntologyStats::default()
    };
    for link in links {
        let present: Vec<&String> = link.node_ids.iter().filter(|id| ont.contains(id)).collect();
        if present.is_empty() {
            continue;
        }
        s.events += 1;
        if present.len() == 1 && ont.node(present[0]).is_some_and(|n| n.is_leaf()) {
            s.unambiguous_events += 1;
        }
    }
    s
}
