//! The ontology data model: a rooted DAG of event-type nodes with
//! provenance-typed edges, plus subgraph extraction, validation and a
//! content hash.
//!
//! An [`Ontology`] is immutable. Pipeline stages derive new ontologies through
//! an [`OntologyDraft`]. Construction only enforces referential integrity;
//! structural properties (acyclicity, root connectivity) are reported by
//! [`Ontology::validate`] so that broken inputs can be diagnosed.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Root,
    Branch,
    Leaf,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Root => "root",
            NodeKind::Branch => "branch",
            NodeKind::Leaf => "leaf",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Node payload as supplied to construction; the kind is derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: String,
    pub label: String,
    pub merged_ids: BTreeSet<String>,
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            merged_ids: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventNode {
    pub id: String,
    pub label: String,
    pub kind: NodeKind,
    pub merged_ids: BTreeSet<String>,
}

impl EventNode {
    pub fn is_leaf(&self) -> bool {
        self.kind == NodeKind::Leaf
    }

    fn spec(&self) -> NodeSpec {
        NodeSpec {
            id: self.id.clone(),
            label: self.label.clone(),
            merged_ids: self.merged_ids.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub parent: String,
    pub child: String,
    pub provenance: String,
}

impl Edge {
    pub fn new(parent: impl Into<String>, child: impl Into<String>, provenance: impl Into<String>) -> Self {
        Self {
            parent: parent.into(),
            child: child.into(),
            provenance: provenance.into(),
        }
    }
}

/// All nodes met while walking from a leaf up to the root, both inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub leaf_id: String,
    pub node_ids: BTreeSet<String>,
}

/// The ontology nodes an event attaches to.
///
/// After refinement these are normally leaves; intermediate ontologies may
/// link events to branch nodes, which makes them ambiguous.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EventLink {
    pub event_id: String,
    pub node_ids: BTreeSet<String>,
}

impl EventLink {
    pub fn new(event_id: impl Into<String>, node_ids: impl IntoIterator<Item = String>) -> Self {
        Self {
            event_id: event_id.into(),
            node_ids: node_ids.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OntologyError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is not a leaf")]
    NotALeaf(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("edge `{parent}` -> `{child}` references unknown node `{missing}`")]
    DanglingEdge {
        parent: String,
        child: String,
        missing: String,
    },
    #[error("root `{0}` is not among the nodes")]
    MissingRoot(String),
    #[error("node order is not a permutation of the node ids: {0}")]
    BadNodeOrder(String),
    #[error("ontology is cyclic (cycle through `{0}`)")]
    Cyclic(String),
}

/// One structural defect found by [`Ontology::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A strongly connected set of nodes (or a self loop).
    Cycle { nodes: Vec<String> },
    /// The node has no child-to-parent path to the root.
    Disconnected { node: String },
    RootHasParents { parents: Vec<String> },
    KindMismatch {
        node: String,
        stored: NodeKind,
        expected: NodeKind,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { nodes } => write!(f, "cycle: {}", nodes.join(" -> ")),
            Violation::Disconnected { node } => write!(f, "node `{node}` does not reach the root"),
            Violation::RootHasParents { parents } => {
                write!(f, "root has parents: {}", parents.join(", "))
            }
            Violation::KindMismatch {
                node,
                stored,
                expected,
            } => write!(f, "node `{node}` has kind {stored}, structure implies {expected}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn cycles(&self) -> impl Iterator<Item = &[String]> {
        self.violations.iter().filter_map(|v| match v {
            Violation::Cycle { nodes } => Some(nodes.as_slice()),
            _ => None,
        })
    }

    pub fn disconnected(&self) -> impl Iterator<Item = &str> {
        self.violations.iter().filter_map(|v| match v {
            Violation::Disconnected { node } => Some(node.as_str()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ontology {
    root: usize,
    nodes: Vec<EventNode>,
    index: BTreeMap<String, usize>,
    edges: Vec<Edge>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    reduced: bool,
}

impl Ontology {
    /// Assembles an ontology. Node kinds are computed from the edges.
    ///
    /// `node_order` defaults to ascending entity id. Duplicate
    /// `(parent, child)` pairs keep the first provenance.
    pub fn from_parts(
        root_id: &str,
        nodes: Vec<NodeSpec>,
        edges: impl IntoIterator<Item = Edge>,
        node_order: Option<&[String]>,
        reduced: bool,
    ) -> Result<Self, OntologyError> {
        let mut by_id: BTreeMap<String, NodeSpec> = BTreeMap::new();
        for spec in nodes {
            if by_id.contains_key(&spec.id) {
                return Err(OntologyError::DuplicateNode(spec.id));
            }
            by_id.insert(spec.id.clone(), spec);
        }
        if !by_id.contains_key(root_id) {
            return Err(OntologyError::MissingRoot(root_id.into()));
        }

        let order: Vec<String> = match node_order {
            None => by_id.keys().cloned().collect(),
            Some(order) => {
                if order.len() != by_id.len() {
                    return Err(OntologyError::BadNodeOrder(alloc::format!(
                        "{} entries for {} nodes",
                        order.len(),
                        by_id.len()
                    )));
                }
                let mut seen = BTreeSet::new();
                for id in order {
                    if !by_id.contains_key(id) {
                        return Err(OntologyError::BadNodeOrder(alloc::format!("unknown id `{id}`")));
                    }
                    if !seen.insert(id.as_str()) {
                        return Err(OntologyError::BadNodeOrder(alloc::format!("repeated id `{id}`")));
                    }
                }
                order.to_vec()
            }
        };

        let index: BTreeMap<String, usize> =
            order.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();

        let mut edge_map: BTreeMap<(String, String), String> = BTreeMap::new();
        for e in edges {
            for end in [&e.parent, &e.child] {
                if !index.contains_key(end) {
                    return Err(OntologyError::DanglingEdge {
                        parent: e.parent.clone(),
                        child: e.child.clone(),
                        missing: end.clone(),
                    });
                }
            }
            edge_map.entry((e.parent, e.child)).or_insert(e.provenance);
        }

        let n = order.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut edge_list = Vec::with_capacity(edge_map.len());
        for ((p, c), prov) in edge_map {
            let (pi, ci) = (index[&p], index[&c]);
            parents[ci].push(pi);
            children[pi].push(ci);
            edge_list.push(Edge::new(p, c, prov));
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        let root = index[root_id];
        let nodes: Vec<EventNode> = order
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let spec = by_id.remove(id).expect("order validated");
                EventNode {
                    kind: structural_kind(i, root, &children),
                    id: spec.id,
                    label: spec.label,
                    merged_ids: spec.merged_ids,
                }
            })
            .collect();

        Ok(Self {
            root,
            nodes,
            index,
            edges: edge_list,
            parents,
            children,
            reduced,
        })
    }

    pub fn root_id(&self) -> &str {
        &self.nodes[self.root].id
    }

    pub fn root_index(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false: an ontology contains at least its root.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in `node_order`.
    pub fn nodes(&self) -> &[EventNode] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&EventNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    fn require(&self, id: &str) -> Result<usize, OntologyError> {
        self.index_of(id)
            .ok_or_else(|| OntologyError::UnknownNode(id.into()))
    }

    pub fn node_order(&self) -> impl Iterator<Item = &str> + '_ {
        self.nodes.iter().map(|n| n.id.as_str())
    }

    /// Leaf node indices in `node_order`.
    pub fn leaf_indices(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].is_leaf())
            .collect()
    }

    /// Leaf ids in `node_order` (the leaf sub-order used by leaf vectors).
    pub fn leaf_ids(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.id.as_str())
            .collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Edges sorted by `(parent, child)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn parent_indices(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn child_indices(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn parents_of(&self, id: &str) -> Result<Vec<&str>, OntologyError> {
        let i = self.require(id)?;
        Ok(self.parents[i].iter().map(|&p| self.nodes[p].id.as_str()).collect())
    }

    pub fn children_of(&self, id: &str) -> Result<Vec<&str>, OntologyError> {
        let i = self.require(id)?;
        Ok(self.children[i].iter().map(|&c| self.nodes[c].id.as_str()).collect())
    }

    /// Indices reachable from `start` following `step` (exclusive of start
    /// unless it lies on a cycle), sorted.
    fn closure(&self, start: usize, up: bool) -> Vec<usize> {
        let adj = if up { &self.parents } else { &self.children };
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = adj[start].clone();
        let mut out = Vec::new();
        while let Some(v) = stack.pop() {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            out.push(v);
            stack.extend(adj[v].iter().copied().filter(|&w| !seen[w]));
        }
        out.sort_unstable();
        out
    }

    pub fn ancestor_indices(&self, i: usize) -> Vec<usize> {
        self.closure(i, true)
    }

    pub fn descendant_indices(&self, i: usize) -> Vec<usize> {
        self.closure(i, false)
    }

    pub fn ancestors(&self, id: &str) -> Result<BTreeSet<String>, OntologyError> {
        let i = self.require(id)?;
        Ok(self.ids(self.ancestor_indices(i)))
    }

    pub fn descendants(&self, id: &str) -> Result<BTreeSet<String>, OntologyError> {
        let i = self.require(id)?;
        Ok(self.ids(self.descendant_indices(i)))
    }

    fn ids(&self, idx: impl IntoIterator<Item = usize>) -> BTreeSet<String> {
        idx.into_iter().map(|i| self.nodes[i].id.clone()).collect()
    }

    /// Leaf indices reachable downward from `i` (`{i}` for a leaf), sorted.
    pub fn leaf_indices_under(&self, i: usize) -> Vec<usize> {
        if self.nodes[i].is_leaf() {
            return vec![i];
        }
        self.descendant_indices(i)
            .into_iter()
            .filter(|&d| self.nodes[d].is_leaf())
            .collect()
    }

    pub fn leaves_under(&self, id: &str) -> Result<BTreeSet<String>, OntologyError> {
        let i = self.require(id)?;
        Ok(self.ids(self.leaf_indices_under(i)))
    }

    /// Leaf sets for every node at once, computed bottom-up. Requires an
    /// acyclic ontology.
    pub fn all_leaf_sets(&self) -> Result<Vec<BTreeSet<usize>>, OntologyError> {
        let topo = self.topological_order()?;
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.nodes.len()];
        for &v in topo.iter().rev() {
            if self.nodes[v].is_leaf() {
                sets[v].insert(v);
            } else {
                let mut acc = BTreeSet::new();
                for &c in &self.children[v] {
                    acc.extend(sets[c].iter().copied());
                }
                sets[v] = acc;
            }
        }
        Ok(sets)
    }

    /// Parent-before-child order, ties by node order.
    pub fn topological_order(&self) -> Result<Vec<usize>, OntologyError> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: alloc::collections::BinaryHeap<core::cmp::Reverse<usize>> =
            (0..n).filter(|&i| indeg[i] == 0).map(core::cmp::Reverse).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(core::cmp::Reverse(v)) = ready.pop() {
            out.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(core::cmp::Reverse(c));
                }
            }
        }
        if out.len() != n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).expect("some node left");
            return Err(OntologyError::Cyclic(self.nodes[stuck].id.clone()));
        }
        Ok(out)
    }

    /// Ancestor indices of a leaf plus the leaf itself, sorted.
    pub fn subgraph_indices(&self, leaf: usize) -> Vec<usize> {
        let mut s = self.ancestor_indices(leaf);
        if let Err(pos) = s.binary_search(&leaf) {
            s.insert(pos, leaf);
        }
        s
    }

    pub fn subgraph_of(&self, leaf_id: &str) -> Result<Subgraph, OntologyError> {
        let i = self.require(leaf_id)?;
        if !self.nodes[i].is_leaf() {
            return Err(OntologyError::NotALeaf(leaf_id.into()));
        }
        Ok(Subgraph {
            leaf_id: leaf_id.into(),
            node_ids: self.ids(self.subgraph_indices(i)),
        })
    }

    /// Nodes with a child-to-parent path to the root (root included).
    fn root_reachers(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([self.root]);
        seen[self.root] = true;
        while let Some(v) = queue.pop_front() {
            for &c in &self.children[v] {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        seen
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        for scc in strongly_connected(&self.children) {
            let cyclic = scc.len() > 1 || self.children[scc[0]].contains(&scc[0]);
            if cyclic {
                let mut nodes: Vec<String> = scc.iter().map(|&i| self.nodes[i].id.clone()).collect();
                nodes.sort();
                violations.push(Violation::Cycle { nodes });
            }
        }

        let reach = self.root_reachers();
        for (i, node) in self.nodes.iter().enumerate() {
            if !reach[i] {
                violations.push(Violation::Disconnected {
                    node: node.id.clone(),
                });
            }
        }

        if !self.parents[self.root].is_empty() {
            violations.push(Violation::RootHasParents {
                parents: self.parents[self.root]
                    .iter()
                    .map(|&p| self.nodes[p].id.clone())
                    .collect(),
            });
        }

        for (i, node) in self.nodes.iter().enumerate() {
            let expected = structural_kind(i, self.root, &self.children);
            if node.kind != expected {
                violations.push(Violation::KindMismatch {
                    node: node.id.clone(),
                    stored: node.kind,
                    expected,
                });
            }
        }

        ValidationReport { violations }
    }

    /// SHA-256 over a canonical encoding of root, nodes (in order), edges and
    /// the reduced flag; first 16 bytes as lowercase hex.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |s: &str| {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        };
        put("evontology/1");
        put(self.root_id());
        for n in &self.nodes {
            put(&n.id);
            put(&n.label);
            put(n.kind.as_str());
            put(&n.merged_ids.len().to_string());
            for m in &n.merged_ids {
                put(m);
            }
        }
        for e in &self.edges {
            put(&e.parent);
            put(&e.child);
            put(&e.provenance);
        }
        put(if self.reduced { "reduced" } else { "full" });
        let digest = h.finalize();
        let mut out = String::with_capacity(32);
        for b in digest.iter().take(16) {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    pub fn to_draft(&self) -> OntologyDraft {
        let mut draft = OntologyDraft::empty(self.nodes[self.root].spec());
        for n in &self.nodes {
            draft.add_node(n.spec());
        }
        for e in &self.edges {
            draft.add_edge(&e.parent, &e.child, &e.provenance);
        }
        draft.reduced = self.reduced;
        draft.order_hint = self.nodes.iter().map(|n| n.id.clone()).collect();
        draft
    }
}

fn structural_kind(i: usize, root: usize, children: &[Vec<usize>]) -> NodeKind {
    if i == root {
        NodeKind::Root
    } else if children[i].is_empty() {
        NodeKind::Leaf
    } else {
        NodeKind::Branch
    }
}

/// Tarjan's algorithm, iterative. Components come out in reverse
/// topological order; members are unsorted.
fn strongly_connected(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSET: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0usize;

    for start in 0..n {
        if index[start] != UNSET {
            continue;
        }
        // (node, next neighbour position)
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = counter;
        low[start] = counter;
        counter += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(&(v, pos)) = call.last() {
            if pos < adj[v].len() {
                let w = adj[v][pos];
                call.last_mut().expect("non-empty").1 += 1;
                if index[w] == UNSET {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Mutable, id-keyed working copy used by pipeline stages.
#[derive(Debug, Clone)]
pub struct OntologyDraft {
    root: String,
    nodes: BTreeMap<String, NodeSpec>,
    /// child -> parent -> provenance
    up: BTreeMap<String, BTreeMap<String, String>>,
    /// parent -> children
    down: BTreeMap<String, BTreeSet<String>>,
    reduced: bool,
    order_hint: Vec<String>,
}

impl OntologyDraft {
    pub fn new(root: NodeSpec) -> Self {
        let mut d = Self::empty(root.clone());
        d.add_node(root);
        d
    }

    fn empty(root: NodeSpec) -> Self {
        Self {
            root: root.id,
            nodes: BTreeMap::new(),
            up: BTreeMap::new(),
            down: BTreeMap::new(),
            reduced: false,
            order_hint: Vec::new(),
        }
    }

    pub fn root_id(&self) -> &str {
        &self.root
    }

    pub fn set_reduced(&mut self, reduced: bool) {
        self.reduced = reduced;
    }

    /// Returns `false` if the id already exists.
    pub fn add_node(&mut self, spec: NodeSpec) -> bool {
        if self.nodes.contains_key(&spec.id) {
            return false;
        }
        self.up.entry(spec.id.clone()).or_default();
        self.down.entry(spec.id.clone()).or_default();
        self.nodes.insert(spec.id.clone(), spec);
        true
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut NodeSpec> {
        self.nodes.get_mut(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &String> {
        self.nodes.keys()
    }

    /// Removes a node and its incident edges. The root cannot be removed.
    pub fn remove_node(&mut self, id: &str) -> Option<NodeSpec> {
        if id == self.root {
            return None;
        }
        let spec = self.nodes.remove(id)?;
        if let Some(parents) = self.up.remove(id) {
            for p in parents.keys() {
                if let Some(ch) = self.down.get_mut(p) {
                    ch.remove(id);
                }
            }
        }
        if let Some(children) = self.down.remove(id) {
            for c in &children {
                if let Some(ps) = self.up.get_mut(c) {
                    ps.remove(id);
                }
            }
        }
        Some(spec)
    }

    /// Adds `parent -> child`; returns `false` if either end is unknown or the
    /// pair already exists.
    pub fn add_edge(&mut self, parent: &str, child: &str, provenance: &str) -> bool {
        if !self.contains(parent) || !self.contains(child) {
            return false;
        }
        let ps = self.up.get_mut(child).expect("node present");
        if ps.contains_key(parent) {
            return false;
        }
        ps.insert(parent.into(), provenance.into());
        self.down.get_mut(parent).expect("node present").insert(child.into());
        true
    }

    pub fn remove_edge(&mut self, parent: &str, child: &str) -> Option<String> {
        let prov = self.up.get_mut(child)?.remove(parent)?;
        if let Some(ch) = self.down.get_mut(parent) {
            ch.remove(child);
        }
        Some(prov)
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        self.up.get(child).is_some_and(|ps| ps.contains_key(parent))
    }

    pub fn edge_provenance(&self, parent: &str, child: &str) -> Option<&str> {
        self.up.get(child)?.get(parent).map(String::as_str)
    }

    /// Parents with edge provenance.
    pub fn parents(&self, id: &str) -> impl Iterator<Item = (&String, &String)> {
        self.up.get(id).into_iter().flatten()
    }

    pub fn children(&self, id: &str) -> impl Iterator<Item = &String> {
        self.down.get(id).into_iter().flatten()
    }

    pub fn parent_count(&self, id: &str) -> usize {
        self.up.get(id).map_or(0, BTreeMap::len)
    }

    pub fn child_count(&self, id: &str) -> usize {
        self.down.get(id).map_or(0, BTreeSet::len)
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        id != self.root && self.contains(id) && self.child_count(id) == 0
    }

    /// Strict ancestors of `id`.
    pub fn ancestors(&self, id: &str) -> BTreeSet<String> {
        self.walk(id, true)
    }

    /// Strict descendants of `id`.
    pub fn descendants(&self, id: &str) -> BTreeSet<String> {
        self.walk(id, false)
    }

    fn walk(&self, id: &str, up: bool) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&String> = if up {
            self.parents(id).map(|(p, _)| p).collect()
        } else {
            self.children(id).collect()
        };
        while let Some(v) = stack.pop() {
            if !seen.insert(v.clone()) {
                continue;
            }
            if up {
                stack.extend(self.parents(v).map(|(p, _)| p));
            } else {
                stack.extend(self.children(v));
            }
        }
        seen
    }

    /// Nodes with an upward path to the root, root included.
    pub fn connected_to_root(&self) -> BTreeSet<String> {
        let mut seen = self.descendants(&self.root.clone());
        seen.insert(self.root.clone());
        seen
    }

    /// Removes every node without a path to the root; returns removed ids.
    pub fn prune_disconnected(&mut self) -> Vec<String> {
        let keep = self.connected_to_root();
        let gone: Vec<String> = self
            .nodes
            .keys()
            .filter(|id| !keep.contains(*id))
            .cloned()
            .collect();
        for id in &gone {
            self.remove_node(id);
        }
        gone
    }

    /// Builds the immutable ontology. When the order hint inherited from a
    /// source ontology is sorted (the pipeline default) the result is sorted
    /// by id; otherwise surviving nodes keep the hint order and new nodes
    /// follow in id order.
    pub fn finish(self) -> Result<Ontology, OntologyError> {
        let hint_sorted = self.order_hint.windows(2).all(|w| w[0] < w[1]);
        let order: Option<Vec<String>> = if hint_sorted {
            None
        } else {
            let mut order: Vec<String> = self
                .order_hint
                .iter()
                .filter(|id| self.nodes.contains_key(*id))
                .cloned()
                .collect();
            let known: BTreeSet<&String> = self.order_hint.iter().collect();
            order.extend(self.nodes.keys().filter(|id| !known.contains(id)).cloned());
            Some(order)
        };
        let edges: Vec<Edge> = self
            .up
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |(p, prov)| Edge::new(p.clone(), c.clone(), prov.clone())))
            .collect();
        let root = self.root.clone();
        let reduced = self.reduced;
        Ontology::from_parts(
            &root,
            self.nodes.into_values().collect(),
            edges,
            order.as_deref(),
            reduced,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{random_dag, toy5};
    use alloc::string::ToString;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn toy5_with(extra: &[(&str, &str)], extra_nodes: &[&str]) -> Ontology {
        let base = toy5();
        let mut nodes: Vec<NodeSpec> = base.nodes().iter().map(|n| n.spec()).collect();
        nodes.extend(extra_nodes.iter().map(|id| NodeSpec::new(*id, *id)));
        let mut edges = base.edges().to_vec();
        edges.extend(extra.iter().map(|(p, c)| Edge::new(*p, *c, "P279")));
        Ontology::from_parts("R", nodes, edges, None, false).unwrap()
    }

    /// Every node on some path from `leaf` up to `root`, by explicit path
    /// enumeration.
    fn paths_oracle(ont: &Ontology, leaf: &str) -> BTreeSet<String> {
        fn go(ont: &Ontology, v: &str, path: &mut Vec<String>, acc: &mut BTreeSet<String>) {
            path.push(v.to_string());
            if v == ont.root_id() {
                acc.extend(path.iter().cloned());
            }
            for p in ont.parents_of(v).unwrap() {
                go(ont, p, path, acc);
            }
            path.pop();
        }
        let mut acc = BTreeSet::new();
        go(ont, leaf, &mut Vec::new(), &mut acc);
        acc
    }

    #[test]
    fn toy5_shape() {
        let ont = toy5();
        assert_eq!(ont.len(), 6);
        assert_eq!(ont.leaf_count(), 3);
        assert_eq!(ont.edge_count(), 5);
        assert_eq!(ont.node("R").unwrap().kind, NodeKind::Root);
        assert_eq!(ont.node("B1").unwrap().kind, NodeKind::Branch);
        assert_eq!(ont.node("L3").unwrap().kind, NodeKind::Leaf);
        assert!(ont.validate().is_valid());
    }

    #[test]
    fn subgraphs_of_toy5() {
        let ont = toy5();
        assert_eq!(ont.subgraph_of("L1").unwrap().node_ids, set(&["L1", "B1", "R"]));
        assert_eq!(ont.subgraph_of("L3").unwrap().node_ids, set(&["L3", "B2", "R"]));
    }

    #[test]
    fn subgraph_in_diamond_matches_path_enumeration() {
        let ont = toy5_with(&[("B2", "L1")], &[]);
        let got = ont.subgraph_of("L1").unwrap().node_ids;
        assert_eq!(got, paths_oracle(&ont, "L1"));
        assert_eq!(got, set(&["L1", "B1", "B2", "R"]));
    }

    #[test]
    fn subgraph_errors_distinguish_unknown_and_branch() {
        let ont = toy5();
        assert_eq!(ont.subgraph_of("X"), Err(OntologyError::UnknownNode("X".into())));
        assert_eq!(ont.subgraph_of("B1"), Err(OntologyError::NotALeaf("B1".into())));
    }

    #[test]
    fn leaves_under_toy5() {
        let ont = toy5();
        assert_eq!(ont.leaves_under("B1").unwrap(), set(&["L1", "L2"]));
        assert_eq!(ont.leaves_under("L3").unwrap(), set(&["L3"]));
        assert_eq!(ont.leaves_under("R").unwrap(), set(&["L1", "L2", "L3"]));
        assert!(ont.leaves_under("nope").is_err());
    }

    #[test]
    fn cycle_is_reported() {
        let ont = toy5_with(&[("L1", "R")], &[]);
        let report = ont.validate();
        let cycles: Vec<&[String]> = report.cycles().collect();
        assert_eq!(cycles.len(), 1);
        // brute force: a node is on a cycle iff it reaches itself
        let on_cycle: Vec<String> = ont
            .node_order()
            .filter(|id| ont.descendants(id).unwrap().contains(*id))
            .map(|s| s.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        assert_eq!(cycles[0], on_cycle.as_slice());
        assert_eq!(on_cycle, ["B1", "L1", "R"]);
    }

    #[test]
    fn orphan_is_reported() {
        let ont = toy5_with(&[], &["X"]);
        let report = ont.validate();
        assert_eq!(report.disconnected().collect::<Vec<_>>(), ["X"]);
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let ont = toy5_with(&[("B1", "B1")], &[]);
        assert_eq!(ont.validate().cycles().count(), 1);
    }

    #[test]
    fn construction_errors() {
        let nodes = || vec![NodeSpec::new("R", "r"), NodeSpec::new("A", "a")];
        assert!(matches!(
            Ontology::from_parts("Z", nodes(), [], None, false),
            Err(OntologyError::MissingRoot(_))
        ));
        assert!(matches!(
            Ontology::from_parts("R", nodes(), [Edge::new("R", "Q", "P279")], None, false),
            Err(OntologyError::DanglingEdge { .. })
        ));
        let mut dup = nodes();
        dup.push(NodeSpec::new("A", "again"));
        assert!(matches!(
            Ontology::from_parts("R", dup, [], None, false),
            Err(OntologyError::DuplicateNode(_))
        ));
        let order = vec!["A".to_string()];
        assert!(matches!(
            Ontology::from_parts("R", nodes(), [], Some(&order), false),
            Err(OntologyError::BadNodeOrder(_))
        ));
    }

    #[test]
    fn custom_order_is_kept_through_draft() {
        let base = toy5();
        let order: Vec<String> = ["L3", "R", "B2", "L1", "B1", "L2"].iter().map(|s| s.to_string()).collect();
        let nodes = base.nodes().iter().map(|n| n.spec()).collect();
        let ont = Ontology::from_parts("R", nodes, base.edges().to_vec(), Some(&order), false).unwrap();
        assert_eq!(ont.leaf_ids(), ["L3", "L1", "L2"]);
        let again = ont.to_draft().finish().unwrap();
        assert_eq!(again, ont);
        assert_eq!(again.content_hash(), ont.content_hash());
        assert_ne!(again.content_hash(), base.content_hash());
    }

    #[test]
    fn hash_is_sensitive_to_labels_and_flag() {
        let a = toy5();
        let mut d = a.to_draft();
        d.node_mut("L1").unwrap().label = "changed".into();
        let b = d.finish().unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        let mut d = a.to_draft();
        d.set_reduced(true);
        assert_ne!(a.content_hash(), d.finish().unwrap().content_hash());
    }

    #[test]
    fn random_dags_satisfy_structural_invariants() {
        for seed in 0..30 {
            let ont = random_dag(40, seed);
            assert!(ont.validate().is_valid());
            let sets = ont.all_leaf_sets().unwrap();
            for (i, node) in ont.nodes().iter().enumerate() {
                let direct: BTreeSet<usize> = ont.leaf_indices_under(i).into_iter().collect();
                assert_eq!(direct, sets[i]);
                if node.kind == NodeKind::Branch || node.kind == NodeKind::Root {
                    let mut union = BTreeSet::new();
                    for &c in ont.child_indices(i) {
                        union.extend(ont.leaf_indices_under(c));
                    }
                    assert_eq!(union, direct);
                }
                if node.is_leaf() {
                    let sg = ont.subgraph_of(&node.id).unwrap().node_ids;
                    assert_eq!(sg, paths_oracle(&ont, &node.id));
                    for id in &sg {
                        for p in ont.parents_of(id).unwrap() {
                            assert!(sg.contains(p));
                        }
                    }
                }
            }
        }
    }
}
