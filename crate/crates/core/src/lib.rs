//! Event-type ontology toolkit: construction from knowledge-base triples,
//! hierarchical label encodings, node weighting, ontology-aware losses with
//! analytic gradients, ontology-driven inference and subgraph metrics.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! refinement HTTP service and the command line live in the `evontology`
//! companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod build;
pub mod encoding;
pub mod eval;
pub mod kb;
pub mod learn;
pub mod ontology;
pub mod refine;
pub mod synthetic;

pub use build::{BuildConfig, MergeList, OntologyStats};
pub use encoding::{LeafVector, SubgraphVector, WeightScheme, WeightVector};
pub use kb::{EventSeed, TripleIndex, TripleRecord};
pub use ontology::{Edge, EventLink, EventNode, NodeKind, NodeSpec, Ontology, Subgraph};
pub use refine::{Action, Decision, RefinementSession};
