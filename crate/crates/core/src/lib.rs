//! Taxonomy-aware evaluation of unconstrained text predictions.
//!
//! The pieces, bottom up:
//!
//! * [`taxonomy`] — rooted labeled trees, tree queries, and the taxonomy
//!   file formats.
//! * [`extract`] — turning a multi-parent subclass graph into a valid tree
//!   (longest root path per node, seeded uniform tie-breaks).
//! * [`hmetrics`] — hierarchical precision/recall/F over node pairs.
//! * [`textsim`] — normalization plus string and embedding similarity
//!   measures.
//! * [`mapper`] — the staged cascade that places a free-text prediction on
//!   a taxonomy node.
//! * [`synthbench`] — controlled pair sampling and Kendall tau-b
//!   correlation of measures against the hierarchical metrics.
//! * [`harness`] — prediction files, end-to-end evaluation, and report
//!   writers.

pub mod error;
pub mod extract;
pub mod harness;
pub mod hmetrics;
pub mod mapper;
pub mod synthbench;
pub mod taxonomy;
pub mod textsim;

pub use error::{Error, Result, Violation};
pub use taxonomy::{NodeRecord, NodeRef, TaxonomyTree};
