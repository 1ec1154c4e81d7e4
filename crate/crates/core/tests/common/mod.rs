//! Shared generators for the oracle suites.

use rand::RngExt;
use taxeval::taxonomy::{NodeRecord, TaxonomyTree};

pub const VOCAB: &[&str] = &[
    "gray", "seal", "pine", "tree", "swift", "collared", "chestnut", "maple", "oak", "sparrow",
    "field", "bird", "moth", "tussock", "iris", "fern", "beech", "crane", "blue", "stink",
];

pub fn random_label(rng: &mut impl RngExt) -> String {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random rooted tree with `n` nodes: node i hangs off a uniformly chosen
/// earlier node.
pub fn random_tree(rng: &mut impl RngExt, n: usize) -> TaxonomyTree {
    assert!(n >= 1);
    let mut records = vec![NodeRecord::new("n000", None, random_label(rng))];
    for i in 1..n {
        let parent = rng.random_range(0..i);
        records.push(NodeRecord::new(
            format!("n{i:03}"),
            Some(&format!("n{parent:03}")),
            random_label(rng),
        ));
    }
    TaxonomyTree::from_records(&records).unwrap()
}

/// Random tree in which every leaf sits at exactly `depth`; total node
/// count stays within `max_nodes`.
///
/// Built level by level: each level is at least as large as the previous
/// one (so every internal node can get a child) and budgeted so the
/// remaining levels still fit.
pub fn random_uniform_leaf_depth_tree(
    rng: &mut impl RngExt,
    depth: usize,
    max_nodes: usize,
) -> TaxonomyTree {
    assert!(depth >= 1 && max_nodes >= depth + 1);
    let mut records = vec![NodeRecord::new("n0000", None, random_label(rng))];
    let mut level: Vec<usize> = vec![0]; // indices into records
    let mut total = 1usize;
    for d in 0..depth {
        let levels_left = depth - d;
        let cap = (max_nodes - total) / levels_left;
        let desired = level.len() + rng.random_range(0..=level.len() * 2);
        let size = desired.clamp(level.len(), cap.max(level.len()));
        let mut next = Vec::with_capacity(size);
        for slot in 0..size {
            // first pass: one child per parent so no leaf ends early
            let parent = if slot < level.len() {
                level[slot]
            } else {
                level[rng.random_range(0..level.len())]
            };
            let idx = records.len();
            records.push(NodeRecord::new(
                format!("n{idx:04}"),
                Some(&format!("n{parent:04}")),
                random_label(rng),
            ));
            next.push(idx);
            total += 1;
        }
        level = next;
    }
    assert!(total <= max_nodes);
    TaxonomyTree::from_records(&records).unwrap()
}

/// Full binary tree with leaves at exactly `depth`.
pub fn balanced_binary_tree(depth: usize) -> TaxonomyTree {
    let mut records = vec![NodeRecord::new("b1", None, "node 1")];
    let count = (1usize << (depth + 1)) - 1;
    for i in 2..=count {
        records.push(NodeRecord::new(
            format!("b{i}"),
            Some(&format!("b{}", i / 2)),
            format!("node {i}"),
        ));
    }
    TaxonomyTree::from_records(&records).unwrap()
}
