//! Rooted taxonomy trees and the pure queries every metric traverses.
//!
//! A [`TaxonomyTree`] is immutable after construction: build it once from
//! [`NodeRecord`]s (or load it from a file via [`io`]), then query ancestors,
//! depths, lowest common ancestors, and node distances from as many threads
//! as you like.

pub mod io;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result, Violation};

/// Global counter so that a [`NodeRef`] can be checked against the tree that
/// issued it.
static NEXT_TREE_ID: AtomicU64 = AtomicU64::new(1);

/// Opaque handle to a node of one specific [`TaxonomyTree`].
///
/// A `NodeRef` is only valid for the tree that issued it; passing it to a
/// different tree yields [`Error::ForeignNodeRef`]. The stable, externally
/// visible identifier of a node is its string id (see [`TaxonomyTree::id`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    tree: u64,
    index: u32,
}

/// One node as stored in taxonomy files: id, optional parent id, canonical
/// label, and alternate labels.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NodeRecord {
    pub id: String,
    #[serde(default, deserialize_with = "de_opt_string")]
    pub parent_id: Option<String>,
    pub label: String,
    #[serde(default)]
    pub alt_labels: Vec<String>,
}

// Accept both `null` and `""` as "no parent".
fn de_opt_string<'de, D>(de: D) -> std::result::Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw: Option<String> = serde::Deserialize::deserialize(de)?;
    Ok(raw.filter(|s| !s.is_empty()))
}

impl NodeRecord {
    pub fn new(
        id: impl Into<String>,
        parent_id: Option<&str>,
        label: impl Into<String>,
    ) -> Self {
        NodeRecord {
            id: id.into(),
            parent_id: parent_id.map(str::to_owned),
            label: label.into(),
            alt_labels: Vec::new(),
        }
    }

    pub fn with_alt_labels(mut self, alts: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.alt_labels = alts.into_iter().map(Into::into).collect();
        self
    }
}

/// A rooted directed tree with canonical and alternate labels per node.
#[derive(Debug, Clone)]
pub struct TaxonomyTree {
    tree_id: u64,
    ids: Vec<String>,
    id_lookup: HashMap<String, u32>,
    parents: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    depths: Vec<u32>,
    labels: Vec<String>,
    alt_labels: Vec<Vec<String>>,
    /// Lexicographic rank of each node's id, used for deterministic tie-breaks.
    id_ranks: Vec<u32>,
    root: u32,
}

impl TaxonomyTree {
    /// Builds a tree from records, rejecting structurally invalid inputs.
    ///
    /// All violations (duplicate ids, multiple or missing roots, unknown
    /// parents, parent cycles) are collected and reported together.
    pub fn from_records(records: &[NodeRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("taxonomy has no nodes".into()));
        }
        let violations = validate_records(records);
        if !violations.is_empty() {
            return Err(Error::InvalidTaxonomy(violations));
        }

        let n = records.len();
        let mut ids = Vec::with_capacity(n);
        let mut id_lookup = HashMap::with_capacity(n);
        for (i, rec) in records.iter().enumerate() {
            ids.push(rec.id.clone());
            id_lookup.insert(rec.id.clone(), i as u32);
        }

        let mut parents = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut root = None;
        for (i, rec) in records.iter().enumerate() {
            match &rec.parent_id {
                None => root = Some(i as u32),
                Some(p) => {
                    let pi = id_lookup[p];
                    parents[i] = Some(pi);
                    children[pi as usize].push(i as u32);
                }
            }
        }
        let root = root.expect("validated: exactly one root");

        // Depths via BFS from the root; validation guarantees full coverage.
        let mut depths = vec![0u32; n];
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &c in &children[v as usize] {
                depths[c as usize] = depths[v as usize] + 1;
                queue.push_back(c);
            }
        }

        let mut by_id: Vec<u32> = (0..n as u32).collect();
        by_id.sort_by(|&a, &b| ids[a as usize].cmp(&ids[b as usize]));
        let mut id_ranks = vec![0u32; n];
        for (rank, &i) in by_id.iter().enumerate() {
            id_ranks[i as usize] = rank as u32;
        }

        Ok(TaxonomyTree {
            tree_id: NEXT_TREE_ID.fetch_add(1, Ordering::Relaxed),
            ids,
            id_lookup,
            parents,
            children,
            depths,
            labels: records.iter().map(|r| r.label.clone()).collect(),
            alt_labels: records.iter().map(|r| r.alt_labels.clone()).collect(),
            id_ranks,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn root(&self) -> NodeRef {
        self.make_ref(self.root)
    }

    /// Resolves a string id to a node handle.
    pub fn node(&self, id: &str) -> Result<NodeRef> {
        self.get(id)
            .ok_or_else(|| Error::UnknownNodeId(id.to_owned()))
    }

    pub fn get(&self, id: &str) -> Option<NodeRef> {
        self.id_lookup.get(id).map(|&i| self.make_ref(i))
    }

    /// The stable string id this node was loaded with.
    pub fn id(&self, v: NodeRef) -> Result<&str> {
        Ok(&self.ids[self.check(v)?])
    }

    pub fn label(&self, v: NodeRef) -> Result<&str> {
        Ok(&self.labels[self.check(v)?])
    }

    pub fn alt_labels(&self, v: NodeRef) -> Result<&[String]> {
        Ok(&self.alt_labels[self.check(v)?])
    }

    /// Canonical label first, then alternates, deduplicated, order-stable.
    pub fn all_labels(&self, v: NodeRef) -> Result<Vec<&str>> {
        let i = self.check(v)?;
        let mut out: Vec<&str> = Vec::with_capacity(1 + self.alt_labels[i].len());
        out.push(&self.labels[i]);
        for alt in &self.alt_labels[i] {
            if !out.contains(&alt.as_str()) {
                out.push(alt);
            }
        }
        Ok(out)
    }

    /// The unique parent. Asking for the parent of the root is an error.
    pub fn parent(&self, v: NodeRef) -> Result<NodeRef> {
        let i = self.check(v)?;
        self.parents[i]
            .map(|p| self.make_ref(p))
            .ok_or(Error::RootHasNoParent)
    }

    pub fn children(&self, v: NodeRef) -> Result<Vec<NodeRef>> {
        let i = self.check(v)?;
        Ok(self.children[i].iter().map(|&c| self.make_ref(c)).collect())
    }

    pub fn is_leaf(&self, v: NodeRef) -> Result<bool> {
        let i = self.check(v)?;
        Ok(self.children[i].is_empty())
    }

    /// All leaves in dense storage order.
    pub fn leaves(&self) -> Vec<NodeRef> {
        (0..self.len() as u32)
            .filter(|&i| self.children[i as usize].is_empty())
            .map(|i| self.make_ref(i))
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeRef> + '_ {
        (0..self.len() as u32).map(|i| self.make_ref(i))
    }

    /// The path `[v, parent(v), ..., root]`, both endpoints included.
    pub fn ancestors(&self, v: NodeRef) -> Result<Vec<NodeRef>> {
        let mut i = self.check(v)?;
        let mut out = Vec::with_capacity(self.depths[i] as usize + 1);
        out.push(self.make_ref(i as u32));
        while let Some(p) = self.parents[i] {
            out.push(self.make_ref(p));
            i = p as usize;
        }
        Ok(out)
    }

    /// Edge count from the root; `depth(root) == 0`.
    pub fn depth(&self, v: NodeRef) -> Result<usize> {
        Ok(self.depths[self.check(v)?] as usize)
    }

    /// Deepest node shared by the ancestor paths of `u` and `v`.
    pub fn lca(&self, u: NodeRef, v: NodeRef) -> Result<NodeRef> {
        let a = self.check(u)?;
        let b = self.check(v)?;
        Ok(self.make_ref(self.lca_idx(a, b) as u32))
    }

    /// Length of the shortest undirected path between `u` and `v`.
    pub fn node_distance(&self, u: NodeRef, v: NodeRef) -> Result<usize> {
        let a = self.check(u)?;
        let b = self.check(v)?;
        let l = self.lca_idx(a, b);
        Ok((self.depths[a] + self.depths[b] - 2 * self.depths[l]) as usize)
    }

    fn lca_idx(&self, mut a: usize, mut b: usize) -> usize {
        while self.depths[a] > self.depths[b] {
            a = self.parents[a].expect("deeper node has a parent") as usize;
        }
        while self.depths[b] > self.depths[a] {
            b = self.parents[b].expect("deeper node has a parent") as usize;
        }
        while a != b {
            a = self.parents[a].expect("non-root while walking to lca") as usize;
            b = self.parents[b].expect("non-root while walking to lca") as usize;
        }
        a
    }

    fn make_ref(&self, index: u32) -> NodeRef {
        NodeRef {
            tree: self.tree_id,
            index,
        }
    }

    fn check(&self, v: NodeRef) -> Result<usize> {
        if v.tree != self.tree_id || v.index as usize >= self.ids.len() {
            return Err(Error::ForeignNodeRef);
        }
        Ok(v.index as usize)
    }

    // Dense-index accessors for hot paths inside the crate. Indices are an
    // implementation detail and never appear in the public API.

    pub(crate) fn index_of(&self, v: NodeRef) -> Result<usize> {
        self.check(v)
    }

    pub(crate) fn ref_at(&self, index: usize) -> NodeRef {
        debug_assert!(index < self.len());
        self.make_ref(index as u32)
    }

    pub(crate) fn depth_at(&self, index: usize) -> usize {
        self.depths[index] as usize
    }

    pub(crate) fn parent_at(&self, index: usize) -> Option<usize> {
        self.parents[index].map(|p| p as usize)
    }

    pub(crate) fn children_at(&self, index: usize) -> &[u32] {
        &self.children[index]
    }

    pub(crate) fn id_rank_at(&self, index: usize) -> u32 {
        self.id_ranks[index]
    }
}

/// Checks taxonomy records for structural defects without building a tree.
///
/// Returns every violation found, so callers can report them all at once.
pub fn validate_records(records: &[NodeRecord]) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (line, rec) in records.iter().enumerate() {
        if rec.id.is_empty() {
            violations.push(Violation::EmptyId {
                line: Some(line + 1),
            });
            continue;
        }
        if seen.insert(&rec.id, line).is_some() {
            violations.push(Violation::DuplicateId { id: rec.id.clone() });
        }
    }

    let roots: Vec<&NodeRecord> = records.iter().filter(|r| r.parent_id.is_none()).collect();
    match roots.len() {
        0 => violations.push(Violation::MissingRoot),
        1 => {}
        _ => violations.push(Violation::MultipleRoots {
            ids: roots.iter().map(|r| r.id.clone()).collect(),
        }),
    }

    for rec in records {
        if let Some(parent) = &rec.parent_id {
            if *parent == rec.id {
                violations.push(Violation::SelfParent { id: rec.id.clone() });
            } else if !seen.contains_key(parent.as_str()) {
                violations.push(Violation::UnknownParent {
                    id: rec.id.clone(),
                    parent: parent.clone(),
                });
            }
        }
    }

    // Any node that cannot reach a root by parent links sits on a cycle (or
    // hangs off one). Walk with a visit stamp and report each cycle once.
    let index_of: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    // 0 = unvisited, 1 = on current walk, 2 = resolved
    let mut state = vec![0u8; records.len()];
    for start in 0..records.len() {
        if state[start] != 0 {
            continue;
        }
        let mut walk: Vec<usize> = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            if state[i] == 1 {
                // Found a cycle: the suffix of `walk` from the first
                // occurrence of `i` onwards.
                let pos = walk.iter().position(|&w| w == i).unwrap();
                let mut cycle: Vec<String> =
                    walk[pos..].iter().map(|&w| records[w].id.clone()).collect();
                cycle.push(records[i].id.clone());
                violations.push(Violation::ParentCycle { cycle });
                break;
            }
            if state[i] == 2 {
                break;
            }
            state[i] = 1;
            walk.push(i);
            cur = records[i]
                .parent_id
                .as_ref()
                .filter(|p| p.as_str() != records[i].id)
                .and_then(|p| index_of.get(p.as_str()).copied());
        }
        for &w in &walk {
            state[w] = 2;
        }
    }

    violations
}
