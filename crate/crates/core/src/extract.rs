//! Turns a multi-parent subclass graph (e.g. a Wikidata `subclass of`
//! subgraph) into a rooted tree.
//!
//! Each retained node keeps exactly one parent: a predecessor on a
//! maximum-length root-to-node path, computed by dynamic programming over a
//! topological order. Ties are broken uniformly at random with a seeded RNG,
//! so extraction is deterministic per seed. Cycles must be broken up front
//! via the exclusion list; any residual cycle is a hard error naming one
//! offending cycle.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::taxonomy::{NodeRecord, TaxonomyTree};

/// A subclass edge list: `(child_id, parent_id)` pairs plus the designated
/// root. Duplicate edges are collapsed on construction.
#[derive(Debug, Clone)]
pub struct EdgeList {
    edges: Vec<(String, String)>,
    root_id: String,
    exclude: HashSet<String>,
    duplicates_dropped: usize,
}

impl EdgeList {
    pub fn new(edges: Vec<(String, String)>, root_id: impl Into<String>) -> Self {
        let mut seen = HashSet::new();
        let before = edges.len();
        let edges: Vec<(String, String)> = edges
            .into_iter()
            .filter(|e| seen.insert(e.clone()))
            .collect();
        EdgeList {
            duplicates_dropped: before - edges.len(),
            edges,
            root_id: root_id.into(),
            exclude: HashSet::new(),
        }
    }

    /// Node ids to drop before extraction (abstract classes that introduce
    /// cycles).
    pub fn with_exclusions(mut self, exclude: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.exclude.extend(exclude.into_iter().map(Into::into));
        self
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn root_id(&self) -> &str {
        &self.root_id
    }
}

/// Extraction knobs: RNG seed for tie-breaks plus extra exclusions.
#[derive(Debug, Clone, Default)]
pub struct ExtractionConfig {
    pub rng_seed: u64,
    pub exclude: Vec<String>,
}

impl ExtractionConfig {
    pub fn seeded(rng_seed: u64) -> Self {
        ExtractionConfig {
            rng_seed,
            ..Default::default()
        }
    }
}

/// Counters describing what extraction kept and dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ExtractionStats {
    pub nodes_kept: usize,
    pub unreachable_dropped: usize,
    pub excluded_present: usize,
    pub duplicate_edges_dropped: usize,
    pub missing_labels: usize,
}

/// `id -> (canonical label, alternate labels)` supplied by a node-metadata
/// file; nodes without an entry fall back to their id as the label.
pub type LabelMap = HashMap<String, (String, Vec<String>)>;

pub fn label_map_from_records(records: &[NodeRecord]) -> LabelMap {
    records
        .iter()
        .map(|r| (r.id.clone(), (r.label.clone(), r.alt_labels.clone())))
        .collect()
}

// Internal working graph: dense indices over the ids that survive exclusion,
// sorted lexicographically so every downstream choice is deterministic.
struct DenseGraph {
    ids: Vec<String>,
    /// predecessors on root paths, i.e. the parents of each node
    preds: Vec<Vec<usize>>,
    /// successors, i.e. the children of each node
    succs: Vec<Vec<usize>>,
    root: usize,
    excluded_present: usize,
}

fn build_dense(graph: &EdgeList, extra_exclude: &[String]) -> Result<DenseGraph> {
    let mut exclude: HashSet<&str> = graph.exclude.iter().map(String::as_str).collect();
    exclude.extend(extra_exclude.iter().map(String::as_str));
    if exclude.contains(graph.root_id.as_str()) {
        return Err(Error::Config(format!(
            "root `{}` is in the exclusion list",
            graph.root_id
        )));
    }

    let mut id_set: HashSet<&str> = HashSet::new();
    id_set.insert(graph.root_id.as_str());
    let mut excluded_present = 0usize;
    for (child, parent) in &graph.edges {
        for id in [child.as_str(), parent.as_str()] {
            if id.is_empty() {
                return Err(Error::InvalidInput("empty node id in edge list".into()));
            }
            if exclude.contains(id) {
                excluded_present += 1;
            } else {
                id_set.insert(id);
            }
        }
    }

    let mut ids: Vec<String> = id_set.into_iter().map(str::to_owned).collect();
    ids.sort();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let root = index[graph.root_id.as_str()];

    let n = ids.len();
    let mut preds = vec![Vec::new(); n];
    let mut succs = vec![Vec::new(); n];
    for (child, parent) in &graph.edges {
        let (Some(&c), Some(&p)) = (index.get(child.as_str()), index.get(parent.as_str())) else {
            continue; // an endpoint was excluded
        };
        preds[c].push(p);
        succs[p].push(c);
    }
    for list in preds.iter_mut().chain(succs.iter_mut()) {
        list.sort_unstable();
        list.dedup();
    }

    Ok(DenseGraph {
        ids,
        preds,
        succs,
        root,
        excluded_present,
    })
}

impl DenseGraph {
    /// Nodes reachable from the root along parent-to-child edges.
    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.ids.len()];
        seen[self.root] = true;
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            for &c in &self.succs[v] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Topological order of the reachable subgraph (Kahn, smallest id
    /// first). Fails with a concrete cycle if one remains.
    fn topo_order(&self, reachable: &[bool]) -> Result<Vec<usize>> {
        let n = self.ids.len();
        let mut indeg = vec![0usize; n];
        for v in 0..n {
            if !reachable[v] {
                continue;
            }
            indeg[v] = self.preds[v].iter().filter(|&&p| reachable[p]).count();
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n)
            .filter(|&v| reachable[v] && indeg[v] == 0)
            .collect();
        let mut order = Vec::new();
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &c in &self.succs[v] {
                if reachable[c] {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        ready.insert(c);
                    }
                }
            }
        }
        let total = reachable.iter().filter(|&&r| r).count();
        if order.len() != total {
            return Err(Error::GraphCycle {
                cycle: self.find_cycle(reachable),
            });
        }
        Ok(order)
    }

    // DFS for one back edge among the reachable nodes; only called when a
    // cycle is known to exist.
    fn find_cycle(&self, reachable: &[bool]) -> Vec<String> {
        let n = self.ids.len();
        let mut state = vec![0u8; n]; // 0 new, 1 on stack, 2 done
        let mut path: Vec<usize> = Vec::new();

        fn dfs(
            g: &DenseGraph,
            v: usize,
            reachable: &[bool],
            state: &mut [u8],
            path: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            state[v] = 1;
            path.push(v);
            for &c in &g.succs[v] {
                if !reachable[c] {
                    continue;
                }
                if state[c] == 1 {
                    let pos = path.iter().position(|&x| x == c).unwrap();
                    let mut cycle = path[pos..].to_vec();
                    cycle.push(c);
                    return Some(cycle);
                }
                if state[c] == 0 {
                    if let Some(cycle) = dfs(g, c, reachable, state, path) {
                        return Some(cycle);
                    }
                }
            }
            path.pop();
            state[v] = 2;
            None
        }

        for v in 0..n {
            if reachable[v] && state[v] == 0 {
                if let Some(cycle) = dfs(self, v, reachable, &mut state, &mut path) {
                    return cycle.into_iter().map(|i| self.ids[i].clone()).collect();
                }
            }
        }
        vec!["<cycle not recovered>".into()]
    }
}

/// Extracts a rooted tree from a subclass graph.
///
/// Every retained node's parent is a predecessor on a maximum-length path
/// from the root, with ties among predecessors resolved uniformly at random
/// (seeded). Nodes unreachable from the root are dropped and counted.
pub fn extract_tree(
    graph: &EdgeList,
    cfg: &ExtractionConfig,
    labels: Option<&LabelMap>,
) -> Result<(TaxonomyTree, ExtractionStats)> {
    let dense = build_dense(graph, &cfg.exclude)?;
    let reachable = dense.reachable();
    let order = dense.topo_order(&reachable)?;

    let n = dense.ids.len();
    let mut dist = vec![0usize; n];
    let mut chosen_parent: Vec<Option<usize>> = vec![None; n];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for &v in &order {
        if v == dense.root {
            continue;
        }
        let preds: Vec<usize> = dense.preds[v]
            .iter()
            .copied()
            .filter(|&p| reachable[p])
            .collect();
        debug_assert!(!preds.is_empty(), "reachable non-root has a parent");
        let best = preds.iter().map(|&p| dist[p]).max().unwrap();
        let tied: Vec<usize> = preds.into_iter().filter(|&p| dist[p] == best).collect();
        let pick = if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.random_range(0..tied.len())]
        };
        dist[v] = best + 1;
        chosen_parent[v] = Some(pick);
    }

    let mut records = Vec::with_capacity(order.len());
    let mut missing_labels = 0usize;
    for &v in &order {
        let id = &dense.ids[v];
        let (label, alts) = match labels.and_then(|m| m.get(id)) {
            Some((label, alts)) => (label.clone(), alts.clone()),
            None => {
                if labels.is_some() {
                    missing_labels += 1;
                }
                (id.clone(), Vec::new())
            }
        };
        records.push(NodeRecord {
            id: id.clone(),
            parent_id: chosen_parent[v].map(|p| dense.ids[p].clone()),
            label,
            alt_labels: alts,
        });
    }

    let tree = TaxonomyTree::from_records(&records)?;
    let stats = ExtractionStats {
        nodes_kept: records.len(),
        unreachable_dropped: reachable.iter().filter(|&&r| !r).count(),
        excluded_present: dense.excluded_present,
        duplicate_edges_dropped: graph.duplicates_dropped,
        missing_labels,
    };
    Ok((tree, stats))
}

/// Edge count of the longest root-to-`v` path in the (exclusion-filtered)
/// DAG, by DP over a topological order.
pub fn longest_root_path_length(graph: &EdgeList, v: &str) -> Result<usize> {
    let dense = build_dense(graph, &[])?;
    let reachable = dense.reachable();
    let target = dense
        .ids
        .iter()
        .position(|id| id == v)
        .filter(|&i| reachable[i])
        .ok_or_else(|| Error::Unreachable(v.to_owned()))?;
    let order = dense.topo_order(&reachable)?;
    let mut dist = vec![0usize; dense.ids.len()];
    for &u in &order {
        for &p in &dense.preds[u] {
            if reachable[p] {
                dist[u] = dist[u].max(dist[p] + 1);
            }
        }
    }
    Ok(dist[target])
}

/// Reads `child_id<TAB>parent_id` lines; blank lines are skipped.
pub fn read_edge_file(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut edges = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (child, parent) = line.split_once('\t').ok_or_else(|| {
            Error::parse(
                path.display().to_string(),
                lineno + 1,
                "expected `child_id<TAB>parent_id`",
            )
        })?;
        edges.push((child.to_owned(), parent.to_owned()));
    }
    Ok(edges)
}

/// Reads one node id per line; blank lines are skipped.
pub fn read_id_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}
