//! Maps a free-text prediction onto a taxonomy node.
//!
//! Every node is scored against the prediction with a pluggable
//! [`NodeScorer`], then a cascade of increasingly permissive stages picks the
//! node:
//!
//! 1. **Contains** — scanning nodes by descending score, track the most
//!    specific node whose normalized label is a substring of the normalized
//!    prediction. A hit inside the top-k prefix returns immediately after the
//!    prefix is scanned; otherwise the most specific hit over the full scan
//!    wins.
//! 2. **N-grams** — the same scan for n = 4, 3, 2, with "hit" meaning the
//!    word-level n-gram sets of prediction and label intersect.
//! 3. **Vote** — if the softmaxed top-k scores are flat (top-1 vs top-2 and
//!    top-1 vs top-k both under their thresholds), tally how often each node
//!    appears in the ancestor sets of the top-k candidates and return the
//!    deepest node whose tally clears the vote threshold.
//! 4. **Fallback** — the single highest-scoring node.
//!
//! "More specific" always means deeper in the tree, with lexicographically
//! smaller id breaking depth ties. The stage that fired is recorded in a
//! [`MappingTrace`] together with the top-k raw and softmaxed scores.

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::taxonomy::{NodeRef, TaxonomyTree};
use crate::textsim::embedding::{EmbeddingTable, PairwiseScores};
use crate::textsim::{normalize, NormalizedText, TextMeasure};

/// Mapping-cascade parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MapperParams {
    /// Number of top-scoring nodes treated as the candidate prefix.
    pub k: usize,
    /// Max softmax gap between the top-1 and top-k scores for a flat top.
    pub thr_topk: f64,
    /// Max softmax gap between the top-1 and top-2 scores for a flat top.
    pub thr_top2: f64,
    /// Vote-count threshold for the shared-ancestor stage.
    pub thr_vote: usize,
    /// With `true`, a node needs strictly more than `thr_vote` votes; with
    /// `false`, exactly `thr_vote` votes already suffice.
    pub vote_strict: bool,
    /// Stem labels and predictions in the contains/n-gram stages.
    pub stem: bool,
}

impl Default for MapperParams {
    fn default() -> Self {
        MapperParams {
            k: 10,
            thr_topk: 0.0015,
            thr_top2: 0.001,
            thr_vote: 4,
            vote_strict: true,
            stem: true,
        }
    }
}

impl MapperParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config("mapper k must be at least 2".into()));
        }
        if self.thr_topk < 0.0 || self.thr_top2 < 0.0 {
            return Err(Error::Config("mapper thresholds must be >= 0".into()));
        }
        Ok(())
    }

    /// Parses `k=10,thr_topk=0.0015,thr_top2=0.001,thr_vote=4` style strings;
    /// unset keys keep their defaults. Also accepts `vote_strict` and `stem`
    /// booleans.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut params = MapperParams::default();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad param `{item}`, expected key=value")))?;
            let bad = |e: &dyn std::fmt::Display| {
                Error::Config(format!("bad value for `{key}`: {e}"))
            };
            match key {
                "k" => params.k = value.parse().map_err(|e| bad(&e))?,
                "thr_topk" => params.thr_topk = value.parse().map_err(|e| bad(&e))?,
                "thr_top2" => params.thr_top2 = value.parse().map_err(|e| bad(&e))?,
                "thr_vote" => params.thr_vote = value.parse().map_err(|e| bad(&e))?,
                "vote_strict" => params.vote_strict = value.parse().map_err(|e| bad(&e))?,
                "stem" => params.stem = value.parse().map_err(|e| bad(&e))?,
                other => return Err(Error::Config(format!("unknown mapper param `{other}`"))),
            }
        }
        params.validate()?;
        Ok(params)
    }
}

/// Which stage of the cascade produced the mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapStage {
    TopkContains,
    GlobalContains,
    TopkNgram(usize),
    GlobalNgram(usize),
    Vote,
    Fallback,
}

impl MapStage {
    pub fn as_str(self) -> String {
        match self {
            MapStage::TopkContains => "topk-contains".into(),
            MapStage::GlobalContains => "global-contains".into(),
            MapStage::TopkNgram(n) => format!("topk-ngram-{n}"),
            MapStage::GlobalNgram(n) => format!("global-ngram-{n}"),
            MapStage::Vote => "vote".into(),
            MapStage::Fallback => "fallback".into(),
        }
    }
}

/// One of the k highest-scoring candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopkEntry {
    pub node: NodeRef,
    pub raw: f64,
    pub softmax: f64,
}

/// How a prediction was mapped: winning stage, chosen node, and the scored
/// top-k prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingTrace {
    pub stage: MapStage,
    pub chosen: NodeRef,
    pub topk: Vec<TopkEntry>,
}

/// Scores a prediction against every node of a tree.
///
/// `score_all` returns one finite score per node, in the tree's node
/// iteration order. Implementations should do their own per-prediction
/// caching; the mapper calls this exactly once per prediction.
pub trait NodeScorer: Send + Sync {
    fn score_all(&self, tree: &TaxonomyTree, prediction: &str) -> Result<Vec<f64>>;
}

/// Scores with a string measure, taking the max over all labels of a node.
///
/// Node labels that normalize to nothing are skipped; a node with no
/// scoreable label at all scores 0.
pub struct TextMeasureScorer {
    measure: TextMeasure,
    labels: Vec<Vec<NormalizedText>>,
}

impl TextMeasureScorer {
    pub fn new(tree: &TaxonomyTree, measure: TextMeasure) -> Self {
        let labels = tree
            .nodes()
            .map(|v| {
                tree.all_labels(v)
                    .unwrap()
                    .into_iter()
                    .map(|l| measure.normalize(l))
                    .filter(|n| !n.is_empty())
                    .collect()
            })
            .collect();
        TextMeasureScorer { measure, labels }
    }
}

impl NodeScorer for TextMeasureScorer {
    fn score_all(&self, tree: &TaxonomyTree, prediction: &str) -> Result<Vec<f64>> {
        debug_assert_eq!(self.labels.len(), tree.len(), "scorer built for this tree");
        let pred = self.measure.normalize(prediction);
        self.labels
            .iter()
            .map(|labels| {
                let mut best = 0.0f64;
                for label in labels {
                    best = best.max(self.measure.score_normalized(label, &pred)?);
                }
                Ok(best)
            })
            .collect()
    }
}

/// Cosine scorer over precomputed embeddings: nodes are keyed by id, the
/// prediction by its literal string. A prediction without a vector fails
/// fast rather than falling back.
pub struct EmbedCosineScorer {
    table: EmbeddingTable,
}

impl EmbedCosineScorer {
    pub fn new(table: EmbeddingTable) -> Self {
        EmbedCosineScorer { table }
    }
}

impl NodeScorer for EmbedCosineScorer {
    fn score_all(&self, tree: &TaxonomyTree, prediction: &str) -> Result<Vec<f64>> {
        let pred = self.table.vector(prediction)?;
        tree.nodes()
            .map(|v| {
                let vec = self.table.vector(tree.id(v)?)?;
                let dot: f64 = pred.iter().zip(vec).map(|(x, y)| x * y).sum();
                Ok((dot.clamp(-1.0, 1.0) + 1.0) / 2.0)
            })
            .collect()
    }
}

/// Scorer backed by an externally computed pairwise-score file, keyed by
/// `(prediction string, node id)`.
pub struct PairwiseScorer {
    scores: PairwiseScores,
}

impl PairwiseScorer {
    pub fn new(scores: PairwiseScores) -> Self {
        PairwiseScorer { scores }
    }
}

impl NodeScorer for PairwiseScorer {
    fn score_all(&self, tree: &TaxonomyTree, prediction: &str) -> Result<Vec<f64>> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(tree.len());
        for v in tree.nodes() {
            let id = tree.id(v)?;
            match self.scores.get(prediction, id) {
                Some(s) => out.push(s),
                None => missing.push((prediction.to_owned(), id.to_owned())),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingScores { missing });
        }
        Ok(out)
    }
}

// Per-node string index for the contains and n-gram stages.
struct NodeStrings {
    /// Non-empty normalized label strings.
    joined: Vec<String>,
    /// Word-level n-gram sets of all labels, for n = 2, 3, 4.
    ngrams: [HashSet<String>; 3],
}

/// A prediction-to-node mapper bound to one tree and one scorer.
pub struct Mapper<'t> {
    tree: Cow<'t, TaxonomyTree>,
    scorer: Box<dyn NodeScorer>,
    params: MapperParams,
    node_strings: Vec<NodeStrings>,
}

impl<'t> Mapper<'t> {
    pub fn new(
        tree: &'t TaxonomyTree,
        scorer: Box<dyn NodeScorer>,
        params: MapperParams,
    ) -> Result<Self> {
        Self::from_cow(Cow::Borrowed(tree), scorer, params)
    }

    /// As [`Mapper::new`], but taking ownership; handy when the mapper must
    /// outlive the caller's tree binding (e.g. behind a foreign-language
    /// handle).
    pub fn new_owned(
        tree: TaxonomyTree,
        scorer: Box<dyn NodeScorer>,
        params: MapperParams,
    ) -> Result<Mapper<'static>> {
        Mapper::from_cow(Cow::Owned(tree), scorer, params)
    }

    fn from_cow(
        tree: Cow<'t, TaxonomyTree>,
        scorer: Box<dyn NodeScorer>,
        params: MapperParams,
    ) -> Result<Mapper<'t>> {
        params.validate()?;
        let node_strings = tree
            .nodes()
            .map(|v| {
                let labels: Vec<NormalizedText> = tree
                    .all_labels(v)
                    .unwrap()
                    .into_iter()
                    .map(|l| normalize(l, params.stem))
                    .filter(|n| !n.is_empty())
                    .collect();
                let mut ngrams: [HashSet<String>; 3] =
                    [HashSet::new(), HashSet::new(), HashSet::new()];
                for label in &labels {
                    for (slot, n) in [(0usize, 2usize), (1, 3), (2, 4)] {
                        for gram in label.tokens.windows(n) {
                            ngrams[slot].insert(gram.join(" "));
                        }
                    }
                }
                NodeStrings {
                    joined: labels.into_iter().map(|l| l.joined).collect(),
                    ngrams,
                }
            })
            .collect();
        Ok(Mapper {
            tree,
            scorer,
            params,
            node_strings,
        })
    }

    pub fn params(&self) -> &MapperParams {
        &self.params
    }

    pub fn tree(&self) -> &TaxonomyTree {
        self.tree
    }

    /// Maps one prediction. Always returns a node: the fallback stage makes
    /// the cascade total.
    pub fn map_prediction(&self, prediction: &str) -> Result<(NodeRef, MappingTrace)> {
        let raw = self.scorer.score_all(self.tree, prediction)?;
        if raw.len() != self.tree.len() {
            return Err(Error::InvalidInput(format!(
                "scorer returned {} scores for {} nodes",
                raw.len(),
                self.tree.len()
            )));
        }
        if let Some(bad) = raw.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scorer produced a non-finite score {bad}"
            )));
        }

        let n = self.tree.len();
        // Descending score; ties by lexicographic node id.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&a, &b| {
            raw[b]
                .partial_cmp(&raw[a])
                .expect("scores are finite")
                .then_with(|| self.tree.id_rank_at(a).cmp(&self.tree.id_rank_at(b)))
        });

        let k = self.params.k.min(n);
        let softmax = softmax(order[..k].iter().map(|&i| raw[i]));
        let topk: Vec<TopkEntry> = order[..k]
            .iter()
            .zip(&softmax)
            .map(|(&i, &sm)| TopkEntry {
                node: self.tree.ref_at(i),
                raw: raw[i],
                softmax: sm,
            })
            .collect();
        let trace = |stage: MapStage, chosen: usize| {
            let node = self.tree.ref_at(chosen);
            (
                node,
                MappingTrace {
                    stage,
                    chosen: node,
                    topk: topk.clone(),
                },
            )
        };

        let pred_norm = normalize(prediction, self.params.stem);
        // An empty normalized prediction has no string content: the contains
        // and n-gram stages cannot apply, so mapping goes to vote/fallback.
        if !pred_norm.is_empty() {
            // Stage A: label contained in the prediction.
            let scan = self.scan_for_hit(&order, k, |i| {
                self.node_strings[i]
                    .joined
                    .iter()
                    .any(|label| pred_norm.joined.contains(label))
            });
            match scan {
                Scan::WithinTopk(c) => return Ok(trace(MapStage::TopkContains, c)),
                Scan::Global(c) => return Ok(trace(MapStage::GlobalContains, c)),
                Scan::NoHit => {}
            }

            // Stage B: word-level n-gram overlap for n = 4, 3, 2.
            for ngram_n in [4usize, 3, 2] {
                let pred_grams: HashSet<String> = pred_norm
                    .tokens
                    .windows(ngram_n)
                    .map(|w| w.join(" "))
                    .collect();
                if pred_grams.is_empty() {
                    continue;
                }
                let slot = ngram_n - 2;
                let scan = self.scan_for_hit(&order, k, |i| {
                    let node_grams = &self.node_strings[i].ngrams[slot];
                    if node_grams.len() <= pred_grams.len() {
                        node_grams.iter().any(|g| pred_grams.contains(g))
                    } else {
                        pred_grams.iter().any(|g| node_grams.contains(g))
                    }
                });
                match scan {
                    Scan::WithinTopk(c) => return Ok(trace(MapStage::TopkNgram(ngram_n), c)),
                    Scan::Global(c) => return Ok(trace(MapStage::GlobalNgram(ngram_n), c)),
                    Scan::NoHit => {}
                }
            }
        }

        // Stage C: ancestor voting when the top scores are flat.
        if k >= 2
            && softmax[0] - softmax[1] < self.params.thr_top2
            && softmax[0] - softmax[k - 1] < self.params.thr_topk
        {
            if let Some(winner) = self.vote(&order[..k]) {
                return Ok(trace(MapStage::Vote, winner));
            }
        }

        // Stage D: highest-scoring node.
        Ok(trace(MapStage::Fallback, order[0]))
    }

    /// Maps predictions elementwise, in parallel, preserving order. Errors
    /// stay per item.
    pub fn batch_map(&self, predictions: &[String]) -> Vec<Result<(NodeRef, MappingTrace)>> {
        predictions
            .par_iter()
            .map(|p| self.map_prediction(p))
            .collect()
    }

    // Scans nodes in descending-score order tracking the most specific hit.
    // Returns at the end of the top-k prefix if a hit was found inside it.
    fn scan_for_hit(&self, order: &[usize], k: usize, hit: impl Fn(usize) -> bool) -> Scan {
        let mut cand: Option<usize> = None;
        for (pos, &i) in order.iter().enumerate() {
            if hit(i) {
                cand = Some(match cand {
                    Some(c) if !self.more_specific(i, c) => c,
                    _ => i,
                });
            }
            if pos + 1 == k {
                if let Some(c) = cand {
                    return Scan::WithinTopk(c);
                }
            }
        }
        match cand {
            Some(c) => Scan::Global(c),
            None => Scan::NoHit,
        }
    }

    // Deeper wins; equal depth falls back to lexicographic id order.
    fn more_specific(&self, a: usize, b: usize) -> bool {
        let (da, db) = (self.tree.depth_at(a), self.tree.depth_at(b));
        da > db || (da == db && self.tree.id_rank_at(a) < self.tree.id_rank_at(b))
    }

    // Tallies nodes over the ancestor sets of the top-k candidates; among
    // nodes clearing the vote threshold the deepest wins, with tally and
    // then id order breaking ties.
    fn vote(&self, topk: &[usize]) -> Option<usize> {
        let mut tally: HashMap<usize, usize> = HashMap::new();
        for &i in topk {
            let mut cur = Some(i);
            while let Some(c) = cur {
                *tally.entry(c).or_insert(0) += 1;
                cur = self.tree.parent_at(c);
            }
        }
        let passes = |count: usize| {
            if self.params.vote_strict {
                count > self.params.thr_vote
            } else {
                count >= self.params.thr_vote
            }
        };
        tally
            .into_iter()
            .filter(|&(_, count)| passes(count))
            .max_by(|&(a, ca), &(b, cb)| {
                self.tree
                    .depth_at(a)
                    .cmp(&self.tree.depth_at(b))
                    .then(ca.cmp(&cb))
                    .then_with(|| self.tree.id_rank_at(b).cmp(&self.tree.id_rank_at(a)))
            })
            .map(|(node, _)| node)
    }
}

enum Scan {
    WithinTopk(usize),
    Global(usize),
    NoHit,
}

/// Maps a single prediction without keeping a mapper around.
pub fn map_prediction(
    tree: &TaxonomyTree,
    scorer: Box<dyn NodeScorer>,
    prediction: &str,
    params: MapperParams,
) -> Result<(NodeRef, MappingTrace)> {
    Mapper::new(tree, scorer, params)?.map_prediction(prediction)
}

/// Softmax at temperature 1 over raw scores.
fn softmax(scores: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let scores: Vec<f64> = scores.into_iter().collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
