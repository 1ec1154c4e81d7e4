//! Hierarchical precision, recall, and F1 over (ground-truth, predicted)
//! node pairs.
//!
//! Per pair, the shared-ancestor count (the overlap of the two root paths)
//! is normalized by the predicted path length for precision and by the
//! ground-truth path length for recall. Dataset scores are macro-averages of
//! the per-pair ratios; the F score is the harmonic mean of those two means,
//! not a mean of per-pair F scores.

use crate::error::{Error, Result};
use crate::taxonomy::{NodeRef, TaxonomyTree};

/// Scores for one (ground-truth, predicted) node pair.
///
/// The integer fields are exact; `hp` and `hr` are the corresponding
/// rationals emitted as doubles.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PairScore {
    /// `overlap / pr_ancestors`
    pub hp: f64,
    /// `overlap / gt_ancestors`
    pub hr: f64,
    /// Size of the intersection of the two ancestor sets.
    pub overlap: usize,
    /// `|anc(pr)|`
    pub pr_ancestors: usize,
    /// `|anc(gt)|`
    pub gt_ancestors: usize,
}

impl PairScore {
    /// Per-pair harmonic mean, exposed for diagnostics only; dataset-level
    /// F comes from [`AggregateScore::hf`].
    pub fn f1(&self) -> f64 {
        2.0 * self.hp * self.hr / (self.hp + self.hr)
    }
}

/// Dataset-level scores.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AggregateScore {
    pub hp_mean: f64,
    pub hr_mean: f64,
    /// Harmonic mean of `hp_mean` and `hr_mean`.
    pub hf: f64,
    pub n: usize,
}

/// Scores one pair of nodes.
///
/// The overlap equals `depth(lca) + 1`: the root is always shared, so both
/// scores are strictly positive. `gt == pr` gives `hp == hr == 1`.
pub fn pair_score(tree: &TaxonomyTree, gt: NodeRef, pr: NodeRef) -> Result<PairScore> {
    let lca = tree.lca(gt, pr)?;
    let overlap = tree.depth(lca)? + 1;
    let gt_ancestors = tree.depth(gt)? + 1;
    let pr_ancestors = tree.depth(pr)? + 1;
    Ok(PairScore {
        hp: overlap as f64 / pr_ancestors as f64,
        hr: overlap as f64 / gt_ancestors as f64,
        overlap,
        pr_ancestors,
        gt_ancestors,
    })
}

/// Scores a list of `(gt, pr)` pairs and aggregates them.
pub fn aggregate(tree: &TaxonomyTree, pairs: &[(NodeRef, NodeRef)]) -> Result<AggregateScore> {
    let scores = pairs
        .iter()
        .map(|&(gt, pr)| pair_score(tree, gt, pr))
        .collect::<Result<Vec<_>>>()?;
    aggregate_scores(&scores)
}

/// Aggregates already-computed pair scores in input order.
///
/// The fold order is fixed so floating-point output is reproducible.
pub fn aggregate_scores(scores: &[PairScore]) -> Result<AggregateScore> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no pairs to aggregate".into()));
    }
    let n = scores.len();
    let hp_mean = scores.iter().map(|s| s.hp).sum::<f64>() / n as f64;
    let hr_mean = scores.iter().map(|s| s.hr).sum::<f64>() / n as f64;
    Ok(AggregateScore {
        hp_mean,
        hr_mean,
        hf: 2.0 * hp_mean * hr_mean / (hp_mean + hr_mean),
        n,
    })
}
