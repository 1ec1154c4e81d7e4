//! Synthetic correlation benchmark: controlled reference–candidate node
//! pairs, similarity scores, and their rank correlation with the
//! hierarchical metrics.
//!
//! References are drawn uniformly among leaves; a target distance is drawn
//! uniformly in `[1, max_dist]` and a candidate at exactly that distance is
//! sampled uniformly. Distances a given reference cannot realize are
//! rejection-resampled, so realized distances stay uniform over the
//! attainable values per reference.

pub mod kendall;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hmetrics::pair_score;
use crate::taxonomy::{NodeRef, TaxonomyTree};
use crate::textsim::embedding::{embed_cosine, EmbeddingTable, PairwiseScores};
use crate::textsim::TextMeasure;

/// Which metric the sample set isolates: `Hp` pairs are unconstrained,
/// `Hr` pairs take the candidate from the reference's strict ancestors
/// (which forces hp = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SampleMode {
    Hp,
    Hr,
}

impl SampleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleMode::Hp => "hp",
            SampleMode::Hr => "hr",
        }
    }
}

impl FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hp" => Ok(SampleMode::Hp),
            "hr" => Ok(SampleMode::Hr),
            other => Err(Error::Config(format!("unknown sample mode `{other}`"))),
        }
    }
}

/// One benchmark pair: a leaf reference, a candidate at a controlled
/// distance, and the hierarchical scores of (gt = reference, pr =
/// candidate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSample {
    pub reference: NodeRef,
    pub candidate: NodeRef,
    pub distance: usize,
    pub hp: f64,
    pub hr: f64,
    pub mode: SampleMode,
}

/// JSONL-facing form of [`PairSample`] with string node ids.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PairSampleRecord {
    pub reference: String,
    pub candidate: String,
    pub distance: usize,
    pub hp: f64,
    pub hr: f64,
    pub mode: String,
}

impl PairSample {
    pub fn to_record(&self, tree: &TaxonomyTree) -> Result<PairSampleRecord> {
        Ok(PairSampleRecord {
            reference: tree.id(self.reference)?.to_owned(),
            candidate: tree.id(self.candidate)?.to_owned(),
            distance: self.distance,
            hp: self.hp,
            hr: self.hr,
            mode: self.mode.as_str().to_owned(),
        })
    }

    pub fn from_record(record: &PairSampleRecord, tree: &TaxonomyTree) -> Result<Self> {
        Ok(PairSample {
            reference: tree.node(&record.reference)?,
            candidate: tree.node(&record.candidate)?,
            distance: record.distance,
            hp: record.hp,
            hr: record.hr,
            mode: record.mode.parse()?,
        })
    }
}

/// Draws `n` reference–candidate pairs with distances controlled up to
/// `max_dist`. Deterministic per seed.
pub fn sample_pairs(
    tree: &TaxonomyTree,
    n: usize,
    max_dist: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<Vec<PairSample>> {
    if max_dist < 1 {
        return Err(Error::Config("max_dist must be at least 1".into()));
    }
    let leaves: Vec<usize> = tree
        .nodes()
        .filter(|&v| tree.is_leaf(v).unwrap() && tree.depth(v).unwrap() >= 1)
        .map(|v| tree.index_of(v).unwrap())
        .collect();
    if leaves.is_empty() {
        return Err(Error::Config(
            "tree too shallow: no leaf at depth >= 1".into(),
        ));
    }

    const DISTANCE_RETRIES: usize = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let reference = leaves[rng.random_range(0..leaves.len())];
        // Redraw the distance a bounded number of times, then resample the
        // reference. Distance 1 (the parent) is always attainable, so this
        // terminates.
        for _ in 0..DISTANCE_RETRIES {
            let distance = rng.random_range(1..=max_dist);
            let candidate = match mode {
                SampleMode::Hr => ancestor_at(tree, reference, distance),
                SampleMode::Hp => {
                    let candidates = nodes_at_distance(tree, reference, distance);
                    if candidates.is_empty() {
                        None
                    } else {
                        Some(candidates[rng.random_range(0..candidates.len())])
                    }
                }
            };
            if let Some(candidate) = candidate {
                let gt = tree.ref_at(reference);
                let pr = tree.ref_at(candidate);
                let score = pair_score(tree, gt, pr)?;
                debug_assert!(mode != SampleMode::Hr || score.hp == 1.0);
                out.push(PairSample {
                    reference: gt,
                    candidate: pr,
                    distance,
                    hp: score.hp,
                    hr: score.hr,
                    mode,
                });
                break;
            }
        }
    }
    Ok(out)
}

fn ancestor_at(tree: &TaxonomyTree, node: usize, distance: usize) -> Option<usize> {
    let mut cur = node;
    for _ in 0..distance {
        cur = tree.parent_at(cur)?;
    }
    Some(cur)
}

// All nodes at exactly `distance` undirected hops, sorted for determinism.
fn nodes_at_distance(tree: &TaxonomyTree, start: usize, distance: usize) -> Vec<usize> {
    let mut seen = vec![false; tree.len()];
    seen[start] = true;
    let mut frontier = vec![start];
    for _ in 0..distance {
        let mut next = Vec::new();
        for &v in &frontier {
            let push = |u: usize, seen: &mut Vec<bool>, next: &mut Vec<usize>| {
                if !seen[u] {
                    seen[u] = true;
                    next.push(u);
                }
            };
            if let Some(p) = tree.parent_at(v) {
                push(p, &mut seen, &mut next);
            }
            for &c in tree.children_at(v) {
                push(c as usize, &mut seen, &mut next);
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    frontier.sort_unstable();
    frontier
}

/// A similarity source for the correlation run.
pub enum CorrelationMeasure<'a> {
    /// String measure on the (reference label, candidate label) pair; the
    /// candidate's canonical label plays the prediction.
    Text(TextMeasure),
    /// Cosine over precomputed vectors keyed by node id.
    EmbedCosine(&'a EmbeddingTable),
    /// Externally computed scores keyed by (reference id, candidate id).
    External {
        name: String,
        scores: &'a PairwiseScores,
    },
}

impl CorrelationMeasure<'_> {
    pub fn name(&self) -> String {
        match self {
            CorrelationMeasure::Text(m) => m.kind.as_str().to_owned(),
            CorrelationMeasure::EmbedCosine(_) => "embed-cosine".to_owned(),
            CorrelationMeasure::External { name, .. } => name.clone(),
        }
    }
}

/// Correlation of one measure against one target metric.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrelationEntry {
    pub measure: String,
    /// Sample mode the entry was computed on ("hp" or "hr").
    pub mode: String,
    /// The metric correlated against: hp for hp-mode samples, hr for
    /// hr-mode samples.
    pub target: String,
    pub n: usize,
    pub tau: Option<f64>,
    pub p_value: Option<f64>,
    /// Set when tau is undefined for this measure (e.g. a constant measure
    /// leaves every pair tied).
    pub error: Option<String>,
}

/// Full correlation report, one entry per (measure, mode).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrelationReport {
    pub tau_variant: String,
    pub p_value_method: String,
    pub n_samples: usize,
    /// Realized distance histogram per mode.
    pub distance_histogram: BTreeMap<String, BTreeMap<usize, usize>>,
    pub entries: Vec<CorrelationEntry>,
}

/// Scores every sample under every measure and correlates against the
/// mode's target metric.
///
/// Missing external scores abort with a lookup error listing the missing
/// pairs; an undefined tau (all scores tied) is surfaced per measure in the
/// report instead of a number.
pub fn run_correlation(
    tree: &TaxonomyTree,
    samples: &[PairSample],
    measures: &[CorrelationMeasure<'_>],
) -> Result<CorrelationReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no pair samples".into()));
    }

    let mut by_mode: BTreeMap<SampleMode, Vec<&PairSample>> = BTreeMap::new();
    for s in samples {
        by_mode.entry(s.mode).or_default().push(s);
    }

    let mut histogram: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    for (mode, group) in &by_mode {
        let h = histogram.entry(mode.as_str().to_owned()).or_default();
        for s in group {
            *h.entry(s.distance).or_insert(0) += 1;
        }
    }

    let mut entries = Vec::new();
    for measure in measures {
        for (mode, group) in &by_mode {
            let mut xs = Vec::with_capacity(group.len());
            let mut missing = Vec::new();
            for s in group {
                let ref_id = tree.id(s.reference)?;
                let cand_id = tree.id(s.candidate)?;
                let score = match measure {
                    CorrelationMeasure::Text(m) => {
                        Some(m.score(tree.label(s.reference)?, tree.label(s.candidate)?)?)
                    }
                    CorrelationMeasure::EmbedCosine(table) => {
                        Some(embed_cosine(table, ref_id, cand_id)?)
                    }
                    CorrelationMeasure::External { scores, .. } => {
                        let got = scores.get(ref_id, cand_id);
                        if got.is_none() {
                            missing.push((ref_id.to_owned(), cand_id.to_owned()));
                        }
                        got
                    }
                };
                if let Some(score) = score {
                    xs.push(score);
                }
            }
            if !missing.is_empty() {
                return Err(Error::MissingScores { missing });
            }
            let ys: Vec<f64> = group
                .iter()
                .map(|s| match mode {
                    SampleMode::Hp => s.hp,
                    SampleMode::Hr => s.hr,
                })
                .collect();
            let entry = match kendall::tau_b_detailed(&xs, &ys) {
                Ok(detail) => CorrelationEntry {
                    measure: measure.name(),
                    mode: mode.as_str().to_owned(),
                    target: mode.as_str().to_owned(),
                    n: group.len(),
                    tau: Some(detail.tau),
                    p_value: Some(detail.p_value),
                    error: None,
                },
                Err(Error::UndefinedTau(msg)) => CorrelationEntry {
                    measure: measure.name(),
                    mode: mode.as_str().to_owned(),
                    target: mode.as_str().to_owned(),
                    n: group.len(),
                    tau: None,
                    p_value: None,
                    error: Some(format!("undefined tau-b: {msg}")),
                },
                Err(other) => return Err(other),
            };
            entries.push(entry);
        }
    }

    Ok(CorrelationReport {
        tau_variant: "tau-b".to_owned(),
        p_value_method: "normal-approximation".to_owned(),
        n_samples: samples.len(),
        distance_histogram: histogram,
        entries,
    })
}

/// Writes samples as JSONL, one record per line.
pub fn write_pair_samples(
    tree: &TaxonomyTree,
    samples: &[PairSample],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for s in samples {
        let record = s.to_record(tree)?;
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a JSONL pair-sample file, resolving node ids against the tree.
pub fn read_pair_samples(tree: &TaxonomyTree, path: impl AsRef<Path>) -> Result<Vec<PairSample>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut samples = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PairSampleRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(path.display().to_string(), lineno + 1, e.to_string()))?;
        samples.push(PairSample::from_record(&record, tree)?);
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no pair samples in {}",
            path.display()
        )));
    }
    Ok(samples)
}
