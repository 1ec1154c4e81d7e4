//! End-to-end evaluation of prediction files: map each prediction onto the
//! taxonomy, score it against its ground-truth node, and aggregate.
//!
//! The same machinery serves two workflows: scoring predictions against
//! ground-truth class nodes, and measuring mapping quality against
//! human-annotated gold nodes for the text. Reports are deterministic: rows
//! are sorted by sample id and aggregation folds in a fixed order, so runs
//! are byte-identical regardless of worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hmetrics::{aggregate_scores, pair_score, PairScore};
use crate::mapper::{EmbedCosineScorer, Mapper, MapperParams, NodeScorer, TextMeasureScorer};
use crate::taxonomy::TaxonomyTree;
use crate::textsim::embedding::EmbeddingTable;
use crate::textsim::{TextMeasure, TextMeasureKind};

/// One evaluation item as stored in prediction JSONL files.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub prediction: String,
    /// Ground-truth node id (or human-annotated gold node in the
    /// mapping-quality workflow). Optional so that bare mapping runs can
    /// share the format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

/// Reads prediction records from JSONL, enforcing unique sample ids.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(path.display().to_string(), lineno + 1, e.to_string()))?;
        if !seen.insert(record.sample_id.clone()) {
            return Err(Error::DuplicateSampleId(record.sample_id));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no prediction records in {}",
            path.display()
        )));
    }
    Ok(records)
}

/// Which similarity backend drives the mapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureSpec {
    Text(TextMeasureKind),
    EmbedCosine,
}

impl MeasureSpec {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureSpec::Text(kind) => kind.as_str(),
            MeasureSpec::EmbedCosine => "embed-cosine",
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if matches!(s, "embed-cosine" | "cosine") {
            return Ok(MeasureSpec::EmbedCosine);
        }
        Ok(MeasureSpec::Text(s.parse()?))
    }
}

/// Builds the node scorer for a measure choice.
pub fn build_scorer(
    tree: &TaxonomyTree,
    spec: MeasureSpec,
    stem: bool,
    embeddings: Option<EmbeddingTable>,
) -> Result<Box<dyn NodeScorer>> {
    match spec {
        MeasureSpec::Text(kind) => Ok(Box::new(TextMeasureScorer::new(
            tree,
            TextMeasure::with_stem(kind, stem),
        ))),
        MeasureSpec::EmbedCosine => {
            let table = embeddings.ok_or_else(|| {
                Error::Config("measure embed-cosine requires an embeddings file".into())
            })?;
            Ok(Box::new(EmbedCosineScorer::new(table)))
        }
    }
}

/// Per-record evaluation output.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RecordRow {
    pub sample_id: String,
    pub dataset: String,
    pub prediction: String,
    pub gt_node: String,
    pub gt_label: String,
    pub mapped_node: String,
    pub mapped_label: String,
    pub stage: String,
    pub hp: f64,
    pub hr: f64,
    pub overlap: usize,
    /// Exact node identity with the ground-truth/gold node.
    pub node_match: bool,
    /// Canonical-label identity; diagnostic column only.
    pub label_match: bool,
}

/// Aggregates over a set of rows.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AggregateStats {
    pub n: usize,
    pub hp_mean: f64,
    pub hr_mean: f64,
    pub hf: f64,
    pub node_accuracy: f64,
    pub label_accuracy: f64,
}

/// A record that was dropped (only with `skip_bad`) and why.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkippedRecord {
    pub sample_id: String,
    pub reason: String,
}

/// Full evaluation report: per-record rows plus aggregates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub measure: String,
    pub params: MapperParams,
    pub overall: AggregateStats,
    pub per_dataset: BTreeMap<String, AggregateStats>,
    pub skipped: Vec<SkippedRecord>,
    pub rows: Vec<RecordRow>,
}

/// Evaluation knobs shared by `eval` and `map-quality`.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Trim this prefix (plus surrounding whitespace) from predictions,
    /// e.g. `A:`.
    pub strip_prefix: Option<String>,
    /// Skip records whose gt node does not resolve (or whose mapping fails)
    /// instead of aborting.
    pub skip_bad: bool,
}

pub(crate) fn effective_prediction(raw: &str, strip_prefix: Option<&str>) -> String {
    let trimmed = raw.trim();
    match strip_prefix {
        Some(prefix) => match trimmed.strip_prefix(prefix) {
            Some(rest) => rest.trim().to_owned(),
            None => trimmed.to_owned(),
        },
        None => trimmed.to_owned(),
    }
}

const NO_DATASET: &str = "default";

/// Maps every record and scores it against its ground-truth node.
///
/// Unresolvable `gt_node` ids abort the run with a listing unless
/// `skip_bad` is set, in which case they are skipped and counted.
pub fn run_eval(
    mapper: &Mapper<'_>,
    records: &[PredictionRecord],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no prediction records".into()));
    }
    let tree = mapper.tree();

    let mut skipped = Vec::new();
    let mut bad_ids = Vec::new();
    let mut work = Vec::with_capacity(records.len());
    for record in records {
        let Some(gt_id) = record.gt_node.as_deref() else {
            bad_ids.push(format!("{} (missing gt_node)", record.sample_id));
            skipped.push(SkippedRecord {
                sample_id: record.sample_id.clone(),
                reason: "missing gt_node".into(),
            });
            continue;
        };
        match tree.node(gt_id) {
            Ok(gt) => work.push((record, gt)),
            Err(_) => {
                bad_ids.push(gt_id.to_owned());
                skipped.push(SkippedRecord {
                    sample_id: record.sample_id.clone(),
                    reason: format!("unresolvable gt_node `{gt_id}`"),
                });
            }
        }
    }
    if !bad_ids.is_empty() && !opts.skip_bad {
        return Err(Error::UnresolvableGtNodes {
            count: bad_ids.len(),
            ids: bad_ids,
        });
    }
    if work.is_empty() {
        return Err(Error::EmptyInput(
            "no usable prediction records after skipping".into(),
        ));
    }

    let predictions: Vec<String> = work
        .iter()
        .map(|(r, _)| effective_prediction(&r.prediction, opts.strip_prefix.as_deref()))
        .collect();
    let mapped = mapper.batch_map(&predictions);

    let mut rows = Vec::with_capacity(work.len());
    for (((record, gt), prediction), outcome) in work.iter().zip(&predictions).zip(mapped) {
        let (node, trace) = match outcome {
            Ok(pair) => pair,
            Err(e) => {
                if opts.skip_bad {
                    skipped.push(SkippedRecord {
                        sample_id: record.sample_id.clone(),
                        reason: e.to_string(),
                    });
                    continue;
                }
                return Err(e);
            }
        };
        let score: PairScore = pair_score(tree, *gt, node)?;
        let gt_label = tree.label(*gt)?;
        let mapped_label = tree.label(node)?;
        rows.push(RecordRow {
            sample_id: record.sample_id.clone(),
            dataset: record.dataset.clone().unwrap_or_else(|| NO_DATASET.into()),
            prediction: prediction.clone(),
            gt_node: tree.id(*gt)?.to_owned(),
            gt_label: gt_label.to_owned(),
            mapped_node: tree.id(node)?.to_owned(),
            mapped_label: mapped_label.to_owned(),
            stage: trace.stage.as_str(),
            hp: score.hp,
            hr: score.hr,
            overlap: score.overlap,
            node_match: node == *gt,
            label_match: mapped_label == gt_label,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(
            "every record was skipped; nothing to report".into(),
        ));
    }
    rows.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

    let overall = stats_for(rows.iter())?;
    let mut per_dataset = BTreeMap::new();
    let datasets: std::collections::BTreeSet<String> =
        rows.iter().map(|r| r.dataset.clone()).collect();
    for dataset in datasets {
        let stats = stats_for(rows.iter().filter(|r| r.dataset == dataset))?;
        per_dataset.insert(dataset, stats);
    }

    Ok(EvalReport {
        measure: String::new(), // filled by the caller, which knows the spec
        params: *mapper.params(),
        overall,
        per_dataset,
        skipped,
        rows,
    })
}

fn stats_for<'a>(rows: impl Iterator<Item = &'a RecordRow>) -> Result<AggregateStats> {
    let rows: Vec<&RecordRow> = rows.collect();
    let scores: Vec<PairScore> = rows
        .iter()
        .map(|r| PairScore {
            hp: r.hp,
            hr: r.hr,
            overlap: r.overlap,
            pr_ancestors: 0,
            gt_ancestors: 0,
        })
        .collect();
    let agg = aggregate_scores(&scores)?;
    let n = rows.len();
    let node_hits = rows.iter().filter(|r| r.node_match).count();
    let label_hits = rows.iter().filter(|r| r.label_match).count();
    Ok(AggregateStats {
        n,
        hp_mean: agg.hp_mean,
        hr_mean: agg.hr_mean,
        hf: agg.hf,
        node_accuracy: node_hits as f64 / n as f64,
        label_accuracy: label_hits as f64 / n as f64,
    })
}

/// Output row of a bare `map` run (no ground truth involved).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MapOutputRow {
    pub sample_id: String,
    pub prediction: String,
    pub mapped_node: String,
    pub mapped_label: String,
    pub stage: String,
    pub topk: Vec<MapTopkRow>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MapTopkRow {
    pub node: String,
    pub raw: f64,
    pub softmax: f64,
}

/// Maps records without scoring them, keeping the full trace per record.
pub fn run_map(
    mapper: &Mapper<'_>,
    records: &[PredictionRecord],
    opts: &EvalOptions,
) -> Result<Vec<MapOutputRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no prediction records".into()));
    }
    let tree = mapper.tree();
    let predictions: Vec<String> = records
        .iter()
        .map(|r| effective_prediction(&r.prediction, opts.strip_prefix.as_deref()))
        .collect();
    let mapped = mapper.batch_map(&predictions);
    let mut rows = Vec::with_capacity(records.len());
    for ((record, prediction), outcome) in records.iter().zip(&predictions).zip(mapped) {
        let (node, trace) = outcome?;
        rows.push(MapOutputRow {
            sample_id: record.sample_id.clone(),
            prediction: prediction.clone(),
            mapped_node: tree.id(node)?.to_owned(),
            mapped_label: tree.label(node)?.to_owned(),
            stage: trace.stage.as_str(),
            topk: trace
                .topk
                .iter()
                .map(|e| {
                    Ok(MapTopkRow {
                        node: tree.id(e.node)?.to_owned(),
                        raw: e.raw,
                        softmax: e.softmax,
                    })
                })
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Writers. JSON fields and CSV columns carry the same aggregate values.

pub fn write_report_json(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_report_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidInput(e.to_string()))?;
    w.write_record([
        "scope",
        "n",
        "hp_mean",
        "hr_mean",
        "hf",
        "node_accuracy",
        "label_accuracy",
    ])
    .and_then(|_| {
        w.write_record([
            "overall".to_owned(),
            report.overall.n.to_string(),
            report.overall.hp_mean.to_string(),
            report.overall.hr_mean.to_string(),
            report.overall.hf.to_string(),
            report.overall.node_accuracy.to_string(),
            report.overall.label_accuracy.to_string(),
        ])
    })
    .map_err(|e| Error::InvalidInput(e.to_string()))?;
    for (dataset, stats) in &report.per_dataset {
        w.write_record([
            format!("dataset:{dataset}"),
            stats.n.to_string(),
            stats.hp_mean.to_string(),
            stats.hr_mean.to_string(),
            stats.hf.to_string(),
            stats.node_accuracy.to_string(),
            stats.label_accuracy.to_string(),
        ])
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_rows_jsonl(rows: &[RecordRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_rows_csv(rows: &[RecordRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidInput(e.to_string()))?;
    w.write_record([
        "sample_id",
        "dataset",
        "prediction",
        "gt_node",
        "gt_label",
        "mapped_node",
        "mapped_label",
        "stage",
        "hp",
        "hr",
        "overlap",
        "node_match",
        "label_match",
    ])
    .map_err(|e| Error::InvalidInput(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.sample_id.clone(),
            r.dataset.clone(),
            r.prediction.clone(),
            r.gt_node.clone(),
            r.gt_label.clone(),
            r.mapped_node.clone(),
            r.mapped_label.clone(),
            r.stage.clone(),
            r.hp.to_string(),
            r.hr.to_string(),
            r.overlap.to_string(),
            r.node_match.to_string(),
            r.label_match.to_string(),
        ])
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_map_rows_jsonl(rows: &[MapOutputRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
