//! `taxeval`: taxonomy-aware evaluation of free-text predictions.
//!
//! Exit codes: 0 success, 1 input error, 2 internal invariant violation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use taxeval::extract::{
    extract_tree, label_map_from_records, read_edge_file, read_id_list, EdgeList, ExtractionConfig,
};
use taxeval::harness::{
    build_scorer, read_predictions, run_eval, run_map, write_map_rows_jsonl, write_report_csv,
    write_report_json, write_rows_csv, write_rows_jsonl, EvalOptions, EvalReport, MeasureSpec,
};
use taxeval::mapper::{Mapper, MapperParams};
use taxeval::synthbench::{
    read_pair_samples, run_correlation, sample_pairs, write_pair_samples, CorrelationMeasure,
    CorrelationReport, SampleMode,
};
use taxeval::taxonomy::io::{load_taxonomy, read_node_records, save_taxonomy, TaxonomyFormat};
use taxeval::taxonomy::{validate_records, TaxonomyTree};
use taxeval::textsim::embedding::{EmbeddingTable, PairwiseScores};
use taxeval::textsim::TextMeasure;

#[derive(Parser)]
#[command(name = "taxeval", version, about = "Taxonomy-aware evaluation of free-text predictions")]
struct Cli {
    /// RNG seed for seeded subcommands (extract, sample-pairs).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for mapping (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Encoding of per-record output tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a rooted taxonomy from a subclass edge list.
    Extract {
        /// Edge file: one `child_id<TAB>parent_id` per line.
        #[arg(long)]
        edges: PathBuf,
        /// Node metadata in the taxonomy format (parent field ignored).
        #[arg(long)]
        nodes: Option<PathBuf>,
        /// Root node id.
        #[arg(long)]
        root: String,
        /// File of node ids to exclude, one per line.
        #[arg(long)]
        exclude: Option<PathBuf>,
        /// Output taxonomy file (.tsv or .jsonl).
        #[arg(long)]
        out: PathBuf,
    },

    /// Check a taxonomy file and list structural violations.
    Validate {
        /// Taxonomy file (TSV or JSONL).
        taxonomy: PathBuf,
    },

    /// Map predictions onto taxonomy nodes, keeping the full trace.
    Map {
        #[arg(long)]
        taxonomy: PathBuf,
        /// Predictions JSONL: {"sample_id", "prediction", ...}.
        #[arg(long)]
        predictions: PathBuf,
        /// exact | contained | rouge1 | bleu2 | meteor | embed-cosine.
        #[arg(long, default_value = "rouge1")]
        measure: String,
        /// Embedding table (required for embed-cosine).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Mapper parameters, e.g. k=10,thr_topk=0.0015,thr_top2=0.001,thr_vote=4.
        #[arg(long, default_value = "")]
        params: String,
        /// Trim this prefix from predictions (e.g. "A:").
        #[arg(long)]
        strip_prefix: Option<String>,
        /// Output JSONL with one mapping per record.
        #[arg(long)]
        out: PathBuf,
    },

    /// Map predictions and score them against ground-truth nodes.
    Eval(EvalArgs),

    /// Score mapped nodes against human-annotated gold nodes for the text.
    MapQuality(EvalArgs),

    /// Sample reference-candidate node pairs with controlled distances.
    SamplePairs {
        #[arg(long)]
        taxonomy: PathBuf,
        /// Number of pairs to draw.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        max_dist: usize,
        /// hp (any candidate) or hr (ancestors only).
        #[arg(long)]
        mode: String,
        /// Output JSONL of pair samples.
        #[arg(long)]
        out: PathBuf,
    },

    /// Correlate similarity measures with the hierarchical metrics.
    BenchCorrelation {
        #[arg(long)]
        taxonomy: PathBuf,
        /// Pair-sample JSONL produced by sample-pairs.
        #[arg(long)]
        pairs: PathBuf,
        /// Comma list of measures (exact,contained,rouge1,bleu2,meteor,embed-cosine).
        #[arg(long, default_value = "exact,contained,rouge1,bleu2,meteor")]
        measures: String,
        /// External score files as name=path, repeatable.
        #[arg(long = "scores", value_name = "NAME=PATH")]
        scores: Vec<String>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Output report (JSON; a CSV twin is written with --format csv).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    taxonomy: PathBuf,
    /// Predictions JSONL with gt_node set on every record.
    #[arg(long)]
    predictions: PathBuf,
    /// exact | contained | rouge1 | bleu2 | meteor | embed-cosine.
    #[arg(long, default_value = "rouge1")]
    measure: String,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Mapper parameters, e.g. k=10,thr_topk=0.0015,thr_top2=0.001,thr_vote=4.
    #[arg(long, default_value = "")]
    params: String,
    /// Trim this prefix from predictions (e.g. "A:").
    #[arg(long)]
    strip_prefix: Option<String>,
    /// Skip records with unresolvable gt_node instead of aborting.
    #[arg(long)]
    skip_bad: bool,
    /// Output prefix: writes <out>.report.json, <out>.report.csv and a
    /// per-record table.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let code = match std::panic::catch_unwind(run) {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            1
        }
        Err(_) => {
            eprintln!("internal error: invariant violated");
            2
        }
    };
    std::process::exit(code);
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Extract {
            edges,
            nodes,
            root,
            exclude,
            out,
        } => cmd_extract(&edges, nodes.as_deref(), &root, exclude.as_deref(), cli.seed, &out),
        Command::Validate { taxonomy } => cmd_validate(&taxonomy),
        Command::Map {
            taxonomy,
            predictions,
            measure,
            embeddings,
            params,
            strip_prefix,
            out,
        } => cmd_map(
            &taxonomy,
            &predictions,
            &measure,
            embeddings.as_deref(),
            &params,
            strip_prefix,
            &out,
        ),
        Command::Eval(args) => cmd_eval(&args, cli.format, "eval"),
        Command::MapQuality(args) => cmd_eval(&args, cli.format, "map-quality"),
        Command::SamplePairs {
            taxonomy,
            n,
            max_dist,
            mode,
            out,
        } => cmd_sample_pairs(&taxonomy, n, max_dist, &mode, cli.seed, &out),
        Command::BenchCorrelation {
            taxonomy,
            pairs,
            measures,
            scores,
            embeddings,
            out,
        } => cmd_bench(
            &taxonomy,
            &pairs,
            &measures,
            &scores,
            embeddings.as_deref(),
            cli.format,
            &out,
        ),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(())
}

fn cmd_extract(
    edges: &Path,
    nodes: Option<&Path>,
    root: &str,
    exclude: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let edge_pairs = read_edge_file(edges)?;
    let labels = nodes.map(read_node_records).transpose()?.map(|records| {
        label_map_from_records(&records)
    });
    let exclude = exclude.map(read_id_list).transpose()?.unwrap_or_default();
    let graph = EdgeList::new(edge_pairs, root);
    let cfg = ExtractionConfig {
        rng_seed: seed,
        exclude,
    };
    let (tree, stats) = extract_tree(&graph, &cfg, labels.as_ref())?;
    ensure_parent(out)?;
    let format = TaxonomyFormat::from_path(out).unwrap_or(TaxonomyFormat::Tsv);
    save_taxonomy(&tree, out, format)?;
    println!(
        "extracted {} nodes -> {} (unreachable dropped: {}, duplicate edges: {}, missing labels: {})",
        stats.nodes_kept,
        out.display(),
        stats.unreachable_dropped,
        stats.duplicate_edges_dropped,
        stats.missing_labels,
    );
    Ok(())
}

fn cmd_validate(taxonomy: &Path) -> Result<()> {
    let records = read_node_records(taxonomy)?;
    let violations = validate_records(&records);
    if violations.is_empty() {
        println!("OK: {} nodes", records.len());
        return Ok(());
    }
    for v in &violations {
        println!("violation: {v}");
    }
    bail!("{} violation(s) in {}", violations.len(), taxonomy.display());
}

struct MapperSetup {
    tree: TaxonomyTree,
    params: MapperParams,
    measure: String,
}

fn load_mapper_inputs(
    taxonomy: &Path,
    measure: &str,
    params: &str,
) -> Result<(MapperSetup, MeasureSpec)> {
    let tree = load_taxonomy(taxonomy)?;
    let params = MapperParams::parse(params)?;
    let spec: MeasureSpec = measure.parse()?;
    Ok((
        MapperSetup {
            tree,
            params,
            measure: spec.as_str().to_owned(),
        },
        spec,
    ))
}

fn cmd_map(
    taxonomy: &Path,
    predictions: &Path,
    measure: &str,
    embeddings: Option<&Path>,
    params: &str,
    strip_prefix: Option<String>,
    out: &Path,
) -> Result<()> {
    let (setup, spec) = load_mapper_inputs(taxonomy, measure, params)?;
    let table = embeddings.map(EmbeddingTable::load).transpose()?;
    let scorer = build_scorer(&setup.tree, spec, setup.params.stem, table)?;
    let mapper = Mapper::new(&setup.tree, scorer, setup.params)?;
    let records = read_predictions(predictions)?;
    let rows = run_map(
        &mapper,
        &records,
        &EvalOptions {
            strip_prefix,
            skip_bad: false,
        },
    )?;
    ensure_parent(out)?;
    write_map_rows_jsonl(&rows, out)?;
    println!("mapped {} predictions -> {}", rows.len(), out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs, format: Format, what: &str) -> Result<()> {
    let (setup, spec) = load_mapper_inputs(&args.taxonomy, &args.measure, &args.params)?;
    let table = args.embeddings.as_deref().map(EmbeddingTable::load).transpose()?;
    let scorer = build_scorer(&setup.tree, spec, setup.params.stem, table)?;
    let mapper = Mapper::new(&setup.tree, scorer, setup.params)?;
    let records = read_predictions(&args.predictions)?;
    let mut report = run_eval(
        &mapper,
        &records,
        &EvalOptions {
            strip_prefix: args.strip_prefix.clone(),
            skip_bad: args.skip_bad,
        },
    )?;
    report.measure = setup.measure;
    assert_report_consistent(&report);

    ensure_parent(&args.out)?;
    let base = args.out.display();
    write_report_json(&report, PathBuf::from(format!("{base}.report.json")))?;
    write_report_csv(&report, PathBuf::from(format!("{base}.report.csv")))?;
    match format {
        Format::Json => write_rows_jsonl(&report.rows, PathBuf::from(format!("{base}.records.jsonl")))?,
        Format::Csv => write_rows_csv(&report.rows, PathBuf::from(format!("{base}.records.csv")))?,
    }
    println!(
        "{what}: n={} hP={:.4} hR={:.4} hF={:.4} node-accuracy={:.4} (skipped {})",
        report.overall.n,
        report.overall.hp_mean,
        report.overall.hr_mean,
        report.overall.hf,
        report.overall.node_accuracy,
        report.skipped.len(),
    );
    Ok(())
}

// The aggregates must be recomputable from the rows; a mismatch is an
// internal invariant violation (exit code 2), not an input problem.
fn assert_report_consistent(report: &EvalReport) {
    let n = report.rows.len();
    assert!(n == report.overall.n, "row count mismatch");
    let hp: f64 = report.rows.iter().map(|r| r.hp).sum::<f64>() / n as f64;
    let hr: f64 = report.rows.iter().map(|r| r.hr).sum::<f64>() / n as f64;
    assert!(
        (hp - report.overall.hp_mean).abs() < 1e-12
            && (hr - report.overall.hr_mean).abs() < 1e-12,
        "aggregate not recomputable from rows"
    );
}

fn cmd_sample_pairs(
    taxonomy: &Path,
    n: usize,
    max_dist: usize,
    mode: &str,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let tree = load_taxonomy(taxonomy)?;
    let mode: SampleMode = mode.parse()?;
    let samples = sample_pairs(&tree, n, max_dist, mode, seed)?;
    ensure_parent(out)?;
    write_pair_samples(&tree, &samples, out)?;
    println!("sampled {} {} pairs -> {}", samples.len(), mode.as_str(), out.display());
    Ok(())
}

fn cmd_bench(
    taxonomy: &Path,
    pairs: &Path,
    measures: &str,
    scores: &[String],
    embeddings: Option<&Path>,
    format: Format,
    out: &Path,
) -> Result<()> {
    let tree = load_taxonomy(taxonomy)?;
    let samples = read_pair_samples(&tree, pairs)?;

    let embed_table = embeddings.map(EmbeddingTable::load).transpose()?;
    let mut external: Vec<(String, PairwiseScores)> = Vec::new();
    for item in scores {
        let (name, path) = item
            .split_once('=')
            .with_context(|| format!("--scores expects NAME=PATH, got `{item}`"))?;
        external.push((name.to_owned(), PairwiseScores::load(path)?));
    }

    let mut list: Vec<CorrelationMeasure<'_>> = Vec::new();
    for name in measures.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        match name.parse::<MeasureSpec>()? {
            MeasureSpec::Text(kind) => list.push(CorrelationMeasure::Text(TextMeasure::new(kind))),
            MeasureSpec::EmbedCosine => {
                let table = embed_table
                    .as_ref()
                    .context("measure embed-cosine requires --embeddings")?;
                list.push(CorrelationMeasure::EmbedCosine(table));
            }
        }
    }
    for (name, scores) in &external {
        list.push(CorrelationMeasure::External {
            name: name.clone(),
            scores,
        });
    }
    if list.is_empty() {
        bail!("no measures requested");
    }

    let report = run_correlation(&tree, &samples, &list)?;
    ensure_parent(out)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    std::fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    if format == Format::Csv {
        write_correlation_csv(&report, &PathBuf::from(format!("{}.csv", out.display())))?;
    }
    for entry in &report.entries {
        match (&entry.tau, &entry.error) {
            (Some(tau), _) => println!(
                "{} vs {}: tau-b={:.4} (n={}, p={:.2e})",
                entry.measure,
                entry.target,
                tau,
                entry.n,
                entry.p_value.unwrap_or(f64::NAN)
            ),
            (None, Some(err)) => println!("{} vs {}: {}", entry.measure, entry.target, err),
            (None, None) => unreachable!("entry carries either tau or an error"),
        }
    }
    Ok(())
}

fn write_correlation_csv(report: &CorrelationReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["measure", "mode", "target", "n", "tau", "p_value", "error"])?;
    for e in &report.entries {
        w.write_record([
            e.measure.clone(),
            e.mode.clone(),
            e.target.clone(),
            e.n.to_string(),
            e.tau.map(|t| t.to_string()).unwrap_or_default(),
            e.p_value.map(|p| p.to_string()).unwrap_or_default(),
            e.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
