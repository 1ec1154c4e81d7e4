//! Taxonomy file formats.
//!
//! Two line-delimited encodings are accepted, both UTF-8:
//!
//! * **TSV** — `id<TAB>parent_id<TAB>label<TAB>alt_labels`, where
//!   `parent_id` is empty for the root and `alt_labels` is a `|`-separated
//!   list (possibly empty).
//! * **JSONL** — one object per line:
//!   `{"id": ..., "parent_id": ... | null, "label": ..., "alt_labels": [...]}`.
//!
//! Saving writes the root first and the remaining nodes sorted by id, so a
//! save/load/save round trip is byte-identical.

use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{NodeRecord, TaxonomyTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaxonomyFormat {
    Tsv,
    Jsonl,
}

impl TaxonomyFormat {
    /// Guesses the format from a path extension, if recognizable.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => Some(TaxonomyFormat::Jsonl),
            Some("tsv") => Some(TaxonomyFormat::Tsv),
            _ => None,
        }
    }

    /// Guesses from content: lines starting with `{` are JSONL.
    fn sniff(content: &str) -> Self {
        match content
            .lines()
            .find(|l| !l.trim().is_empty())
            .map(|l| l.trim_start().starts_with('{'))
        {
            Some(true) => TaxonomyFormat::Jsonl,
            _ => TaxonomyFormat::Tsv,
        }
    }
}

/// Loads a taxonomy, detecting the encoding from the extension or content.
pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<TaxonomyTree> {
    let records = read_node_records(path)?;
    TaxonomyTree::from_records(&records)
}

/// Reads raw node records without validating tree structure.
///
/// Useful both for building trees and for node-metadata files whose parent
/// field is ignored.
pub fn read_node_records(path: impl AsRef<Path>) -> Result<Vec<NodeRecord>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let format = TaxonomyFormat::from_path(path).unwrap_or_else(|| TaxonomyFormat::sniff(&content));
    parse_node_records(&content, format, &path.display().to_string())
}

/// Reads node records from any reader in the given format.
pub fn read_node_records_from(reader: impl Read, format: TaxonomyFormat) -> Result<Vec<NodeRecord>> {
    let mut content = String::new();
    BufReader::new(reader)
        .read_to_string(&mut content)
        .map_err(|e| Error::io("<reader>", e))?;
    parse_node_records(&content, format, "<reader>")
}

fn parse_node_records(content: &str, format: TaxonomyFormat, path: &str) -> Result<Vec<NodeRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec = match format {
            TaxonomyFormat::Tsv => parse_tsv_line(line)
                .map_err(|msg| Error::parse(path, lineno, msg))?,
            TaxonomyFormat::Jsonl => serde_json::from_str::<NodeRecord>(line)
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?,
        };
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("no records in {path}")));
    }
    Ok(records)
}

fn parse_tsv_line(line: &str) -> std::result::Result<NodeRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!(
            "expected 4 tab-separated fields (id, parent_id, label, alt_labels), got {}",
            fields.len()
        ));
    }
    let alt_labels: Vec<String> = fields[3]
        .split('|')
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect();
    Ok(NodeRecord {
        id: fields[0].to_owned(),
        parent_id: if fields[1].is_empty() {
            None
        } else {
            Some(fields[1].to_owned())
        },
        label: fields[2].to_owned(),
        alt_labels,
    })
}

/// Canonical record order: root first, everything else sorted by id.
pub fn canonical_records(tree: &TaxonomyTree) -> Vec<NodeRecord> {
    let mut nodes: Vec<_> = tree.nodes().collect();
    let root = tree.root();
    nodes.sort_by_key(|&v| (v != root, tree.id(v).unwrap().to_owned()));
    nodes
        .into_iter()
        .map(|v| NodeRecord {
            id: tree.id(v).unwrap().to_owned(),
            parent_id: if v == root {
                None
            } else {
                Some(tree.id(tree.parent(v).unwrap()).unwrap().to_owned())
            },
            label: tree.label(v).unwrap().to_owned(),
            alt_labels: tree.alt_labels(v).unwrap().to_vec(),
        })
        .collect()
}

/// Saves a taxonomy in canonical order.
pub fn save_taxonomy(
    tree: &TaxonomyTree,
    path: impl AsRef<Path>,
    format: TaxonomyFormat,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    write_node_records(&canonical_records(tree), &mut out, format)?;
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Serializes records one per line in the given format.
pub fn write_node_records(
    records: &[NodeRecord],
    mut writer: impl Write,
    format: TaxonomyFormat,
) -> Result<()> {
    for rec in records {
        match format {
            TaxonomyFormat::Tsv => {
                if rec.id.contains('\t')
                    || rec.label.contains('\t')
                    || rec.alt_labels.iter().any(|a| a.contains('\t') || a.contains('|'))
                {
                    return Err(Error::InvalidInput(format!(
                        "record `{}` contains tab or `|`; use the JSONL encoding",
                        rec.id
                    )));
                }
                writeln!(
                    writer,
                    "{}\t{}\t{}\t{}",
                    rec.id,
                    rec.parent_id.as_deref().unwrap_or(""),
                    rec.label,
                    rec.alt_labels.join("|")
                )
            }
            TaxonomyFormat::Jsonl => {
                let json = serde_json::to_string(rec).expect("record serializes");
                writeln!(writer, "{json}")
            }
        }
        .map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}
