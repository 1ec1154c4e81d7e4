//! Text normalization and similarity measures.
//!
//! All measures operate on [`NormalizedText`] produced by [`normalize`]:
//! NFKC-normalized, lowercased, dashes turned into spaces, other punctuation
//! stripped, whitespace collapsed, and (optionally) each token stemmed with
//! the Snowball English stemmer. Stemming is applied to a fixed point so
//! that normalization is idempotent.
//!
//! Surface measures (`exact_match`, `contained`) and n-gram measures
//! (`rouge1`, `bleu2`, `meteor_like`) all score into `[0, 1]`. Cosine
//! similarity over precomputed embeddings lives in [`embedding`].

pub mod embedding;

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::OnceLock;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Tokenized, canonicalized text. Construct via [`normalize`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedText {
    pub tokens: Vec<String>,
    pub joined: String,
}

impl NormalizedText {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_dash(c: char) -> bool {
    matches!(
        c,
        '-' | '\u{2010}'..='\u{2015}' | '\u{2212}' | '\u{FE58}' | '\u{FE63}' | '\u{FF0D}'
    )
}

/// Normalizes a string into lowercase word tokens.
///
/// Empty input (or input that is all punctuation) yields an empty token
/// list; no error.
pub fn normalize(text: &str, stem: bool) -> NormalizedText {
    let mut cleaned = String::with_capacity(text.len());
    for ch in text.nfkc() {
        if is_dash(ch) {
            cleaned.push(' ');
            continue;
        }
        for lc in ch.to_lowercase() {
            if lc.is_alphanumeric() || lc.is_whitespace() {
                cleaned.push(lc);
            }
        }
    }
    let mut tokens: Vec<String> = cleaned.split_whitespace().map(str::to_owned).collect();
    if stem {
        for t in &mut tokens {
            *t = stem_token(t);
        }
    }
    let joined = tokens.join(" ");
    NormalizedText { tokens, joined }
}

/// Stems one lowercase token with the Snowball English (Porter-family)
/// stemmer, iterated to a fixed point.
pub fn stem_token(token: &str) -> String {
    static STEMMER: OnceLock<rust_stemmers::Stemmer> = OnceLock::new();
    let stemmer =
        STEMMER.get_or_init(|| rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English));
    let mut cur = token.to_owned();
    for _ in 0..4 {
        let next = stemmer.stem(&cur).into_owned();
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// 1 iff the two normalized strings are identical.
pub fn exact_match(a: &NormalizedText, b: &NormalizedText) -> f64 {
    if a.joined == b.joined {
        1.0
    } else {
        0.0
    }
}

/// 1 iff the label occurs as a contiguous substring of the prediction.
pub fn contained(label: &NormalizedText, prediction: &NormalizedText) -> f64 {
    if prediction.joined.contains(&label.joined) {
        1.0
    } else {
        0.0
    }
}

/// Unigram recall: clipped matched-unigram count over reference unigrams.
///
/// An empty reference leaves the measure undefined.
pub fn rouge1(reference: &NormalizedText, prediction: &NormalizedText) -> Result<f64> {
    if reference.tokens.is_empty() {
        return Err(Error::UndefinedMeasure(
            "rouge1 requires a non-empty reference".into(),
        ));
    }
    let mut pred_counts: HashMap<&str, usize> = HashMap::new();
    for t in &prediction.tokens {
        *pred_counts.entry(t).or_insert(0) += 1;
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in &reference.tokens {
        *ref_counts.entry(t).or_insert(0) += 1;
    }
    let matched: usize = ref_counts
        .iter()
        .map(|(t, &rc)| rc.min(pred_counts.get(t).copied().unwrap_or(0)))
        .sum();
    Ok(matched as f64 / reference.tokens.len() as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        *counts.entry(window.join(" ")).or_insert(0) += 1;
    }
    counts
}

// Add-one smoothing on the clipped n-gram counts.
fn smoothed_precision(reference: &[String], prediction: &[String], n: usize) -> f64 {
    let ref_counts = ngram_counts(reference, n);
    let pred_counts = ngram_counts(prediction, n);
    let total: usize = pred_counts.values().sum();
    let clipped: usize = pred_counts
        .iter()
        .map(|(g, &pc)| pc.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    (clipped + 1) as f64 / (total + 1) as f64
}

/// BLEU with unigrams and bigrams: geometric mean of the two add-one
/// smoothed clipped precisions times the brevity penalty.
///
/// Degenerate inputs (either side empty) score 0.
pub fn bleu2(reference: &NormalizedText, prediction: &NormalizedText) -> f64 {
    let c = prediction.tokens.len();
    let r = reference.tokens.len();
    if c == 0 || r == 0 {
        return 0.0;
    }
    let p1 = smoothed_precision(&reference.tokens, &prediction.tokens, 1);
    let p2 = smoothed_precision(&reference.tokens, &prediction.tokens, 2);
    let bp = if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * (p1 * p2).sqrt()
}

// Greedy unigram alignment for one matching stage. Prediction positions are
// taken in order; each unmatched position takes the leftmost unmatched
// reference position with an equal token.
fn match_stage<T: PartialEq>(
    pred: &[T],
    refr: &[T],
    ref_used: &mut [bool],
    align: &mut [Option<usize>],
) {
    for (i, tok) in pred.iter().enumerate() {
        if align[i].is_some() {
            continue;
        }
        if let Some(j) = (0..refr.len()).find(|&j| !ref_used[j] && refr[j] == *tok) {
            ref_used[j] = true;
            align[i] = Some(j);
        }
    }
}

/// Unigram precision/recall harmonic mean with a chunk-based alignment
/// penalty. Matching runs in two stages, exact then stemmed; no synonym or
/// paraphrase stage.
///
/// `score = F_mean * (1 - gamma * (chunks / matches)^beta)` with
/// `F_mean = P*R / (alpha*P + (1-alpha)*R)`, `alpha=0.9`, `beta=3`,
/// `gamma=0.5`. Zero matches score 0.
pub fn meteor_like(reference: &NormalizedText, prediction: &NormalizedText) -> f64 {
    const ALPHA: f64 = 0.9;
    const BETA: f64 = 3.0;
    const GAMMA: f64 = 0.5;

    let pred = &prediction.tokens;
    let refr = &reference.tokens;
    if pred.is_empty() || refr.is_empty() {
        return 0.0;
    }

    let mut ref_used = vec![false; refr.len()];
    let mut align: Vec<Option<usize>> = vec![None; pred.len()];
    match_stage(pred, refr, &mut ref_used, &mut align);
    let pred_stems: Vec<String> = pred.iter().map(|t| stem_token(t)).collect();
    let ref_stems: Vec<String> = refr.iter().map(|t| stem_token(t)).collect();
    // Second stage only fills positions the exact stage left unmatched.
    for (i, stem) in pred_stems.iter().enumerate() {
        if align[i].is_some() {
            continue;
        }
        if let Some(j) = (0..refr.len()).find(|&j| !ref_used[j] && ref_stems[j] == *stem) {
            ref_used[j] = true;
            align[i] = Some(j);
        }
    }

    let pairs: Vec<(usize, usize)> = align
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|j| (i, j)))
        .collect();
    if pairs.is_empty() {
        return 0.0;
    }
    let m = pairs.len() as f64;
    let p = m / pred.len() as f64;
    let r = m / refr.len() as f64;
    let f_mean = p * r / (ALPHA * p + (1.0 - ALPHA) * r);

    let mut chunks = 1usize;
    for w in pairs.windows(2) {
        if !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1) {
            chunks += 1;
        }
    }
    let penalty = GAMMA * (chunks as f64 / m).powf(BETA);
    f_mean * (1.0 - penalty)
}

/// The string-based measure kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextMeasureKind {
    ExactMatch,
    Contained,
    Rouge1,
    Bleu2,
    Meteor,
}

impl TextMeasureKind {
    pub const ALL: [TextMeasureKind; 5] = [
        TextMeasureKind::ExactMatch,
        TextMeasureKind::Contained,
        TextMeasureKind::Rouge1,
        TextMeasureKind::Bleu2,
        TextMeasureKind::Meteor,
    ];

    /// Whether inputs are stemmed by default. The meteor-style measure has
    /// its own internal stem stage and never pre-stems.
    pub fn stems_by_default(self) -> bool {
        !matches!(self, TextMeasureKind::Meteor)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TextMeasureKind::ExactMatch => "exact",
            TextMeasureKind::Contained => "contained",
            TextMeasureKind::Rouge1 => "rouge1",
            TextMeasureKind::Bleu2 => "bleu2",
            TextMeasureKind::Meteor => "meteor",
        }
    }
}

impl FromStr for TextMeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "em" | "exact-match" => Ok(TextMeasureKind::ExactMatch),
            "contained" => Ok(TextMeasureKind::Contained),
            "rouge1" | "rouge" => Ok(TextMeasureKind::Rouge1),
            "bleu2" | "bleu" => Ok(TextMeasureKind::Bleu2),
            "meteor" => Ok(TextMeasureKind::Meteor),
            other => Err(Error::Config(format!("unknown text measure `{other}`"))),
        }
    }
}

/// A configured string measure: kind plus the stemming switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextMeasure {
    pub kind: TextMeasureKind,
    pub stem: bool,
}

impl TextMeasure {
    pub fn new(kind: TextMeasureKind) -> Self {
        TextMeasure {
            kind,
            stem: kind.stems_by_default(),
        }
    }

    pub fn with_stem(kind: TextMeasureKind, stem: bool) -> Self {
        TextMeasure { kind, stem }
    }

    fn stem_inputs(&self) -> bool {
        self.stem && self.kind != TextMeasureKind::Meteor
    }

    /// Normalizes text the way this measure expects its inputs.
    pub fn normalize(&self, text: &str) -> NormalizedText {
        normalize(text, self.stem_inputs())
    }

    /// Scores a raw (label, prediction) string pair.
    pub fn score(&self, label: &str, prediction: &str) -> Result<f64> {
        self.score_normalized(&self.normalize(label), &self.normalize(prediction))
    }

    /// Scores pre-normalized inputs; they must come from [`Self::normalize`].
    pub fn score_normalized(
        &self,
        label: &NormalizedText,
        prediction: &NormalizedText,
    ) -> Result<f64> {
        Ok(match self.kind {
            TextMeasureKind::ExactMatch => exact_match(label, prediction),
            TextMeasureKind::Contained => contained(label, prediction),
            TextMeasureKind::Rouge1 => rouge1(label, prediction)?,
            TextMeasureKind::Bleu2 => bleu2(label, prediction),
            TextMeasureKind::Meteor => meteor_like(label, prediction),
        })
    }
}
