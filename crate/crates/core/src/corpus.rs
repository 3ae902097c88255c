//! Token-labeled corpora: parsing, validation, serialization and entity spans.
//!
//! Labels are raw entity types (`MAT`, `PP`, `DESC`, ...) plus the outside
//! label `O`. An entity is a maximal run of identical non-`O` labels, so
//! `Oxalic/MAT acid/MAT` is a single two-token entity. BIO-prefixed input
//! (`B-MAT`, `I-MAT`) is normalized to raw labels when parsed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The outside label.
pub const OUTSIDE: &str = "O";

/// Upper bound on the number of distinct entity types a corpus may declare.
pub const MAX_ENTITY_TYPES: usize = 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: malformed line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: {tokens} tokens but {labels} labels")]
    LengthMismatch {
        line: usize,
        tokens: usize,
        labels: usize,
    },
    #[error("line {line}: empty sentence")]
    EmptySentence { line: usize },
    #[error("decode error: {0}")]
    DecodeError(String),
    #[error("invalid token {0:?}: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("label {label:?} is not in the corpus label set")]
    UndeclaredLabel { label: String },
    #[error("line {line}: {label} follows a different entity type")]
    InvalidBio { line: usize, label: String },
    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),
    #[error("too many entity types ({0}, limit {MAX_ENTITY_TYPES})")]
    TooManyLabels(usize),
}

/// On-disk corpus formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    /// `token<TAB>label` per line, blank line between sentences.
    #[default]
    Conll,
    /// One `{"id", "tokens", "labels"}` object per line.
    Jsonl,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conll" => Ok(Format::Conll),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format {other:?} (expected conll or jsonl)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Conll => "conll",
            Format::Jsonl => "jsonl",
        })
    }
}

/// A sentence with one label per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
}

impl LabeledSentence {
    /// Builds a sentence, checking token and label well-formedness.
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        labels: Vec<String>,
    ) -> Result<Self, CorpusError> {
        if tokens.len() != labels.len() {
            return Err(CorpusError::LengthMismatch {
                line: 0,
                tokens: tokens.len(),
                labels: labels.len(),
            });
        }
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence { line: 0 });
        }
        for token in &tokens {
            validate_token(token)?;
        }
        for label in &labels {
            validate_label(label)?;
        }
        Ok(Self {
            id: id.into(),
            tokens,
            labels,
        })
    }

    /// Convenience constructor from `&str` slices.
    pub fn from_strs(id: &str, tokens: &[&str], labels: &[&str]) -> Result<Self, CorpusError> {
        Self::new(
            id,
            tokens.iter().map(|t| t.to_string()).collect(),
            labels.iter().map(|l| l.to_string()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

fn validate_token(token: &str) -> Result<(), CorpusError> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err(CorpusError::InvalidToken(token.to_string()));
    }
    Ok(())
}

fn validate_label(label: &str) -> Result<(), CorpusError> {
    if label.is_empty() || label.chars().any(char::is_whitespace) {
        return Err(CorpusError::InvalidLabel(label.to_string()));
    }
    Ok(())
}

/// A contiguous typed run of tokens, `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
    pub surface: Vec<String>,
}

impl EntitySpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn surface_text(&self) -> String {
        self.surface.join(" ")
    }
}

/// An ordered collection of sentences sharing a label inventory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    sentences: Vec<LabeledSentence>,
    label_set: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus whose label set is every non-`O` label in use.
    pub fn new(sentences: Vec<LabeledSentence>) -> Result<Self, CorpusError> {
        let label_set = sentences
            .iter()
            .flat_map(|s| s.labels.iter())
            .filter(|l| l.as_str() != OUTSIDE)
            .cloned()
            .collect();
        Self::with_label_set(sentences, label_set)
    }

    /// Builds a corpus against an explicitly declared label set.
    pub fn with_label_set(
        sentences: Vec<LabeledSentence>,
        label_set: BTreeSet<String>,
    ) -> Result<Self, CorpusError> {
        if label_set.len() > MAX_ENTITY_TYPES {
            return Err(CorpusError::TooManyLabels(label_set.len()));
        }
        if label_set.contains(OUTSIDE) {
            return Err(CorpusError::InvalidLabel(OUTSIDE.to_string()));
        }
        let mut seen = HashSet::with_capacity(sentences.len());
        for sentence in &sentences {
            if !seen.insert(sentence.id.as_str()) {
                return Err(CorpusError::DuplicateId(sentence.id.clone()));
            }
            for label in &sentence.labels {
                if label != OUTSIDE && !label_set.contains(label) {
                    return Err(CorpusError::UndeclaredLabel {
                        label: label.clone(),
                    });
                }
            }
        }
        Ok(Self {
            sentences,
            label_set,
        })
    }

    pub fn sentences(&self) -> &[LabeledSentence] {
        &self.sentences
    }

    pub fn label_set(&self) -> &BTreeSet<String> {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn into_sentences(self) -> Vec<LabeledSentence> {
        self.sentences
    }
}

/// Parses a corpus from UTF-8 bytes.
pub fn parse_corpus(bytes: &[u8], format: Format) -> Result<Corpus, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::DecodeError(e.to_string()))?;
    let sentences = match format {
        Format::Conll => parse_conll(text)?,
        Format::Jsonl => parse_jsonl(text)?,
    };
    Corpus::new(sentences)
}

fn parse_conll(text: &str) -> Result<Vec<LabeledSentence>, CorpusError> {
    let mut sentences = Vec::new();
    if text.is_empty() {
        return Ok(sentences);
    }
    let line_count = text.split('\n').count() - 1;
    if !text.ends_with('\n') {
        return Err(CorpusError::MalformedLine {
            line: line_count + 1,
            reason: "missing final newline".into(),
        });
    }

    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let mut first_line = 0;
    // The trailing piece after the final '\n' is always empty; skip it.
    for (idx, line) in text.split('\n').take(line_count).enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            if !tokens.is_empty() {
                sentences.push(finish_conll_sentence(
                    sentences.len(),
                    std::mem::take(&mut tokens),
                    std::mem::take(&mut labels),
                    first_line,
                )?);
            }
            continue;
        }
        let mut cols = line.split('\t');
        let (token, label) = match (cols.next(), cols.next(), cols.next()) {
            (Some(t), Some(l), None) => (t, l),
            _ => {
                return Err(CorpusError::MalformedLine {
                    line: lineno,
                    reason: "expected exactly two tab-separated columns".into(),
                })
            }
        };
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(CorpusError::MalformedLine {
                line: lineno,
                reason: format!("invalid token {token:?}"),
            });
        }
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(CorpusError::MalformedLine {
                line: lineno,
                reason: format!("invalid label {label:?}"),
            });
        }
        if tokens.is_empty() {
            first_line = lineno;
        }
        tokens.push(token.to_string());
        labels.push(label.to_string());
    }
    if !tokens.is_empty() {
        sentences.push(finish_conll_sentence(
            sentences.len(),
            tokens,
            labels,
            first_line,
        )?);
    }
    Ok(sentences)
}

fn finish_conll_sentence(
    ordinal: usize,
    tokens: Vec<String>,
    labels: Vec<String>,
    line: usize,
) -> Result<LabeledSentence, CorpusError> {
    let labels = normalize_bio(&labels, line)?;
    Ok(LabeledSentence {
        id: ordinal.to_string(),
        tokens,
        labels,
    })
}

#[derive(Deserialize)]
struct JsonRecord {
    id: Option<String>,
    tokens: Vec<String>,
    labels: Vec<String>,
}

#[derive(Serialize)]
struct JsonRecordRef<'a> {
    id: &'a str,
    tokens: &'a [String],
    labels: &'a [String],
}

fn parse_jsonl(text: &str) -> Result<Vec<LabeledSentence>, CorpusError> {
    let mut sentences = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord = serde_json::from_str(line)
            .map_err(|e| CorpusError::DecodeError(format!("line {lineno}: {e}")))?;
        if record.tokens.len() != record.labels.len() {
            return Err(CorpusError::LengthMismatch {
                line: lineno,
                tokens: record.tokens.len(),
                labels: record.labels.len(),
            });
        }
        if record.tokens.is_empty() {
            return Err(CorpusError::EmptySentence { line: lineno });
        }
        for token in &record.tokens {
            validate_token(token)?;
        }
        for label in &record.labels {
            validate_label(label)?;
        }
        let labels = normalize_bio(&record.labels, lineno)?;
        let id = record.id.unwrap_or_else(|| sentences.len().to_string());
        sentences.push(LabeledSentence {
            id,
            tokens: record.tokens,
            labels,
        });
    }
    Ok(sentences)
}

/// Strips `B-`/`I-` prefixes. `I-X` directly after a different entity type
/// is rejected; `I-X` after `O` or at the start is accepted (IOB1).
fn normalize_bio(labels: &[String], line: usize) -> Result<Vec<String>, CorpusError> {
    let mut out: Vec<String> = Vec::with_capacity(labels.len());
    for label in labels {
        let raw = if let Some(rest) = label.strip_prefix("B-") {
            rest
        } else if let Some(rest) = label.strip_prefix("I-") {
            if let Some(prev) = out.last() {
                if prev != OUTSIDE && prev != rest {
                    return Err(CorpusError::InvalidBio {
                        line,
                        label: label.clone(),
                    });
                }
            }
            rest
        } else {
            label.as_str()
        };
        if raw.is_empty() {
            return Err(CorpusError::InvalidLabel(label.clone()));
        }
        out.push(raw.to_string());
    }
    Ok(out)
}

/// Serializes a corpus. Output always re-parses to the same sentences.
pub fn write_corpus(corpus: &Corpus, format: Format) -> String {
    write_sentences(corpus.sentences(), format)
}

/// Serializes any sentence sequence in the given format.
pub fn write_sentences<'a, I>(sentences: I, format: Format) -> String
where
    I: IntoIterator<Item = &'a LabeledSentence>,
{
    let mut out = String::new();
    for sentence in sentences {
        match format {
            Format::Conll => {
                for (token, label) in sentence.tokens.iter().zip(&sentence.labels) {
                    out.push_str(token);
                    out.push('\t');
                    out.push_str(label);
                    out.push('\n');
                }
                out.push('\n');
            }
            Format::Jsonl => {
                let record = JsonRecordRef {
                    id: &sentence.id,
                    tokens: &sentence.tokens,
                    labels: &sentence.labels,
                };
                // Strings and string slices always serialize.
                out.push_str(&serde_json::to_string(&record).expect("serializable record"));
                out.push('\n');
            }
        }
    }
    out
}

/// Maximal runs of identical non-`O` labels, left to right.
pub fn extract_entity_spans(sentence: &LabeledSentence) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let labels = &sentence.labels;
    let mut i = 0;
    while i < labels.len() {
        if labels[i] == OUTSIDE {
            i += 1;
            continue;
        }
        let start = i;
        while i < labels.len() && labels[i] == labels[start] {
            i += 1;
        }
        spans.push(EntitySpan {
            start,
            end: i,
            entity_type: labels[start].clone(),
            surface: sentence.tokens[start..i].to_vec(),
        });
    }
    spans
}

/// Per-label token counts of a sentence, `O` included.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelMultiset {
    counts: BTreeMap<String, usize>,
    total: usize,
}

impl LabelMultiset {
    pub fn count(&self, label: &str) -> usize {
        self.counts.get(label).copied().unwrap_or(0)
    }

    /// Total multiplicity.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Size of the multiset intersection (per-label minimum).
    pub fn intersection_size(&self, other: &LabelMultiset) -> usize {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .map(|(label, &n)| n.min(large.count(label)))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(l, &n)| (l.as_str(), n))
    }
}

impl<'a> FromIterator<&'a str> for LabelMultiset {
    fn from_iter<T: IntoIterator<Item = &'a str>>(iter: T) -> Self {
        let mut set = LabelMultiset::default();
        for label in iter {
            *set.counts.entry(label.to_string()).or_default() += 1;
            set.total += 1;
        }
        set
    }
}

pub fn label_multiset(sentence: &LabeledSentence) -> LabelMultiset {
    sentence.labels.iter().map(String::as_str).collect()
}

/// Label sequence with each entity run collapsed to one symbol.
pub fn collapsed_labels(sentence: &LabeledSentence) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    let mut prev: Option<&str> = None;
    for label in &sentence.labels {
        let label = label.as_str();
        if label == OUTSIDE || prev != Some(label) {
            out.push(label);
        }
        prev = Some(label);
    }
    out
}
