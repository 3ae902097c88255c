//! Scores used to rank candidate source sentences against an input sentence.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::corpus::{extract_entity_spans, label_multiset, EntitySpan, LabelMultiset, LabeledSentence};
use crate::embeddings::{cosine, mean_vector, EmbeddingTable, OovPolicy};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("predicate set is empty")]
    EmptyPredicateSet,
}

/// A similarity (or distance) value. `comparable` is false when the value
/// is undefined, e.g. because every word involved was out of vocabulary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore {
    pub value: f64,
    pub comparable: bool,
}

impl SimilarityScore {
    pub fn new(value: f64) -> Self {
        debug_assert!(value.is_finite());
        Self {
            value,
            comparable: true,
        }
    }

    pub fn incomparable() -> Self {
        Self {
            value: 0.0,
            comparable: false,
        }
    }

    /// `Some(value)` when comparable.
    pub fn get(self) -> Option<f64> {
        self.comparable.then_some(self.value)
    }
}

/// Multiset overlap of two label sequences, normalized by the longer length.
pub fn label_overlap(input: &LabeledSentence, candidate: &LabeledSentence) -> f64 {
    overlap_of(&label_multiset(input), &label_multiset(candidate))
}

pub(crate) fn overlap_of(a: &LabelMultiset, b: &LabelMultiset) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    a.intersection_size(b) as f64 / longest as f64
}

/// The process predicates of a sentence: spans whose type is a pattern label.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateSet {
    predicates: Vec<EntitySpan>,
}

impl PredicateSet {
    pub fn new(predicates: Vec<EntitySpan>) -> Result<Self, SimilarityError> {
        if predicates.is_empty() {
            return Err(SimilarityError::EmptyPredicateSet);
        }
        Ok(Self { predicates })
    }

    /// Predicates of `sentence`; `None` if it has none.
    pub fn from_sentence(sentence: &LabeledSentence, pattern_labels: &BTreeSet<String>) -> Option<Self> {
        let predicates: Vec<_> = extract_entity_spans(sentence)
            .into_iter()
            .filter(|s| pattern_labels.contains(&s.entity_type))
            .collect();
        Self::new(predicates).ok()
    }

    pub fn spans(&self) -> &[EntitySpan] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }
}

/// Cosine of the mean vectors of two spans' surfaces.
pub fn sim_predicate(
    table: &EmbeddingTable,
    p: &EntitySpan,
    q: &EntitySpan,
    policy: OovPolicy,
) -> SimilarityScore {
    let (Some(u), Some(v)) = (
        mean_vector(table, &p.surface, policy),
        mean_vector(table, &q.surface, policy),
    ) else {
        return SimilarityScore::incomparable();
    };
    vector_similarity(&u, &v)
}

pub(crate) fn vector_similarity(u: &[f64], v: &[f64]) -> SimilarityScore {
    // Both vectors come from the same table, so lengths always agree.
    SimilarityScore::new(cosine(u, v).expect("same-table vectors"))
}

/// Pairwise `SIM(I_i, S_j)` scores; rows follow the input predicates.
pub fn predicate_matrix(
    table: &EmbeddingTable,
    input: &PredicateSet,
    source: &PredicateSet,
    policy: OovPolicy,
) -> Vec<Vec<SimilarityScore>> {
    let source_means: Vec<_> = source
        .spans()
        .iter()
        .map(|s| mean_vector(table, &s.surface, policy))
        .collect();
    input
        .spans()
        .iter()
        .map(|p| {
            let u = mean_vector(table, &p.surface, policy);
            source_means
                .iter()
                .map(|v| match (&u, v) {
                    (Some(u), Some(v)) => vector_similarity(u, v),
                    _ => SimilarityScore::incomparable(),
                })
                .collect()
        })
        .collect()
}

/// Average over every cell of the matrix. Incomparable cells count as 0;
/// the result is incomparable only when every cell is.
pub fn mean_pair_score(matrix: &[Vec<SimilarityScore>]) -> Result<SimilarityScore, SimilarityError> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(SimilarityError::EmptyPredicateSet);
    }
    let mut any = false;
    let mut total = 0.0;
    for row in matrix {
        let mut row_sum = 0.0;
        for cell in row {
            if cell.comparable {
                row_sum += cell.value;
                any = true;
            }
        }
        total += row_sum;
    }
    if !any {
        return Ok(SimilarityScore::incomparable());
    }
    Ok(SimilarityScore::new(total / (rows * cols) as f64))
}

/// Average over rows of the best comparable cell in each row. Rows with no
/// comparable cell count as 0.
pub fn aligned_pair_score(matrix: &[Vec<SimilarityScore>]) -> Result<SimilarityScore, SimilarityError> {
    let rows = matrix.len();
    if rows == 0 || matrix[0].is_empty() {
        return Err(SimilarityError::EmptyPredicateSet);
    }
    let mut any = false;
    let mut total = 0.0;
    for row in matrix {
        let best = row
            .iter()
            .filter_map(|c| c.get())
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
        if let Some(best) = best {
            total += best;
            any = true;
        }
    }
    if !any {
        return Ok(SimilarityScore::incomparable());
    }
    Ok(SimilarityScore::new(total / rows as f64))
}

/// Mean predicate similarity over all input/source predicate pairs.
pub fn psim(
    table: &EmbeddingTable,
    input: &PredicateSet,
    source: &PredicateSet,
    policy: OovPolicy,
) -> Result<SimilarityScore, SimilarityError> {
    mean_pair_score(&predicate_matrix(table, input, source, policy))
}

/// Mean over input predicates of the best-matching source predicate.
pub fn psim_a(
    table: &EmbeddingTable,
    input: &PredicateSet,
    source: &PredicateSet,
    policy: OovPolicy,
) -> Result<SimilarityScore, SimilarityError> {
    aligned_pair_score(&predicate_matrix(table, input, source, policy))
}

/// Cosine of the mean word vectors of two whole sentences.
pub fn ssim(
    table: &EmbeddingTable,
    a: &LabeledSentence,
    b: &LabeledSentence,
    policy: OovPolicy,
) -> SimilarityScore {
    match (
        mean_vector(table, &a.tokens, policy),
        mean_vector(table, &b.tokens, policy),
    ) {
        (Some(u), Some(v)) => vector_similarity(&u, &v),
        _ => SimilarityScore::incomparable(),
    }
}
