//! Two-phase augmentation: pick source sentences whose pattern is reused,
//! then fill the source's entity slots with the input's entities of the
//! same type. Also the in-place random (RE) and ranked (RAE) entity
//! replacement baselines.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{extract_entity_spans, label_multiset, Corpus, EntitySpan, LabelMultiset, LabeledSentence};
use crate::embeddings::{mean_vector, EmbeddingTable, OovPolicy};
use crate::similarity::{aligned_pair_score, mean_pair_score, overlap_of, vector_similarity, SimilarityScore};
use crate::wmd::{nbow, nbow_distance, NBowDistribution};

pub const DEFAULT_PREFILTER_TOP_M: usize = 50;
pub const DEFAULT_PATTERN_LABEL: &str = "PP";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AugmentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("strategy {0} needs an embedding table")]
    MissingEmbeddings(Strategy),
    #[error("strategy {0} does not select source sentences")]
    NotSourceBased(Strategy),
    #[error("no candidate source sentences besides {0:?}")]
    EmptyCandidatePool(String),
    #[error("sentence {0:?} has no process predicates")]
    NoPredicates(String),
    #[error("corpus is empty")]
    EmptyCorpus,
}

/// Source selection / replacement strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Random same-type entity replacement.
    Re,
    /// Most similar same-type entity replacement.
    Rae,
    /// Label multiset overlap.
    Lsim,
    /// Mean predicate similarity.
    Psim,
    /// Aligned (row-max) predicate similarity.
    PsimA,
    /// Cosine of mean sentence vectors.
    Ssim,
    /// Word Mover's Distance.
    Wmd,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Re,
        Strategy::Rae,
        Strategy::Lsim,
        Strategy::Psim,
        Strategy::PsimA,
        Strategy::Ssim,
        Strategy::Wmd,
    ];

    pub fn needs_embeddings(self) -> bool {
        !matches!(self, Strategy::Re | Strategy::Lsim)
    }

    pub fn is_source_based(self) -> bool {
        !matches!(self, Strategy::Re | Strategy::Rae)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Re => "re",
            Strategy::Rae => "rae",
            Strategy::Lsim => "lsim",
            Strategy::Psim => "psim",
            Strategy::PsimA => "psim-a",
            Strategy::Ssim => "ssim",
            Strategy::Wmd => "wmd",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    pub strategy: Strategy,
    /// Augmented sentences per input.
    pub k: usize,
    pub seed: u64,
    /// Label-overlap prefilter size for PSIM / PSIM-A.
    pub prefilter_top_m: usize,
    /// Labels treated as part of the pattern; never replaced.
    pub pattern_labels: BTreeSet<String>,
    pub oov_policy: OovPolicy,
    pub dedupe: bool,
    /// Worker threads for `augment_corpus`. Output order does not depend on it.
    pub workers: usize,
}

impl AugmentationConfig {
    pub fn new(strategy: Strategy, k: usize) -> Self {
        Self {
            strategy,
            k,
            seed: 0,
            prefilter_top_m: DEFAULT_PREFILTER_TOP_M.max(k),
            pattern_labels: BTreeSet::from([DEFAULT_PATTERN_LABEL.to_string()]),
            oov_policy: OovPolicy::Skip,
            dedupe: true,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.k == 0 {
            return Err(AugmentError::InvalidConfig("k must be at least 1".into()));
        }
        if self.prefilter_top_m < self.k {
            return Err(AugmentError::InvalidConfig(format!(
                "prefilter size {} is smaller than k={}",
                self.prefilter_top_m, self.k
            )));
        }
        if self.workers == 0 {
            return Err(AugmentError::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    fn is_pattern(&self, label: &str) -> bool {
        self.pattern_labels.contains(label)
    }
}

/// A generated sentence and where its parts came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSentence {
    pub sentence: LabeledSentence,
    /// Sentence that donated the entities (RE/RAE: the sentence edited in place).
    pub input_id: String,
    /// Sentence that donated the pattern; `None` for RE/RAE.
    pub source_id: Option<String>,
    pub strategy: Strategy,
}

/// A selected source and the score that ranked it.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSource<'a> {
    pub sentence: &'a LabeledSentence,
    /// Position in the corpus.
    pub position: usize,
    pub score: SimilarityScore,
}

/// Per-sentence values reused across every ranking.
#[derive(Debug, Default)]
struct Features {
    labels: LabelMultiset,
    /// Mean vectors of the pattern-label spans. Empty when the sentence has none.
    predicate_means: Vec<Option<Vec<f64>>>,
    mean: Option<Vec<f64>>,
    nbow: Option<NBowDistribution>,
}

#[derive(Debug)]
struct PoolEntry<'a> {
    position: usize,
    surface: &'a [String],
}

/// Distinct surfaces of one entity type with their span mean vectors.
#[derive(Debug, Default)]
struct RankedPool<'a> {
    surfaces: Vec<&'a [String]>,
    means: Vec<Option<Vec<f64>>>,
}

/// Precomputed state for augmenting sentences of one corpus.
pub struct Augmenter<'a> {
    corpus: &'a Corpus,
    cfg: AugmentationConfig,
    table: Option<&'a EmbeddingTable>,
    positions: HashMap<&'a str, usize>,
    spans: Vec<Vec<EntitySpan>>,
    features: Vec<Features>,
    /// RE: every replaceable span per type, in corpus order.
    span_pool: BTreeMap<String, Vec<PoolEntry<'a>>>,
    /// RAE: distinct surfaces per type, in first-occurrence order.
    ranked_pool: BTreeMap<String, RankedPool<'a>>,
}

impl<'a> Augmenter<'a> {
    pub fn new(
        corpus: &'a Corpus,
        cfg: AugmentationConfig,
        table: Option<&'a EmbeddingTable>,
    ) -> Result<Self, AugmentError> {
        cfg.validate()?;
        if cfg.strategy.needs_embeddings() && table.is_none() {
            return Err(AugmentError::MissingEmbeddings(cfg.strategy));
        }
        let sentences = corpus.sentences();
        let positions = sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let spans: Vec<_> = sentences.iter().map(extract_entity_spans).collect();

        let mut aug = Self {
            corpus,
            cfg,
            table,
            positions,
            spans,
            features: Vec::new(),
            span_pool: BTreeMap::new(),
            ranked_pool: BTreeMap::new(),
        };
        aug.features = sentences
            .iter()
            .zip(&aug.spans)
            .map(|(s, spans)| aug.features_of(s, spans))
            .collect();
        match aug.cfg.strategy {
            Strategy::Re => aug.build_span_pool(),
            Strategy::Rae => aug.build_ranked_pool(),
            _ => {}
        }
        Ok(aug)
    }

    pub fn config(&self) -> &AugmentationConfig {
        &self.cfg
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    fn features_of(&self, sentence: &LabeledSentence, spans: &[EntitySpan]) -> Features {
        let policy = self.cfg.oov_policy;
        let mut f = Features {
            labels: label_multiset(sentence),
            ..Features::default()
        };
        let Some(table) = self.table else {
            return f;
        };
        match self.cfg.strategy {
            Strategy::Psim | Strategy::PsimA => {
                f.predicate_means = spans
                    .iter()
                    .filter(|s| self.cfg.is_pattern(&s.entity_type))
                    .map(|s| mean_vector(table, &s.surface, policy))
                    .collect();
            }
            Strategy::Ssim => f.mean = mean_vector(table, &sentence.tokens, policy),
            Strategy::Wmd => f.nbow = nbow(table, sentence, policy),
            _ => {}
        }
        f
    }

    fn replaceable<'s>(&'s self, spans: &'s [EntitySpan]) -> impl Iterator<Item = &'s EntitySpan> + 's {
        spans.iter().filter(|s| !self.cfg.is_pattern(&s.entity_type))
    }

    fn build_span_pool(&mut self) {
        let sentences = self.corpus.sentences();
        let mut pool: BTreeMap<String, Vec<PoolEntry<'a>>> = BTreeMap::new();
        for (position, (sentence, spans)) in sentences.iter().zip(&self.spans).enumerate() {
            for span in self.replaceable(spans) {
                pool.entry(span.entity_type.clone()).or_default().push(PoolEntry {
                    position,
                    surface: &sentence.tokens[span.start..span.end],
                });
            }
        }
        self.span_pool = pool;
    }

    fn build_ranked_pool(&mut self) {
        let table = self.table.expect("checked in new");
        let policy = self.cfg.oov_policy;
        let sentences = self.corpus.sentences();
        let mut pool: BTreeMap<String, RankedPool<'a>> = BTreeMap::new();
        let mut seen: HashSet<(&str, &[String])> = HashSet::new();
        for (sentence, spans) in sentences.iter().zip(&self.spans) {
            for span in self.replaceable(spans) {
                let surface = &sentence.tokens[span.start..span.end];
                let ty = pool.entry(span.entity_type.clone()).or_default();
                let key = (sentence.labels[span.start].as_str(), surface);
                if seen.insert(key) {
                    ty.surfaces.push(surface);
                    ty.means.push(mean_vector(table, surface, policy));
                }
            }
        }
        self.ranked_pool = pool;
    }

    /// Ranks candidate sources for `input` and returns the best `k`.
    pub fn select_sources(&self, input: &LabeledSentence) -> Result<Vec<RankedSource<'a>>, AugmentError> {
        match self.positions.get(input.id.as_str()) {
            Some(&pos) if &self.corpus.sentences()[pos] == input => {
                self.rank_sources(input, &self.features[pos])
            }
            _ => {
                let spans = extract_entity_spans(input);
                let features = self.features_of(input, &spans);
                self.rank_sources(input, &features)
            }
        }
    }

    fn rank_sources(
        &self,
        input: &LabeledSentence,
        features: &Features,
    ) -> Result<Vec<RankedSource<'a>>, AugmentError> {
        let strategy = self.cfg.strategy;
        if !strategy.is_source_based() {
            return Err(AugmentError::NotSourceBased(strategy));
        }
        let sentences = self.corpus.sentences();
        let mut pool: Vec<usize> = (0..sentences.len())
            .filter(|&i| sentences[i].id != input.id)
            .collect();
        if pool.is_empty() {
            return Err(AugmentError::EmptyCandidatePool(input.id.clone()));
        }

        // Higher is better for every strategy except WMD.
        let ascending = strategy == Strategy::Wmd;
        let scored: Vec<(usize, SimilarityScore)> = match strategy {
            Strategy::Lsim => pool
                .iter()
                .map(|&c| (c, SimilarityScore::new(overlap_of(&features.labels, &self.features[c].labels))))
                .collect(),
            Strategy::Psim | Strategy::PsimA => {
                if features.predicate_means.is_empty() {
                    return Err(AugmentError::NoPredicates(input.id.clone()));
                }
                pool.retain(|&c| !self.features[c].predicate_means.is_empty());
                let mut by_overlap: Vec<(usize, SimilarityScore)> = pool
                    .iter()
                    .map(|&c| (c, SimilarityScore::new(overlap_of(&features.labels, &self.features[c].labels))))
                    .collect();
                sort_ranked(&mut by_overlap, false);
                by_overlap.truncate(self.cfg.prefilter_top_m);
                by_overlap
                    .into_iter()
                    .map(|(c, _)| {
                        let matrix = predicate_cells(&features.predicate_means, &self.features[c].predicate_means);
                        let score = if strategy == Strategy::Psim {
                            mean_pair_score(&matrix)
                        } else {
                            aligned_pair_score(&matrix)
                        };
                        (c, score.expect("both predicate sets non-empty"))
                    })
                    .collect()
            }
            Strategy::Ssim => pool
                .iter()
                .map(|&c| {
                    let score = match (&features.mean, &self.features[c].mean) {
                        (Some(u), Some(v)) => vector_similarity(u, v),
                        _ => SimilarityScore::incomparable(),
                    };
                    (c, score)
                })
                .collect(),
            Strategy::Wmd => pool
                .iter()
                .map(|&c| {
                    let score = match (&features.nbow, &self.features[c].nbow) {
                        (Some(a), Some(b)) => nbow_distance(a, b),
                        _ => SimilarityScore::incomparable(),
                    };
                    (c, score)
                })
                .collect(),
            Strategy::Re | Strategy::Rae => unreachable!("checked above"),
        };

        let mut scored = scored;
        sort_ranked(&mut scored, ascending);
        scored.truncate(self.cfg.k);
        Ok(scored
            .into_iter()
            .map(|(position, score)| RankedSource {
                sentence: &sentences[position],
                position,
                score,
            })
            .collect())
    }

    /// Fills the entity slots of `source` with the entities of `input`.
    pub fn replace_entities(&self, input: &LabeledSentence, source: &LabeledSentence) -> AugmentedSentence {
        let input_spans = extract_entity_spans(input);
        let source_spans = extract_entity_spans(source);
        fill_pattern(&self.cfg, self.table, input, &input_spans, source, &source_spans)
    }

    /// Random same-type replacement of each replaceable span of `input`,
    /// drawing from spans of other sentences in the corpus.
    pub fn re_augment<R: Rng + ?Sized>(&self, input: &LabeledSentence, rng: &mut R) -> AugmentedSentence {
        let spans = extract_entity_spans(input);
        self.re_variant(input, &spans, rng, format!("{}-re", input.id))
    }

    fn re_variant<R: Rng + ?Sized>(
        &self,
        input: &LabeledSentence,
        spans: &[EntitySpan],
        rng: &mut R,
        id: String,
    ) -> AugmentedSentence {
        let own = self.positions.get(input.id.as_str()).copied();
        let mut replacements = Vec::new();
        for span in self.replaceable(spans) {
            let Some(pool) = self.span_pool.get(&span.entity_type) else {
                continue;
            };
            // The input's own spans form one contiguous block of the pool.
            let (lo, hi) = match own {
                Some(p) => (
                    pool.partition_point(|e| e.position < p),
                    pool.partition_point(|e| e.position <= p),
                ),
                None => (0, 0),
            };
            let available = pool.len() - (hi - lo);
            if available == 0 {
                continue;
            }
            let mut pick = rng.gen_range(0..available as u64) as usize;
            if pick >= lo {
                pick += hi - lo;
            }
            replacements.push((span, pool[pick].surface));
        }
        AugmentedSentence {
            sentence: splice(input, replacements, id),
            input_id: input.id.clone(),
            source_id: None,
            strategy: Strategy::Re,
        }
    }

    /// Replaces each replaceable span with the `rank`-th most similar
    /// distinct same-type surface in the corpus (`rank` 0 is the best).
    pub fn rae_augment(&self, input: &LabeledSentence, rank: usize) -> AugmentedSentence {
        let spans = extract_entity_spans(input);
        self.rae_variants(input, &spans, rank + 1).pop().expect("rank+1 variants")
    }

    fn rae_variants(&self, input: &LabeledSentence, spans: &[EntitySpan], count: usize) -> Vec<AugmentedSentence> {
        let table = self.table.expect("checked in new");
        let policy = self.cfg.oov_policy;
        let rankings: Vec<(&EntitySpan, Vec<&[String]>)> = self
            .replaceable(spans)
            .map(|span| {
                let Some(pool) = self.ranked_pool.get(&span.entity_type) else {
                    return (span, Vec::new());
                };
                let query = mean_vector(table, &span.surface, policy);
                let mut scored: Vec<(usize, SimilarityScore)> = pool
                    .surfaces
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| **s != span.surface.as_slice())
                    .map(|(i, _)| {
                        let score = match (&query, &pool.means[i]) {
                            (Some(u), Some(v)) => vector_similarity(u, v),
                            _ => SimilarityScore::incomparable(),
                        };
                        (i, score)
                    })
                    .collect();
                sort_ranked(&mut scored, false);
                scored.truncate(count);
                (span, scored.into_iter().map(|(i, _)| pool.surfaces[i]).collect())
            })
            .collect();

        (0..count)
            .map(|variant| {
                let replacements = rankings
                    .iter()
                    .filter_map(|(span, ranked)| ranked.get(variant).map(|s| (*span, *s)));
                AugmentedSentence {
                    sentence: splice(input, replacements, format!("{}-rae{variant}", input.id)),
                    input_id: input.id.clone(),
                    source_id: None,
                    strategy: Strategy::Rae,
                }
            })
            .collect()
    }

    /// Up to `k` augmentations of the sentence at `position`.
    pub fn augment_at(&self, position: usize) -> Result<Vec<AugmentedSentence>, AugmentError> {
        let input = &self.corpus.sentences()[position];
        let spans = &self.spans[position];
        let k = self.cfg.k;
        let mut produced: Vec<(AugmentedSentence, Option<&[String]>)> = Vec::with_capacity(k);
        match self.cfg.strategy {
            Strategy::Re => {
                let mut rng = sentence_rng(self.cfg.seed, position);
                for v in 0..k {
                    let aug = self.re_variant(input, spans, &mut rng, format!("{}-re{v}", input.id));
                    produced.push((aug, None));
                }
            }
            Strategy::Rae => {
                for aug in self.rae_variants(input, spans, k) {
                    produced.push((aug, None));
                }
            }
            _ => {
                let sources = match self.rank_sources(input, &self.features[position]) {
                    Ok(s) => s,
                    Err(AugmentError::NoPredicates(id)) => {
                        log::debug!("skipping {id:?}: no process predicates");
                        Vec::new()
                    }
                    Err(e) => return Err(e),
                };
                for src in sources {
                    let aug = fill_pattern(
                        &self.cfg,
                        self.table,
                        input,
                        spans,
                        src.sentence,
                        &self.spans[src.position],
                    );
                    produced.push((aug, Some(&src.sentence.tokens)));
                }
            }
        }

        if !self.cfg.dedupe {
            return Ok(produced.into_iter().map(|(a, _)| a).collect());
        }
        let mut seen: HashSet<Vec<String>> = HashSet::new();
        let mut out = Vec::with_capacity(produced.len());
        for (aug, source_tokens) in produced {
            let tokens = &aug.sentence.tokens;
            if tokens == &input.tokens || source_tokens.is_some_and(|s| s == tokens.as_slice()) {
                continue;
            }
            if seen.insert(tokens.clone()) {
                out.push(aug);
            }
        }
        Ok(out)
    }

    /// Augments every sentence; output is in corpus order, then rank order.
    pub fn augment_all(&self) -> Result<Vec<AugmentedSentence>, AugmentError> {
        let n = self.corpus.len();
        if n == 0 {
            return Err(AugmentError::EmptyCorpus);
        }
        let per_sentence: Vec<Result<Vec<AugmentedSentence>, AugmentError>> = if self.cfg.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.cfg.workers)
                .build()
                .map_err(|e| AugmentError::InvalidConfig(e.to_string()))?;
            pool.install(|| (0..n).into_par_iter().map(|i| self.augment_at(i)).collect())
        } else {
            (0..n).map(|i| self.augment_at(i)).collect()
        };
        let mut out = Vec::new();
        for result in per_sentence {
            out.extend(result?);
        }
        Ok(out)
    }
}

/// Fills the non-pattern spans of `source` with same-type spans of `input`.
fn fill_pattern(
    cfg: &AugmentationConfig,
    table: Option<&EmbeddingTable>,
    input: &LabeledSentence,
    input_spans: &[EntitySpan],
    source: &LabeledSentence,
    source_spans: &[EntitySpan],
) -> AugmentedSentence {
    let mut by_type_source: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, span) in source_spans.iter().enumerate() {
        if !cfg.is_pattern(&span.entity_type) {
            by_type_source.entry(span.entity_type.as_str()).or_default().push(idx);
        }
    }
    let mut by_type_input: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, span) in input_spans.iter().enumerate() {
        by_type_input.entry(span.entity_type.as_str()).or_default().push(idx);
    }

    // assignment[source span] = input span filling it
    let mut assignment: Vec<Option<usize>> = vec![None; source_spans.len()];
    for (ty, slots) in &by_type_source {
        let Some(fillers) = by_type_input.get(ty) else {
            continue;
        };
        let slot_spans: Vec<&EntitySpan> = slots.iter().map(|&i| &source_spans[i]).collect();
        let filler_spans: Vec<&EntitySpan> = fillers.iter().map(|&i| &input_spans[i]).collect();
        for (a, b) in pair_spans(table, cfg.oov_policy, &slot_spans, &filler_spans) {
            assignment[slots[a]] = Some(fillers[b]);
        }
    }

    let replacements = assignment
        .iter()
        .enumerate()
        .filter_map(|(slot, filler)| filler.map(|f| (&source_spans[slot], &input_spans[f].surface[..])));
    let sentence = splice(source, replacements, format!("{}@{}", input.id, source.id));
    AugmentedSentence {
        sentence,
        input_id: input.id.clone(),
        source_id: Some(source.id.clone()),
        strategy: cfg.strategy,
    }
}

/// Pairs same-type slots and fillers, returning `(slot, filler)` index
/// pairs. Greedy by descending cosine of span mean vectors; whatever is left
/// (or not comparable) pairs left to right.
fn pair_spans(
    table: Option<&EmbeddingTable>,
    policy: OovPolicy,
    slots: &[&EntitySpan],
    fillers: &[&EntitySpan],
) -> Vec<(usize, usize)> {
    let mut slot_used = vec![false; slots.len()];
    let mut filler_used = vec![false; fillers.len()];
    let mut pairs = Vec::new();

    if let (Some(table), true) = (table, slots.len() > 1 || fillers.len() > 1) {
        let slot_means: Vec<_> = slots.iter().map(|s| mean_vector(table, &s.surface, policy)).collect();
        let filler_means: Vec<_> = fillers.iter().map(|f| mean_vector(table, &f.surface, policy)).collect();
        let mut candidates = Vec::new();
        for (a, u) in slot_means.iter().enumerate() {
            for (b, v) in filler_means.iter().enumerate() {
                if let (Some(u), Some(v)) = (u, v) {
                    candidates.push((vector_similarity(u, v).value, a, b));
                }
            }
        }
        candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (_, a, b) in candidates {
            if !slot_used[a] && !filler_used[b] {
                slot_used[a] = true;
                filler_used[b] = true;
                pairs.push((a, b));
            }
        }
    }

    let mut free_fillers = (0..fillers.len()).filter(|&b| !filler_used[b]);
    for (a, _) in slot_used.iter().enumerate().filter(|(_, used)| !**used) {
        match free_fillers.next() {
            Some(b) => pairs.push((a, b)),
            None => break,
        }
    }
    pairs
}

/// The generator for the sentence at `position`: ChaCha8 seeded with
/// `seed`, on stream `position`. Independent of scheduling and platform.
pub fn sentence_rng(seed: u64, position: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(position as u64);
    rng
}

/// Comparable scores first (best first), then incomparable ones; ties by
/// corpus position.
fn sort_ranked(scored: &mut [(usize, SimilarityScore)], ascending: bool) {
    scored.sort_by(|(pa, a), (pb, b)| {
        b.comparable
            .cmp(&a.comparable)
            .then_with(|| {
                if ascending {
                    a.value.total_cmp(&b.value)
                } else {
                    b.value.total_cmp(&a.value)
                }
            })
            .then(pa.cmp(pb))
    });
}

fn predicate_cells(input: &[Option<Vec<f64>>], source: &[Option<Vec<f64>>]) -> Vec<Vec<SimilarityScore>> {
    input
        .iter()
        .map(|u| {
            source
                .iter()
                .map(|v| match (u, v) {
                    (Some(u), Some(v)) => vector_similarity(u, v),
                    _ => SimilarityScore::incomparable(),
                })
                .collect()
        })
        .collect()
}

/// Copies `base`, substituting each listed span by a new surface that keeps
/// the span's label. Spans must come from `base` and be in order.
fn splice<'s, I>(base: &LabeledSentence, replacements: I, id: String) -> LabeledSentence
where
    I: IntoIterator<Item = (&'s EntitySpan, &'s [String])>,
{
    let mut tokens = Vec::with_capacity(base.len());
    let mut labels = Vec::with_capacity(base.len());
    let mut cursor = 0;
    for (span, surface) in replacements {
        debug_assert!(span.start >= cursor);
        tokens.extend_from_slice(&base.tokens[cursor..span.start]);
        labels.extend_from_slice(&base.labels[cursor..span.start]);
        tokens.extend_from_slice(surface);
        labels.extend(std::iter::repeat_n(span.entity_type.clone(), surface.len()));
        cursor = span.end;
    }
    tokens.extend_from_slice(&base.tokens[cursor..]);
    labels.extend_from_slice(&base.labels[cursor..]);
    LabeledSentence { id, tokens, labels }
}

/// Top-`k` source sentences for `input` under `cfg.strategy`.
pub fn select_sources<'a>(
    input: &LabeledSentence,
    corpus: &'a Corpus,
    cfg: &AugmentationConfig,
    table: Option<&'a EmbeddingTable>,
) -> Result<Vec<RankedSource<'a>>, AugmentError> {
    if !cfg.strategy.is_source_based() {
        return Err(AugmentError::NotSourceBased(cfg.strategy));
    }
    Augmenter::new(corpus, cfg.clone(), table)?.select_sources(input)
}

/// Builds the augmented sentence with `source`'s pattern and `input`'s entities.
pub fn replace_entities(
    input: &LabeledSentence,
    source: &LabeledSentence,
    cfg: &AugmentationConfig,
    table: Option<&EmbeddingTable>,
) -> AugmentedSentence {
    let input_spans = extract_entity_spans(input);
    let source_spans = extract_entity_spans(source);
    fill_pattern(cfg, table, input, &input_spans, source, &source_spans)
}

/// One RE augmentation of `input`, drawing from `rng`.
pub fn re_augment<R: Rng + ?Sized>(
    input: &LabeledSentence,
    corpus: &Corpus,
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> Result<AugmentedSentence, AugmentError> {
    if corpus.is_empty() {
        return Err(AugmentError::EmptyCorpus);
    }
    let mut cfg = cfg.clone();
    cfg.strategy = Strategy::Re;
    Ok(Augmenter::new(corpus, cfg, None)?.re_augment(input, rng))
}

/// The `rank`-th RAE augmentation of `input` (0 = most similar entities).
pub fn rae_augment(
    input: &LabeledSentence,
    corpus: &Corpus,
    cfg: &AugmentationConfig,
    table: &EmbeddingTable,
    rank: usize,
) -> Result<AugmentedSentence, AugmentError> {
    if corpus.is_empty() {
        return Err(AugmentError::EmptyCorpus);
    }
    let mut cfg = cfg.clone();
    cfg.strategy = Strategy::Rae;
    Ok(Augmenter::new(corpus, cfg, Some(table))?.rae_augment(input, rank))
}

/// Augments a whole corpus.
pub fn augment_corpus(
    corpus: &Corpus,
    cfg: &AugmentationConfig,
    table: Option<&EmbeddingTable>,
) -> Result<Vec<AugmentedSentence>, AugmentError> {
    Augmenter::new(corpus, cfg.clone(), table)?.augment_all()
}
