//! Data augmentation for sequence-labeled process-extraction corpora.
//!
//! An augmented sentence reuses the pattern (word order, stop words and
//! process predicates) of a *source* sentence and carries the typed
//! entities of an *input* sentence. Sources are chosen by label overlap,
//! predicate similarity, sentence-vector similarity or Word Mover's
//! Distance; random and ranked in-place entity replacement are provided as
//! baselines.

pub mod augment;
pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod similarity;
pub mod wmd;

pub use augment::{
    augment_corpus, rae_augment, re_augment, replace_entities, select_sources, AugmentError,
    AugmentationConfig, AugmentedSentence, Augmenter, RankedSource, Strategy,
};
pub use corpus::{
    extract_entity_spans, label_multiset, parse_corpus, write_corpus, Corpus, CorpusError,
    EntitySpan, Format, LabeledSentence,
};
pub use embeddings::{cosine, load_embeddings, mean_vector, EmbeddingError, EmbeddingTable, OovPolicy};
pub use similarity::{label_overlap, psim, psim_a, sim_predicate, ssim, PredicateSet, SimilarityScore};
pub use wmd::{cost_matrix, nbow, solve_transport, wmd_distance, NBowDistribution, TransportPlan};
