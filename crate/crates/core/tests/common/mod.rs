#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use procaug::corpus::collapsed_labels;
use procaug::{
    extract_entity_spans, AugmentationConfig, AugmentedSentence, Corpus, EmbeddingTable, EntitySpan,
    LabeledSentence,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum transport cost by enumerating every spanning-tree basis of the
/// bipartite graph and keeping the feasible ones (the polytope vertices).
pub fn brute_force_transport(wa: &[f64], wb: &[f64], cost: &[Vec<f64>]) -> f64 {
    let m = wa.len();
    let n = wb.len();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let basis_size = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(basis_size);
    enumerate(&cells, 0, basis_size, &mut chosen, &mut |basis| {
        if let Some(flows) = basis_flows(m, n, wa, wb, basis) {
            let c: f64 = basis
                .iter()
                .zip(&flows)
                .map(|(&(i, j), f)| f * cost[i][j])
                .sum();
            best = best.min(c);
        }
    });
    best
}

type Visit<'a> = dyn FnMut(&[(usize, usize)]) + 'a;

fn enumerate(
    cells: &[(usize, usize)],
    from: usize,
    remaining: usize,
    chosen: &mut Vec<(usize, usize)>,
    visit: &mut Visit<'_>,
) {
    if remaining == 0 {
        visit(chosen);
        return;
    }
    for idx in from..=cells.len() - remaining {
        chosen.push(cells[idx]);
        enumerate(cells, idx + 1, remaining - 1, chosen, visit);
        chosen.pop();
    }
}

/// Flows on a spanning-tree basis by leaf elimination; `None` when the edge
/// set has a cycle or the flows are negative.
fn basis_flows(
    m: usize,
    n: usize,
    wa: &[f64],
    wb: &[f64],
    basis: &[(usize, usize)],
) -> Option<Vec<f64>> {
    // Nodes 0..m are rows, m..m+n are columns.
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for &(i, j) in basis {
        let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
        if a == b {
            return None;
        }
        parent[a] = b;
    }

    let mut mass: Vec<f64> = wa.iter().chain(wb).copied().collect();
    let mut degree = vec![0usize; m + n];
    for &(i, j) in basis {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut flows = vec![f64::NAN; basis.len()];
    let mut done = vec![false; basis.len()];
    for _ in 0..basis.len() {
        let (e, leaf) = (0..basis.len())
            .filter(|&e| !done[e])
            .find_map(|e| {
                let (i, j) = basis[e];
                if degree[i] == 1 {
                    Some((e, i))
                } else if degree[m + j] == 1 {
                    Some((e, m + j))
                } else {
                    None
                }
            })?;
        let (i, j) = basis[e];
        let other = if leaf == i { m + j } else { i };
        let f = mass[leaf];
        flows[e] = f;
        mass[leaf] = 0.0;
        mass[other] -= f;
        degree[i] -= 1;
        degree[m + j] -= 1;
        done[e] = true;
    }
    if flows.iter().any(|&f| f < -1e-12) {
        return None;
    }
    Some(flows)
}

pub fn random_weights(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// PSIM computed straight from its definition over an explicit matrix.
pub fn direct_mean(matrix: &[Vec<f64>]) -> f64 {
    let rows = matrix.len() as f64;
    let cols = matrix[0].len() as f64;
    let mut sum = 0.0;
    for row in matrix {
        for x in row {
            sum += x;
        }
    }
    sum / (rows * cols)
}

/// PSIM-A computed straight from its definition over an explicit matrix.
pub fn direct_aligned(matrix: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    for row in matrix {
        let mut best = f64::NEG_INFINITY;
        for &x in row {
            if x > best {
                best = x;
            }
        }
        sum += best;
    }
    sum / matrix.len() as f64
}

pub fn hand_cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

/// 20 entity types plus the `PP` predicate type.
pub fn entity_types() -> Vec<String> {
    let mut types: Vec<String> = (0..20).map(|t| format!("T{t:02}")).collect();
    types.push("PP".into());
    types
}

pub struct Synthetic {
    pub corpus: Corpus,
    pub vocab: Vec<String>,
}

/// A corpus of process-like sentences: O-word runs alternating with typed
/// entity runs, every sentence carrying at least one `PP` predicate.
pub fn synthetic_corpus(sentences: usize, words_per_type: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types = entity_types();
    let fillers: Vec<String> = (0..40).map(|i| format!("o{i}")).collect();
    let lexicon: BTreeMap<&str, Vec<String>> = types
        .iter()
        .map(|t| {
            let words = (0..words_per_type).map(|i| format!("{}w{i}", t.to_lowercase())).collect();
            (t.as_str(), words)
        })
        .collect();

    let mut out = Vec::with_capacity(sentences);
    for s in 0..sentences {
        let mut tokens = Vec::new();
        let mut labels = Vec::new();
        let segments = rng.gen_range(2..7);
        let predicate_at = rng.gen_range(0..segments);
        let mut last_type: Option<&str> = None;
        for seg in 0..segments {
            for _ in 0..rng.gen_range(0..3) {
                tokens.push(fillers[rng.gen_range(0..fillers.len())].clone());
                labels.push("O".to_string());
                last_type = None;
            }
            let ty: &str = if seg == predicate_at {
                "PP"
            } else {
                &types[rng.gen_range(0..types.len())]
            };
            if last_type == Some(ty) {
                tokens.push("and".into());
                labels.push("O".into());
            }
            for _ in 0..rng.gen_range(1..4) {
                let words = &lexicon[ty];
                tokens.push(words[rng.gen_range(0..words.len())].clone());
                labels.push(ty.to_string());
            }
            last_type = Some(ty);
        }
        tokens.push(".".into());
        labels.push("O".into());
        out.push(LabeledSentence::new(format!("s{s}"), tokens, labels).unwrap());
    }

    let mut vocab: Vec<String> = lexicon.into_values().flatten().collect();
    vocab.extend(fillers);
    vocab.push("and".into());
    vocab.push(".".into());
    Synthetic {
        corpus: Corpus::new(out).unwrap(),
        vocab,
    }
}

/// Random vectors for every vocabulary word except roughly one in
/// `oov_every`, which is left out to exercise the out-of-vocabulary paths.
pub fn synthetic_table(vocab: &[String], dim: usize, oov_every: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<(String, Vec<f64>)> = vocab
        .iter()
        .enumerate()
        .filter(|(i, _)| oov_every == 0 || i % oov_every != oov_every - 1)
        .map(|(_, w)| (w.clone(), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    EmbeddingTable::from_entries(dim, entries).unwrap()
}

pub fn synthetic_embeddings_text(vocab: &[String], dim: usize, oov_every: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<String> = vocab
        .iter()
        .enumerate()
        .filter(|(i, _)| oov_every == 0 || i % oov_every != oov_every - 1)
        .map(|(_, w)| {
            let v: Vec<String> = (0..dim).map(|_| format!("{:.6}", rng.gen_range(-1.0f64..1.0))).collect();
            format!("{w} {}", v.join(" "))
        })
        .collect();
    format!("{} {dim}\n{}\n", rows.len(), rows.join("\n"))
}

fn skeleton(sentence: &LabeledSentence, spans: &[EntitySpan]) -> Vec<Vec<String>> {
    // Token runs between spans, one entry per gap (spans.len() + 1 gaps).
    let mut gaps = Vec::with_capacity(spans.len() + 1);
    let mut cursor = 0;
    for span in spans {
        gaps.push(sentence.tokens[cursor..span.start].to_vec());
        cursor = span.end;
    }
    gaps.push(sentence.tokens[cursor..].to_vec());
    gaps
}

/// Checks every per-augmentation invariant of the pipeline. Returns the
/// first violation.
pub fn check_augmentations(
    corpus: &Corpus,
    cfg: &AugmentationConfig,
    augmented: &[AugmentedSentence],
) -> Result<(), String> {
    let by_id: BTreeMap<&str, &LabeledSentence> =
        corpus.sentences().iter().map(|s| (s.id.as_str(), s)).collect();
    let pool: HashSet<(String, Vec<String>)> = corpus
        .sentences()
        .iter()
        .flat_map(extract_entity_spans)
        .map(|s| (s.entity_type, s.surface))
        .collect();
    let mut per_input: BTreeMap<&str, Vec<&Vec<String>>> = BTreeMap::new();

    for aug in augmented {
        let out = &aug.sentence;
        let input = by_id
            .get(aug.input_id.as_str())
            .ok_or_else(|| format!("unknown input id {}", aug.input_id))?;
        per_input.entry(aug.input_id.as_str()).or_default().push(&out.tokens);
        if out.tokens.len() != out.labels.len() || out.tokens.is_empty() {
            return Err(format!("{}: malformed output", out.id));
        }

        // The sentence whose skeleton the output must keep.
        let template = match &aug.source_id {
            Some(src) => {
                if src == &aug.input_id {
                    return Err(format!("{}: source equals input", out.id));
                }
                by_id.get(src.as_str()).ok_or_else(|| format!("unknown source id {src}"))?
            }
            None => {
                if cfg.strategy.is_source_based() {
                    return Err(format!("{}: source-based output without source", out.id));
                }
                input
            }
        };

        if collapsed_labels(out) != collapsed_labels(template) {
            return Err(format!("{}: label structure differs from template", out.id));
        }
        let out_spans = extract_entity_spans(out);
        let tpl_spans = extract_entity_spans(template);
        if skeleton(out, &out_spans) != skeleton(template, &tpl_spans) {
            return Err(format!("{}: O tokens differ from template", out.id));
        }
        let input_spans = extract_entity_spans(input);
        let mut used = vec![false; input_spans.len()];
        for (o, t) in out_spans.iter().zip(&tpl_spans) {
            if o.entity_type != t.entity_type {
                return Err(format!("{}: span type changed", out.id));
            }
            let is_pattern = cfg.pattern_labels.contains(&o.entity_type);
            if is_pattern {
                if o.surface != t.surface {
                    return Err(format!("{}: pattern span {:?} replaced", out.id, t.surface));
                }
                continue;
            }
            if o.surface == t.surface {
                continue;
            }
            if aug.source_id.is_some() {
                // Filled from the input: same type, each input span at most once.
                let hit = input_spans
                    .iter()
                    .enumerate()
                    .find(|(k, s)| !used[*k] && s.entity_type == o.entity_type && s.surface == o.surface);
                match hit {
                    Some((k, _)) => used[k] = true,
                    None => {
                        return Err(format!(
                            "{}: span {:?} is neither retained nor from the input",
                            out.id, o.surface
                        ))
                    }
                }
            } else if !pool.contains(&(o.entity_type.clone(), o.surface.clone())) {
                return Err(format!("{}: span {:?} not from the corpus pool", out.id, o.surface));
            }
        }
    }

    for (input_id, outputs) in &per_input {
        if outputs.len() > cfg.k {
            return Err(format!("{input_id}: {} outputs for k={}", outputs.len(), cfg.k));
        }
        if cfg.dedupe {
            let distinct: HashSet<_> = outputs.iter().collect();
            if distinct.len() != outputs.len() {
                return Err(format!("{input_id}: duplicate outputs"));
            }
            if outputs.iter().any(|t| **t == by_id[input_id].tokens) {
                return Err(format!("{input_id}: output equals input"));
            }
        }
    }
    Ok(())
}
