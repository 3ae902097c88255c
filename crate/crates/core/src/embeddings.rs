//! Static word embeddings in word2vec text format.

use std::borrow::Cow;
use std::collections::HashMap;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {value:?} as a number")]
    NumberParseError { line: usize, value: String },
    #[error("embedding table has no entries")]
    EmptyTable,
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("decode error: {0}")]
    DecodeError(String),
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// What to do with a word that has no vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// Drop the word.
    #[default]
    Skip,
    /// Substitute the all-zeros vector.
    Zero,
}

impl FromStr for OovPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(OovPolicy::Skip),
            "zero" => Ok(OovPolicy::Zero),
            other => Err(format!("unknown OOV policy {other:?} (expected skip or zero)")),
        }
    }
}

/// Word to vector map. Keys are lowercased at load time and queries are
/// lowercased before lookup.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs; the first occurrence of a
    /// (lowercased) word wins.
    pub fn from_entries<I, S>(dimension: usize, entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        if dimension == 0 {
            return Err(EmbeddingError::InvalidHeader("dimension must be positive".into()));
        }
        let mut table = Self {
            dimension,
            index: HashMap::new(),
            data: Vec::new(),
        };
        for (n, (word, vector)) in entries.into_iter().enumerate() {
            if vector.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    line: n + 1,
                    expected: dimension,
                    found: vector.len(),
                });
            }
            table.insert(word.as_ref(), &vector);
        }
        if table.index.is_empty() {
            return Err(EmbeddingError::EmptyTable);
        }
        Ok(table)
    }

    fn insert(&mut self, word: &str, vector: &[f64]) {
        let key = word.to_lowercase();
        if self.index.contains_key(&key) {
            return;
        }
        self.index.insert(key, self.index.len());
        self.data.extend_from_slice(vector);
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Exact (case-folded) vector for `word`, if present.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        let slot = if word.chars().any(char::is_uppercase) {
            self.index.get(&word.to_lowercase())
        } else {
            self.index.get(word)
        }?;
        let start = slot * self.dimension;
        Some(&self.data[start..start + self.dimension])
    }

    pub fn lookup(&self, word: &str, policy: OovPolicy) -> Option<Cow<'_, [f64]>> {
        match (self.get(word), policy) {
            (Some(v), _) => Some(Cow::Borrowed(v)),
            (None, OovPolicy::Skip) => None,
            (None, OovPolicy::Zero) => Some(Cow::Owned(vec![0.0; self.dimension])),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }
}

/// Parses the word2vec text format. The `<count> <dim>` header line is
/// optional; without it the dimension comes from the first row.
pub fn load_embeddings(text: &str) -> Result<EmbeddingTable, EmbeddingError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let mut dimension = None;
    if let Some(&(_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split_whitespace().collect();
        if fields.len() == 2 {
            if let (Ok(_count), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>())
            {
                if dim == 0 {
                    return Err(EmbeddingError::InvalidHeader(first.to_string()));
                }
                dimension = Some(dim);
                lines.next();
            }
        }
    }

    let mut table: Option<EmbeddingTable> = None;
    let mut row = Vec::new();
    for (lineno, line) in lines {
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line has a field");
        row.clear();
        for value in fields {
            let parsed = value.parse::<f64>().map_err(|_| EmbeddingError::NumberParseError {
                line: lineno,
                value: value.to_string(),
            })?;
            if !parsed.is_finite() {
                return Err(EmbeddingError::NumberParseError {
                    line: lineno,
                    value: value.to_string(),
                });
            }
            row.push(parsed);
        }
        let dim = *dimension.get_or_insert(row.len());
        if row.len() != dim || dim == 0 {
            return Err(EmbeddingError::DimensionMismatch {
                line: lineno,
                expected: dim,
                found: row.len(),
            });
        }
        table
            .get_or_insert_with(|| EmbeddingTable {
                dimension: dim,
                index: HashMap::new(),
                data: Vec::new(),
            })
            .insert(word, &row);
    }
    table.ok_or(EmbeddingError::EmptyTable)
}

/// Loads embeddings from raw bytes (must be UTF-8).
pub fn load_embeddings_bytes(bytes: &[u8]) -> Result<EmbeddingTable, EmbeddingError> {
    let text = std::str::from_utf8(bytes).map_err(|e| EmbeddingError::DecodeError(e.to_string()))?;
    load_embeddings(text)
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::LengthMismatch(u.len(), v.len()));
    }
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / denom).clamp(-1.0, 1.0))
}

/// Mean of the word vectors. With `Skip`, OOV words are left out of the
/// average; with `Zero` they count as zero vectors. `None` if nothing remains.
///
/// Computed as a count-weighted sum over distinct words, so the mean of
/// repeated copies of one word is that word's vector exactly.
pub fn mean_vector<S: AsRef<str>>(
    table: &EmbeddingTable,
    words: &[S],
    policy: OovPolicy,
) -> Option<Vec<f64>> {
    let mut counts: Vec<(&[f64], usize)> = Vec::new();
    let mut total = 0usize;
    for word in words {
        match table.get(word.as_ref()) {
            Some(v) => {
                match counts.iter_mut().find(|(u, _)| std::ptr::eq(*u, v)) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((v, 1)),
                }
                total += 1;
            }
            None if policy == OovPolicy::Zero => total += 1,
            None => {}
        }
    }
    if total == 0 {
        return None;
    }
    let n = total as f64;
    let mut mean = vec![0.0; table.dimension()];
    for (v, count) in counts {
        let w = count as f64 / n;
        for (acc, x) in mean.iter_mut().zip(v) {
            *acc += w * x;
        }
    }
    Some(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SMALL: &str = "2 2\na 1 0\nb 0 1\n";

    #[test]
    fn loads_with_header() {
        let t = load_embeddings(SMALL).unwrap();
        assert_eq!(t.dimension(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a").unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn loads_without_header() {
        let t = load_embeddings("a 1 0 0\nb 0 1 0\n").unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.get("b").unwrap(), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let err = load_embeddings("2 2\na 1 0\nc 1 2 3\n").unwrap_err();
        assert_eq!(
            err,
            EmbeddingError::DimensionMismatch {
                line: 3,
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn bad_number_and_empty() {
        assert!(matches!(
            load_embeddings("a 1 x\n"),
            Err(EmbeddingError::NumberParseError { line: 1, .. })
        ));
        assert_eq!(load_embeddings("").unwrap_err(), EmbeddingError::EmptyTable);
        assert_eq!(load_embeddings("0 5\n").unwrap_err(), EmbeddingError::EmptyTable);
    }

    #[test]
    fn duplicate_rows_keep_first() {
        let t = load_embeddings("a 1 0\nb 0 1\na 5 5\nA 7 7\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a").unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn lookup_policies_and_case_folding() {
        let t = load_embeddings("Oxalic 1 0\nb 0 1\n").unwrap();
        assert_eq!(t.lookup("oxalic", OovPolicy::Skip).unwrap().as_ref(), [1.0, 0.0]);
        assert_eq!(t.lookup("OXALIC", OovPolicy::Skip).unwrap().as_ref(), [1.0, 0.0]);
        assert!(t.lookup("zzz", OovPolicy::Skip).is_none());
        assert_eq!(t.lookup("zzz", OovPolicy::Zero).unwrap().as_ref(), [0.0, 0.0]);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[0.8, 0.6]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(EmbeddingError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn mean_vector_examples() {
        let t = load_embeddings(SMALL).unwrap();
        assert_eq!(mean_vector(&t, &["a"], OovPolicy::Skip).unwrap(), [1.0, 0.0]);
        assert_eq!(mean_vector(&t, &["a", "b"], OovPolicy::Skip).unwrap(), [0.5, 0.5]);
        assert!(mean_vector(&t, &["zzz"], OovPolicy::Skip).is_none());
        assert_eq!(mean_vector(&t, &["a", "zzz"], OovPolicy::Skip).unwrap(), [1.0, 0.0]);
        assert_eq!(mean_vector(&t, &["a", "zzz"], OovPolicy::Zero).unwrap(), [0.5, 0.0]);
        assert!(mean_vector::<&str>(&t, &[], OovPolicy::Zero).is_none());
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cosine_symmetric((u, v) in vec_pair()) {
            prop_assert_eq!(cosine(&u, &v).unwrap(), cosine(&v, &u).unwrap());
        }

        #[test]
        fn cosine_scale_invariant((u, v) in vec_pair(), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = u.iter().map(|x| c * x).collect();
            let a = cosine(&scaled, &v).unwrap();
            let b = cosine(&u, &v).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn mean_of_copies_is_exact(v in prop::collection::vec(-10.0f64..10.0, 1..6), n in 1usize..20) {
            let t = EmbeddingTable::from_entries(v.len(), [("w", v.clone())]).unwrap();
            let words = vec!["W"; n];
            prop_assert_eq!(mean_vector(&t, &words, OovPolicy::Skip).unwrap(), v);
        }

        #[test]
        fn every_row_is_retrievable(rows in prop::collection::btree_map("[a-z]{1,6}", prop::collection::vec(-1e3f64..1e3, 3), 1..20)) {
            let mut text = format!("{} 3\n", rows.len());
            for (word, v) in &rows {
                text.push_str(&format!("{word} {} {} {}\n", v[0], v[1], v[2]));
            }
            let t = load_embeddings(&text).unwrap();
            for (word, v) in &rows {
                prop_assert_eq!(t.get(word).unwrap(), v.as_slice());
            }
        }
    }
}
