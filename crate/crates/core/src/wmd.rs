//! Word Mover's Distance: exact optimal transport between the normalized
//! bag-of-words distributions of two sentences under Euclidean ground cost.
//!
//! The transportation problem is solved with successive shortest paths on
//! the bipartite residual network. Every augmentation saturates a supply,
//! a demand or a reverse edge, so the solver terminates with an exact
//! optimum (up to floating-point rounding) rather than an entropic
//! approximation.

use std::collections::HashMap;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::corpus::LabeledSentence;
use crate::embeddings::{EmbeddingTable, OovPolicy};
use crate::similarity::SimilarityScore;

/// Tolerance on marginals and optimality checks.
pub const TOLERANCE: f64 = 1e-9;

/// Residual mass below this is treated as exhausted.
const MASS_EPS: f64 = 1e-14;

/// Minimum improvement for a label update in the shortest-path search.
const DIST_EPS: f64 = 1e-13;

#[derive(Debug, Error, PartialEq)]
pub enum WmdError {
    #[error("infeasible shape: {0}")]
    InfeasibleShape(String),
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, WmdError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(WmdError::InfeasibleShape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, x) in sums.iter_mut().zip(self.row(i)) {
                *s += x;
            }
        }
        sums
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A coupling of two distributions; row sums and column sums are the
/// marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: DenseMatrix,
}

impl TransportPlan {
    pub fn cost(&self, cost: &DenseMatrix) -> f64 {
        self.matrix
            .as_slice()
            .iter()
            .zip(cost.as_slice())
            .map(|(t, c)| t * c)
            .sum()
    }
}

/// Normalized bag of words over the distinct in-vocabulary words of a text.
#[derive(Debug, Clone, PartialEq)]
pub struct NBowDistribution {
    pub words: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl NBowDistribution {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// nBOW of a sentence; `None` when no word survives the OOV policy.
pub fn nbow(
    table: &EmbeddingTable,
    sentence: &LabeledSentence,
    policy: OovPolicy,
) -> Option<NBowDistribution> {
    nbow_from_tokens(table, &sentence.tokens, policy)
}

/// nBOW of a token sequence. Words are case-folded; support order is first
/// occurrence.
pub fn nbow_from_tokens<S: AsRef<str>>(
    table: &EmbeddingTable,
    tokens: &[S],
    policy: OovPolicy,
) -> Option<NBowDistribution> {
    let mut slots: HashMap<String, usize> = HashMap::new();
    let mut words = Vec::new();
    let mut vectors = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for token in tokens {
        let word = token.as_ref().to_lowercase();
        if let Some(&slot) = slots.get(&word) {
            counts[slot] += 1;
            continue;
        }
        let Some(vector) = table.lookup(&word, policy) else {
            continue;
        };
        slots.insert(word.clone(), words.len());
        words.push(word);
        vectors.push(vector.into_owned());
        counts.push(1);
    }
    if words.is_empty() {
        return None;
    }
    let total: usize = counts.iter().sum();
    let weights = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Some(NBowDistribution {
        words,
        vectors,
        weights,
    })
}

fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise Euclidean distances between the two supports.
pub fn cost_matrix(da: &NBowDistribution, db: &NBowDistribution) -> Result<DenseMatrix, WmdError> {
    let mut c = DenseMatrix::zeros(da.len(), db.len());
    for (i, u) in da.vectors.iter().enumerate() {
        for (j, v) in db.vectors.iter().enumerate() {
            if u.len() != v.len() {
                return Err(WmdError::DimensionMismatch(u.len(), v.len()));
            }
            c[(i, j)] = euclidean(u, v);
        }
    }
    Ok(c)
}

/// Solves `min Σ T[i][j]·C[i][j]` subject to row sums `weights_a` and column
/// sums `weights_b`, `T ≥ 0`. Returns the optimal plan and its objective.
pub fn solve_transport(
    weights_a: &[f64],
    weights_b: &[f64],
    cost: &DenseMatrix,
) -> Result<(TransportPlan, f64), WmdError> {
    let m = weights_a.len();
    let n = weights_b.len();
    if m == 0 || n == 0 {
        return Err(WmdError::InfeasibleShape("empty marginal".into()));
    }
    if cost.rows() != m || cost.cols() != n {
        return Err(WmdError::InfeasibleShape(format!(
            "cost matrix is {}x{}, marginals are {m} and {n}",
            cost.rows(),
            cost.cols()
        )));
    }
    if weights_a.iter().chain(weights_b).any(|w| !w.is_finite() || *w < 0.0) {
        return Err(WmdError::InfeasibleShape("weights must be finite and nonnegative".into()));
    }
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(WmdError::InfeasibleShape("costs must be finite".into()));
    }
    let (sa, sb): (f64, f64) = (weights_a.iter().sum(), weights_b.iter().sum());
    if (sa - sb).abs() > TOLERANCE {
        return Err(WmdError::InfeasibleShape(format!(
            "marginal masses differ ({sa} vs {sb})"
        )));
    }

    let mut supply = weights_a.to_vec();
    let mut demand = weights_b.to_vec();
    let mut flow = DenseMatrix::zeros(m, n);

    let mut dist_src = vec![f64::INFINITY; m];
    let mut dist_dst = vec![f64::INFINITY; n];
    // pred_src[i]: destination node the path reached i from (reverse edge),
    // or None when i is where the path starts.
    let mut pred_src: Vec<Option<usize>> = vec![None; m];
    let mut pred_dst = vec![0usize; n];

    // Each augmentation zeroes a supply, a demand or a reverse edge.
    let max_rounds = 4 * (m + n) * (m * n + 1);
    for _ in 0..max_rounds {
        if supply.iter().all(|&s| s <= MASS_EPS) {
            break;
        }

        dist_src.iter_mut().for_each(|d| *d = f64::INFINITY);
        dist_dst.iter_mut().for_each(|d| *d = f64::INFINITY);
        pred_src.iter_mut().for_each(|p| *p = None);
        for i in 0..m {
            if supply[i] > MASS_EPS {
                dist_src[i] = 0.0;
            }
        }

        // Bellman-Ford on the residual graph: forward edges i->j always
        // exist, reverse edges j->i exist where flow is positive.
        for _ in 0..(m + n) {
            let mut changed = false;
            for i in 0..m {
                let di = dist_src[i];
                if !di.is_finite() {
                    continue;
                }
                for j in 0..n {
                    let nd = di + cost[(i, j)];
                    if nd < dist_dst[j] - DIST_EPS {
                        dist_dst[j] = nd;
                        pred_dst[j] = i;
                        changed = true;
                    }
                }
            }
            for j in 0..n {
                let dj = dist_dst[j];
                if !dj.is_finite() {
                    continue;
                }
                for i in 0..m {
                    if flow[(i, j)] > MASS_EPS {
                        let nd = dj - cost[(i, j)];
                        if nd < dist_src[i] - DIST_EPS {
                            dist_src[i] = nd;
                            pred_src[i] = Some(j);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let target = (0..n)
            .filter(|&j| demand[j] > MASS_EPS && dist_dst[j].is_finite())
            .min_by(|&a, &b| dist_dst[a].total_cmp(&dist_dst[b]));
        let Some(target) = target else {
            break;
        };

        // Walk back to the path origin, collecting edges and the bottleneck.
        let mut path: Vec<(usize, usize, bool)> = Vec::new();
        let mut bottleneck = demand[target];
        let mut j = target;
        let origin = loop {
            let i = pred_dst[j];
            path.push((i, j, true));
            match pred_src[i] {
                None => break i,
                Some(prev_j) => {
                    bottleneck = bottleneck.min(flow[(i, prev_j)]);
                    path.push((i, prev_j, false));
                    j = prev_j;
                }
            }
            if path.len() > 2 * (m + n) {
                return Err(WmdError::InfeasibleShape("cycle in shortest-path tree".into()));
            }
        };
        bottleneck = bottleneck.min(supply[origin]);

        for &(i, j, forward) in &path {
            if forward {
                flow[(i, j)] += bottleneck;
            } else {
                flow[(i, j)] -= bottleneck;
                if flow[(i, j)] < MASS_EPS {
                    flow[(i, j)] = 0.0;
                }
            }
        }
        supply[origin] -= bottleneck;
        demand[target] -= bottleneck;
    }

    let plan = TransportPlan { matrix: flow };
    let objective = plan.cost(cost);
    Ok((plan, objective))
}

/// Exact transport between two nBOW distributions.
pub fn transport_between(
    da: &NBowDistribution,
    db: &NBowDistribution,
) -> Result<(TransportPlan, f64), WmdError> {
    let cost = cost_matrix(da, db)?;
    solve_transport(&da.weights, &db.weights, &cost)
}

/// WMD between two sentences; incomparable when either has no usable word.
/// Smaller is more similar.
pub fn wmd_distance(
    table: &EmbeddingTable,
    a: &LabeledSentence,
    b: &LabeledSentence,
    policy: OovPolicy,
) -> SimilarityScore {
    match (nbow(table, a, policy), nbow(table, b, policy)) {
        (Some(da), Some(db)) => nbow_distance(&da, &db),
        _ => SimilarityScore::incomparable(),
    }
}

pub(crate) fn nbow_distance(da: &NBowDistribution, db: &NBowDistribution) -> SimilarityScore {
    // Same-table supports always have matching dimensions and unit mass.
    let (_, objective) = transport_between(da, db).expect("well-formed nBOW pair");
    SimilarityScore::new(objective.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::load_embeddings;

    fn table() -> EmbeddingTable {
        load_embeddings("a 1 0\nb 0 1\n").unwrap()
    }

    fn sentence(tokens: &[&str]) -> LabeledSentence {
        let labels = vec!["O"; tokens.len()];
        LabeledSentence::from_strs("s", tokens, &labels).unwrap()
    }

    #[test]
    fn nbow_examples() {
        let t = table();
        let d = nbow(&t, &sentence(&["a", "a", "b"]), OovPolicy::Skip).unwrap();
        assert_eq!(d.words, ["a", "b"]);
        assert_eq!(d.weights, [2.0 / 3.0, 1.0 / 3.0]);
        let d = nbow(&t, &sentence(&["A"]), OovPolicy::Skip).unwrap();
        assert_eq!(d.weights, [1.0]);
        assert!(nbow(&t, &sentence(&["x", "y"]), OovPolicy::Skip).is_none());
        let z = nbow(&t, &sentence(&["x", "a"]), OovPolicy::Zero).unwrap();
        assert_eq!(z.vectors[0], [0.0, 0.0]);
        assert_eq!(z.weights, [0.5, 0.5]);
    }

    #[test]
    fn cost_matrix_examples() {
        let t = table();
        let a = nbow(&t, &sentence(&["a"]), OovPolicy::Skip).unwrap();
        let b = nbow(&t, &sentence(&["b"]), OovPolicy::Skip).unwrap();
        assert_eq!(cost_matrix(&a, &a).unwrap().as_slice(), [0.0]);
        assert_eq!(cost_matrix(&a, &b).unwrap().as_slice(), [2f64.sqrt()]);
        let mut odd = b.clone();
        odd.vectors[0] = vec![1.0, 2.0, 3.0];
        assert_eq!(cost_matrix(&a, &odd), Err(WmdError::DimensionMismatch(2, 3)));
    }

    #[test]
    fn forced_plans() {
        let c = DenseMatrix::from_rows(&[vec![3.5]]).unwrap();
        let (plan, obj) = solve_transport(&[1.0], &[1.0], &c).unwrap();
        assert_eq!(plan.matrix.as_slice(), [1.0]);
        assert_eq!(obj, 3.5);

        let c = DenseMatrix::from_rows(&[vec![2.0, 4.0]]).unwrap();
        let (plan, obj) = solve_transport(&[1.0], &[0.5, 0.5], &c).unwrap();
        assert_eq!(plan.matrix.as_slice(), [0.5, 0.5]);
        assert!((obj - 3.0).abs() < 1e-15);
    }

    #[test]
    fn prefers_cheap_diagonal() {
        let c = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (plan, obj) = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        assert_eq!(obj, 0.0);
        assert_eq!(plan.matrix.as_slice(), [0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn rerouting_through_reverse_edges() {
        // Greedy nearest assignment from row 0 would take the 0-cost cell
        // that row 1 needs more; the optimum must undo it.
        let c = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 10.0]]).unwrap();
        let (plan, obj) = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        assert!((obj - 0.5).abs() < 1e-12, "{obj}");
        assert!((plan.matrix[(1, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let c = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            solve_transport(&[1.0], &[1.0], &c),
            Err(WmdError::InfeasibleShape(_))
        ));
        assert!(matches!(
            solve_transport(&[], &[1.0], &c),
            Err(WmdError::InfeasibleShape(_))
        ));
        assert!(matches!(
            solve_transport(&[1.0], &[0.5, 0.4], &c),
            Err(WmdError::InfeasibleShape(_))
        ));
        assert!(matches!(
            solve_transport(&[1.0], &[1.5, -0.5], &c),
            Err(WmdError::InfeasibleShape(_))
        ));
    }

    #[test]
    fn wmd_examples() {
        let t = table();
        let a = sentence(&["a"]);
        let b = sentence(&["b"]);
        let ab = sentence(&["a", "b"]);
        assert_eq!(wmd_distance(&t, &ab, &ab, OovPolicy::Skip).value, 0.0);
        assert!((wmd_distance(&t, &a, &b, OovPolicy::Skip).value - 2f64.sqrt()).abs() < 1e-12);
        let d = wmd_distance(&t, &a, &ab, OovPolicy::Skip).value;
        assert!((d - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert!(!wmd_distance(&t, &a, &sentence(&["zz"]), OovPolicy::Skip).comparable);
    }
}
