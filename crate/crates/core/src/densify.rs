//! Feedback densification.
//!
//! Every explicitly rated pair becomes a pseudo-item (element-wise geometric
//! mean of the two item vectors). Its approximate item neighbourhood, taken
//! from the LSH index, spans a set of unlabeled candidate pairs. Labels are
//! then spread over the pseudo-item affinity graph by harmonic label
//! propagation with the rated pairs clamped.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lsh::{ProjectionIndex, Query};
use crate::model::{FeedbackMatrix, ItemVectors};
use crate::similarity::{cosine, normalized};

/// Synthetic vector standing for an item pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoItem {
    pub pair: (usize, usize),
    pub vector: Vec<f64>,
}

/// Element-wise geometric mean `sqrt(a[t] * b[t])`.
pub fn make_pseudo_item(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            if x < 0.0 || y < 0.0 {
                Err(Error::NegativeCoordinate)
            } else {
                Ok((x * y).sqrt())
            }
        })
        .collect()
}

/// All unordered pairs `(a, b)`, `a < b`, drawn from the `k` approximate
/// nearest items of `pseudo`, minus pairs the user already rated explicitly.
pub fn candidate_pairs(
    pseudo: &[f64],
    index: &ProjectionIndex,
    k: usize,
    rated: &FeedbackMatrix,
) -> Result<Vec<(usize, usize)>> {
    let mut neighbours: Vec<usize> = index
        .knn(Query::Vector(pseudo), k)?
        .into_iter()
        .map(|(ix, _)| ix)
        .collect();
    neighbours.sort_unstable();
    let mut out = Vec::new();
    for (pos, &a) in neighbours.iter().enumerate() {
        for &b in &neighbours[pos + 1..] {
            let explicit = rated
                .get_unordered(a, b)
                .is_some_and(|e| e.source == crate::model::LabelSource::Explicit);
            if !explicit {
                out.push((a, b));
            }
        }
    }
    Ok(out)
}

/// Symmetric non-negative node affinity with zero diagonal.
pub trait Affinity {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// `W · y`
    fn apply(&self, y: &[f64]) -> Vec<f64>;
    /// Row sums of `W`.
    fn degrees(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.len()])
    }
}

/// Explicit dense affinity matrix.
#[derive(Debug, Clone)]
pub struct DenseAffinity {
    rows: Vec<Vec<f64>>,
}

impl DenseAffinity {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidParameter("affinity diagonal must be zero".into()));
            }
            for (j, &x) in row.iter().enumerate() {
                if x.is_nan() || x < 0.0 || x != rows[j][i] {
                    return Err(Error::InvalidParameter(
                        "affinity must be symmetric and non-negative".into(),
                    ));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl Affinity for DenseAffinity {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(y).map(|(w, v)| w * v).sum())
            .collect()
    }
}

/// `W(a, b) = max(0, cos(a, b))` for `a != b`.
///
/// When every vector is non-negative the clip never binds and `W` is applied
/// in factored form `X̂ (X̂ᵀ y) − diag(nz) y`, which is `O(n·d)` per product.
#[derive(Debug, Clone)]
pub struct CosineAffinity {
    unit: Vec<Vec<f64>>,
    nonzero: Vec<bool>,
    factored: bool,
}

impl CosineAffinity {
    pub fn new(vectors: &[Vec<f64>]) -> Self {
        let factored = vectors.iter().flatten().all(|&x| x >= 0.0);
        Self {
            unit: vectors.iter().map(|v| normalized(v)).collect(),
            nonzero: vectors.iter().map(|v| v.iter().any(|&x| x != 0.0)).collect(),
            factored,
        }
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        cosine(&self.unit[a], &self.unit[b]).max(0.0)
    }

    pub fn to_dense(&self) -> DenseAffinity {
        let n = self.unit.len();
        DenseAffinity {
            rows: (0..n).map(|a| (0..n).map(|b| self.weight(a, b)).collect()).collect(),
        }
    }
}

impl Affinity for CosineAffinity {
    fn len(&self) -> usize {
        self.unit.len()
    }

    fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = self.unit.len();
        if n == 0 {
            return Vec::new();
        }
        if !self.factored {
            return (0..n).map(|a| (0..n).map(|b| self.weight(a, b) * y[b]).sum()).collect();
        }
        let d = self.unit[0].len();
        let mut projected = vec![0.0; d];
        for (row, &yi) in self.unit.iter().zip(y) {
            for (p, x) in projected.iter_mut().zip(row) {
                *p += x * yi;
            }
        }
        self.unit
            .iter()
            .zip(y)
            .zip(&self.nonzero)
            .map(|((row, &yi), &nz)| {
                let full: f64 = row.iter().zip(&projected).map(|(a, b)| a * b).sum();
                if nz {
                    full - yi
                } else {
                    full
                }
            })
            .collect()
    }
}

// Factored affinity products leave ~1e-16 residue on isolated nodes.
const DEGREE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub labels: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `Y ← D⁻¹ W Y` with labeled rows clamped after every sweep, until
/// the largest change is below `tol`. Nodes with zero degree keep label 0.
pub fn propagate_labels<A: Affinity>(
    affinity: &A,
    clamped: &[Option<f64>],
    params: PropagationParams,
) -> Result<Propagation> {
    let n = affinity.len();
    if clamped.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: clamped.len(),
        });
    }
    if clamped.iter().all(Option::is_none) {
        return Err(Error::InvalidParameter("label propagation needs a labeled node".into()));
    }
    let degrees = affinity.degrees();
    let mut y: Vec<f64> = clamped.iter().map(|c| c.unwrap_or(0.0)).collect();
    let bound = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        let wy = affinity.apply(&y);
        let mut change = 0.0f64;
        for i in 0..n {
            let next = match clamped[i] {
                Some(label) => label,
                None if degrees[i] > DEGREE_EPS => (wy[i] / degrees[i]).clamp(-1.0, 1.0),
                None => 0.0,
            };
            change = change.max((next - y[i]).abs());
            y[i] = next;
        }
        iterations += 1;
        debug_assert!(y.iter().all(|v| v.abs() <= bound + 1e-12));
        if change < params.tol {
            converged = true;
            break;
        }
    }
    Ok(Propagation {
        labels: y,
        iterations,
        converged,
    })
}

/// Pseudo-item nodes of one user: rated pairs first, then candidates.
#[derive(Debug, Clone)]
pub struct PropagationProblem {
    pub nodes: Vec<PseudoItem>,
    pub clamped: Vec<Option<f64>>,
}

impl PropagationProblem {
    pub fn labeled_count(&self) -> usize {
        self.clamped.iter().filter(|c| c.is_some()).count()
    }

    pub fn affinity(&self) -> CosineAffinity {
        let vectors: Vec<Vec<f64>> = self.nodes.iter().map(|n| n.vector.clone()).collect();
        CosineAffinity::new(&vectors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensifyConfig {
    pub k: usize,
    pub propagation: PropagationParams,
    /// Propagated labels with smaller magnitude are dropped.
    pub label_floor: f64,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        Self {
            k: 10,
            propagation: PropagationParams::default(),
            label_floor: 0.05,
        }
    }
}

/// Builds the per-user propagation problem from the explicit entries of `rated`.
pub fn build_problem(
    rated: &FeedbackMatrix,
    vectors: &ItemVectors,
    index: &ProjectionIndex,
    k: usize,
) -> Result<PropagationProblem> {
    let mut nodes = Vec::new();
    let mut clamped = Vec::new();
    let mut candidates = BTreeSet::new();
    for entry in rated.nonzero_entries() {
        if entry.source != crate::model::LabelSource::Explicit {
            continue;
        }
        let vector = make_pseudo_item(vectors.get(entry.rec), vectors.get(entry.other))?;
        candidates.extend(candidate_pairs(&vector, index, k, rated)?);
        nodes.push(PseudoItem {
            pair: (entry.rec, entry.other),
            vector,
        });
        clamped.push(Some(entry.label));
    }
    for (a, b) in candidates {
        nodes.push(PseudoItem {
            pair: (a, b),
            vector: make_pseudo_item(vectors.get(a), vectors.get(b))?,
        });
        clamped.push(None);
    }
    Ok(PropagationProblem { nodes, clamped })
}

/// Solves `problem` and returns the densified matrix: rated pairs unchanged,
/// candidates with `|label| >= label_floor` marked as propagated.
pub fn propagate(problem: &PropagationProblem, config: &DensifyConfig) -> Result<FeedbackMatrix> {
    let result = propagate_labels(&problem.affinity(), &problem.clamped, config.propagation)?;
    let mut out = FeedbackMatrix::new();
    for ((node, clamp), &y) in problem.nodes.iter().zip(&problem.clamped).zip(&result.labels) {
        let (a, b) = node.pair;
        match clamp {
            Some(label) => out.insert_explicit(a, b, *label)?,
            None if y.abs() >= config.label_floor && y != 0.0 => out.insert_propagated(a, b, y.clamp(-1.0, 1.0))?,
            None => {}
        }
    }
    Ok(out)
}

/// Densifies one user's pair feedback. Users without explicit pair ratings
/// get an empty matrix.
pub fn densify_user(
    rated: &FeedbackMatrix,
    vectors: &ItemVectors,
    index: &ProjectionIndex,
    config: &DensifyConfig,
) -> Result<FeedbackMatrix> {
    let explicit = rated.explicit_only();
    if explicit.m() == 0 {
        return Ok(FeedbackMatrix::new());
    }
    let problem = build_problem(&explicit, vectors, index, config.k)?;
    if problem.nodes.len() == problem.labeled_count() {
        return Ok(explicit);
    }
    propagate(&problem, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_item_algebra() {
        let v = [0.3, 1.7, 0.0, 4.0];
        assert_eq!(make_pseudo_item(&v, &v).unwrap(), v.to_vec());
        assert_eq!(make_pseudo_item(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(make_pseudo_item(&[4.0, 1.0], &[1.0, 9.0]).unwrap(), vec![2.0, 3.0]);
        assert!(matches!(
            make_pseudo_item(&[-1.0, 1.0], &[1.0, 1.0]),
            Err(Error::NegativeCoordinate)
        ));
    }

    #[test]
    fn candidate_pair_counts() {
        let vectors: Vec<Vec<f64>> = (0..12).map(|i| vec![1.0 + i as f64 * 0.01, 1.0]).collect();
        // one plane: both coordinates positive so everything shares a bucket
        let index = ProjectionIndex::build(&vectors, 1, 0).unwrap();
        let empty = FeedbackMatrix::new();
        let q = [1.0, 1.0];
        assert_eq!(candidate_pairs(&q, &index, 10, &empty).unwrap().len(), 45);
        assert_eq!(candidate_pairs(&q, &index, 2, &empty).unwrap().len(), 1);
        assert_eq!(candidate_pairs(&q, &index, 1, &empty).unwrap().len(), 0);

        let top2: Vec<usize> = index.knn(Query::Vector(&q), 2).unwrap().iter().map(|x| x.0).collect();
        let mut rated = FeedbackMatrix::new();
        rated.insert_explicit(top2[1], top2[0], 1.0).unwrap();
        assert!(candidate_pairs(&q, &index, 2, &rated).unwrap().is_empty());
    }

    #[test]
    fn one_step_fixed_point() {
        let w = DenseAffinity::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = propagate_labels(&w, &[Some(-1.0), None], PropagationParams::default()).unwrap();
        assert_eq!(p.labels[1], -1.0);
    }

    #[test]
    fn symmetric_opposite_labels_cancel() {
        let w = DenseAffinity::new(vec![vec![0.0, 0.0, 0.5], vec![0.0, 0.0, 0.5], vec![0.5, 0.5, 0.0]]).unwrap();
        let p = propagate_labels(&w, &[Some(1.0), Some(-1.0), None], PropagationParams::default()).unwrap();
        assert_eq!(p.labels[2], 0.0);
    }

    #[test]
    fn isolated_node_keeps_zero() {
        let w = DenseAffinity::new(vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let p = propagate_labels(&w, &[Some(1.0), None, None], PropagationParams::default()).unwrap();
        assert_eq!(p.labels, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn dense_affinity_validation() {
        assert!(DenseAffinity::new(vec![vec![1.0]]).is_err());
        assert!(DenseAffinity::new(vec![vec![0.0, 1.0], vec![0.5, 0.0]]).is_err());
        assert!(DenseAffinity::new(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
    }

    #[test]
    fn factored_cosine_matches_dense() {
        let vectors = vec![
            vec![1.0, 0.2, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.3, 0.9, 0.4],
            vec![0.0, 0.1, 2.0],
        ];
        let aff = CosineAffinity::new(&vectors);
        let dense = aff.to_dense();
        let y = [0.5, -0.3, 1.0, -1.0];
        for (a, b) in aff.apply(&y).iter().zip(dense.apply(&y)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn no_explicit_feedback_yields_empty() {
        let vectors = ItemVectors::new(2, vec![crate::model::ItemVector(vec![1.0, 0.0]); 3]).unwrap();
        let index = ProjectionIndex::build(&vec![vec![1.0, 0.0]; 3], 3, 0).unwrap();
        let out = densify_user(&FeedbackMatrix::new(), &vectors, &index, &DensifyConfig::default()).unwrap();
        assert!(out.is_empty());
    }
}
