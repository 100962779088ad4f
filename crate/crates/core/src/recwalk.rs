//! Random walk with restart over the user/item graph.
//!
//! Nodes are users `0..U` followed by items `U..U+I`. A walker at a node
//! restarts with probability `alpha`; otherwise it follows an interaction
//! edge with probability `beta` or a similarity edge with `1 - beta`.
//!
//! Item-item similarity `S'` is made stochastic as
//! `M_I = S'/ν + Diag(1 − rowsum(S')/ν)` with `ν` the largest row sum, and
//! users are only similar to themselves.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::lsh::ProjectionIndex;
use crate::model::{ItemVectors, UserProfile};
use crate::similarity::cosine;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    /// Restart probability.
    pub alpha: f64,
    /// Probability of following an interaction edge.
    pub beta: f64,
    pub max_iters: usize,
    /// L1 change at which power iteration stops.
    pub tol: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            beta: 0.1,
            max_iters: 500,
            tol: 1e-10,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Where the LSH candidate generator for similarity edges comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityParams {
    pub threshold: f64,
    pub planes: usize,
    pub seed: u64,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self {
            threshold: 0.7,
            planes: 3,
            seed: 0,
        }
    }
}

/// Sparse symmetric item-item similarity without self edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimilarityMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SimilarityMatrix {
    pub fn empty(items: usize) -> Self {
        Self {
            rows: vec![Vec::new(); items],
        }
    }

    /// Builds from undirected edges; each edge is stored in both rows.
    pub fn from_edges(items: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut rows = vec![Vec::new(); items];
        for (i, j, s) in edges {
            if i == j {
                return Err(Error::InvalidParameter("similarity self edge".into()));
            }
            if i >= items || j >= items {
                return Err(Error::InvalidParameter(format!(
                    "similarity edge ({i}, {j}) out of range"
                )));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "similarity weight {s} must be positive"
                )));
            }
            rows[i].push((j, s));
            rows[j].push((i, s));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let before = row.len();
            row.dedup_by_key(|e| e.0);
            if row.len() != before {
                return Err(Error::InvalidParameter("duplicate similarity edge".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn items(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, item: usize) -> &[(usize, f64)] {
        &self.rows[item]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .ok()
            .map(|pos| self.rows[i][pos].1)
    }

    /// Number of stored (directed) entries; twice the edge count.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Undirected edges with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |e| e.0 > i).map(move |&(j, s)| (i, j, s)))
    }

    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|e| e.1).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Cosine edges `≥ threshold` among LSH bucket mates of `vectors`.
pub fn similarity_from_vectors<V: AsRef<[f64]>>(vectors: &[V], params: SimilarityParams) -> Result<SimilarityMatrix> {
    let index = ProjectionIndex::build(vectors, params.planes, params.seed)?;
    similarity_with_index(&index, params.threshold)
}

pub fn similarity_with_index(index: &ProjectionIndex, threshold: f64) -> Result<SimilarityMatrix> {
    let edges: Vec<(usize, usize, f64)> = index
        .candidate_pairs()
        .filter_map(|(i, j)| {
            let c = cosine(index.vector(i), index.vector(j));
            (c >= threshold && c > 0.0).then_some((i, j, c))
        })
        .collect();
    SimilarityMatrix::from_edges(index.len(), edges)
}

/// Similarity of translated vectors `v + w`, thresholded like the global one.
/// Items with a zero vector stay isolated: translating them would only
/// produce copies of `w`.
pub fn user_similarity_matrix(vectors: &ItemVectors, w: &[f64], params: SimilarityParams) -> Result<SimilarityMatrix> {
    if w.len() != vectors.dim() {
        return Err(Error::DimensionMismatch {
            expected: vectors.dim(),
            found: w.len(),
        });
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("preference vector must be finite".into()));
    }
    let mut translated = vectors.translated(w);
    for (i, t) in translated.iter_mut().enumerate() {
        if vectors.get(i).iter().all(|x| *x == 0.0) {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    similarity_from_vectors(&translated, params)
}

/// Users, items, like edges and the item similarity matrix.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    users: usize,
    likes: Vec<Vec<usize>>,
    likers: Vec<Vec<usize>>,
    similarity: SimilarityMatrix,
    vectors: ItemVectors,
    params: SimilarityParams,
}

impl InteractionGraph {
    pub fn build(profiles: &[UserProfile], vectors: ItemVectors, params: SimilarityParams) -> Result<Self> {
        let rows: Vec<&[f64]> = vectors.rows().iter().map(|r| r.as_slice()).collect();
        let similarity = similarity_from_vectors(&rows, params)?;
        Self::from_parts(profiles, vectors, similarity, params)
    }

    pub fn from_parts(
        profiles: &[UserProfile],
        vectors: ItemVectors,
        similarity: SimilarityMatrix,
        params: SimilarityParams,
    ) -> Result<Self> {
        let items = vectors.len();
        if similarity.items() != items {
            return Err(Error::DimensionMismatch {
                expected: items,
                found: similarity.items(),
            });
        }
        let mut likers = vec![Vec::new(); items];
        let mut likes = Vec::with_capacity(profiles.len());
        for (u, p) in profiles.iter().enumerate() {
            let mut liked = p.history().to_vec();
            liked.sort_unstable();
            for &v in &liked {
                if v >= items {
                    return Err(Error::UnknownItem(v.to_string()));
                }
                likers[v].push(u);
            }
            likes.push(liked);
        }
        Ok(Self {
            users: profiles.len(),
            likes,
            likers,
            similarity,
            vectors,
            params,
        })
    }

    /// Same vectors and similarity, new like edges.
    pub fn with_profiles(&self, profiles: &[UserProfile]) -> Result<Self> {
        Self::from_parts(profiles, self.vectors.clone(), self.similarity.clone(), self.params)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn items(&self) -> usize {
        self.likers.len()
    }

    pub fn nodes(&self) -> usize {
        self.users + self.items()
    }

    pub fn item_node(&self, item: usize) -> usize {
        self.users + item
    }

    pub fn likes(&self, user: usize) -> &[usize] {
        &self.likes[user]
    }

    pub fn has_like(&self, user: usize, item: usize) -> bool {
        self.likes[user].binary_search(&item).is_ok()
    }

    pub fn interaction_edges(&self) -> usize {
        self.likes.iter().map(Vec::len).sum()
    }

    pub fn similarity(&self) -> &SimilarityMatrix {
        &self.similarity
    }

    pub fn vectors(&self) -> &ItemVectors {
        &self.vectors
    }

    pub fn similarity_params(&self) -> SimilarityParams {
        self.params
    }
}

/// Row-stochastic sparse matrix over all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Validates that every row is non-negative and sums to 1.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (r, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&(c, p)| c >= n || p.is_nan() || p < 0.0) {
                return Err(Error::NotStochastic { row: r, sum });
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, node: usize) -> &[(usize, f64)] {
        &self.rows[node]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.rows.len();
        let mut out = vec![vec![0.0; n]; n];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, p) in row {
                out[r][c] += p;
            }
        }
        out
    }
}

fn push_merged(row: &mut Vec<(usize, f64)>, col: usize, p: f64) {
    if p == 0.0 {
        return;
    }
    match row.iter_mut().find(|e| e.0 == col) {
        Some(e) => e.1 += p,
        None => row.push((col, p)),
    }
}

/// `P = β·H + (1−β)·M` where `H` is the row-normalized interaction walk (rows
/// without interactions self-loop) and `M` the block-diagonal similarity walk.
pub fn transition_matrix(
    graph: &InteractionGraph,
    beta: f64,
    similarity: Option<&SimilarityMatrix>,
) -> Result<TransitionMatrix> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must lie in [0, 1], got {beta}")));
    }
    let s = similarity.unwrap_or(&graph.similarity);
    if s.items() != graph.items() {
        return Err(Error::DimensionMismatch {
            expected: graph.items(),
            found: s.items(),
        });
    }
    let nu = s.max_row_sum();
    let mut rows = Vec::with_capacity(graph.nodes());

    for u in 0..graph.users {
        let mut row = Vec::new();
        let liked = &graph.likes[u];
        if liked.is_empty() {
            push_merged(&mut row, u, beta);
        } else {
            let p = beta / liked.len() as f64;
            for &v in liked {
                push_merged(&mut row, graph.item_node(v), p);
            }
        }
        push_merged(&mut row, u, 1.0 - beta);
        rows.push(row);
    }

    for v in 0..graph.items() {
        let node = graph.item_node(v);
        let mut row = Vec::new();
        let likers = &graph.likers[v];
        if likers.is_empty() {
            push_merged(&mut row, node, beta);
        } else {
            let p = beta / likers.len() as f64;
            for &u in likers {
                push_merged(&mut row, u, p);
            }
        }
        if nu == 0.0 {
            push_merged(&mut row, node, 1.0 - beta);
        } else {
            let sims = s.row(v);
            let row_sum: f64 = sims.iter().map(|e| e.1).sum();
            for &(j, sim) in sims {
                push_merged(&mut row, graph.item_node(j), (1.0 - beta) * sim / nu);
            }
            push_merged(&mut row, node, (1.0 - beta) * (1.0 - row_sum / nu));
        }
        rows.push(row);
    }
    TransitionMatrix::from_rows(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprRun {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration for `π = α·e_source + (1−α)·π·P`.
pub fn ppr(p: &TransitionMatrix, source: usize, alpha: f64, max_iters: usize, tol: f64) -> Result<PprRun> {
    let n = p.len();
    if source >= n {
        return Err(Error::InvalidParameter(format!("source node {source} out of range")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let mut pi = vec![0.0; n];
    pi[source] = 1.0;
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        next.iter_mut().for_each(|x| *x = 0.0);
        next[source] = alpha;
        for (i, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let spread = (1.0 - alpha) * mass;
            for &(j, prob) in p.row(i) {
                next[j] += spread * prob;
            }
        }
        let change: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        iterations += 1;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(PprRun {
        scores: pi,
        iterations,
        converged,
    })
}

/// One recommended item with its explanation and control lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SlateEntry {
    pub item: usize,
    pub score: f64,
    /// History items by descending contribution.
    pub explanations: Vec<(usize, f64)>,
    /// History items by ascending cosine to `item`.
    pub rand: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecSlate {
    pub user: usize,
    pub entries: Vec<SlateEntry>,
}

impl RecSlate {
    pub fn items(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.item).collect()
    }
}

/// A graph version plus one similarity matrix, with cached per-source PPR vectors.
pub struct Recommender<'g> {
    graph: &'g InteractionGraph,
    config: WalkConfig,
    transition: TransitionMatrix,
    cache: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl<'g> Recommender<'g> {
    pub fn new(graph: &'g InteractionGraph, config: WalkConfig, similarity: Option<&SimilarityMatrix>) -> Result<Self> {
        config.validate()?;
        let transition = transition_matrix(graph, config.beta, similarity)?;
        Ok(Self {
            graph,
            config,
            transition,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn graph(&self) -> &InteractionGraph {
        self.graph
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    /// PPR vector personalized on `node`.
    pub fn scores_from(&self, node: usize) -> Result<Arc<Vec<f64>>> {
        if let Some(hit) = self.cache.lock().expect("ppr cache poisoned").get(&node) {
            return Ok(Arc::clone(hit));
        }
        let run = ppr(
            &self.transition,
            node,
            self.config.alpha,
            self.config.max_iters,
            self.config.tol,
        )?;
        let scores = Arc::new(run.scores);
        self.cache
            .lock()
            .expect("ppr cache poisoned")
            .insert(node, Arc::clone(&scores));
        Ok(scores)
    }

    /// Top-`n` reachable items outside the user's history.
    pub fn recommend(&self, user: usize, n: usize) -> Result<RecSlate> {
        self.recommend_excluding(user, n, &HashSet::new())
    }

    /// Like [`Recommender::recommend`], also skipping `exclude` (items the
    /// user already judged, say).
    pub fn recommend_excluding(&self, user: usize, n: usize, exclude: &HashSet<usize>) -> Result<RecSlate> {
        if user >= self.graph.users {
            return Err(Error::UnknownUser(user.to_string()));
        }
        if self.graph.likes[user].is_empty() {
            return Err(Error::EmptyHistory(user.to_string()));
        }
        let scores = self.scores_from(user)?;
        let offset = self.graph.users;
        let mut ranked: Vec<(usize, f64)> = (0..self.graph.items())
            .filter(|&v| !self.graph.has_like(user, v) && !exclude.contains(&v))
            .map(|v| (v, scores[offset + v]))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(n);
        Ok(RecSlate {
            user,
            entries: ranked
                .into_iter()
                .map(|(item, score)| SlateEntry {
                    item,
                    score,
                    explanations: Vec::new(),
                    rand: Vec::new(),
                })
                .collect(),
        })
    }

    /// Contribution of each history item to `rec`: PPR personalized on the
    /// history item, read at `rec`. Top `k`, ties by ascending index.
    pub fn explain(&self, user: usize, rec: usize, k: usize) -> Result<Vec<(usize, f64)>> {
        let mut contributions = Vec::new();
        for &h in &self.graph.likes[user] {
            let scores = self.scores_from(self.graph.item_node(h))?;
            contributions.push((h, scores[self.graph.item_node(rec)]));
        }
        contributions.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        contributions.truncate(k);
        Ok(contributions)
    }

    /// History items least similar to `rec` by raw vector cosine.
    pub fn rand_items(&self, user: usize, rec: usize, k: usize) -> Vec<(usize, f64)> {
        rand_items(self.graph, user, rec, k)
    }

    /// Slate with explanations and control items filled in for every entry.
    pub fn explained_slate(&self, user: usize, n: usize, k: usize) -> Result<RecSlate> {
        let mut slate = self.recommend(user, n)?;
        for entry in &mut slate.entries {
            entry.explanations = self.explain(user, entry.item, k)?;
            entry.rand = self.rand_items(user, entry.item, k);
        }
        Ok(slate)
    }
}

pub fn rand_items(graph: &InteractionGraph, user: usize, rec: usize, k: usize) -> Vec<(usize, f64)> {
    let target = graph.vectors.get(rec);
    let mut scored: Vec<(usize, f64)> = graph.likes[user]
        .iter()
        .map(|&h| (h, cosine(graph.vectors.get(h), target)))
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

pub fn recommend(
    graph: &InteractionGraph,
    user: usize,
    config: WalkConfig,
    n: usize,
    similarity: Option<&SimilarityMatrix>,
) -> Result<RecSlate> {
    Recommender::new(graph, config, similarity)?.recommend(user, n)
}

pub fn explain(
    graph: &InteractionGraph,
    user: usize,
    rec: usize,
    k: usize,
    config: WalkConfig,
) -> Result<Vec<(usize, f64)>> {
    Recommender::new(graph, config, None)?.explain(user, rec, k)
}

/// Recommendation over the user-specific similarity built from `w`.
pub fn recommend_with_feedback(
    graph: &InteractionGraph,
    user: usize,
    w: &[f64],
    config: WalkConfig,
    n: usize,
) -> Result<RecSlate> {
    if w.iter().all(|&x| x == 0.0) {
        return recommend(graph, user, config, n, None);
    }
    let s_user = user_similarity_matrix(graph.vectors(), w, graph.similarity_params())?;
    recommend(graph, user, config, n, Some(&s_user))
}
