//! Ranking metrics with binary relevance.

use std::collections::HashSet;
use std::hash::Hash;

/// Fraction of the top `k` that is relevant. Divides by `k` even when the
/// ranking is shorter.
pub fn precision_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    if k == 0 || ranked.is_empty() {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|x| relevant.contains(x)).count();
    hits as f64 / k as f64
}

/// Average of precision at each relevant rank `≤ k`, normalized by
/// `min(k, |relevant|)`. The mean over users gives MAP@k.
pub fn average_precision_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    let denom = k.min(relevant.len());
    if denom == 0 || ranked.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    sum / denom as f64
}

/// nDCG@k with gain 1/0 and discount `1 / log2(rank + 1)`; the ideal ranking
/// puts `min(k, |relevant|)` relevant items first.
pub fn ndcg_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    let ideal_hits = k.min(relevant.len());
    if ideal_hits == 0 || ranked.is_empty() {
        return 0.0;
    }
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, x)| relevant.contains(x))
        .map(|(pos, _)| discount(pos))
        .sum();
    let idcg: f64 = (0..ideal_hits).map(discount).sum();
    dcg / idcg
}
