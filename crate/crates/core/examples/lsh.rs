//! Random-hyperplane index: bucket sizes, recall of bucket-restricted 10-NN
//! against exact search, and the share of queries with fewer than 10 hits.
//!
//! `cargo run --release --example lsh -- [seed]`

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use elixir_core::lsh::{ProjectionIndex, Query};
use elixir_core::similarity::cosine;

fn main() -> elixir_core::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, non_negative) in [("gaussian", false), ("half-normal", true)] {
        let vectors: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                (0..20)
                    .map(|_| {
                        let x: f64 = StandardNormal.sample(&mut rng);
                        if non_negative {
                            x.abs()
                        } else {
                            x
                        }
                    })
                    .collect()
            })
            .collect();
        let index = ProjectionIndex::build(&vectors, 3, seed)?;
        let sizes: Vec<usize> = index.buckets().values().map(Vec::len).collect();
        let mut recall = 0.0;
        for q in 0..vectors.len() {
            let mut exact: Vec<(usize, f64)> = (0..vectors.len())
                .filter(|&j| j != q)
                .map(|j| (j, cosine(&vectors[q], &vectors[j])))
                .collect();
            exact.sort_by(|a, b| b.1.total_cmp(&a.1));
            let truth: HashSet<usize> = exact[..10].iter().map(|e| e.0).collect();
            let found = index.knn(Query::Item(q), 10)?;
            recall += found.iter().filter(|e| truth.contains(&e.0)).count() as f64 / 10.0;
        }
        let queries: Vec<Query> = (0..vectors.len()).map(Query::Item).collect();
        println!(
            "{name:<12} buckets {sizes:?}  recall@10 {:.3}  failure rate {:.3}",
            recall / vectors.len() as f64,
            index.failure_rate(&queries, 10)?
        );
    }
    Ok(())
}
