//! Full feedback cycle for one simulated user: rate pairs, densify, learn the
//! preference vector, re-rank, and compare precision before and after.
//!
//! `cargo run --release --example learn -- [seed]`

use std::collections::HashSet;

use elixir_core::config::ElixirConfig;
use elixir_core::densify::densify_user;
use elixir_core::evalsim::{generate_population, PopulationConfig};
use elixir_core::lsh::ProjectionIndex;
use elixir_core::metrics::precision_at_k;
use elixir_core::model::FeedbackMatrix;
use elixir_core::prefopt::{learn_preference, similarity_shift};
use elixir_core::recwalk::{recommend_with_feedback, Recommender};

fn main() -> elixir_core::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ElixirConfig::default();
    let pop = generate_population(
        &PopulationConfig {
            users: 5,
            seed,
            ..Default::default()
        },
        &config,
    )?;
    let graph = pop.graph(&config)?;
    let recommender = Recommender::new(&graph, config.walk(), None)?;
    let rows: Vec<&[f64]> = pop.vectors.rows().iter().map(|r| r.as_slice()).collect();
    let index = ProjectionIndex::build(&rows, config.planes(), config.seed)?;

    for (u, user) in pop.users.iter().enumerate() {
        let slate = recommender.explained_slate(u, 30, 5)?;
        let mut rated = FeedbackMatrix::new();
        for e in &slate.entries {
            for &(h, _) in &e.explanations {
                rated.insert_explicit(
                    e.item,
                    h,
                    user.pair_verdict(pop.vectors.get(e.item), pop.vectors.get(h)),
                )?;
            }
        }
        let dense = densify_user(&rated, &pop.vectors, &index, &config.densify())?;
        let pref = learn_preference(&dense, &pop.vectors, &config.optimizer())?;
        let shift = similarity_shift(&pref.w, &dense, &pop.vectors)?;
        let judged: HashSet<usize> = slate.items().into_iter().collect();
        let relevant = pop.relevant(u);
        let before: Vec<usize> = recommender.recommend_excluding(u, 30, &judged)?.items();
        let after: Vec<usize> = recommend_with_feedback(&graph, u, &pref.w, config.walk(), 60)?
            .items()
            .into_iter()
            .filter(|v| !judged.contains(v))
            .collect();
        println!(
            "{}: {} pairs -> {} densified, objective {:.5}, shift {:.5}, P@5 {:.2} -> {:.2}",
            user.id,
            rated.m(),
            dense.len(),
            pref.objective,
            shift,
            precision_at_k(&before, &relevant, 5),
            precision_at_k(&after, &relevant, 5)
        );
    }
    Ok(())
}
