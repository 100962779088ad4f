//! Rates a handful of recommendation/explanation pairs for one simulated user
//! and spreads those ratings to nearby pairs through pseudo-items.
//!
//! `cargo run --release --example densify`

use elixir_core::config::ElixirConfig;
use elixir_core::densify::densify_user;
use elixir_core::evalsim::{generate_population, PopulationConfig};
use elixir_core::lsh::ProjectionIndex;
use elixir_core::model::{FeedbackMatrix, LabelSource};
use elixir_core::recwalk::Recommender;

fn main() -> elixir_core::Result<()> {
    let config = ElixirConfig::default();
    let pop = generate_population(
        &PopulationConfig {
            users: 3,
            ..Default::default()
        },
        &config,
    )?;
    let graph = pop.graph(&config)?;
    let slate = Recommender::new(&graph, config.walk(), None)?.explained_slate(0, 5, 5)?;
    let user = &pop.users[0];
    let mut rated = FeedbackMatrix::new();
    for e in &slate.entries {
        for &(h, _) in e.explanations.iter().chain(&e.rand) {
            let label = user.pair_verdict(pop.vectors.get(e.item), pop.vectors.get(h));
            let _ = rated.insert_explicit(e.item, h, label);
        }
    }
    let rows: Vec<&[f64]> = pop.vectors.rows().iter().map(|r| r.as_slice()).collect();
    let index = ProjectionIndex::build(&rows, config.planes(), config.seed)?;
    let dense = densify_user(&rated, &pop.vectors, &index, &config.densify())?;
    let propagated: Vec<f64> = dense
        .iter()
        .filter(|e| e.source == LabelSource::Propagated)
        .map(|e| e.label)
        .collect();
    let negative = rated.iter().filter(|e| e.label < 0.0).count();
    println!("{} rated pairs ({negative} negative)", rated.m());
    println!(
        "{} propagated pairs, {} negative, mean label {:.3}",
        propagated.len(),
        propagated.iter().filter(|&&l| l < 0.0).count(),
        propagated.iter().sum::<f64>() / propagated.len().max(1) as f64
    );
    Ok(())
}
