//! Builds the user/item graph for a simulated population, then prints one
//! user's top recommendations with the history items that explain them and
//! the least similar history items used as controls.
//!
//! `cargo run --release --example recommend`

use elixir_core::config::ElixirConfig;
use elixir_core::evalsim::{generate_population, PopulationConfig};
use elixir_core::recwalk::Recommender;

fn main() -> elixir_core::Result<()> {
    let config = ElixirConfig::default();
    let pop = generate_population(
        &PopulationConfig {
            users: 5,
            ..Default::default()
        },
        &config,
    )?;
    let graph = pop.graph(&config)?;
    println!(
        "graph: {} users, {} items, {} like edges, {} similarity edges",
        graph.users(),
        graph.items(),
        graph.interaction_edges(),
        graph.similarity().nnz()
    );
    let recommender = Recommender::new(&graph, config.walk(), None)?;
    let slate = recommender.explained_slate(0, 5, 3)?;
    let name = |v: usize| pop.catalog.id(v).to_string();
    for (rank, e) in slate.entries.iter().enumerate() {
        println!(
            "{}. {} score {:.5} tags {}",
            rank + 1,
            name(e.item),
            e.score,
            pop.catalog.tag_names(e.item).join(",")
        );
        for &(h, c) in &e.explanations {
            println!(
                "     because {} ({c:.4}) shares {}",
                name(h),
                pop.catalog.shared_tags(e.item, h).join(",")
            );
        }
        let controls: Vec<String> = e.rand.iter().map(|&(h, _)| name(h)).collect();
        println!("     controls {}", controls.join(" "));
    }
    Ok(())
}
