//! Grid search for the regularization weight and learning rate on held-out
//! explanation pairs of a simulated population.
//!
//! `cargo run --release --example tune`

use elixir_core::config::ElixirConfig;
use elixir_core::evalsim::{generate_population, run_phase2, tune_regularization, ExperimentConfig, PopulationConfig};

fn main() -> elixir_core::Result<()> {
    let experiment = ExperimentConfig::default();
    let config = ElixirConfig::default();
    let pop = generate_population(
        &PopulationConfig {
            users: 10,
            ..Default::default()
        },
        &config,
    )?;
    let graph = pop.graph(&config)?;
    let logs = run_phase2(&pop, &graph, &experiment)?;
    let grid = tune_regularization(&pop, &logs, &[0.0, 0.3, 1.0, 3.0], &[0.003, 0.01, 0.03], &config)?;
    println!("gamma\tlr\tagreement");
    for p in grid {
        println!("{}\t{}\t{:.3}", p.gamma, p.lr, p.agreement);
    }
    Ok(())
}
