//! Runs the three-phase simulated study and prints the metrics table.
//!
//! `cargo run --release --example simulate -- [seed]`

use elixir_core::evalsim::{run_experiment, ExperimentConfig, PopulationConfig};

fn main() -> elixir_core::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let population = PopulationConfig {
        seed,
        ..Default::default()
    };
    let report = run_experiment(&population, &ExperimentConfig::default())?;
    let liked: usize = report
        .logs
        .users
        .iter()
        .flat_map(|u| &u.item_verdicts)
        .filter(|v| v.1)
        .count();
    let rated: usize = report.logs.users.iter().map(|u| u.item_verdicts.len()).sum();
    println!("phase 2: {liked}/{rated} recommendations liked");
    print!("{}", report.table.to_tsv());
    Ok(())
}
