//! One feedback session against the bundled toy data, in-process: build a
//! store, serve a slate, rate the top recommendation's explanations, relearn
//! and show which items entered or left the slate.
//!
//! `cargo run --example session`

use std::path::Path;

use clap::Parser;

use elixir_core::model::{ItemId, UserId};
use elixir_service::cli::{run, Cli};
use elixir_service::state::ServiceState;
use elixir_service::ServiceResult;

fn main() -> ServiceResult<()> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let dir = std::env::temp_dir().join(format!("elixir-session-{}", std::process::id()));
    let store = dir.to_str().unwrap();
    let config = toy.join("elixir.toml");
    let catalog = toy.join("catalog.tsv");
    let likes = toy.join("likes.tsv");
    for args in [
        vec![
            "ingest",
            "--catalog",
            catalog.to_str().unwrap(),
            "--likes",
            likes.to_str().unwrap(),
        ],
        vec!["factorize"],
        vec!["build-graph"],
    ] {
        let mut argv = vec!["elixir", "--store", store, "--config-file", config.to_str().unwrap()];
        argv.extend(args);
        run(Cli::parse_from(argv), &mut std::io::sink())?;
    }

    let state = ServiceState::open_path(&dir, Some(&config))?;
    let user = UserId::new("ana");
    let before = state.slate(&user)?;
    let top = &before.items[0];
    println!("v{} top: {} [{}]", before.version, top.item, top.tags.join(","));
    for exp in &top.explanations {
        // this rater dislikes westerns
        let western = exp.shared_tags.iter().any(|t| t == "western");
        let label = if western { -1.0 } else { 1.0 };
        println!(
            "  rate ({}, {}) {label:+} shared {}",
            top.item,
            exp.item,
            exp.shared_tags.join(",")
        );
        state.pair_feedback(
            &user,
            &ItemId::new(top.item.clone()),
            &ItemId::new(exp.item.clone()),
            label,
            Some(before.version),
        )?;
    }
    let out = state.relearn(&user)?;
    let old: Vec<&str> = before.items.iter().take(10).map(|i| i.item.as_str()).collect();
    let new: Vec<&str> = out.slate.items.iter().take(10).map(|i| i.item.as_str()).collect();
    println!("v{} (noop: {})", out.version, out.noop);
    println!("  top 10 before: {}", old.join(" "));
    println!("  top 10 after:  {}", new.join(" "));
    println!(
        "  entered: {:?}",
        new.iter().filter(|i| !old.contains(i)).collect::<Vec<_>>()
    );
    println!(
        "  left:    {:?}",
        old.iter().filter(|i| !new.contains(i)).collect::<Vec<_>>()
    );
    println!("{:?}", state.metrics(&user)?.counts);
    std::fs::remove_dir_all(&dir).map_err(elixir_core::Error::from)?;
    Ok(())
}
