#![allow(dead_code)]

use std::path::{Path, PathBuf};

use clap::Parser;
use elixir_service::cli::{run, Cli};

pub fn toy(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy").join(file)
}

/// Runs one `elixir` invocation in-process and returns its stdout.
pub fn elixir(store: &Path, args: &[&str]) -> String {
    let mut argv = vec!["elixir", "--store", store.to_str().unwrap(), "--config-file"];
    let config = toy("elixir.toml");
    argv.push(config.to_str().unwrap());
    argv.extend_from_slice(args);
    let mut out = Vec::new();
    run(Cli::parse_from(argv), &mut out).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    String::from_utf8(out).unwrap()
}

/// Store with the toy catalog, histories, vectors and graph.
pub fn toy_store() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let catalog = toy("catalog.tsv");
    let likes = toy("likes.tsv");
    elixir(
        dir.path(),
        &[
            "ingest",
            "--catalog",
            catalog.to_str().unwrap(),
            "--likes",
            likes.to_str().unwrap(),
        ],
    );
    elixir(dir.path(), &["factorize"]);
    elixir(dir.path(), &["build-graph"]);
    dir
}
