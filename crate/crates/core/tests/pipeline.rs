use elixir_core::config::ElixirConfig;
use elixir_core::densify::densify_user;
use elixir_core::embed::{nmf_factorize, NmfConfig, TagMatrix};
use elixir_core::evalsim::{generate_population, PopulationConfig};
use elixir_core::io::{self, Record};
use elixir_core::lsh::ProjectionIndex;
use elixir_core::model::{Dataset, LabelSource};
use elixir_core::prefopt::{learn_preference, similarity_shift};
use elixir_core::recwalk::{recommend_with_feedback, InteractionGraph, Recommender};

fn small() -> PopulationConfig {
    PopulationConfig {
        users: 4,
        items: 150,
        history: 15,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn files_round_trip_bit_exact() {
    let config = ElixirConfig::default();
    let pop = generate_population(&small(), &config).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let catalog_path = dir.path().join("catalog.tsv");
    io::write_records(&catalog_path, &io::catalog_records(&pop.catalog)).unwrap();
    assert_eq!(io::read_catalog(&catalog_path).unwrap(), pop.catalog);

    let vectors_path = dir.path().join("vectors.tsv");
    io::save_vectors(&vectors_path, &pop.catalog, &pop.vectors).unwrap();
    let loaded = io::load_vectors(&vectors_path, &pop.catalog, Some(config.d)).unwrap();
    assert_eq!(loaded, pop.vectors);
    assert!(io::load_vectors(&vectors_path, &pop.catalog, Some(config.d + 1)).is_err());

    let mut dataset = Dataset::new(pop.catalog.clone());
    let mut history = Vec::new();
    for (user, profile) in pop.users.iter().zip(&pop.profiles) {
        history.push(Record::User { user: user.id.clone() });
        for &v in profile.history() {
            history.push(Record::Like {
                user: user.id.clone(),
                item: pop.catalog.id(v).clone(),
            });
        }
    }
    io::apply_records(&mut dataset, &history).unwrap();
    let graph = InteractionGraph::build(dataset.profiles(), loaded, config.similarity()).unwrap();
    let graph_path = dir.path().join("graph.tsv");
    io::write_records(&graph_path, &io::graph_records(&graph, &dataset)).unwrap();
    let records = io::read_records(&graph_path).unwrap();
    assert_eq!(
        &io::similarity_from_records(&pop.catalog, &records).unwrap(),
        graph.similarity()
    );

    let mut rebuilt = Dataset::new(pop.catalog.clone());
    io::apply_records(&mut rebuilt, &records).unwrap();
    let again = InteractionGraph::from_parts(
        rebuilt.profiles(),
        graph.vectors().clone(),
        graph.similarity().clone(),
        config.similarity(),
    )
    .unwrap();
    for u in 0..graph.users() {
        assert_eq!(graph.likes(u), again.likes(u));
    }
}

#[test]
fn feedback_loop_end_to_end() {
    let config = ElixirConfig::default();
    let pop = generate_population(&small(), &config).unwrap();
    let nmf_config = NmfConfig {
        seed: small().seed,
        ..config.nmf()
    };
    let nmf = nmf_factorize(&TagMatrix::from_catalog(&pop.catalog).unwrap(), nmf_config).unwrap();
    assert_eq!(nmf.vectors, pop.vectors);
    let graph = pop.graph(&config).unwrap();
    let recommender = Recommender::new(&graph, config.walk(), None).unwrap();
    let slate = recommender.explained_slate(0, 10, 5).unwrap();
    assert_eq!(slate.entries.len(), 10);

    let user = &pop.users[0];
    let mut dataset = Dataset::new(pop.catalog.clone());
    dataset.register_user(user.id.clone());
    for entry in &slate.entries {
        for &(other, _) in entry.explanations.iter().chain(&entry.rand) {
            let label = user.pair_verdict(pop.vectors.get(entry.item), pop.vectors.get(other));
            let (rec, other) = (pop.catalog.id(entry.item), pop.catalog.id(other));
            let _ = dataset.record_pair_feedback(&user.id, rec, other, label);
        }
    }
    let rated = dataset.feedback(0).clone();
    assert!(rated.m() >= 10);

    let rows: Vec<&[f64]> = pop.vectors.rows().iter().map(|r| r.as_slice()).collect();
    let index = ProjectionIndex::build(&rows, config.planes(), config.seed).unwrap();
    let dense = densify_user(&rated, &pop.vectors, &index, &config.densify()).unwrap();
    assert!(dense.len() > rated.len());
    for e in rated.iter() {
        assert_eq!(dense.get(e.rec, e.other).unwrap().label, e.label);
    }
    let dense_path = tempfile::NamedTempFile::new().unwrap();
    io::write_records(
        dense_path.path(),
        &io::feedback_records(&pop.catalog, &user.id, &dense, true),
    )
    .unwrap();
    let reread =
        io::feedback_from_records(&pop.catalog, &user.id, &io::read_records(dense_path.path()).unwrap()).unwrap();
    assert_eq!(reread, dense);
    assert!(reread.iter().any(|e| e.source == LabelSource::Propagated));

    let pref = learn_preference(&dense, &pop.vectors, &config.optimizer()).unwrap();
    assert!(pref.objective <= 0.0);
    let shift = similarity_shift(&pref.w, &dense, &pop.vectors).unwrap();
    let norm2: f64 = pref.w.iter().map(|x| x * x).sum();
    assert!(shift >= config.gamma * norm2 - 1e-12);

    let reranked = recommend_with_feedback(&graph, 0, &pref.w, config.walk(), 10).unwrap();
    assert_eq!(reranked.entries.len(), 10);
    assert!(reranked.items().iter().all(|&v| !pop.profiles[0].contains(v)));
}
