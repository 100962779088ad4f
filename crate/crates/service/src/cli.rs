//! `elixir` command line: one subcommand per pipeline step, all reading and
//! writing a store directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use elixir_core::config::ElixirConfig;
use elixir_core::densify::densify_user;
use elixir_core::embed::{nmf_factorize, TagMatrix};
use elixir_core::evalsim::{run_experiment, Configuration, ExperimentConfig, PopulationConfig};
use elixir_core::io::{self, Record};
use elixir_core::lsh::ProjectionIndex;
use elixir_core::model::{Dataset, ItemId, LabelSource, UserId};
use elixir_core::prefopt::learn_preference;
use elixir_core::recwalk::{recommend_with_feedback, InteractionGraph, RecSlate, Recommender};

use crate::error::{ServiceError, ServiceResult};
use crate::state::ServiceState;
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "elixir", version, about = "Pair-feedback graph recommender")]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "ELIXIR_STORE", default_value = "elixir-store")]
    pub store: PathBuf,

    /// TOML run configuration; defaults to `<store>/elixir.toml` when present.
    #[arg(long, global = true, env = "ELIXIR_CONFIG_FILE")]
    pub config_file: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a catalog (`item` records) and optional histories (`user`/`like`/`dislike`).
    Ingest {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        likes: Option<PathBuf>,
    },
    /// Non-negative item vectors from the item/tag matrix.
    Factorize {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Similarity edges plus like edges, written as a graph dump.
    BuildGraph {
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Top-n recommendations from the interaction graph.
    Recommend {
        #[arg(long)]
        user: String,
        #[arg(long)]
        n: Option<usize>,
    },
    /// History items that contribute most to a recommendation.
    Explain {
        #[arg(long)]
        user: String,
        #[arg(long)]
        rec: String,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Append pair (and item) ratings to the feedback log.
    Feedback {
        #[arg(long)]
        file: PathBuf,
    },
    /// Spread a user's pair ratings to nearby pairs.
    Densify {
        #[arg(long)]
        user: String,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Learn a preference vector from the densified (or explicit) ratings.
    Learn {
        #[arg(long)]
        user: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Recommendations over the similarity of preference-translated vectors.
    Rerank {
        #[arg(long)]
        user: String,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Simulated study for one feedback configuration against ItemLevel.
    Evaluate {
        /// Configuration name, e.g. PairExp5.
        #[arg(long = "config")]
        configuration: Configuration,
        #[arg(long, default_value_t = 25)]
        population: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full simulated study; writes every intermediate log to `--out`.
    Simulate {
        /// Number of simulated users.
        #[arg(long, default_value_t = 25)]
        population: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "simulation")]
        out: PathBuf,
    },
    /// HTTP feedback sessions.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

struct Ctx<'a> {
    store: Store,
    config_file: Option<&'a Path>,
}

impl Ctx<'_> {
    fn config(&self) -> ServiceResult<ElixirConfig> {
        self.store.config(self.config_file)
    }

    fn user(&self, dataset: &Dataset, user: &str) -> ServiceResult<(UserId, usize)> {
        let id = UserId::new(user);
        let u = dataset.lookup_user(&id)?;
        Ok((id, u))
    }

    /// Dataset with every logged rating, and the graph over its histories.
    fn graph(&self, config: &ElixirConfig) -> ServiceResult<(Dataset, InteractionGraph)> {
        let dataset = self.store.dataset(true)?;
        let vectors = self.store.vectors(&dataset.catalog)?;
        let similarity = self.store.similarity(&dataset.catalog, &vectors, config)?;
        let graph = InteractionGraph::from_parts(dataset.profiles(), vectors, similarity, config.similarity())?;
        Ok((dataset, graph))
    }
}

fn print_slate(out: &mut impl Write, dataset: &Dataset, slate: &RecSlate) -> ServiceResult<()> {
    for (rank, e) in slate.entries.iter().enumerate() {
        writeln!(out, "{}\t{}\t{}", rank + 1, dataset.catalog.id(e.item), e.score).map_err(elixir_core::Error::from)?;
    }
    Ok(())
}

fn only_kinds(records: &[Record], path: &Path, allowed: &[&str]) -> ServiceResult<()> {
    for r in records {
        let kind = r.to_string().split('\t').next().unwrap_or_default().to_string();
        let explicit = !matches!(
            r,
            Record::Pair {
                source: Some(LabelSource::Propagated),
                ..
            }
        );
        if !allowed.contains(&kind.as_str()) || !explicit {
            return Err(ServiceError::Invalid(format!(
                "{}: `{kind}` records are not accepted here (expected {})",
                path.display(),
                allowed.join("/")
            )));
        }
    }
    Ok(())
}

pub fn run(cli: Cli, out: &mut impl Write) -> ServiceResult<()> {
    let ctx = Ctx {
        store: Store::new(&cli.store),
        config_file: cli.config_file.as_deref(),
    };
    let w = |out: &mut dyn Write, line: String| -> ServiceResult<()> {
        writeln!(out, "{line}").map_err(elixir_core::Error::from)?;
        Ok(())
    };
    match cli.command {
        Command::Ingest { catalog, likes } => {
            let store = Store::create(&cli.store)?;
            let parsed = io::read_catalog(&catalog)?;
            let history = match &likes {
                Some(path) => io::read_records(path)?,
                None => Vec::new(),
            };
            only_kinds(
                &history,
                likes.as_deref().unwrap_or(Path::new("likes")),
                &["user", "like", "dislike"],
            )?;
            let mut dataset = Dataset::new(parsed.clone());
            io::apply_records(&mut dataset, &history)?;
            io::write_records(&store.catalog_path(), &io::catalog_records(&parsed))?;
            io::write_records(&store.history_path(), &history)?;
            let edges: usize = dataset.profiles().iter().map(|p| p.history().len()).sum();
            w(
                out,
                format!(
                    "ingested {} items, {} users, {edges} likes",
                    parsed.len(),
                    dataset.user_count()
                ),
            )?;
        }
        Command::Factorize { d, seed } => {
            let mut config = ctx.config()?;
            config.d = d.unwrap_or(config.d);
            config.seed = seed.unwrap_or(config.seed);
            config.validate()?;
            let catalog = ctx.store.catalog()?;
            let nmf = nmf_factorize(&TagMatrix::from_catalog(&catalog)?, config.nmf())?;
            io::save_vectors(&ctx.store.vectors_path(), &catalog, &nmf.vectors)?;
            ctx.store.save_config(&config)?;
            w(
                out,
                format!(
                    "factorized {} items into d={} after {} iterations (error {:.6})",
                    catalog.len(),
                    config.d,
                    nmf.iterations,
                    nmf.final_objective()
                ),
            )?;
        }
        Command::BuildGraph { threshold } => {
            let mut config = ctx.config()?;
            config.threshold = threshold.unwrap_or(config.threshold);
            config.validate()?;
            let dataset = ctx.store.dataset(true)?;
            let vectors = ctx.store.vectors(&dataset.catalog)?;
            let graph = InteractionGraph::build(dataset.profiles(), vectors, config.similarity())?;
            io::write_records(&ctx.store.graph_path(), &io::graph_records(&graph, &dataset))?;
            ctx.store.save_config(&config)?;
            w(
                out,
                format!(
                    "graph: {} users, {} items, {} like edges, {} similarity edges",
                    graph.users(),
                    graph.items(),
                    graph.interaction_edges(),
                    graph.similarity().nnz()
                ),
            )?;
        }
        Command::Recommend { user, n } => {
            let config = ctx.config()?;
            let (dataset, graph) = ctx.graph(&config)?;
            let (_, u) = ctx.user(&dataset, &user)?;
            let slate = Recommender::new(&graph, config.walk(), None)?.recommend(u, n.unwrap_or(config.slate_size))?;
            print_slate(out, &dataset, &slate)?;
        }
        Command::Explain { user, rec, k } => {
            let config = ctx.config()?;
            let (dataset, graph) = ctx.graph(&config)?;
            let (_, u) = ctx.user(&dataset, &user)?;
            let r = dataset.catalog.lookup(&ItemId::new(rec))?;
            let recommender = Recommender::new(&graph, config.walk(), None)?;
            for (rank, (h, c)) in recommender
                .explain(u, r, k.unwrap_or(config.explanations))?
                .into_iter()
                .enumerate()
            {
                let shared = dataset.catalog.shared_tags(r, h).join(",");
                w(out, format!("{}\t{}\t{c}\t{shared}", rank + 1, dataset.catalog.id(h)))?;
            }
        }
        Command::Feedback { file } => {
            let records = io::read_records(&file)?;
            only_kinds(&records, &file, &["pair", "like", "dislike"])?;
            let mut dataset = ctx.store.dataset(true)?;
            for r in &records {
                let user = match r {
                    Record::Pair { user, .. } | Record::Like { user, .. } | Record::Dislike { user, .. } => user,
                    _ => unreachable!("filtered above"),
                };
                dataset.lookup_user(user)?;
                io::apply_records(&mut dataset, std::slice::from_ref(r))?;
            }
            ctx.store.append_events(&records)?;
            let pairs = records.iter().filter(|r| matches!(r, Record::Pair { .. })).count();
            w(
                out,
                format!("stored {pairs} pair ratings and {} item ratings", records.len() - pairs),
            )?;
        }
        Command::Densify { user, k } => {
            let mut config = ctx.config()?;
            config.k = k.unwrap_or(config.k);
            let dataset = ctx.store.dataset(true)?;
            let (id, u) = ctx.user(&dataset, &user)?;
            let vectors = ctx.store.vectors(&dataset.catalog)?;
            let rows: Vec<&[f64]> = vectors.rows().iter().map(|r| r.as_slice()).collect();
            let index = ProjectionIndex::build(&rows, config.planes(), config.seed)?;
            let dense = densify_user(dataset.feedback(u), &vectors, &index, &config.densify())?;
            Store::create(ctx.store.root())?;
            let path = ctx.store.densified_path(&id);
            io::write_records(&path, &io::feedback_records(&dataset.catalog, &id, &dense, true))?;
            let explicit = dense.explicit_count();
            w(
                out,
                format!(
                    "{id}: {explicit} rated, {} propagated pairs -> {}",
                    dense.len() - explicit,
                    path.display()
                ),
            )?;
        }
        Command::Learn { user, gamma, lr } => {
            let mut config = ctx.config()?;
            config.gamma = gamma.unwrap_or(config.gamma);
            config.lr = lr.unwrap_or(config.lr);
            config.validate()?;
            let dataset = ctx.store.dataset(true)?;
            let (id, u) = ctx.user(&dataset, &user)?;
            let vectors = ctx.store.vectors(&dataset.catalog)?;
            let path = ctx.store.densified_path(&id);
            let feedback = if path.exists() {
                io::feedback_from_records(&dataset.catalog, &id, &io::read_records(&path)?)?
            } else {
                log::warn!("{id}: no densified feedback; learning from explicit ratings only");
                dataset.feedback(u).clone()
            };
            let mut pref = learn_preference(&feedback, &vectors, &config.optimizer())?;
            pref.user = Some(id.clone());
            io::append_records(&ctx.store.prefs_path(), [&io::pref_record(&id, &pref)])?;
            let norm = pref.w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w(
                out,
                format!(
                    "{id}: objective {:.6} after {} epochs, |w| = {norm:.6}",
                    pref.objective, pref.epochs
                ),
            )?;
        }
        Command::Rerank { user, n } => {
            let config = ctx.config()?;
            let (dataset, graph) = ctx.graph(&config)?;
            let (id, u) = ctx.user(&dataset, &user)?;
            let w_u = match ctx.store.latest_pref(&id)? {
                Some(pref) if pref.w.len() == graph.vectors().dim() => pref.w,
                Some(pref) => {
                    return Err(ServiceError::Invalid(format!(
                        "{id}: stored preference has {} dims but vectors have {}",
                        pref.w.len(),
                        graph.vectors().dim()
                    )))
                }
                None => {
                    log::warn!("{id}: no learned preference vector; falling back to plain recommendations");
                    vec![0.0; graph.vectors().dim()]
                }
            };
            let slate = recommend_with_feedback(&graph, u, &w_u, config.walk(), n.unwrap_or(config.slate_size))?;
            print_slate(out, &dataset, &slate)?;
        }
        Command::Evaluate {
            configuration,
            population,
            seed,
        } => {
            let mut configurations = vec![Configuration::ItemLevel];
            if configuration != Configuration::ItemLevel {
                configurations.push(configuration);
            }
            let experiment = ExperimentConfig {
                configurations,
                elixir: ctx.config()?,
                ..Default::default()
            };
            let pop = PopulationConfig {
                users: population,
                seed,
                ..Default::default()
            };
            let report = run_experiment(&pop, &experiment)?;
            write!(out, "{}", report.table.to_tsv()).map_err(elixir_core::Error::from)?;
        }
        Command::Simulate {
            population,
            seed,
            out: dir,
        } => {
            let pop = PopulationConfig {
                users: population,
                seed,
                ..Default::default()
            };
            let experiment = ExperimentConfig {
                elixir: ctx.config()?,
                ..Default::default()
            };
            let report = run_experiment(&pop, &experiment)?;
            write_simulation(&dir, &report)?;
            write!(out, "{}", report.table.to_tsv()).map_err(elixir_core::Error::from)?;
            w(out, format!("logs written to {}", dir.display()))?;
        }
        Command::Serve { addr } => {
            let state = Arc::new(ServiceState::open(ctx.store.clone(), ctx.config()?)?);
            let runtime = tokio::runtime::Runtime::new().map_err(elixir_core::Error::from)?;
            runtime
                .block_on(crate::api::serve(state, &addr))
                .map_err(elixir_core::Error::from)?;
        }
    }
    Ok(())
}

fn write_simulation(dir: &Path, report: &elixir_core::evalsim::ExperimentReport) -> ServiceResult<()> {
    let pop = &report.population;
    let io_err = |e: std::io::Error| ServiceError::Core(e.into());
    fs::create_dir_all(dir.join("prefs")).map_err(io_err)?;
    io::write_records(&dir.join("catalog.tsv"), &io::catalog_records(&pop.catalog))?;
    io::save_vectors(&dir.join("vectors.tsv"), &pop.catalog, &pop.vectors)?;
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
    io::write_records(&dir.join("likes.tsv"), &history)?;
    io::write_records(&dir.join("feedback.tsv"), &report.logs.to_records(pop))?;
    let mut relevant = String::new();
    for (u, user) in pop.users.iter().enumerate() {
        let mut items: Vec<usize> = pop.relevant(u).into_iter().collect();
        items.sort_unstable();
        let ids: Vec<String> = items.iter().map(|&v| pop.catalog.id(v).to_string()).collect();
        relevant.push_str(&format!("{}\t{}\n", user.id, ids.join(",")));
    }
    fs::write(dir.join("relevant.tsv"), relevant).map_err(io_err)?;
    let mut slates = String::new();
    for log in &report.logs.users {
        for (rank, e) in log.slate.entries.iter().enumerate() {
            let exp: Vec<String> = e.explanations.iter().map(|x| pop.catalog.id(x.0).to_string()).collect();
            let rand: Vec<String> = e.rand.iter().map(|x| pop.catalog.id(x.0).to_string()).collect();
            slates.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                pop.users[log.user].id,
                rank + 1,
                pop.catalog.id(e.item),
                e.score,
                exp.join(","),
                rand.join(",")
            ));
        }
    }
    fs::write(dir.join("phase2_slates.tsv"), slates).map_err(io_err)?;
    for row in &report.table.rows {
        let mut ranked = String::new();
        for (u, ranking) in row.rankings.iter().enumerate() {
            let ids: Vec<String> = ranking.iter().map(|&v| pop.catalog.id(v).to_string()).collect();
            ranked.push_str(&format!("{}\t{}\n", pop.users[u].id, ids.join(",")));
        }
        fs::write(dir.join(format!("phase3_{}.tsv", row.configuration.name())), ranked).map_err(io_err)?;
        let prefs: Vec<Record> = row
            .preferences
            .iter()
            .zip(&pop.users)
            .filter(|(p, _)| !p.is_zero())
            .map(|(p, user)| io::pref_record(&user.id, p))
            .collect();
        if !prefs.is_empty() {
            io::write_records(
                &dir.join("prefs").join(format!("{}.tsv", row.configuration.name())),
                &prefs,
            )?;
        }
    }
    fs::write(dir.join("metrics.tsv"), report.table.to_tsv()).map_err(io_err)?;
    fs::write(dir.join("metrics.csv"), report.table.to_csv()).map_err(io_err)?;
    Ok(())
}
