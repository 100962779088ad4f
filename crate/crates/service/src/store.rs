//! On-disk layout of a store directory.
//!
//! ```text
//! elixir.toml          run configuration (optional)
//! catalog.tsv          `item` records
//! likes.tsv            interaction histories (`user`/`like` records)
//! vectors.tsv          NMF item vectors
//! graph.tsv            `like` and `sim` records of the interaction graph
//! events.tsv           append-only feedback log (`like`/`dislike`/`pair`/`relearn`/`pref`)
//! prefs.tsv            preference vectors learned by `elixir learn`
//! densified/<user>.tsv densified pair feedback
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use elixir_core::config::ElixirConfig;
use elixir_core::io::{self, Record};
use elixir_core::model::{Catalog, Dataset, ItemVectors, UserId};
use elixir_core::prefopt::PreferenceVector;
use elixir_core::recwalk::{similarity_from_vectors, SimilarityMatrix};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn create(root: impl Into<PathBuf>) -> ServiceResult<Self> {
        let store = Self::new(root);
        fs::create_dir_all(store.root.join("densified")).map_err(elixir_core::Error::from)?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("elixir.toml")
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.root.join("catalog.tsv")
    }

    pub fn history_path(&self) -> PathBuf {
        self.root.join("likes.tsv")
    }

    pub fn vectors_path(&self) -> PathBuf {
        self.root.join("vectors.tsv")
    }

    pub fn graph_path(&self) -> PathBuf {
        self.root.join("graph.tsv")
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.tsv")
    }

    pub fn prefs_path(&self) -> PathBuf {
        self.root.join("prefs.tsv")
    }

    pub fn densified_path(&self, user: &UserId) -> PathBuf {
        self.root.join("densified").join(format!("{user}.tsv"))
    }

    /// Store config file (if any) plus `ELIXIR_*` overrides; `explicit`
    /// replaces the store file.
    pub fn config(&self, explicit: Option<&Path>) -> ServiceResult<ElixirConfig> {
        let own = self.config_path();
        let path = explicit.or_else(|| own.exists().then_some(own.as_path()));
        Ok(ElixirConfig::load(path)?)
    }

    pub fn save_config(&self, config: &ElixirConfig) -> ServiceResult<()> {
        let text = toml::to_string(config).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        fs::write(self.config_path(), text).map_err(elixir_core::Error::from)?;
        Ok(())
    }

    fn require(&self, path: PathBuf, hint: &str) -> ServiceResult<PathBuf> {
        if path.exists() {
            Ok(path)
        } else {
            Err(ServiceError::Missing(format!("{} not found; {hint}", path.display())))
        }
    }

    pub fn catalog(&self) -> ServiceResult<Catalog> {
        let path = self.require(self.catalog_path(), "run `elixir ingest` first")?;
        Ok(io::read_catalog(&path)?)
    }

    pub fn history(&self) -> ServiceResult<Vec<Record>> {
        let path = self.history_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        Ok(io::read_records(&path)?)
    }

    pub fn events(&self) -> ServiceResult<Vec<Record>> {
        let path = self.events_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        Ok(io::read_records(&path)?)
    }

    pub fn append_events(&self, records: &[Record]) -> ServiceResult<()> {
        Ok(io::append_records(&self.events_path(), records)?)
    }

    /// Catalog with histories and, if `with_events`, every logged rating.
    pub fn dataset(&self, with_events: bool) -> ServiceResult<Dataset> {
        let mut dataset = Dataset::new(self.catalog()?);
        io::apply_records(&mut dataset, &self.history()?)?;
        if with_events {
            io::apply_records(&mut dataset, &self.events()?)?;
        }
        Ok(dataset)
    }

    pub fn vectors(&self, catalog: &Catalog) -> ServiceResult<ItemVectors> {
        let path = self.require(self.vectors_path(), "run `elixir factorize` first")?;
        Ok(io::load_vectors(&path, catalog, None)?)
    }

    /// Similarity edges from the graph dump, or computed when there is none.
    pub fn similarity(
        &self,
        catalog: &Catalog,
        vectors: &ItemVectors,
        config: &ElixirConfig,
    ) -> ServiceResult<SimilarityMatrix> {
        let path = self.graph_path();
        if path.exists() {
            return Ok(io::similarity_from_records(catalog, &io::read_records(&path)?)?);
        }
        let rows: Vec<&[f64]> = vectors.rows().iter().map(|r| r.as_slice()).collect();
        Ok(similarity_from_vectors(&rows, config.similarity())?)
    }

    /// Last preference vector written by `elixir learn` for `user`.
    pub fn latest_pref(&self, user: &UserId) -> ServiceResult<Option<PreferenceVector>> {
        let path = self.prefs_path();
        if !path.exists() {
            return Ok(None);
        }
        let latest = io::read_records(&path)?.into_iter().rev().find_map(|r| match r {
            Record::Pref { user: u, w, objective } if &u == user => Some(PreferenceVector {
                user: Some(u),
                w,
                objective,
                epochs: 0,
            }),
            _ => None,
        });
        Ok(latest)
    }
}
