//! Event-sourced session state behind the HTTP API.
//!
//! Every accepted rating and every relearn is appended to `events.tsv` before
//! it is applied, and replaying the log through the same `apply` path
//! rebuilds the state exactly. A session serves one immutable slate per
//! version; feedback is checked against that version and a relearn swaps in
//! the next one only once it is fully computed.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::{Arc, OnceLock, RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};

use elixir_core::config::ElixirConfig;
use elixir_core::densify::densify_user;
use elixir_core::io::Record;
use elixir_core::lsh::ProjectionIndex;
use elixir_core::model::{
    Catalog, Dataset, FeedbackMatrix, ItemFeedbackOutcome, ItemId, LabelSource, UserId, UserProfile,
};
use elixir_core::prefopt::learn_preference;
use elixir_core::recwalk::{user_similarity_matrix, InteractionGraph, Recommender};

use crate::error::{ServiceError, ServiceResult};
use crate::store::Store;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationView {
    pub item: String,
    pub title: String,
    pub contribution: f64,
    pub shared_tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlateItem {
    pub rank: usize,
    pub item: String,
    pub title: String,
    pub score: f64,
    pub tags: Vec<String>,
    pub explanations: Vec<ExplanationView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlateView {
    pub user: String,
    pub version: u64,
    pub items: Vec<SlateItem>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackCounts {
    pub item_likes: usize,
    pub item_dislikes: usize,
    pub pair_likes: usize,
    pub pair_dislikes: usize,
    pub relearns: usize,
    pub noop_relearns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub user: String,
    pub version: u64,
    pub state: String,
    pub pending_pairs: usize,
    pub counts: FeedbackCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelearnOutcome {
    pub version: u64,
    pub noop: bool,
    pub slate: SlateView,
}

/// Everything observable about one session, for recovery checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSnapshot {
    pub user: UserId,
    pub version: u64,
    pub w: Vec<f64>,
    pub pending_pairs: usize,
    pub counts: FeedbackCounts,
    pub history: Vec<usize>,
    pub dislikes: Vec<usize>,
    pub feedback: FeedbackMatrix,
    pub like_edges: Vec<Vec<usize>>,
    pub slate: SlateView,
}

struct Session {
    version: u64,
    graph: Arc<InteractionGraph>,
    w: Vec<f64>,
    excluded: HashSet<usize>,
    pending_pairs: usize,
    counts: FeedbackCounts,
    relearning: bool,
    slate: OnceLock<Arc<SlateView>>,
}

impl Session {
    fn new(graph: Arc<InteractionGraph>) -> Self {
        let dim = graph.vectors().dim();
        Self {
            version: 1,
            graph,
            w: vec![0.0; dim],
            excluded: HashSet::new(),
            pending_pairs: 0,
            counts: FeedbackCounts::default(),
            relearning: false,
            slate: OnceLock::new(),
        }
    }
}

struct Inner {
    dataset: Dataset,
    sessions: Vec<Session>,
}

/// Read-only parts shared by every session.
struct Engine {
    config: ElixirConfig,
    catalog: Catalog,
    base: Arc<InteractionGraph>,
    index: ProjectionIndex,
}

pub struct ServiceState {
    store: Store,
    engine: Engine,
    inner: RwLock<Inner>,
}

/// Inputs of one slate computation.
struct SlateJob<'a> {
    user: usize,
    user_id: &'a UserId,
    version: u64,
    graph: &'a InteractionGraph,
    w: &'a [f64],
    excluded: &'a HashSet<usize>,
}

impl Engine {
    fn slate(&self, job: SlateJob<'_>) -> ServiceResult<SlateView> {
        let mut view = SlateView {
            user: job.user_id.to_string(),
            version: job.version,
            items: Vec::new(),
        };
        if job.user >= job.graph.users() || job.graph.likes(job.user).is_empty() {
            return Ok(view);
        }
        let s_user = if job.w.iter().all(|&x| x == 0.0) {
            None
        } else {
            Some(user_similarity_matrix(
                job.graph.vectors(),
                job.w,
                job.graph.similarity_params(),
            )?)
        };
        let rec = Recommender::new(job.graph, self.config.walk(), s_user.as_ref())?;
        let slate = rec.recommend_excluding(job.user, self.config.slate_size, job.excluded)?;
        for (rank, entry) in slate.entries.iter().enumerate() {
            let explanations = rec
                .explain(job.user, entry.item, self.config.explanations)?
                .into_iter()
                .map(|(h, contribution)| ExplanationView {
                    item: self.catalog.id(h).to_string(),
                    title: self.catalog.id(h).to_string(),
                    contribution,
                    shared_tags: self
                        .catalog
                        .shared_tags(entry.item, h)
                        .into_iter()
                        .map(String::from)
                        .collect(),
                })
                .collect();
            view.items.push(SlateItem {
                rank: rank + 1,
                item: self.catalog.id(entry.item).to_string(),
                title: self.catalog.id(entry.item).to_string(),
                score: entry.score,
                tags: self
                    .catalog
                    .tag_names(entry.item)
                    .into_iter()
                    .map(String::from)
                    .collect(),
                explanations,
            });
        }
        Ok(view)
    }
}

fn same_like_edges(a: &InteractionGraph, b: &InteractionGraph) -> bool {
    a.users() == b.users() && (0..a.users()).all(|u| a.likes(u) == b.likes(u))
}

impl Inner {
    fn user(&self, user: &UserId) -> ServiceResult<usize> {
        Ok(self.dataset.lookup_user(user)?)
    }

    fn register(&mut self, user: &UserId, base: &Arc<InteractionGraph>) -> usize {
        let u = self.dataset.register_user(user.clone());
        while self.sessions.len() <= u {
            self.sessions.push(Session::new(Arc::clone(base)));
        }
        u
    }

    /// Applies one logged event. Live requests are validated before they are
    /// logged, so an error here means the log itself is inconsistent.
    fn apply(&mut self, engine: &Engine, record: &Record) -> ServiceResult<()> {
        match record {
            Record::User { user } => {
                self.register(user, &engine.base);
            }
            Record::Like { user, item } | Record::Dislike { user, item } => {
                let liked = matches!(record, Record::Like { .. });
                let u = self.register(user, &engine.base);
                let outcome = self.dataset.record_item_feedback(user, item, liked)?;
                let counts = &mut self.sessions[u].counts;
                match outcome {
                    ItemFeedbackOutcome::Liked | ItemFeedbackOutcome::AlreadyLiked => counts.item_likes += 1,
                    _ => counts.item_dislikes += 1,
                }
            }
            Record::Pair {
                user,
                rec,
                other,
                label,
                source: None | Some(LabelSource::Explicit),
            } => {
                let u = self.register(user, &engine.base);
                self.dataset.record_pair_feedback(user, rec, other, *label)?;
                let session = &mut self.sessions[u];
                session.pending_pairs += 1;
                if *label > 0.0 {
                    session.counts.pair_likes += 1;
                } else {
                    session.counts.pair_dislikes += 1;
                }
            }
            Record::Relearn { user } => {
                let u = self.register(user, &engine.base);
                let session = &mut self.sessions[u];
                if session.pending_pairs == 0 {
                    session.counts.noop_relearns += 1;
                } else {
                    session.counts.relearns += 1;
                }
            }
            Record::Pref { user, w, .. } => {
                let u = self.register(user, &engine.base);
                self.install(engine, u, w.clone(), None)?;
            }
            Record::Pair { .. } | Record::Item { .. } | Record::Sim { .. } => {}
        }
        Ok(())
    }

    /// Moves a session to its next version: like edges from the current
    /// profiles, current dislikes excluded, `w` as given. `ready` carries a
    /// graph and slate computed off-lock; they are kept only if the like
    /// edges did not change in the meantime.
    fn install(
        &mut self,
        engine: &Engine,
        u: usize,
        w: Vec<f64>,
        ready: Option<(Arc<InteractionGraph>, SlateView)>,
    ) -> ServiceResult<()> {
        let fresh = engine.base.with_profiles(self.dataset.profiles())?;
        let (graph, slate) = match ready {
            Some((graph, slate)) if same_like_edges(&graph, &fresh) => (graph, Some(slate)),
            _ => (Arc::new(fresh), None),
        };
        let excluded = self.dataset.profile(u).dislikes().iter().copied().collect();
        let session = &mut self.sessions[u];
        session.version += 1;
        session.graph = graph;
        session.w = w;
        session.excluded = excluded;
        session.pending_pairs = 0;
        session.slate = OnceLock::new();
        if let Some(mut slate) = slate {
            slate.version = session.version;
            let _ = session.slate.set(Arc::new(slate));
        }
        Ok(())
    }

    fn check_writable(&self, u: usize, user: &UserId, version: Option<u64>) -> ServiceResult<()> {
        let session = &self.sessions[u];
        if session.relearning {
            return Err(ServiceError::Busy(user.to_string()));
        }
        match version {
            Some(got) if got != session.version => Err(ServiceError::Stale {
                current: session.version,
                got,
            }),
            _ => Ok(()),
        }
    }
}

impl ServiceState {
    /// Loads catalog, histories, vectors and similarity from `store`, then
    /// replays the event log.
    pub fn open(store: Store, config: ElixirConfig) -> ServiceResult<Self> {
        let dataset = store.dataset(false)?;
        let catalog = dataset.catalog.clone();
        let vectors = store.vectors(&catalog)?;
        let similarity = store.similarity(&catalog, &vectors, &config)?;
        let rows: Vec<&[f64]> = vectors.rows().iter().map(|r| r.as_slice()).collect();
        let index = ProjectionIndex::build(&rows, config.planes(), config.seed)?;
        let base = Arc::new(InteractionGraph::from_parts(
            dataset.profiles(),
            vectors,
            similarity,
            config.similarity(),
        )?);
        let sessions = (0..dataset.user_count())
            .map(|_| Session::new(Arc::clone(&base)))
            .collect();
        let engine = Engine {
            config,
            catalog,
            base,
            index,
        };
        let mut inner = Inner { dataset, sessions };
        let events = store.events()?;
        for record in &events {
            inner.apply(&engine, record)?;
        }
        log::info!(
            "loaded {} users, {} items, replayed {} events",
            inner.dataset.user_count(),
            engine.catalog.len(),
            events.len()
        );
        Ok(Self {
            store,
            engine,
            inner: RwLock::new(inner),
        })
    }

    pub fn open_path(root: &Path, config_file: Option<&Path>) -> ServiceResult<Self> {
        let store = Store::new(root);
        let config = store.config(config_file)?;
        Self::open(store, config)
    }

    pub fn config(&self) -> &ElixirConfig {
        &self.engine.config
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().expect("service state poisoned")
    }

    fn write(&self) -> RwLockWriteGuard<'_, Inner> {
        self.inner.write().expect("service state poisoned")
    }

    fn cached_slate(&self, inner: &Inner, u: usize) -> ServiceResult<Arc<SlateView>> {
        let session = &inner.sessions[u];
        if let Some(slate) = session.slate.get() {
            return Ok(Arc::clone(slate));
        }
        let view = self.engine.slate(SlateJob {
            user: u,
            user_id: inner.dataset.user_id(u),
            version: session.version,
            graph: &session.graph,
            w: &session.w,
            excluded: &session.excluded,
        })?;
        Ok(Arc::clone(session.slate.get_or_init(|| Arc::new(view))))
    }

    /// Slate currently served to `user`.
    pub fn slate(&self, user: &UserId) -> ServiceResult<Arc<SlateView>> {
        let inner = self.read();
        let u = inner.user(user)?;
        self.cached_slate(&inner, u)
    }

    pub fn item_feedback(&self, user: &UserId, item: &ItemId, liked: bool, version: Option<u64>) -> ServiceResult<u64> {
        let mut inner = self.write();
        let u = inner.user(user)?;
        self.engine.catalog.lookup(item)?;
        inner.check_writable(u, user, version)?;
        let record = if liked {
            Record::Like {
                user: user.clone(),
                item: item.clone(),
            }
        } else {
            Record::Dislike {
                user: user.clone(),
                item: item.clone(),
            }
        };
        self.store.append_events(std::slice::from_ref(&record))?;
        inner.apply(&self.engine, &record)?;
        Ok(inner.sessions[u].version)
    }

    /// Stores an explicit ±1 pair rating; returns the version and the number
    /// of pair ratings waiting for the next relearn.
    pub fn pair_feedback(
        &self,
        user: &UserId,
        rec: &ItemId,
        other: &ItemId,
        label: f64,
        version: Option<u64>,
    ) -> ServiceResult<(u64, usize)> {
        let mut inner = self.write();
        let u = inner.user(user)?;
        let (r, o) = (self.engine.catalog.lookup(rec)?, self.engine.catalog.lookup(other)?);
        if label != 1.0 && label != -1.0 {
            return Err(elixir_core::Error::InvalidLabel(label).into());
        }
        inner.check_writable(u, user, version)?;
        inner
            .dataset
            .feedback(u)
            .clone()
            .insert_explicit(r, o, label)
            .map_err(|e| match e {
                elixir_core::Error::InvalidPair(_, _, why) => {
                    elixir_core::Error::InvalidPair(rec.to_string(), other.to_string(), why)
                }
                e => e,
            })?;
        let record = Record::Pair {
            user: user.clone(),
            rec: rec.clone(),
            other: other.clone(),
            label,
            source: None,
        };
        self.store.append_events(std::slice::from_ref(&record))?;
        inner.apply(&self.engine, &record)?;
        let session = &inner.sessions[u];
        Ok((session.version, session.pending_pairs))
    }

    /// Densifies the user's pair feedback, learns a fresh preference vector
    /// and serves the re-ranked slate as the next version. Without new pair
    /// ratings since the last relearn nothing changes and `noop` is set.
    pub fn relearn(&self, user: &UserId) -> ServiceResult<RelearnOutcome> {
        let (u, feedback, profiles, excluded, version) = {
            let mut inner = self.write();
            let u = inner.user(user)?;
            inner.check_writable(u, user, None)?;
            if inner.sessions[u].pending_pairs == 0 {
                let record = Record::Relearn { user: user.clone() };
                self.store.append_events(std::slice::from_ref(&record))?;
                inner.apply(&self.engine, &record)?;
                let slate = self.cached_slate(&inner, u)?;
                return Ok(RelearnOutcome {
                    version: slate.version,
                    noop: true,
                    slate: (*slate).clone(),
                });
            }
            inner.sessions[u].relearning = true;
            let excluded: HashSet<usize> = inner.dataset.profile(u).dislikes().iter().copied().collect();
            (
                u,
                inner.dataset.feedback(u).clone(),
                inner.dataset.profiles().to_vec(),
                excluded,
                inner.sessions[u].version,
            )
        };
        let computed = self.compute_relearn(u, user, &feedback, &profiles, &excluded, version + 1);
        let mut inner = self.write();
        inner.sessions[u].relearning = false;
        let (graph, pref, slate) = computed?;
        let records = [
            Record::Relearn { user: user.clone() },
            elixir_core::io::pref_record(user, &pref),
        ];
        self.store.append_events(&records)?;
        inner.apply(&self.engine, &records[0])?;
        inner.install(&self.engine, u, pref.w, Some((graph, slate)))?;
        let slate = self.cached_slate(&inner, u)?;
        Ok(RelearnOutcome {
            version: slate.version,
            noop: false,
            slate: (*slate).clone(),
        })
    }

    fn compute_relearn(
        &self,
        u: usize,
        user: &UserId,
        feedback: &FeedbackMatrix,
        profiles: &[UserProfile],
        excluded: &HashSet<usize>,
        version: u64,
    ) -> ServiceResult<(Arc<InteractionGraph>, elixir_core::prefopt::PreferenceVector, SlateView)> {
        let config = &self.engine.config;
        let vectors = self.engine.base.vectors();
        let dense = densify_user(feedback, vectors, &self.engine.index, &config.densify())?;
        let pref = learn_preference(&dense, vectors, &config.optimizer())?;
        log::info!(
            "relearn {user}: {} explicit, {} densified pairs, objective {:.6}",
            feedback.explicit_count(),
            dense.len(),
            pref.objective
        );
        let graph = Arc::new(self.engine.base.with_profiles(profiles)?);
        let slate = self.engine.slate(SlateJob {
            user: u,
            user_id: user,
            version,
            graph: &graph,
            w: &pref.w,
            excluded,
        })?;
        Ok((graph, pref, slate))
    }

    pub fn metrics(&self, user: &UserId) -> ServiceResult<SessionMetrics> {
        let inner = self.read();
        let u = inner.user(user)?;
        let session = &inner.sessions[u];
        Ok(SessionMetrics {
            user: user.to_string(),
            version: session.version,
            state: if session.relearning { "relearning" } else { "serving" }.to_string(),
            pending_pairs: session.pending_pairs,
            counts: session.counts,
        })
    }

    /// Full per-user state, slates included, keyed by user id.
    pub fn snapshot(&self) -> ServiceResult<BTreeMap<UserId, SessionSnapshot>> {
        let inner = self.read();
        let mut out = BTreeMap::new();
        for (u, session) in inner.sessions.iter().enumerate() {
            let user = inner.dataset.user_id(u).clone();
            let profile = inner.dataset.profile(u);
            let graph = &session.graph;
            out.insert(
                user.clone(),
                SessionSnapshot {
                    user,
                    version: session.version,
                    w: session.w.clone(),
                    pending_pairs: session.pending_pairs,
                    counts: session.counts,
                    history: profile.history().to_vec(),
                    dislikes: profile.dislikes().to_vec(),
                    feedback: inner.dataset.feedback(u).clone(),
                    like_edges: (0..graph.users()).map(|x| graph.likes(x).to_vec()).collect(),
                    slate: (*self.cached_slate(&inner, u)?).clone(),
                },
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use elixir_core::io;
    use elixir_core::model::{ItemVector, ItemVectors};

    fn tiny() -> (tempfile::TempDir, ServiceState) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::create(dir.path()).unwrap();
        let items: Vec<(ItemId, Vec<&str>)> = (0..6)
            .map(|i| {
                (
                    ItemId::new(format!("i{i}")),
                    vec![if i % 2 == 0 { "x" } else { "y" }, "z"],
                )
            })
            .collect();
        let catalog = Catalog::register(items).unwrap();
        io::write_records(&store.catalog_path(), &io::catalog_records(&catalog)).unwrap();
        let like = |u: &str, i: &str| Record::Like {
            user: UserId::new(u),
            item: ItemId::new(i),
        };
        io::write_records(
            &store.history_path(),
            &[like("a", "i0"), like("a", "i1"), like("b", "i2")],
        )
        .unwrap();
        let rows = (0..6)
            .map(|i| ItemVector(vec![1.0 + (i % 2) as f64, 1.0 + (i % 3) as f64 * 0.1, 0.5]))
            .collect();
        io::save_vectors(&store.vectors_path(), &catalog, &ItemVectors::new(3, rows).unwrap()).unwrap();
        let state = ServiceState::open(store, ElixirConfig::default()).unwrap();
        (dir, state)
    }

    #[test]
    fn writes_are_refused_while_relearning() {
        let (_dir, state) = tiny();
        let a = UserId::new("a");
        state.write().sessions[0].relearning = true;
        let (i2, i0) = (ItemId::new("i2"), ItemId::new("i0"));
        assert!(matches!(
            state.item_feedback(&a, &i2, true, None),
            Err(ServiceError::Busy(_))
        ));
        assert!(matches!(
            state.pair_feedback(&a, &i2, &i0, 1.0, None),
            Err(ServiceError::Busy(_))
        ));
        assert!(matches!(state.relearn(&a), Err(ServiceError::Busy(_))));
        assert_eq!(state.metrics(&a).unwrap().state, "relearning");
        // other sessions and reads are unaffected
        assert_eq!(state.slate(&a).unwrap().version, 1);
        state.item_feedback(&UserId::new("b"), &i0, true, Some(1)).unwrap();
    }

    #[test]
    fn reversed_duplicate_pair_is_rejected_before_logging() {
        let (dir, state) = tiny();
        let a = UserId::new("a");
        let (i2, i3) = (ItemId::new("i2"), ItemId::new("i3"));
        state.pair_feedback(&a, &i2, &i3, 1.0, None).unwrap();
        let err = state.pair_feedback(&a, &i3, &i2, -1.0, None).unwrap_err();
        assert!(
            matches!(err, ServiceError::Core(elixir_core::Error::InvalidPair(..))),
            "{err}"
        );
        let log = std::fs::read_to_string(dir.path().join("events.tsv")).unwrap();
        assert_eq!(log.lines().count(), 1);
        // re-rating the same ordered pair overwrites
        let (_, pending) = state.pair_feedback(&a, &i2, &i3, -1.0, None).unwrap();
        assert_eq!(pending, 2);
        assert_eq!(state.snapshot().unwrap()[&a].feedback.len(), 1);
    }

    #[test]
    fn like_edges_comparison() {
        let (_dir, state) = tiny();
        let base = &state.engine.base;
        assert!(same_like_edges(
            base,
            &base.with_profiles(state.read().dataset.profiles()).unwrap()
        ));
        let mut profiles = state.read().dataset.profiles().to_vec();
        profiles[1].like(5);
        assert!(!same_like_edges(base, &base.with_profiles(&profiles).unwrap()));
    }
}
