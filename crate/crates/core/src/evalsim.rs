//! Simulated-user evaluation of the feedback configurations.
//!
//! A synthetic catalog with latent aspects is embedded by NMF, simulated
//! users with a hidden preference direction build their histories (phase 1),
//! rate a slate of recommendations together with ⟨rec, exp⟩ and ⟨rec, rand⟩
//! pairs (phase 2), and finally judge the fresh recommendations produced by
//! each feedback configuration (phase 3).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ElixirConfig;
use crate::densify::densify_user;
use crate::embed::{nmf_factorize, TagMatrix};
use crate::error::{Error, Result};
use crate::io::Record;
use crate::lsh::ProjectionIndex;
use crate::metrics::{average_precision_at_k, ndcg_at_k, precision_at_k};
use crate::model::{Catalog, FeedbackMatrix, ItemId, ItemVectors, UserId, UserProfile};
use crate::prefopt::{learn_preference, PreferenceVector};
use crate::recwalk::{user_similarity_matrix, InteractionGraph, RecSlate, Recommender};
use crate::similarity::{cosine, dot, normalized};
use crate::stats::wilcoxon_signed_rank;

/// Rank cut-offs reported for every metric.
pub const CUTOFFS: [usize; 3] = [3, 5, 10];

/// Stand-in for a study participant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedUser {
    pub id: UserId,
    /// Hidden preference direction in the item latent space.
    pub preference: Vec<f64>,
    pub tau_item: f64,
    pub tau_pair: f64,
}

impl SimulatedUser {
    pub fn utility(&self, v: &[f64]) -> f64 {
        dot(&normalized(v), &normalized(&self.preference))
    }

    pub fn likes(&self, v: &[f64]) -> bool {
        self.utility(v) > self.tau_item
    }

    /// +1 iff the strongest shared coordinate of the two items is one the
    /// user values above `tau_pair`.
    pub fn pair_verdict(&self, a: &[f64], b: &[f64]) -> f64 {
        let shared =
            a.iter()
                .zip(b)
                .map(|(x, y)| x.min(*y))
                .enumerate()
                .fold(
                    (0usize, f64::NEG_INFINITY),
                    |best, (t, s)| if s > best.1 { (t, s) } else { best },
                );
        if self.preference[shared.0] > self.tau_pair {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationConfig {
    pub users: usize,
    pub items: usize,
    /// Latent aspects used to generate tags; also the NMF dimension.
    pub aspects: usize,
    pub tags_per_aspect: usize,
    /// Number of aspect combinations items are drawn from.
    pub genres: usize,
    /// Share of genres with a single aspect; the rest split evenly between
    /// two and three aspects.
    pub single_aspect: f64,
    pub history: usize,
    /// Fractions of latent coordinates the users like and dislike.
    pub like_share: f64,
    pub dislike_share: f64,
    /// Dislike weights are drawn from `[0.5, 1) * dislike_scale`.
    pub dislike_scale: f64,
    pub tau_item: f64,
    pub tau_pair: f64,
    pub seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            users: 25,
            items: 600,
            aspects: 20,
            tags_per_aspect: 8,
            genres: 40,
            single_aspect: 0.2,
            history: 50,
            like_share: 0.25,
            dislike_share: 0.35,
            dislike_scale: 0.5,
            tau_item: 0.3,
            tau_pair: 0.0,
            seed: 0,
        }
    }
}

/// Catalog, embeddings, simulated users and their phase-1 histories.
#[derive(Debug, Clone)]
pub struct Population {
    pub catalog: Catalog,
    pub vectors: ItemVectors,
    pub users: Vec<SimulatedUser>,
    pub profiles: Vec<UserProfile>,
}

impl Population {
    /// Items the user would like, i.e. the relevance judgments.
    pub fn relevant(&self, user: usize) -> HashSet<usize> {
        (0..self.vectors.len())
            .filter(|&v| self.users[user].likes(self.vectors.get(v)))
            .collect()
    }

    pub fn graph(&self, config: &ElixirConfig) -> Result<InteractionGraph> {
        InteractionGraph::build(&self.profiles, self.vectors.clone(), config.similarity())
    }
}

fn synthetic_catalog(cfg: &PopulationConfig, rng: &mut ChaCha8Rng) -> Result<Catalog> {
    // a genre is a recurring combination of aspects
    let all: Vec<usize> = (0..cfg.aspects).collect();
    let genres: Vec<Vec<usize>> = (0..cfg.genres)
        .map(|_| {
            let n = match rng.random::<f64>() {
                x if x < cfg.single_aspect => 1,
                x if x < (1.0 + cfg.single_aspect) / 2.0 => 2,
                _ => 3,
            };
            all.choose_multiple(rng, n).copied().collect()
        })
        .collect();
    let items = (0..cfg.items).map(|i| {
        let genre = genres.choose(rng).expect("at least one genre");
        let mut tags = Vec::new();
        for &a in genre {
            // per-item emphasis decides which facet dominates
            let p = rng.random_range(0.15..0.85);
            let mut picked: Vec<String> = (0..cfg.tags_per_aspect)
                .filter(|_| rng.random::<f64>() < p)
                .map(|t| format!("a{a}t{t}"))
                .collect();
            if picked.is_empty() {
                picked.push(format!("a{a}t{}", rng.random_range(0..cfg.tags_per_aspect)));
            }
            tags.extend(picked);
        }
        (ItemId::new(format!("i{i:04}")), tags)
    });
    Catalog::register(items)
}

fn simulated_user(id: usize, dim: usize, cfg: &PopulationConfig, rng: &mut ChaCha8Rng) -> SimulatedUser {
    let noise = Normal::new(0.0, 0.05).expect("valid normal");
    // strong likes, milder dislikes: liked items may still carry a disliked facet
    let preference = (0..dim)
        .map(|_| match rng.random::<f64>() {
            x if x < cfg.like_share => rng.random_range(0.6..1.0),
            x if x < cfg.like_share + cfg.dislike_share => -rng.random_range(0.5..1.0) * cfg.dislike_scale,
            _ => noise.sample(rng),
        })
        .collect();
    SimulatedUser {
        id: UserId::new(format!("u{id:02}")),
        preference,
        tau_item: cfg.tau_item,
        tau_pair: cfg.tau_pair,
    }
}

/// Builds the synthetic catalog, embeds it, draws users and samples each
/// user's history from the items they like.
pub fn generate_population(cfg: &PopulationConfig, elixir: &ElixirConfig) -> Result<Population> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let catalog = synthetic_catalog(cfg, &mut rng)?;
    let tags = TagMatrix::from_catalog(&catalog)?;
    let nmf = nmf_factorize(
        &tags,
        crate::embed::NmfConfig {
            dim: elixir.d,
            seed: cfg.seed,
            ..elixir.nmf()
        },
    )?;
    let vectors = nmf.vectors;

    let mut users = Vec::with_capacity(cfg.users);
    let mut profiles = Vec::with_capacity(cfg.users);
    let mut id = 0;
    // users who like too few items cannot fill a history; redraw them
    while users.len() < cfg.users {
        let user = simulated_user(id, vectors.dim(), cfg, &mut rng);
        id += 1;
        let mut liked: Vec<usize> = (0..vectors.len()).filter(|&v| user.likes(vectors.get(v))).collect();
        if liked.len() < cfg.history * 2 {
            if id > cfg.users * 50 {
                return Err(Error::InvalidParameter(
                    "population thresholds leave too few liked items per user".into(),
                ));
            }
            continue;
        }
        liked.shuffle(&mut rng);
        liked.truncate(cfg.history);
        profiles.push(UserProfile::from_history(liked));
        users.push(user);
    }
    Ok(Population {
        catalog,
        vectors,
        users,
        profiles,
    })
}

/// Which pairs a configuration learns from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    Explanation,
    Random,
}

/// Feedback incorporation setups compared in phase 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Configuration {
    ItemLevel,
    PairExp1,
    PairExp3,
    PairExp5,
    PairRand5,
    ItemPairExp5,
    ItemPairRand5,
}

impl Configuration {
    pub const ALL: [Configuration; 7] = [
        Configuration::ItemLevel,
        Configuration::PairExp1,
        Configuration::PairExp3,
        Configuration::PairExp5,
        Configuration::PairRand5,
        Configuration::ItemPairExp5,
        Configuration::ItemPairRand5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Configuration::ItemLevel => "ItemLevel",
            Configuration::PairExp1 => "PairExp1",
            Configuration::PairExp3 => "PairExp3",
            Configuration::PairExp5 => "PairExp5",
            Configuration::PairRand5 => "PairRand5",
            Configuration::ItemPairExp5 => "ItemPairExp5",
            Configuration::ItemPairRand5 => "ItemPairRand5",
        }
    }

    pub fn uses_item_feedback(self) -> bool {
        matches!(
            self,
            Configuration::ItemLevel | Configuration::ItemPairExp5 | Configuration::ItemPairRand5
        )
    }

    /// Pair kind and how many pairs per recommendation are used.
    pub fn pair_feedback(self) -> Option<(PairKind, usize)> {
        match self {
            Configuration::ItemLevel => None,
            Configuration::PairExp1 => Some((PairKind::Explanation, 1)),
            Configuration::PairExp3 => Some((PairKind::Explanation, 3)),
            Configuration::PairExp5 | Configuration::ItemPairExp5 => Some((PairKind::Explanation, 5)),
            Configuration::PairRand5 | Configuration::ItemPairRand5 => Some((PairKind::Random, 5)),
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Configuration::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown configuration `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub configurations: Vec<Configuration>,
    /// Recommendations per user and phase.
    pub n_recs: usize,
    /// Explanation and control items per recommendation.
    pub k_pairs: usize,
    pub elixir: ElixirConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            configurations: Configuration::ALL.to_vec(),
            n_recs: 30,
            k_pairs: 5,
            elixir: ElixirConfig::default(),
        }
    }
}

/// One rated pair; `rank` is the position of `other` in its exp/rand list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairVerdict {
    pub rec: usize,
    pub other: usize,
    pub rank: usize,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserLog {
    pub user: usize,
    pub slate: RecSlate,
    pub item_verdicts: Vec<(usize, bool)>,
    pub exp_pairs: Vec<PairVerdict>,
    pub rand_pairs: Vec<PairVerdict>,
}

impl UserLog {
    fn pairs(&self, kind: PairKind) -> &[PairVerdict] {
        match kind {
            PairKind::Explanation => &self.exp_pairs,
            PairKind::Random => &self.rand_pairs,
        }
    }

    /// Pair matrix for one configuration (first `per_rec` pairs of each rec).
    pub fn pair_matrix(&self, kind: PairKind, per_rec: usize) -> Result<FeedbackMatrix> {
        let mut m = FeedbackMatrix::new();
        for p in self.pairs(kind).iter().filter(|p| p.rank < per_rec) {
            m.insert_explicit(p.rec, p.other, p.label)?;
        }
        Ok(m)
    }
}

/// Phase-2 output for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLogs {
    pub users: Vec<UserLog>,
    pub collected_exp: bool,
    pub collected_rand: bool,
}

impl FeedbackLogs {
    /// Keeps the slates but forgets every pair rating.
    pub fn without_pair_feedback(&self) -> Self {
        let mut out = self.clone();
        for u in &mut out.users {
            u.exp_pairs.clear();
            u.rand_pairs.clear();
        }
        out
    }

    pub fn without_item_feedback(&self) -> Self {
        let mut out = self.clone();
        for u in &mut out.users {
            u.item_verdicts.clear();
        }
        out
    }

    /// Audit trail in the shared record format (pairs of both kinds).
    pub fn to_records(&self, population: &Population) -> Vec<Record> {
        let id = |v: usize| population.catalog.id(v).clone();
        let mut out = Vec::new();
        for log in &self.users {
            let user = population.users[log.user].id.clone();
            for &(item, liked) in &log.item_verdicts {
                out.push(if liked {
                    Record::Like {
                        user: user.clone(),
                        item: id(item),
                    }
                } else {
                    Record::Dislike {
                        user: user.clone(),
                        item: id(item),
                    }
                });
            }
            for p in log.exp_pairs.iter().chain(&log.rand_pairs) {
                out.push(Record::Pair {
                    user: user.clone(),
                    rec: id(p.rec),
                    other: id(p.other),
                    label: p.label,
                    source: None,
                });
            }
        }
        out
    }
}

fn parallel_map<T: Send, F: Fn(usize) -> Result<T> + Sync>(n: usize, f: F) -> Result<Vec<T>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(n.max(1));
    let chunk = n.div_ceil(workers.max(1)).max(1);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|start| s.spawn(move || (start..(start + chunk).min(n)).map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Phase 2: slate of `n_recs` with explanations and controls per user, all
/// judged by the simulated users.
pub fn run_phase2(
    population: &Population,
    graph: &InteractionGraph,
    config: &ExperimentConfig,
) -> Result<FeedbackLogs> {
    let recommender = Recommender::new(graph, config.elixir.walk(), None)?;
    let users = parallel_map(population.users.len(), |u| {
        let sim = &population.users[u];
        let slate = recommender.explained_slate(u, config.n_recs, config.k_pairs)?;
        let vec = |v: usize| population.vectors.get(v);
        let mut log = UserLog {
            user: u,
            slate: slate.clone(),
            item_verdicts: Vec::new(),
            exp_pairs: Vec::new(),
            rand_pairs: Vec::new(),
        };
        for entry in &slate.entries {
            log.item_verdicts.push((entry.item, sim.likes(vec(entry.item))));
            for (rank, &(other, _)) in entry.explanations.iter().enumerate() {
                log.exp_pairs.push(PairVerdict {
                    rec: entry.item,
                    other,
                    rank,
                    label: sim.pair_verdict(vec(entry.item), vec(other)),
                });
            }
            for (rank, &(other, _)) in entry.rand.iter().enumerate() {
                log.rand_pairs.push(PairVerdict {
                    rec: entry.item,
                    other,
                    rank,
                    label: sim.pair_verdict(vec(entry.item), vec(other)),
                });
            }
        }
        Ok(log)
    })?;
    Ok(FeedbackLogs {
        users,
        collected_exp: true,
        collected_rand: true,
    })
}

/// Densify → learn for one user; zero vector when there is no pair feedback.
pub fn learn_user_preference(
    feedback: &FeedbackMatrix,
    vectors: &ItemVectors,
    index: &ProjectionIndex,
    elixir: &ElixirConfig,
) -> Result<PreferenceVector> {
    if feedback.m() == 0 {
        return Ok(PreferenceVector::zero(vectors.dim()));
    }
    let dense = densify_user(feedback, vectors, index, &elixir.densify())?;
    learn_preference(&dense, vectors, &elixir.optimizer())
}

/// Metric column labels: P@3..10, MAP@3..10, nDCG@3..10.
pub fn metric_columns() -> Vec<String> {
    let mut out = Vec::new();
    for name in ["P", "MAP", "nDCG"] {
        for k in CUTOFFS {
            out.push(format!("{name}@{k}"));
        }
    }
    out
}

pub fn score_ranking(ranked: &[usize], relevant: &HashSet<usize>) -> Vec<f64> {
    let mut out = Vec::with_capacity(9);
    out.extend(CUTOFFS.iter().map(|&k| precision_at_k(ranked, relevant, k)));
    out.extend(CUTOFFS.iter().map(|&k| average_precision_at_k(ranked, relevant, k)));
    out.extend(CUTOFFS.iter().map(|&k| ndcg_at_k(ranked, relevant, k)));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationResult {
    pub configuration: Configuration,
    /// Phase-3 ranking per user.
    pub rankings: Vec<Vec<usize>>,
    pub preferences: Vec<PreferenceVector>,
    /// Per-user metric rows in [`metric_columns`] order.
    pub per_user: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Two-sided Wilcoxon p-values against ItemLevel (when it was run).
    pub p_values: Option<Vec<f64>>,
}

impl ConfigurationResult {
    pub fn metric(&self, name: &str) -> Option<f64> {
        metric_columns().iter().position(|c| c == name).map(|i| self.mean[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<ConfigurationResult>,
}

impl MetricsTable {
    pub fn get(&self, c: Configuration) -> Option<&ConfigurationResult> {
        self.rows.iter().find(|r| r.configuration == c)
    }

    /// Wide TSV: one row per configuration, nine metric columns; `*` marks
    /// p ≤ 0.05 against ItemLevel.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("configuration\t{}\n", metric_columns().join("\t"));
        for row in &self.rows {
            out.push_str(row.configuration.name());
            for (i, v) in row.mean.iter().enumerate() {
                let star = row.p_values.as_ref().is_some_and(|p| p[i] <= 0.05);
                out.push_str(&format!("\t{v:.3}{}", if star { "*" } else { "" }));
            }
            out.push('\n');
        }
        out
    }

    /// Long CSV: `configuration,metric,k,mean,p_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("configuration,metric,k,mean,p_value\n");
        for row in &self.rows {
            for (i, col) in metric_columns().iter().enumerate() {
                let (metric, k) = col.split_once('@').expect("metric@k");
                let p = row.p_values.as_ref().map_or(String::new(), |p| p[i].to_string());
                out.push_str(&format!(
                    "{},{metric},{k},{},{p}\n",
                    row.configuration.name(),
                    row.mean[i]
                ));
            }
        }
        out
    }
}

fn incorporate_item_feedback(population: &Population, logs: &FeedbackLogs) -> Vec<UserProfile> {
    let mut profiles = population.profiles.clone();
    for log in &logs.users {
        for &(item, liked) in &log.item_verdicts {
            if liked {
                profiles[log.user].like(item);
            } else {
                profiles[log.user].dislike(item);
            }
        }
    }
    profiles
}

/// Phase 3: every configuration folds in its feedback and produces a fresh
/// ranking per user, judged against the simulated users' preferences.
/// Items that already received an item verdict are not recommended again.
pub fn run_phase3(
    population: &Population,
    graph: &InteractionGraph,
    logs: &FeedbackLogs,
    config: &ExperimentConfig,
) -> Result<MetricsTable> {
    let elixir = &config.elixir;
    let walk = elixir.walk();
    let item_graph = graph.with_profiles(&incorporate_item_feedback(population, logs))?;
    let rows: Vec<&[f64]> = population.vectors.rows().iter().map(|r| r.as_slice()).collect();
    let index = ProjectionIndex::build(&rows, elixir.planes(), elixir.seed)?;
    let relevant: Vec<HashSet<usize>> = (0..population.users.len()).map(|u| population.relevant(u)).collect();

    let mut results = Vec::new();
    for &configuration in &config.configurations {
        if let Some((kind, _)) = configuration.pair_feedback() {
            let collected = match kind {
                PairKind::Explanation => logs.collected_exp,
                PairKind::Random => logs.collected_rand,
            };
            if !collected {
                return Err(Error::MissingPairFeedback(configuration.name().into()));
            }
        }
        let g = if configuration.uses_item_feedback() {
            &item_graph
        } else {
            graph
        };
        let base = Recommender::new(g, walk, None)?;
        let per_user = parallel_map(logs.users.len(), |i| {
            let log = &logs.users[i];
            let pref = match configuration.pair_feedback() {
                Some((kind, per_rec)) => {
                    let mut pref =
                        learn_user_preference(&log.pair_matrix(kind, per_rec)?, &population.vectors, &index, elixir)?;
                    pref.user = Some(population.users[log.user].id.clone());
                    pref
                }
                None => PreferenceVector::zero(population.vectors.dim()),
            };
            let judged: HashSet<usize> = log.item_verdicts.iter().map(|v| v.0).collect();
            let slate = if pref.is_zero() {
                base.recommend_excluding(log.user, config.n_recs, &judged)?
            } else {
                let s_user = user_similarity_matrix(&population.vectors, &pref.w, g.similarity_params())?;
                Recommender::new(g, walk, Some(&s_user))?.recommend_excluding(log.user, config.n_recs, &judged)?
            };
            let ranking = slate.items();
            let scores = score_ranking(&ranking, &relevant[log.user]);
            Ok((ranking, pref, scores))
        })?;
        let n = per_user.len().max(1) as f64;
        let mut mean = vec![0.0; 9];
        for (_, _, s) in &per_user {
            mean.iter_mut().zip(s).for_each(|(m, x)| *m += x / n);
        }
        let (rankings, rest): (Vec<_>, Vec<_>) = per_user.into_iter().map(|(r, p, s)| (r, (p, s))).unzip();
        let (preferences, per_user): (Vec<_>, Vec<_>) = rest.into_iter().unzip();
        results.push(ConfigurationResult {
            configuration,
            rankings,
            preferences,
            per_user,
            mean,
            p_values: None,
        });
    }

    if let Some(baseline) = results
        .iter()
        .find(|r| r.configuration == Configuration::ItemLevel)
        .cloned()
    {
        for row in &mut results {
            if row.configuration == Configuration::ItemLevel {
                continue;
            }
            let p: Vec<f64> = (0..9)
                .map(|c| {
                    let x: Vec<f64> = row.per_user.iter().map(|r| r[c]).collect();
                    let y: Vec<f64> = baseline.per_user.iter().map(|r| r[c]).collect();
                    wilcoxon_signed_rank(&x, &y).p_value
                })
                .collect();
            row.p_values = Some(p);
        }
    }
    Ok(MetricsTable { rows: results })
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub population: Population,
    pub logs: FeedbackLogs,
    pub table: MetricsTable,
}

/// Phases 1–3 end to end.
pub fn run_experiment(population: &PopulationConfig, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let population = generate_population(population, &config.elixir)?;
    let graph = population.graph(&config.elixir)?;
    let logs = run_phase2(&population, &graph, config)?;
    let table = run_phase3(&population, &graph, &logs, config)?;
    Ok(ExperimentReport {
        population,
        logs,
        table,
    })
}

/// Held-out score of one (γ, lr) setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningPoint {
    pub gamma: f64,
    pub lr: f64,
    /// Mean fraction of held-out pairs whose similarity moved in the
    /// direction of their label (no movement counts half).
    pub agreement: f64,
}

/// Grid search for γ and lr on a seeded per-user 20% holdout of the
/// explanation pairs. Returns every grid point, best first.
pub fn tune_regularization(
    population: &Population,
    logs: &FeedbackLogs,
    gammas: &[f64],
    lrs: &[f64],
    elixir: &ElixirConfig,
) -> Result<Vec<TuningPoint>> {
    let rows: Vec<&[f64]> = population.vectors.rows().iter().map(|r| r.as_slice()).collect();
    let index = ProjectionIndex::build(&rows, elixir.planes(), elixir.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(elixir.seed);
    let splits: Vec<(FeedbackMatrix, Vec<PairVerdict>)> = logs
        .users
        .iter()
        .map(|log| {
            let mut pairs = log.exp_pairs.clone();
            pairs.shuffle(&mut rng);
            let held = pairs.len() / 5;
            let mut train = FeedbackMatrix::new();
            for p in &pairs[held..] {
                train.insert_explicit(p.rec, p.other, p.label)?;
            }
            Ok((train, pairs[..held].to_vec()))
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::new();
    for &gamma in gammas {
        for &lr in lrs {
            let cfg = ElixirConfig {
                gamma,
                lr,
                ..elixir.clone()
            };
            let scores = parallel_map(splits.len(), |u| {
                let (train, held) = &splits[u];
                if held.is_empty() {
                    return Ok(None);
                }
                let pref = learn_user_preference(train, &population.vectors, &index, &cfg)?;
                let moved: f64 = held
                    .iter()
                    .map(|p| {
                        let (a, b) = (population.vectors.get(p.rec), population.vectors.get(p.other));
                        let shift: Vec<f64> = a.iter().zip(&pref.w).map(|(x, w)| x + w).collect();
                        let other: Vec<f64> = b.iter().zip(&pref.w).map(|(x, w)| x + w).collect();
                        let delta = p.label * (cosine(&shift, &other) - cosine(a, b));
                        if delta > 0.0 {
                            1.0
                        } else if delta == 0.0 {
                            0.5
                        } else {
                            0.0
                        }
                    })
                    .sum();
                Ok(Some(moved / held.len() as f64))
            })?;
            let scored: Vec<f64> = scores.into_iter().flatten().collect();
            let agreement = scored.iter().sum::<f64>() / scored.len().max(1) as f64;
            points.push(TuningPoint { gamma, lr, agreement });
        }
    }
    points.sort_by(|a, b| b.agreement.total_cmp(&a.agreement));
    Ok(points)
}
