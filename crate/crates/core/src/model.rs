//! Domain types shared by every stage of the pipeline: identifiers, the item
//! catalog, latent item vectors, user histories and pair feedback.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable external identifier of an item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemId(pub String);

/// Stable external identifier of a user. Never interchangeable with [`ItemId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Catalog entry: identifier plus the dense indices of its tags.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogItem {
    pub id: ItemId,
    pub tags: Vec<usize>,
}

/// The item universe with a contiguous 0-based dense index and a tag vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    items: Vec<CatalogItem>,
    index: HashMap<ItemId, usize>,
    vocab: Vec<String>,
    vocab_index: HashMap<String, usize>,
}

impl Catalog {
    /// Registers items in the given order; dense index = position.
    pub fn register<I, T, S>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ItemId, T)>,
        T: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut catalog = Catalog {
            items: Vec::new(),
            index: HashMap::new(),
            vocab: Vec::new(),
            vocab_index: HashMap::new(),
        };
        for (id, tags) in items {
            if catalog.index.contains_key(&id) {
                return Err(Error::DuplicateId(id.0));
            }
            let mut tag_ixs = Vec::new();
            for tag in tags {
                let tag = tag.as_ref().trim();
                if tag.is_empty() {
                    continue;
                }
                let next = catalog.vocab.len();
                let ix = *catalog.vocab_index.entry(tag.to_string()).or_insert(next);
                if ix == next {
                    catalog.vocab.push(tag.to_string());
                }
                if !tag_ixs.contains(&ix) {
                    tag_ixs.push(ix);
                }
            }
            catalog.index.insert(id.clone(), catalog.items.len());
            catalog.items.push(CatalogItem { id, tags: tag_ixs });
        }
        if catalog.items.is_empty() {
            return Err(Error::Empty("catalog"));
        }
        Ok(catalog)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn items(&self) -> &[CatalogItem] {
        &self.items
    }

    pub fn item(&self, ix: usize) -> &CatalogItem {
        &self.items[ix]
    }

    pub fn id(&self, ix: usize) -> &ItemId {
        &self.items[ix].id
    }

    pub fn lookup(&self, id: &ItemId) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownItem(id.0.clone()))
    }

    pub fn tag_names(&self, ix: usize) -> Vec<&str> {
        self.items[ix].tags.iter().map(|&t| self.vocab[t].as_str()).collect()
    }

    /// Tags shared by two items, in the first item's tag order.
    pub fn shared_tags(&self, a: usize, b: usize) -> Vec<&str> {
        let other: HashSet<usize> = self.items[b].tags.iter().copied().collect();
        self.items[a]
            .tags
            .iter()
            .filter(|t| other.contains(t))
            .map(|&t| self.vocab[t].as_str())
            .collect()
    }
}

/// A d-dimensional latent item representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemVector(pub Vec<f64>);

impl ItemVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn is_non_negative(&self) -> bool {
        self.0.iter().all(|&x| x >= 0.0)
    }
}

/// Item vectors in catalog order, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemVectors {
    dim: usize,
    rows: Vec<ItemVector>,
    non_negative: bool,
}

impl ItemVectors {
    pub fn new(dim: usize, rows: Vec<ItemVector>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("vector dimension must be >= 1".into()));
        }
        if rows.is_empty() {
            return Err(Error::Empty("item vectors"));
        }
        let mut non_negative = true;
        for row in &rows {
            if row.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.dim(),
                });
            }
            if row.0.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("item vector entries must be finite".into()));
            }
            non_negative &= row.is_non_negative();
        }
        Ok(Self {
            dim,
            rows,
            non_negative,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// False when some entry is negative (externally supplied embeddings).
    pub fn is_non_negative(&self) -> bool {
        self.non_negative
    }

    pub fn get(&self, ix: usize) -> &[f64] {
        &self.rows[ix].0
    }

    pub fn rows(&self) -> &[ItemVector] {
        &self.rows
    }

    /// Every vector shifted by `w`; used for user-specific similarity.
    pub fn translated(&self, w: &[f64]) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.0.iter().zip(w).map(|(a, b)| a + b).collect())
            .collect()
    }
}

/// Result of recording a single item-level rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemFeedbackOutcome {
    Liked,
    AlreadyLiked,
    Disliked,
    /// A dislike for an item that is already in the history; history is kept.
    DislikeConflictsWithLike,
}

/// Liked items (the interaction history) plus a ledger of dislikes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserProfile {
    history: Vec<usize>,
    members: HashSet<usize>,
    dislikes: Vec<usize>,
}

impl UserProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_history(items: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Self::new();
        for v in items {
            p.like(v);
        }
        p
    }

    pub fn like(&mut self, item: usize) -> ItemFeedbackOutcome {
        if self.members.insert(item) {
            self.history.push(item);
            ItemFeedbackOutcome::Liked
        } else {
            ItemFeedbackOutcome::AlreadyLiked
        }
    }

    pub fn dislike(&mut self, item: usize) -> ItemFeedbackOutcome {
        self.dislikes.push(item);
        if self.members.contains(&item) {
            ItemFeedbackOutcome::DislikeConflictsWithLike
        } else {
            ItemFeedbackOutcome::Disliked
        }
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    pub fn contains(&self, item: usize) -> bool {
        self.members.contains(&item)
    }

    pub fn dislikes(&self) -> &[usize] {
        &self.dislikes
    }
}

/// Whether a pair label came from the user or from densification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSource {
    Explicit,
    Propagated,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Explicit => "explicit",
            LabelSource::Propagated => "propagated",
        }
    }
}

/// Signed rating on an ordered (recommendation, other) item pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeedback {
    pub rec: usize,
    pub other: usize,
    pub label: f64,
    pub source: LabelSource,
}

/// Sparse pair-feedback matrix of one user.
///
/// Entries are keyed by the ordered pair; the reversed pair of an existing
/// entry is rejected since downstream similarity is symmetric. `m` (the
/// count of non-zero labels) is maintained on every mutation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeedbackMatrix {
    entries: BTreeMap<(usize, usize), PairFeedback>,
    nonzero: usize,
}

impl FeedbackMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an explicit ±1 rating. Rating the same ordered pair again
    /// overwrites the earlier label.
    pub fn insert_explicit(&mut self, rec: usize, other: usize, label: f64) -> Result<()> {
        if label != 1.0 && label != -1.0 {
            return Err(Error::InvalidLabel(label));
        }
        self.insert(PairFeedback {
            rec,
            other,
            label,
            source: LabelSource::Explicit,
        })
    }

    pub fn insert_propagated(&mut self, rec: usize, other: usize, label: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&label) {
            return Err(Error::InvalidLabel(label));
        }
        self.insert(PairFeedback {
            rec,
            other,
            label,
            source: LabelSource::Propagated,
        })
    }

    pub fn insert(&mut self, entry: PairFeedback) -> Result<()> {
        if entry.rec == entry.other {
            return Err(Error::InvalidPair(
                entry.rec.to_string(),
                entry.other.to_string(),
                "items must differ",
            ));
        }
        if self.entries.contains_key(&(entry.other, entry.rec)) {
            return Err(Error::InvalidPair(
                entry.rec.to_string(),
                entry.other.to_string(),
                "reversed pair already rated",
            ));
        }
        if let Some(prev) = self.entries.insert((entry.rec, entry.other), entry) {
            if prev.label != 0.0 {
                self.nonzero -= 1;
            }
        }
        if entry.label != 0.0 {
            self.nonzero += 1;
        }
        Ok(())
    }

    pub fn get(&self, rec: usize, other: usize) -> Option<&PairFeedback> {
        self.entries.get(&(rec, other))
    }

    /// Looks the pair up in either orientation.
    pub fn get_unordered(&self, a: usize, b: usize) -> Option<&PairFeedback> {
        self.entries.get(&(a, b)).or_else(|| self.entries.get(&(b, a)))
    }

    pub fn remove(&mut self, rec: usize, other: usize) -> Option<PairFeedback> {
        let prev = self.entries.remove(&(rec, other));
        if let Some(p) = &prev {
            if p.label != 0.0 {
                self.nonzero -= 1;
            }
        }
        prev
    }

    /// Number of entries with a non-zero label.
    pub fn m(&self) -> usize {
        self.nonzero
    }

    /// `m` recomputed by a full scan.
    pub fn recount(&self) -> usize {
        self.entries.values().filter(|e| e.label != 0.0).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PairFeedback> {
        self.entries.values()
    }

    /// Entries carrying a non-zero label, in key order.
    pub fn nonzero_entries(&self) -> Vec<PairFeedback> {
        self.entries.values().filter(|e| e.label != 0.0).copied().collect()
    }

    pub fn explicit_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.source == LabelSource::Explicit)
            .count()
    }

    pub fn explicit_only(&self) -> FeedbackMatrix {
        let mut out = FeedbackMatrix::new();
        for e in self.entries.values() {
            if e.source == LabelSource::Explicit {
                out.insert(*e).expect("subset of a valid matrix");
            }
        }
        out
    }
}

/// Catalog plus registered users, their histories and their pair feedback.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub catalog: Catalog,
    users: Vec<UserId>,
    user_index: HashMap<UserId, usize>,
    profiles: Vec<UserProfile>,
    feedback: Vec<FeedbackMatrix>,
}

impl Dataset {
    pub fn new(catalog: Catalog) -> Self {
        Self {
            catalog,
            users: Vec::new(),
            user_index: HashMap::new(),
            profiles: Vec::new(),
            feedback: Vec::new(),
        }
    }

    /// Registers a user; returns the existing index if already present.
    pub fn register_user(&mut self, user: UserId) -> usize {
        if let Some(&ix) = self.user_index.get(&user) {
            return ix;
        }
        let ix = self.users.len();
        self.user_index.insert(user.clone(), ix);
        self.users.push(user);
        self.profiles.push(UserProfile::new());
        self.feedback.push(FeedbackMatrix::new());
        ix
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn user_id(&self, ix: usize) -> &UserId {
        &self.users[ix]
    }

    pub fn lookup_user(&self, user: &UserId) -> Result<usize> {
        self.user_index
            .get(user)
            .copied()
            .ok_or_else(|| Error::UnknownUser(user.0.clone()))
    }

    pub fn profile(&self, user: usize) -> &UserProfile {
        &self.profiles[user]
    }

    pub fn profiles(&self) -> &[UserProfile] {
        &self.profiles
    }

    pub fn feedback(&self, user: usize) -> &FeedbackMatrix {
        &self.feedback[user]
    }

    pub fn record_item_feedback(&mut self, user: &UserId, item: &ItemId, liked: bool) -> Result<ItemFeedbackOutcome> {
        let u = self.lookup_user(user)?;
        let v = self.catalog.lookup(item)?;
        let profile = &mut self.profiles[u];
        let outcome = if liked { profile.like(v) } else { profile.dislike(v) };
        if outcome == ItemFeedbackOutcome::DislikeConflictsWithLike {
            log::warn!("user {user} disliked {item}, which is already in their history; history kept");
        }
        Ok(outcome)
    }

    pub fn record_pair_feedback(&mut self, user: &UserId, rec: &ItemId, other: &ItemId, label: f64) -> Result<()> {
        let u = self.lookup_user(user)?;
        let r = self.catalog.lookup(rec)?;
        let o = self.catalog.lookup(other)?;
        self.feedback[u].insert_explicit(r, o, label).map_err(|e| match e {
            Error::InvalidPair(_, _, why) => Error::InvalidPair(rec.0.clone(), other.0.clone(), why),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog3() -> Catalog {
        Catalog::register(vec![
            (ItemId::new("a"), vec!["x", "y"]),
            (ItemId::new("b"), vec!["y", "z"]),
            (ItemId::new("c"), vec!["u", "v"]),
        ])
        .unwrap()
    }

    #[test]
    fn catalog_counts_items_and_vocab() {
        let c = catalog3();
        assert_eq!(c.len(), 3);
        assert_eq!(c.vocab_len(), 5);
        // overlapping tag "y" shares one vocabulary index
        assert_eq!(c.item(0).tags[1], c.item(1).tags[0]);
        assert_eq!(c.shared_tags(0, 1), vec!["y"]);
    }

    #[test]
    fn catalog_rejects_empty_and_duplicates() {
        let empty: Vec<(ItemId, Vec<&str>)> = Vec::new();
        assert!(matches!(Catalog::register(empty), Err(Error::Empty(_))));
        let dup = Catalog::register(vec![(ItemId::new("a"), vec!["x"]), (ItemId::new("a"), vec!["y"])]);
        match dup {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dense_indices_are_contiguous_and_bijective() {
        let c = catalog3();
        for ix in 0..c.len() {
            assert_eq!(c.lookup(c.id(ix)).unwrap(), ix);
        }
    }

    #[test]
    fn item_feedback_semantics() {
        let mut ds = Dataset::new(catalog3());
        let u = UserId::new("u1");
        ds.register_user(u.clone());
        let a = ItemId::new("a");
        assert_eq!(
            ds.record_item_feedback(&u, &a, true).unwrap(),
            ItemFeedbackOutcome::Liked
        );
        assert_eq!(
            ds.record_item_feedback(&u, &a, true).unwrap(),
            ItemFeedbackOutcome::AlreadyLiked
        );
        assert_eq!(ds.profile(0).history(), &[0]);

        let b = ItemId::new("b");
        assert_eq!(
            ds.record_item_feedback(&u, &b, false).unwrap(),
            ItemFeedbackOutcome::Disliked
        );
        assert_eq!(ds.profile(0).history(), &[0]);
        assert_eq!(ds.profile(0).dislikes().len(), 1);

        // like then dislike: history keeps the item, ledger records it
        assert_eq!(
            ds.record_item_feedback(&u, &a, false).unwrap(),
            ItemFeedbackOutcome::DislikeConflictsWithLike
        );
        assert!(ds.profile(0).contains(0));
        assert_eq!(ds.profile(0).dislikes(), &[1, 0]);
    }

    #[test]
    fn item_feedback_rejects_unknown_ids() {
        let mut ds = Dataset::new(catalog3());
        let u = UserId::new("u1");
        assert!(matches!(
            ds.record_item_feedback(&u, &ItemId::new("a"), true),
            Err(Error::UnknownUser(_))
        ));
        ds.register_user(u.clone());
        assert!(matches!(
            ds.record_item_feedback(&u, &ItemId::new("zz"), true),
            Err(Error::UnknownItem(_))
        ));
    }

    #[test]
    fn feedback_matrix_rules() {
        let mut f = FeedbackMatrix::new();
        f.insert_explicit(0, 1, 1.0).unwrap();
        assert!(f.insert_explicit(0, 0, 1.0).is_err());
        assert!(matches!(f.insert_explicit(1, 0, -1.0), Err(Error::InvalidPair(..))));
        assert!(matches!(f.insert_explicit(0, 2, 0.0), Err(Error::InvalidLabel(_))));
        assert!(matches!(f.insert_explicit(0, 2, 0.5), Err(Error::InvalidLabel(_))));
        // overwrite, last wins
        f.insert_explicit(0, 1, -1.0).unwrap();
        assert_eq!(f.get(0, 1).unwrap().label, -1.0);
        assert_eq!(f.m(), 1);
        f.insert_propagated(2, 3, 0.0).unwrap();
        assert_eq!(f.m(), 1);
        assert_eq!(f.len(), 2);
        f.remove(0, 1);
        assert_eq!(f.m(), 0);
        assert_eq!(f.recount(), 0);
    }
}
