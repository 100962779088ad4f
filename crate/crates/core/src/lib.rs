//! Graph recommender that turns user feedback on ⟨recommendation, explanation⟩
//! item pairs into a per-user preference vector and folds it back into a
//! random walk with restart.
//!
//! Pipeline:
//!
//! 1. [`embed`]: non-negative item vectors from item/tag memberships.
//! 2. [`recwalk`]: user/item graph, personalized PageRank recommendations,
//!    contribution-based explanations.
//! 3. [`densify`] + [`lsh`]: pair feedback spread to nearby pairs by label
//!    propagation over pseudo-items.
//! 4. [`prefopt`]: preference translation `w_u` by SGD.
//! 5. [`recwalk::recommend_with_feedback`]: re-ranking over the similarity of
//!    translated vectors.
//!
//! [`evalsim`] runs the whole loop against simulated users and scores the
//! feedback configurations with P@k, MAP@k and nDCG@k.

pub mod config;
pub mod densify;
pub mod embed;
pub mod error;
pub mod evalsim;
pub mod io;
pub mod lsh;
pub mod metrics;
pub mod model;
pub mod prefopt;
pub mod recwalk;
pub mod similarity;
pub mod stats;

pub use error::{Error, Result};
