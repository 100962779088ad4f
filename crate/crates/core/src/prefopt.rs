//! Per-user preference translation learned from densified pair feedback.
//!
//! The objective is
//!
//! ```text
//! J(w) = (1/m) Σ F(i,j) · [cos(v_i, v_j) − cos(v_i + w, v_j + w)] + γ‖w‖²
//! ```
//!
//! over the `m` non-zero entries of `F`. `w = 0` gives `J = 0`, and the
//! optimizer returns the best iterate it has seen, so the returned objective
//! is never positive.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{FeedbackMatrix, ItemVectors, PairFeedback, UserId};
use crate::similarity::{cosine, dot};

const MAX_RESTARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// L2 coefficient on `w`.
    pub gamma: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Mini-batch size; `None` means `min(m, 32)`.
    pub batch: Option<usize>,
    pub seed: u64,
    pub tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gamma: 3.0,
            lr: 0.01,
            epochs: 200,
            batch: None,
            seed: 0,
            tol: 1e-6,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::InvalidParameter(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.batch == Some(0) {
            return Err(Error::InvalidParameter("batch must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceVector {
    pub user: Option<UserId>,
    pub w: Vec<f64>,
    pub objective: f64,
    pub epochs: usize,
}

impl PreferenceVector {
    pub fn zero(dim: usize) -> Self {
        Self {
            user: None,
            w: vec![0.0; dim],
            objective: 0.0,
            epochs: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|&x| x == 0.0)
    }
}

fn shifted(v: &[f64], w: &[f64]) -> Vec<f64> {
    v.iter().zip(w).map(|(a, b)| a + b).collect()
}

/// d cos(a, b) / da; zero when either vector is zero.
fn cosine_grad_first(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let na2 = dot(a, a);
    let nb2 = dot(b, b);
    if na2 == 0.0 || nb2 == 0.0 {
        return None;
    }
    let (na, nb) = (na2.sqrt(), nb2.sqrt());
    let c = dot(a, b) / (na * nb);
    Some(a.iter().zip(b).map(|(x, y)| y / (na * nb) - c * x / na2).collect())
}

fn check_dims(vectors: &ItemVectors, w: &[f64]) -> Result<()> {
    if w.len() != vectors.dim() {
        return Err(Error::DimensionMismatch {
            expected: vectors.dim(),
            found: w.len(),
        });
    }
    Ok(())
}

fn data_term(entries: &[PairFeedback], vectors: &ItemVectors, w: &[f64]) -> f64 {
    entries
        .iter()
        .map(|e| {
            let (vi, vj) = (vectors.get(e.rec), vectors.get(e.other));
            e.label * (cosine(vi, vj) - cosine(&shifted(vi, w), &shifted(vj, w)))
        })
        .sum::<f64>()
        / entries.len() as f64
}

/// Gradient of the data term over `entries` (averaged), without regularization.
fn data_gradient(entries: &[PairFeedback], vectors: &ItemVectors, w: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; w.len()];
    for e in entries {
        let a = shifted(vectors.get(e.rec), w);
        let b = shifted(vectors.get(e.other), w);
        if let (Some(ga), Some(gb)) = (cosine_grad_first(&a, &b), cosine_grad_first(&b, &a)) {
            for ((g, x), y) in grad.iter_mut().zip(&ga).zip(&gb) {
                *g -= e.label * (x + y);
            }
        }
    }
    let m = entries.len() as f64;
    grad.iter_mut().for_each(|g| *g /= m);
    grad
}

pub fn objective(w: &[f64], feedback: &FeedbackMatrix, vectors: &ItemVectors, gamma: f64) -> Result<f64> {
    check_dims(vectors, w)?;
    let entries = feedback.nonzero_entries();
    if entries.is_empty() {
        return Err(Error::NoFeedback);
    }
    Ok(data_term(&entries, vectors, w) + gamma * dot(w, w))
}

pub fn gradient(w: &[f64], feedback: &FeedbackMatrix, vectors: &ItemVectors, gamma: f64) -> Result<Vec<f64>> {
    check_dims(vectors, w)?;
    let entries = feedback.nonzero_entries();
    if entries.is_empty() {
        return Err(Error::NoFeedback);
    }
    let mut g = data_gradient(&entries, vectors, w);
    g.iter_mut().zip(w).for_each(|(g, x)| *g += 2.0 * gamma * x);
    Ok(g)
}

enum Attempt {
    Done(PreferenceVector),
    Diverged,
}

fn sgd(entries: &[PairFeedback], vectors: &ItemVectors, config: &OptimizerConfig, lr: f64) -> Attempt {
    let dim = vectors.dim();
    let full = |w: &[f64]| data_term(entries, vectors, w) + config.gamma * dot(w, w);
    let batch = config.batch.unwrap_or(32).min(entries.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..entries.len()).collect();

    let mut w = vec![0.0; dim];
    let mut best = (0.0, w.clone());
    let mut prev = 0.0;
    let mut epochs = 0;
    let mut scratch = Vec::with_capacity(batch);
    while epochs < config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            scratch.clear();
            scratch.extend(chunk.iter().map(|&i| entries[i]));
            let g = data_gradient(&scratch, vectors, &w);
            for (x, gi) in w.iter_mut().zip(&g) {
                *x -= lr * (gi + 2.0 * config.gamma * *x);
            }
        }
        epochs += 1;
        let value = full(&w);
        if !value.is_finite() || w.iter().any(|x| !x.is_finite()) {
            return Attempt::Diverged;
        }
        if value < best.0 {
            best = (value, w.clone());
        }
        if prev - value < config.tol {
            break;
        }
        prev = value;
    }
    Attempt::Done(PreferenceVector {
        user: None,
        w: best.1,
        objective: best.0,
        epochs,
    })
}

/// Mini-batch SGD from `w = 0`; batches are drawn from the non-zero entries
/// and reshuffled every epoch. A non-finite objective restarts with half the
/// learning rate, up to three times.
pub fn learn_preference(
    feedback: &FeedbackMatrix,
    vectors: &ItemVectors,
    config: &OptimizerConfig,
) -> Result<PreferenceVector> {
    config.validate()?;
    let entries = feedback.nonzero_entries();
    if entries.is_empty() {
        return Err(Error::NoFeedback);
    }
    let mut lr = config.lr;
    for restart in 0..=MAX_RESTARTS {
        match sgd(&entries, vectors, config, lr) {
            Attempt::Done(pref) => return Ok(pref),
            Attempt::Diverged => {
                log::warn!("preference optimization diverged at lr={lr}; restart {}", restart + 1);
                lr /= 2.0;
            }
        }
    }
    Err(Error::Diverged(MAX_RESTARTS))
}

/// Feedback-weighted mean similarity shift `(1/m) Σ F·(cos_new − cos_old)`.
pub fn similarity_shift(w: &[f64], feedback: &FeedbackMatrix, vectors: &ItemVectors) -> Result<f64> {
    check_dims(vectors, w)?;
    let entries = feedback.nonzero_entries();
    if entries.is_empty() {
        return Err(Error::NoFeedback);
    }
    Ok(-data_term(&entries, vectors, w))
}
