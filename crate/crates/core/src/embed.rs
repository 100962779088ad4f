//! Non-negative item embeddings from item/tag membership.
//!
//! The tag matrix `M` (items × tags, binary) is factorized as `M ≈ W·H` with
//! `W, H ≥ 0` using Lee–Seung multiplicative updates on the squared Frobenius
//! error. Rows of `W` become the item vectors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Catalog, ItemVector, ItemVectors};

// Keeps denominators positive without measurably perturbing the updates.
const DENOM_EPS: f64 = 1e-18;

/// Binary item × tag membership, stored densely (catalogs here are small).
#[derive(Debug, Clone, PartialEq)]
pub struct TagMatrix {
    rows: usize,
    cols: usize,
    data: DMatrix<f64>,
}

impl TagMatrix {
    /// Builds the matrix from per-item tag column lists; columns that no item
    /// uses are dropped and the remaining ones renumbered in order.
    pub fn from_memberships(memberships: &[Vec<usize>]) -> Result<Self> {
        if memberships.is_empty() {
            return Err(Error::Empty("tag matrix"));
        }
        let mut used: Vec<usize> = memberships.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        if used.is_empty() {
            return Err(Error::Empty("tag matrix has no memberships"));
        }
        let remap: std::collections::HashMap<usize, usize> =
            used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let mut data = DMatrix::zeros(memberships.len(), used.len());
        for (i, tags) in memberships.iter().enumerate() {
            for t in tags {
                data[(i, remap[t])] = 1.0;
            }
        }
        Ok(Self {
            rows: memberships.len(),
            cols: used.len(),
            data,
        })
    }

    pub fn from_catalog(catalog: &Catalog) -> Result<Self> {
        let memberships: Vec<Vec<usize>> = catalog.items().iter().map(|i| i.tags.clone()).collect();
        Self::from_memberships(&memberships)
    }

    pub fn from_dense(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Empty("tag matrix"));
        }
        if data.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(
                "tag matrix entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            rows: data.nrows(),
            cols: data.ncols(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_dense(&self) -> &DMatrix<f64> {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfConfig {
    pub dim: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            dim: 20,
            max_iters: 500,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmfOutput {
    pub vectors: ItemVectors,
    pub basis: DMatrix<f64>,
    /// Squared Frobenius error after initialization and after every iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

impl NmfOutput {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("objective trace is never empty")
    }
}

fn frobenius_sq(m: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    (m - w * h).iter().map(|x| x * x).sum()
}

pub fn nmf_factorize(m: &TagMatrix, config: NmfConfig) -> Result<NmfOutput> {
    let (n, t) = (m.rows, m.cols);
    let d = config.dim;
    if d == 0 || d > n.min(t) {
        return Err(Error::InvalidParameter(format!(
            "latent dimension {d} must lie in 1..={}",
            n.min(t)
        )));
    }
    let data = &m.data;
    let mean = data.mean();
    if mean == 0.0 {
        return Err(Error::Empty("tag matrix is all zeros"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // uniform on (0, 1], scaled by mean(M)
    let mut draw = || (1.0 - rng.random::<f64>()) * mean;
    let mut w = DMatrix::from_fn(n, d, |_, _| draw());
    let mut h = DMatrix::from_fn(d, t, |_, _| draw());

    let mut objective = vec![frobenius_sq(data, &w, &h)];
    let mut iterations = 0;
    while iterations < config.max_iters {
        let num_h = w.transpose() * data;
        let den_h = w.transpose() * &w * &h;
        h.zip_zip_apply(&num_h, &den_h, |x, num, den| *x *= num / (den + DENOM_EPS));

        let num_w = data * h.transpose();
        let den_w = &w * (&h * h.transpose());
        w.zip_zip_apply(&num_w, &den_w, |x, num, den| *x *= num / (den + DENOM_EPS));

        iterations += 1;
        let prev = *objective.last().unwrap();
        let cur = frobenius_sq(data, &w, &h);
        objective.push(cur);
        if cur == 0.0 || (prev - cur) / prev < config.tol {
            break;
        }
    }

    let rows = (0..n)
        .map(|i| {
            if data.row(i).iter().all(|&x| x == 0.0) {
                ItemVector(vec![0.0; d])
            } else {
                ItemVector(w.row(i).iter().copied().collect())
            }
        })
        .collect();
    Ok(NmfOutput {
        vectors: ItemVectors::new(d, rows)?,
        basis: h,
        objective,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::cosine;

    fn random_membership(n: usize, t: usize, seed: u64) -> TagMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..t).filter(|_| rng.random::<f64>() < 0.3).collect())
            .collect();
        TagMatrix::from_memberships(&rows).unwrap()
    }

    #[test]
    fn identity_is_reconstructed() {
        let m = TagMatrix::from_dense(DMatrix::identity(4, 4)).unwrap();
        let out = nmf_factorize(
            &m,
            NmfConfig {
                dim: 4,
                max_iters: 20_000,
                tol: 1e-12,
                seed: 7,
            },
        )
        .unwrap();
        assert!(out.final_objective() <= 1e-3, "error {}", out.final_objective());
    }

    #[test]
    fn rank_one_vectors_share_a_direction() {
        let m = random_membership(12, 8, 3);
        let out = nmf_factorize(
            &m,
            NmfConfig {
                dim: 1,
                ..NmfConfig::default()
            },
        )
        .unwrap();
        let nz: Vec<usize> = (0..12).filter(|&i| !out.vectors.rows()[i].is_zero()).collect();
        for &i in &nz {
            for &j in &nz {
                assert!((cosine(out.vectors.get(i), out.vectors.get(j)) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn objective_is_non_increasing() {
        for seed in 0..5 {
            let m = random_membership(30, 12, seed);
            let out = nmf_factorize(
                &m,
                NmfConfig {
                    dim: 5,
                    max_iters: 300,
                    tol: 0.0,
                    seed,
                },
            )
            .unwrap();
            for pair in out.objective.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
            }
        }
    }

    #[test]
    fn outputs_are_non_negative_and_seed_deterministic() {
        let m = random_membership(25, 10, 11);
        let cfg = NmfConfig {
            dim: 4,
            seed: 5,
            ..NmfConfig::default()
        };
        let a = nmf_factorize(&m, cfg).unwrap();
        let b = nmf_factorize(&m, cfg).unwrap();
        assert_eq!(a.vectors, b.vectors);
        assert!(a.vectors.is_non_negative());
        assert!(a.vectors.rows().iter().flat_map(|r| r.0.iter()).all(|x| x.is_finite()));
    }

    #[test]
    fn zero_rows_get_zero_vectors() {
        let m = TagMatrix::from_memberships(&[vec![0, 1], vec![], vec![1, 2], vec![2]]).unwrap();
        let out = nmf_factorize(
            &m,
            NmfConfig {
                dim: 2,
                ..NmfConfig::default()
            },
        )
        .unwrap();
        assert!(out.vectors.rows()[1].is_zero());
    }

    #[test]
    fn rejects_bad_dimension() {
        let m = random_membership(5, 4, 1);
        assert!(nmf_factorize(
            &m,
            NmfConfig {
                dim: 0,
                ..NmfConfig::default()
            }
        )
        .is_err());
        assert!(nmf_factorize(
            &m,
            NmfConfig {
                dim: 5,
                ..NmfConfig::default()
            }
        )
        .is_err());
        assert!(TagMatrix::from_memberships(&[]).is_err());
    }

    #[test]
    fn unused_columns_are_dropped() {
        let m = TagMatrix::from_memberships(&[vec![0, 5], vec![5, 9]]).unwrap();
        assert_eq!(m.cols(), 3);
    }
}
