//! Random binary projection LSH over item vectors.
//!
//! A single hash table of `p` random hyperplanes yields `2^p` buckets. A kNN
//! query only scans the query's own bucket, so it may return fewer than `k`
//! items; [`ProjectionIndex::failure_rate`] measures how often that happens.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::similarity::{cosine, dot, normalized};

/// Query target: an indexed item (excluded from its own results) or a free vector.
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    Item(usize),
    Vector(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct ProjectionIndex {
    planes: Vec<Vec<f64>>,
    vectors: Vec<Vec<f64>>,
    signatures: Vec<u32>,
    buckets: BTreeMap<u32, Vec<usize>>,
    seed: u64,
}

impl ProjectionIndex {
    pub fn build<V: AsRef<[f64]>>(vectors: &[V], planes: usize, seed: u64) -> Result<Self> {
        if planes == 0 || planes > 31 {
            return Err(Error::InvalidParameter(format!(
                "plane count must lie in 1..=31, got {planes}"
            )));
        }
        if vectors.is_empty() {
            return Err(Error::Empty("vectors to index"));
        }
        let dim = vectors[0].as_ref().len();
        if let Some(bad) = vectors.iter().find(|v| v.as_ref().len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.as_ref().len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes: Vec<Vec<f64>> = (0..planes)
            .map(|_| {
                let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                normalized(&raw)
            })
            .collect();

        let vectors: Vec<Vec<f64>> = vectors.iter().map(|v| v.as_ref().to_vec()).collect();
        let mut index = Self {
            planes,
            signatures: Vec::with_capacity(vectors.len()),
            buckets: BTreeMap::new(),
            vectors: Vec::new(),
            seed,
        };
        for (ix, v) in vectors.iter().enumerate() {
            let sig = index.signature(v);
            index.signatures.push(sig);
            // pushed in ascending index order, so bucket lists stay sorted
            index.buckets.entry(sig).or_default().push(ix);
        }
        index.vectors = vectors;
        Ok(index)
    }

    /// Bit `j` is set iff `dot(plane_j, v) >= 0`.
    pub fn signature(&self, v: &[f64]) -> u32 {
        self.planes.iter().enumerate().fold(
            0u32,
            |sig, (j, plane)| if dot(plane, v) >= 0.0 { sig | (1 << j) } else { sig },
        )
    }

    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn item_signature(&self, item: usize) -> u32 {
        self.signatures[item]
    }

    pub fn buckets(&self) -> &BTreeMap<u32, Vec<usize>> {
        &self.buckets
    }

    pub fn vector(&self, item: usize) -> &[f64] {
        &self.vectors[item]
    }

    /// Up to `k` items from the query's bucket by descending cosine, ties by
    /// ascending index.
    pub fn knn(&self, query: Query<'_>, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if self.vectors.is_empty() {
            return Err(Error::Empty("index"));
        }
        let (qv, exclude, sig) = match query {
            Query::Item(ix) => (self.vectors[ix].as_slice(), Some(ix), self.signatures[ix]),
            Query::Vector(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("query must be finite".into()));
                }
                (v, None, self.signature(v))
            }
        };
        let Some(bucket) = self.buckets.get(&sig) else {
            return Ok(Vec::new());
        };
        let mut scored: Vec<(usize, f64)> = bucket
            .iter()
            .filter(|&&ix| Some(ix) != exclude)
            .map(|&ix| (ix, cosine(qv, &self.vectors[ix])))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Fraction of queries returning fewer than `k` neighbours.
    pub fn failure_rate(&self, queries: &[Query<'_>], k: usize) -> Result<f64> {
        if queries.is_empty() {
            return Ok(0.0);
        }
        let mut failures = 0usize;
        for q in queries {
            if self.knn(*q, k)?.len() < k {
                failures += 1;
            }
        }
        Ok(failures as f64 / queries.len() as f64)
    }

    /// Unordered pairs of items sharing a bucket.
    pub fn candidate_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.buckets.values().flat_map(|b| {
            b.iter()
                .enumerate()
                .flat_map(move |(pos, &i)| b[pos + 1..].iter().map(move |&j| (i, j)))
        })
    }
}
