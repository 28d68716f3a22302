//! Exact Euclidean k-nearest-neighbor lists.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Precomputed neighbor lists for every point of a dataset.
///
/// Lists are sorted by nondecreasing distance, ties broken by ascending point
/// index, and never contain the query point itself.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    data: ArrayView2<'a, f64>,
    k_max: usize,
    ids: Vec<usize>,
    dists: Vec<f64>,
}

pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl<'a> NeighborIndex<'a> {
    /// Brute-force O(N²) build. A `k_max` of N or more is clamped to N - 1.
    pub fn build(data: ArrayView2<'a, f64>, k_max: usize) -> Result<Self> {
        let n = data.nrows();
        if n < 2 {
            return invalid(format!("need at least 2 points, got {n}"));
        }
        if k_max == 0 {
            return invalid("k_max must be at least 1");
        }
        let k_max = if k_max >= n {
            log::warn!("k_max = {k_max} exceeds N - 1 = {}, clamping", n - 1);
            n - 1
        } else {
            k_max
        };

        let rows: Vec<Vec<(f64, usize)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = data.row(i);
                let mut cand: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (euclidean(p, data.row(j)), j))
                    .collect();
                let by_dist = |a: &(f64, usize), b: &(f64, usize)| {
                    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
                };
                if k_max < cand.len() {
                    cand.select_nth_unstable_by(k_max - 1, by_dist);
                    cand.truncate(k_max);
                }
                cand.sort_unstable_by(by_dist);
                cand
            })
            .collect();

        let mut ids = Vec::with_capacity(n * k_max);
        let mut dists = Vec::with_capacity(n * k_max);
        for row in rows {
            for (d, j) in row {
                dists.push(d);
                ids.push(j);
            }
        }
        Ok(Self {
            data,
            k_max,
            ids,
            dists,
        })
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn data(&self) -> ArrayView2<'a, f64> {
        self.data
    }

    /// The `k` nearest neighbors of point `i`, nearest first.
    pub fn neighbors(&self, i: usize, k: usize) -> &[usize] {
        debug_assert!(k <= self.k_max);
        let start = i * self.k_max;
        &self.ids[start..start + k]
    }

    /// Distances matching [`Self::neighbors`].
    pub fn neighbor_dists(&self, i: usize, k: usize) -> &[f64] {
        debug_assert!(k <= self.k_max);
        let start = i * self.k_max;
        &self.dists[start..start + k]
    }

    /// Distance from point `i` to its `k`-th nearest neighbor (1-based `k`).
    pub fn knn_dist(&self, i: usize, k: usize) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return invalid(format!("k = {k} outside 1..={}", self.k_max));
        }
        if i >= self.len() {
            return invalid(format!("point {i} out of range"));
        }
        Ok(self.kdist(i, k))
    }

    /// Unchecked variant of [`Self::knn_dist`] for callers that validated `k`.
    pub(crate) fn kdist(&self, i: usize, k: usize) -> f64 {
        self.dists[i * self.k_max + k - 1]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.data.row(i), self.data.row(j))
    }

    /// For every point, the points that list it among their `k` nearest.
    pub fn reverse_neighbors(&self, k: usize) -> Vec<Vec<usize>> {
        let mut rev = vec![Vec::new(); self.len()];
        for i in 0..self.len() {
            for &j in self.neighbors(i, k) {
                rev[j].push(i);
            }
        }
        rev
    }
}
