//! Brute-force k-nearest-neighbour voting.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub params: KnnParams,
    /// Row-major training matrix.
    pub x: Vec<f64>,
    pub y: Vec<usize>,
}

impl Knn {
    /// Indices of the `k` nearest rows by Euclidean distance; equal
    /// distances keep the lower row index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let w = query.len();
        let mut d: Vec<(f64, usize)> = self
            .x
            .chunks_exact(w)
            .enumerate()
            .map(|(i, row)| (row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.params.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, query: &[f64], n_classes: usize) -> usize {
        let mut votes = vec![0.0; n_classes];
        for i in self.neighbors(query) {
            votes[self.y[i]] += 1.0;
        }
        argmax(votes.into_iter())
    }
}
