//! Bagged CART ensembles with per-split feature sampling.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{ClassificationTree, FeatureSampler, TreeBuilder, TreeParams};
use super::{argmax, Encoded};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Defaults to `ceil(sqrt(width))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            features_per_split: None,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

impl ForestParams {
    pub fn features_for(&self, width: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| libm::ceil(libm::sqrt(width as f64)) as usize)
            .clamp(1, width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub trees: Vec<ClassificationTree>,
}

impl RandomForest {
    pub(crate) fn fit(data: &Encoded<'_>, params: &ForestParams, seed: u64) -> RandomForest {
        let n = data.y.len();
        let max_features = params.features_for(data.width);
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = seed::rng(seed::derive(seed, &[t as u64]));
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                TreeBuilder {
                    x: data.x,
                    width: data.width,
                    y: &data.y,
                    n_classes: data.n_classes,
                    params: &params.tree,
                    sampler: Some(FeatureSampler {
                        max_features,
                        rng: &mut rng,
                    }),
                }
                .build(rows)
            })
            .collect();
        RandomForest {
            params: params.clone(),
            trees,
        }
    }

    pub fn predict(&self, x: &[f64], n_classes: usize) -> usize {
        let mut votes = vec![0.0; n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1.0;
        }
        argmax(votes.into_iter())
    }

    /// Mean of the member trees' normalized importances, renormalized.
    pub fn importance(&self, width: usize) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; width];
        for t in &self.trees {
            let total: f64 = t.importance.iter().sum();
            if total > 0.0 {
                for (a, v) in acc.iter_mut().zip(&t.importance) {
                    *a += v / total;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        (total > 0.0).then(|| acc.into_iter().map(|v| v / total).collect())
    }
}
