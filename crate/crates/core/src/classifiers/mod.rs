//! Five classifiers behind one train/predict/importance surface.
//!
//! Labels are mapped onto a class registry sorted by label text; every
//! voting or argmax tie resolves to the class that comes first in it.

mod forest;
mod gbt;
mod knn;
mod svm;
mod tree;

pub use forest::{ForestParams, RandomForest};
pub use gbt::{log_loss, GbtParams, GradientBoosted, RegressionNode, RegressionTree};
pub use knn::{Knn, KnnParams};
pub use svm::{default_gamma, rbf, BinarySvm, SvmParams, SvmRbf};
pub use tree::{gini, ClassificationTree, Node, TreeParams};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::Dataset;
use crate::{Error, Result};

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    Knn,
    SvmRbf,
    GradientBoosted,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::Knn,
        ModelKind::SvmRbf,
        ModelKind::GradientBoosted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Knn => "knn",
            ModelKind::SvmRbf => "svm_rbf",
            ModelKind::GradientBoosted => "gradient_boosted",
        }
    }

    pub fn supports_importance(self) -> bool {
        matches!(
            self,
            ModelKind::DecisionTree | ModelKind::RandomForest | ModelKind::GradientBoosted
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        Ok(match s.as_str() {
            "decision_tree" | "dt" | "tree" => ModelKind::DecisionTree,
            "random_forest" | "rf" | "forest" => ModelKind::RandomForest,
            "knn" | "k_nn" => ModelKind::Knn,
            "svm_rbf" | "svm" => ModelKind::SvmRbf,
            "gradient_boosted" | "gbt" | "xgboost" => ModelKind::GradientBoosted,
            _ => return Err(Error::invalid(format!("unknown model {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HyperParams {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub knn: KnnParams,
    pub svm: SvmParams,
    pub gbt: GbtParams,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m));
        if self.tree.min_samples_split < 2 || self.forest.tree.min_samples_split < 2 {
            return bad("min_samples_split must be at least 2");
        }
        if self.tree.max_depth == Some(0) || self.forest.tree.max_depth == Some(0) {
            return bad("max_depth must be at least 1");
        }
        if self.forest.n_trees == 0 || self.forest.features_per_split == Some(0) {
            return bad("forest needs at least one tree and one feature per split");
        }
        if self.knn.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.svm.c > 0.0) || self.svm.gamma.is_some_and(|g| !(g > 0.0)) || !(self.svm.tol > 0.0) {
            return bad("SVM C, gamma and tol must be positive");
        }
        if self.svm.max_passes == 0 {
            return bad("SVM max_passes must be at least 1");
        }
        if !(self.gbt.learning_rate > 0.0) || self.gbt.max_depth == 0 || !(self.gbt.lambda >= 0.0) {
            return bad("boosting needs a positive learning rate and depth");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Model {
    DecisionTree {
        params: TreeParams,
        tree: ClassificationTree,
    },
    RandomForest(RandomForest),
    Knn(Knn),
    SvmRbf(SvmRbf),
    GradientBoosted(GradientBoosted),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// Sorted, duplicate-free class labels.
    pub classes: Vec<String>,
    pub feature_width: usize,
    pub model: Model,
}

/// Training data with labels encoded against a registry.
pub(crate) struct Encoded<'a> {
    pub x: &'a [f64],
    pub width: usize,
    pub y: Vec<usize>,
    pub n_classes: usize,
}

fn encode(data: &Dataset) -> Result<(Vec<String>, Encoded<'_>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes: Vec<String> = data.labels().iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let y = data
        .labels()
        .iter()
        .map(|l| classes.binary_search(l).expect("label is in registry"))
        .collect();
    let n_classes = classes.len();
    Ok((
        classes,
        Encoded {
            x: data.values(),
            width: data.width(),
            y,
            n_classes,
        },
    ))
}

pub fn train_decision_tree(data: &Dataset, params: &TreeParams) -> Result<TrainedModel> {
    let (classes, enc) = encode(data)?;
    let tree = tree::TreeBuilder {
        x: enc.x,
        width: enc.width,
        y: &enc.y,
        n_classes: enc.n_classes,
        params,
        sampler: None,
    }
    .build((0..enc.y.len()).collect());
    Ok(TrainedModel {
        classes,
        feature_width: enc.width,
        model: Model::DecisionTree {
            params: params.clone(),
            tree,
        },
    })
}

pub fn train_random_forest(data: &Dataset, params: &ForestParams, seed: u64) -> Result<TrainedModel> {
    let (classes, enc) = encode(data)?;
    Ok(TrainedModel {
        classes,
        feature_width: enc.width,
        model: Model::RandomForest(RandomForest::fit(&enc, params, seed)),
    })
}

pub fn train_knn(data: &Dataset, params: &KnnParams) -> Result<TrainedModel> {
    let (classes, enc) = encode(data)?;
    if params.k == 0 || params.k > enc.y.len() {
        return Err(Error::invalid(format!(
            "k={} must be between 1 and the row count {}",
            params.k,
            enc.y.len()
        )));
    }
    Ok(TrainedModel {
        classes,
        feature_width: enc.width,
        model: Model::Knn(Knn {
            params: params.clone(),
            x: enc.x.to_vec(),
            y: enc.y,
        }),
    })
}

pub fn train_svm_rbf(data: &Dataset, params: &SvmParams) -> Result<TrainedModel> {
    let (classes, enc) = encode(data)?;
    if enc.n_classes < 2 {
        return Err(Error::SingleClass(enc.n_classes));
    }
    Ok(TrainedModel {
        classes,
        feature_width: enc.width,
        model: Model::SvmRbf(SvmRbf::fit(&enc, params)),
    })
}

pub fn train_gbt(data: &Dataset, params: &GbtParams) -> Result<TrainedModel> {
    let (classes, enc) = encode(data)?;
    if enc.n_classes < 2 {
        return Err(Error::SingleClass(enc.n_classes));
    }
    Ok(TrainedModel {
        classes,
        feature_width: enc.width,
        model: Model::GradientBoosted(GradientBoosted::fit(&enc, params)),
    })
}

/// Train any variant. The seed only affects the random forest.
pub fn train(kind: ModelKind, data: &Dataset, params: &HyperParams, seed: u64) -> Result<TrainedModel> {
    match kind {
        ModelKind::DecisionTree => train_decision_tree(data, &params.tree),
        ModelKind::RandomForest => train_random_forest(data, &params.forest, seed),
        ModelKind::Knn => train_knn(data, &params.knn),
        ModelKind::SvmRbf => train_svm_rbf(data, &params.svm),
        ModelKind::GradientBoosted => train_gbt(data, &params.gbt),
    }
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            Model::DecisionTree { .. } => ModelKind::DecisionTree,
            Model::RandomForest(_) => ModelKind::RandomForest,
            Model::Knn(_) => ModelKind::Knn,
            Model::SvmRbf(_) => ModelKind::SvmRbf,
            Model::GradientBoosted(_) => ModelKind::GradientBoosted,
        }
    }

    /// Registry index of the predicted class.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.feature_width {
            return Err(Error::WidthMismatch {
                expected: self.feature_width,
                found: x.len(),
            });
        }
        let c = self.classes.len();
        Ok(match &self.model {
            Model::DecisionTree { tree, .. } => tree.predict(x),
            Model::RandomForest(f) => f.predict(x, c),
            Model::Knn(k) => k.predict(x, c),
            Model::SvmRbf(s) => s.predict(x, c),
            Model::GradientBoosted(g) => g.predict(x, c),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<&str> {
        Ok(&self.classes[self.predict_index(x)?])
    }

    pub fn predict_batch(&self, data: &Dataset) -> Result<Vec<String>> {
        if data.width() != self.feature_width {
            return Err(Error::WidthMismatch {
                expected: self.feature_width,
                found: data.width(),
            });
        }
        (0..data.n_rows())
            .map(|i| self.predict(data.row(i)).map(String::from))
            .collect()
    }

    /// Normalized importances for tree-based models.
    pub fn feature_importance(&self) -> Result<Vec<f64>> {
        let normalize = |v: &[f64]| -> Result<Vec<f64>> {
            let total: f64 = v.iter().sum();
            if total > 0.0 {
                Ok(v.iter().map(|x| x / total).collect())
            } else {
                Err(Error::NoSplits)
            }
        };
        match &self.model {
            Model::DecisionTree { tree, .. } => normalize(&tree.importance),
            Model::RandomForest(f) => f.importance(self.feature_width).ok_or(Error::NoSplits),
            Model::GradientBoosted(g) => normalize(&g.gains),
            Model::Knn(_) => Err(Error::ImportanceUnsupported("k-NN")),
            Model::SvmRbf(_) => Err(Error::ImportanceUnsupported("SVM")),
        }
    }
}
