//! Leave-one-clip-out and random-split experiments.
//!
//! A fold holds out clip `j` of every class. Per fold and balanced count
//! `i`, the training pool is balanced to `i` instances per class, optionally
//! augmented, turned into MFCC features and ranked by a tree model trained on
//! that training data alone. Every (model, top-k) pair is then trained and
//! scored on the untouched test instances of the held-out clips.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::augmentation::{augment_all, AugmentationSpec};
use crate::classifiers::{train, HyperParams, ModelKind};
use crate::features::{extract_dataset, importance_sum, rank_features, select_top_k, MfccConfig, MfccExtractor};
use crate::segmentation::Instance;
use crate::seed;
use crate::{Error, Result};

const STREAM_SPLIT: u64 = 1;
const STREAM_BALANCE: u64 = 2;
const STREAM_RANK: u64 = 3;
const STREAM_MODEL: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    /// Fold number; for leave-one-clip-out it equals the test clip ordinal.
    pub fold: u32,
    pub test_clip_ordinals: Vec<u32>,
    pub train_clip_ordinals: Vec<u32>,
}

/// One fold per clip ordinal. Every class must have clips `1..=n`, `n >= 2`.
pub fn make_loco_folds(clips_per_class: &BTreeMap<String, BTreeSet<u32>>) -> Result<Vec<FoldSpec>> {
    let mut n = None;
    for (class, ords) in clips_per_class {
        let count = ords.len() as u32;
        if !ords.iter().copied().eq(1..=count) {
            return Err(Error::Evaluation(format!(
                "class {class:?} clip ordinals {ords:?} are not contiguous from 1"
            )));
        }
        match n {
            None => n = Some((class, count)),
            Some((first, m)) if m != count => {
                return Err(Error::Evaluation(format!(
                    "class {first:?} has {m} clips but class {class:?} has {count}"
                )))
            }
            _ => {}
        }
    }
    let n = n.map_or(0, |(_, c)| c);
    if n < 2 {
        return Err(Error::Evaluation(format!("need at least 2 clips per class, found {n}")));
    }
    Ok((1..=n)
        .rev()
        .map(|test| FoldSpec {
            fold: test,
            test_clip_ordinals: vec![test],
            train_clip_ordinals: (1..=n).filter(|&o| o != test).collect(),
        })
        .collect())
}

fn partial_shuffle(idx: &mut [usize], take: usize, rng: &mut seed::Rng) {
    for i in 0..take {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
}

fn group_by_label<'a>(labels: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Stratified split of row indices: each class contributes
/// `round(fraction * n_class)` test rows (clamped to `1..n_class`).
/// Both lists are in ascending order.
pub fn stratified_split<'a>(
    labels: impl Iterator<Item = &'a str>,
    test_fraction: f64,
    seed_: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Evaluation(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut rng = seed::rng(seed_);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut idx) in group_by_label(labels) {
        let n = idx.len();
        if n < 2 {
            return Err(Error::InsufficientRows {
                class: class.to_string(),
                available: n,
                required: 2,
            });
        }
        let n_test = (libm::round(test_fraction * n as f64) as usize).clamp(1, n - 1);
        partial_shuffle(&mut idx, n_test, &mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn make_random_split(
    data: &crate::features::Dataset,
    test_fraction: f64,
    seed_: u64,
) -> Result<(crate::features::Dataset, crate::features::Dataset)> {
    let (train, test) = stratified_split(data.labels().iter().map(String::as_str), test_fraction, seed_)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}

/// Indices of exactly `per_class` rows of every class, drawn uniformly
/// without replacement, in ascending order.
pub fn balance<'a>(labels: impl Iterator<Item = &'a str>, per_class: usize, seed_: u64) -> Result<Vec<usize>> {
    let mut rng = seed::rng(seed_);
    let mut keep = Vec::new();
    for (class, mut idx) in group_by_label(labels) {
        if idx.len() < per_class {
            return Err(Error::InsufficientRows {
                class: class.to_string(),
                available: idx.len(),
                required: per_class,
            });
        }
        partial_shuffle(&mut idx, per_class, &mut rng);
        keep.extend_from_slice(&idx[..per_class]);
    }
    keep.sort_unstable();
    Ok(keep)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }
}

pub fn confusion_matrix<S: AsRef<str>, T: AsRef<str>>(
    truth: &[S],
    predicted: &[T],
    classes: &[String],
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Evaluation(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let index = |l: &str| {
        classes
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| Error::Evaluation(format!("label {l:?} is not in the class registry")))
    };
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (t, p) in truth.iter().zip(predicted) {
        counts[index(t.as_ref())?][index(p.as_ref())?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::Evaluation("accuracy of an empty confusion matrix".into())),
        total => Ok(cm.trace() as f64 / total as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopK {
    Count(usize),
    All,
}

impl TopK {
    pub fn resolve(self, width: usize) -> Result<usize> {
        match self {
            TopK::All => Ok(width),
            TopK::Count(k) if k >= 1 && k <= width => Ok(k),
            TopK::Count(k) => Err(Error::Evaluation(format!("top-k {k} outside 1..={width}"))),
        }
    }
}

impl fmt::Display for TopK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopK::Count(k) => write!(f, "{k}"),
            TopK::All => f.write_str("all"),
        }
    }
}

impl core::str::FromStr for TopK {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") || s.eq_ignore_ascii_case("full") {
            return Ok(TopK::All);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(TopK::Count)
            .ok_or_else(|| Error::invalid(format!("top-k must be a positive count or \"all\", got {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Protocol {
    LeaveOneClipOut,
    RandomSplit { test_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub models: Vec<ModelKind>,
    pub balanced_i: Vec<usize>,
    pub top_k: Vec<TopK>,
    /// `None` runs only the unaugmented arm.
    pub augmentation: Option<AugmentationSpec>,
    pub mfcc: MfccConfig,
    pub sample_rate: u32,
    pub seed: u64,
    pub protocol: Protocol,
    /// Tree model whose importances rank the features of each fold.
    pub ranking_model: ModelKind,
    pub hyper: HyperParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            models: ModelKind::ALL.to_vec(),
            balanced_i: vec![30, 145],
            top_k: vec![TopK::Count(10), TopK::Count(20), TopK::Count(30), TopK::Count(40)],
            augmentation: Some(crate::augmentation::preset_narrow()),
            mfcc: MfccConfig::default(),
            sample_rate: crate::audio::DEFAULT_SAMPLE_RATE,
            seed: 0,
            protocol: Protocol::LeaveOneClipOut,
            ranking_model: ModelKind::RandomForest,
            hyper: HyperParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.balanced_i.is_empty() || self.top_k.is_empty() {
            return Err(Error::invalid("models, balanced_i and top_k must be non-empty"));
        }
        if self.balanced_i.contains(&0) {
            return Err(Error::invalid("balanced instance counts must be positive"));
        }
        if !self.ranking_model.supports_importance() {
            return Err(Error::invalid(format!(
                "ranking model {} has no feature importances",
                self.ranking_model
            )));
        }
        if let Protocol::RandomSplit { test_fraction } = self.protocol {
            if !(test_fraction > 0.0 && test_fraction < 1.0) {
                return Err(Error::invalid(format!("test fraction {test_fraction} outside (0, 1)")));
            }
        }
        self.mfcc.validate(self.sample_rate)?;
        self.hyper.validate()
    }

    /// Augmentation arms in report order.
    pub fn arms(&self) -> Vec<bool> {
        if self.augmentation.is_some() {
            vec![false, true]
        } else {
            vec![false]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub model: ModelKind,
    pub top_k: TopK,
    pub balanced_i: usize,
    pub augmented: bool,
    pub fold: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Resolved feature count.
    pub width: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Importance share of the top 10, 20 and 30 ranked features.
    pub importance_sums: BTreeMap<usize, f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok(CellResult),
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub key: CellKey,
    pub outcome: CellOutcome,
}

impl Cell {
    pub fn accuracy(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Ok(r) => Some(r.accuracy),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// What one (fold, balanced count, arm) saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: u32,
    pub balanced_i: usize,
    pub augmented: bool,
    pub train_clip_ids: BTreeSet<String>,
    pub test_clip_ids: BTreeSet<String>,
    pub train_rows_per_class: BTreeMap<String, usize>,
    pub test_rows_per_class: BTreeMap<String, usize>,
    pub test_augmented: usize,
    pub balance_seed: u64,
    pub ranking_seed: u64,
    /// Feature indices by descending importance.
    pub ranking: Vec<usize>,
    /// Importance share of the top 10, 20 and 30 features.
    pub importance_sums: BTreeMap<usize, f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutput {
    pub cells: Vec<Cell>,
    pub records: Vec<FoldRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Average {
    pub model: ModelKind,
    pub top_k: TopK,
    pub balanced_i: usize,
    pub augmented: bool,
    /// Mean over the folds that completed.
    pub mean_accuracy: Option<f64>,
    pub folds_ok: usize,
    pub folds_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub model: ModelKind,
    pub top_k: TopK,
    pub balanced_i: usize,
    pub before: Option<f64>,
    pub after: Option<f64>,
    /// `after - before` when both exist.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub folds: Vec<FoldSpec>,
    pub cells: Vec<Cell>,
    pub records: Vec<FoldRecord>,
    pub averages: Vec<Average>,
    pub deltas: Vec<Delta>,
}

impl ExperimentReport {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.accuracy().is_none()).count()
    }

    pub fn cell(&self, key: &CellKey) -> Option<&Cell> {
        self.cells.iter().find(|c| &c.key == key)
    }
}

/// Folds for `instances` under the configured protocol.
pub fn plan_folds(instances: &[Instance], config: &ExperimentConfig) -> Result<Vec<FoldSpec>> {
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    match config.protocol {
        Protocol::LeaveOneClipOut => {
            let mut clips: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
            for inst in instances {
                clips.entry(inst.class_label.clone()).or_default().insert(inst.clip_ordinal);
            }
            make_loco_folds(&clips)
        }
        Protocol::RandomSplit { .. } => Ok(vec![FoldSpec {
            fold: 1,
            test_clip_ordinals: Vec::new(),
            train_clip_ordinals: Vec::new(),
        }]),
    }
}

fn count_by_class<'a>(it: impl Iterator<Item = &'a Instance>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for i in it {
        *m.entry(i.class_label.clone()).or_insert(0) += 1;
    }
    m
}

/// Run every cell of one fold.
pub fn run_fold(instances: &[Instance], fold: &FoldSpec, config: &ExperimentConfig) -> Result<FoldOutput> {
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = match config.protocol {
        Protocol::LeaveOneClipOut => (0..instances.len())
            .partition(|&i| !fold.test_clip_ordinals.contains(&instances[i].clip_ordinal)),
        Protocol::RandomSplit { test_fraction } => stratified_split(
            instances.iter().map(|i| i.class_label.as_str()),
            test_fraction,
            seed::derive(config.seed, &[STREAM_SPLIT]),
        )?,
    };
    let pool: Vec<&Instance> = train_idx.iter().map(|&i| &instances[i]).collect();
    let test: Vec<Instance> = test_idx.iter().map(|&i| instances[i].clone()).collect();
    let test_augmented = test.iter().filter(|i| !i.augmentation.is_none()).count();
    if test_augmented > 0 {
        return Err(Error::Evaluation(format!(
            "fold {}: {test_augmented} test instances are augmented",
            fold.fold
        )));
    }
    let extractor = MfccExtractor::new(config.mfcc.clone(), config.sample_rate)?;
    let test_data = extract_dataset(&test, &extractor)?;
    let test_clip_ids: BTreeSet<String> = test.iter().map(|i| i.clip_id.clone()).collect();

    let mut out = FoldOutput {
        cells: Vec::new(),
        records: Vec::new(),
    };
    for &per_class in &config.balanced_i {
        let balance_seed = seed::derive(config.seed, &[u64::from(fold.fold), per_class as u64, STREAM_BALANCE]);
        let balanced = balance(pool.iter().map(|i| i.class_label.as_str()), per_class, balance_seed)
            .map(|idx| idx.into_iter().map(|i| pool[i].clone()).collect::<Vec<_>>());
        for augmented in config.arms() {
            let ranking_seed = seed::derive(
                config.seed,
                &[u64::from(fold.fold), per_class as u64, u64::from(augmented), STREAM_RANK],
            );
            let mut record = FoldRecord {
                fold: fold.fold,
                balanced_i: per_class,
                augmented,
                train_clip_ids: BTreeSet::new(),
                test_clip_ids: test_clip_ids.clone(),
                train_rows_per_class: BTreeMap::new(),
                test_rows_per_class: count_by_class(test.iter()),
                test_augmented,
                balance_seed,
                ranking_seed,
                ranking: Vec::new(),
                importance_sums: BTreeMap::new(),
                failure: None,
            };
            let arm = match &balanced {
                Ok(b) => run_arm(b, augmented, &test_data, fold.fold, per_class, &mut record, config),
                Err(e) => Err(e.clone()),
            };
            match arm {
                Ok(cells) => out.cells.extend(cells),
                Err(e) => {
                    let reason = e.to_string();
                    log::warn!("fold {} i={per_class} augmented={augmented}: {reason}", fold.fold);
                    for &top_k in &config.top_k {
                        for &model in &config.models {
                            out.cells.push(Cell {
                                key: CellKey { model, top_k, balanced_i: per_class, augmented, fold: fold.fold },
                                outcome: CellOutcome::Failed { reason: reason.clone() },
                            });
                        }
                    }
                    record.failure = Some(reason);
                }
            }
            out.records.push(record);
        }
    }
    Ok(out)
}

fn run_arm(
    balanced: &[Instance],
    augmented: bool,
    test_data: &crate::features::Dataset,
    fold: u32,
    per_class: usize,
    record: &mut FoldRecord,
    config: &ExperimentConfig,
) -> Result<Vec<Cell>> {
    let train_set = match (&config.augmentation, augmented) {
        (Some(spec), true) => augment_all(balanced, spec)?,
        _ => balanced.to_vec(),
    };
    record.train_clip_ids = train_set.iter().map(|i| i.clip_id.clone()).collect();
    record.train_rows_per_class = count_by_class(train_set.iter());
    let extractor = MfccExtractor::new(config.mfcc.clone(), config.sample_rate)?;
    let train_data = extract_dataset(&train_set, &extractor)?;
    if train_data.width() != test_data.width() {
        return Err(Error::WidthMismatch {
            expected: train_data.width(),
            found: test_data.width(),
        });
    }
    let ranker = train(config.ranking_model, &train_data, &config.hyper, record.ranking_seed)?;
    let ranking = rank_features(&ranker.feature_importance()?)?;
    record.ranking = ranking.order().to_vec();
    for k in [10, 20, 30] {
        if k <= ranking.len() {
            record.importance_sums.insert(k, importance_sum(&ranking, k)?);
        }
    }
    let mut cells = Vec::new();
    for &top_k in &config.top_k {
        let selected = top_k.resolve(train_data.width()).and_then(|k| {
            Ok((k, select_top_k(&train_data, &ranking, k)?, select_top_k(test_data, &ranking, k)?))
        });
        for &model in &config.models {
            let key = CellKey { model, top_k, balanced_i: per_class, augmented, fold };
            let model_seed = seed::derive(
                config.seed,
                &[u64::from(fold), per_class as u64, u64::from(augmented), STREAM_MODEL, seed::hash_str(model.name())],
            );
            let outcome = match &selected {
                Err(e) => Err(e.clone()),
                Ok((k, tr, te)) => train(model, tr, &config.hyper, model_seed).and_then(|m| {
                    let pred = m.predict_batch(te)?;
                    let cm = confusion_matrix(te.labels(), &pred, &m.classes_with(te.labels()))?;
                    Ok(CellResult {
                        accuracy: accuracy(&cm)?,
                        confusion: cm,
                        width: *k,
                        train_rows: tr.n_rows(),
                        test_rows: te.n_rows(),
                        importance_sums: record.importance_sums.clone(),
                        seed: model_seed,
                    })
                }),
            };
            cells.push(Cell {
                key,
                outcome: match outcome {
                    Ok(r) => CellOutcome::Ok(r),
                    Err(e) => CellOutcome::Failed { reason: e.to_string() },
                },
            });
        }
    }
    Ok(cells)
}

impl crate::classifiers::TrainedModel {
    /// The model's registry extended with any unseen labels, sorted.
    fn classes_with(&self, extra: &[String]) -> Vec<String> {
        let mut all: BTreeSet<String> = self.classes.iter().cloned().collect();
        all.extend(extra.iter().cloned());
        all.into_iter().collect()
    }
}

/// Sort cells into key order and derive averages and deltas.
pub fn summarize(folds: Vec<FoldSpec>, outputs: Vec<FoldOutput>) -> ExperimentReport {
    let mut cells: Vec<Cell> = Vec::new();
    let mut records: Vec<FoldRecord> = Vec::new();
    for o in outputs {
        cells.extend(o.cells);
        records.extend(o.records);
    }
    cells.sort_by(|a, b| a.key.cmp(&b.key));
    records.sort_by_key(|r| (r.fold, r.balanced_i, r.augmented));

    let mut groups: BTreeMap<(ModelKind, TopK, usize, bool), (Vec<f64>, usize)> = BTreeMap::new();
    for c in &cells {
        let g = groups
            .entry((c.key.model, c.key.top_k, c.key.balanced_i, c.key.augmented))
            .or_default();
        match c.accuracy() {
            Some(a) => g.0.push(a),
            None => g.1 += 1,
        }
    }
    let averages: Vec<Average> = groups
        .into_iter()
        .map(|((model, top_k, balanced_i, augmented), (accs, failed))| Average {
            model,
            top_k,
            balanced_i,
            augmented,
            mean_accuracy: (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64),
            folds_ok: accs.len(),
            folds_failed: failed,
        })
        .collect();
    let mut deltas = Vec::new();
    for a in averages.iter().filter(|a| !a.augmented) {
        if let Some(b) = averages
            .iter()
            .find(|b| b.augmented && b.model == a.model && b.top_k == a.top_k && b.balanced_i == a.balanced_i)
        {
            deltas.push(Delta {
                model: a.model,
                top_k: a.top_k,
                balanced_i: a.balanced_i,
                before: a.mean_accuracy,
                after: b.mean_accuracy,
                delta: a.mean_accuracy.zip(b.mean_accuracy).map(|(x, y)| y - x),
            });
        }
    }
    ExperimentReport {
        folds,
        cells,
        records,
        averages,
        deltas,
    }
}

/// Run the full grid sequentially.
pub fn run_experiment(instances: &[Instance], config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let folds = plan_folds(instances, config)?;
    let outputs = folds
        .iter()
        .map(|f| run_fold(instances, f, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(folds, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::naming::Augmentation;
    use core::f64::consts::PI;

    fn clips(counts: &[(&str, u32)]) -> BTreeMap<String, BTreeSet<u32>> {
        counts.iter().map(|&(c, n)| (c.to_string(), (1..=n).collect())).collect()
    }

    #[test]
    fn loco_folds_hold_out_one_ordinal_each() {
        let folds = make_loco_folds(&clips(&[("a", 5), ("b", 5), ("c", 5), ("d", 5)])).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen: Vec<u32> = folds.iter().map(|f| f.test_clip_ordinals[0]).collect();
        seen.sort_unstable();
        assert_eq!(seen, [1, 2, 3, 4, 5]);
        for f in &folds {
            assert_eq!(f.test_clip_ordinals, [f.fold]);
            assert_eq!(f.train_clip_ordinals.len(), 4);
            assert!(!f.train_clip_ordinals.contains(&f.fold));
        }
    }

    #[test]
    fn loco_folds_reject_bad_layouts() {
        assert!(make_loco_folds(&clips(&[("a", 5), ("b", 4)])).is_err());
        assert!(make_loco_folds(&clips(&[("a", 1), ("b", 1)])).is_err());
        assert!(make_loco_folds(&BTreeMap::new()).is_err());
        let mut gap = clips(&[("a", 2)]);
        gap.get_mut("a").unwrap().insert(4);
        assert!(make_loco_folds(&gap).is_err());
    }

    fn labels(counts: &[(&str, usize)]) -> Vec<String> {
        counts
            .iter()
            .flat_map(|&(c, n)| core::iter::repeat(c.to_string()).take(n))
            .collect()
    }

    #[test]
    fn stratified_split_takes_a_share_of_each_class() {
        let l = labels(&[("a", 25), ("b", 25), ("c", 25), ("d", 25)]);
        let (train, test) = stratified_split(l.iter().map(String::as_str), 0.2, 3).unwrap();
        assert_eq!(test.len(), 20);
        assert_eq!(train.len(), 80);
        for c in ["a", "b", "c", "d"] {
            assert_eq!(test.iter().filter(|&&i| l[i] == c).count(), 5);
        }
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let again = stratified_split(l.iter().map(String::as_str), 0.2, 3).unwrap();
        assert_eq!(again.1, test);
        assert!(stratified_split(l.iter().map(String::as_str), 1.0, 3).is_err());
        assert!(stratified_split(["a", "b", "b"].into_iter(), 0.5, 3).is_err());
    }

    #[test]
    fn balance_draws_exactly_i_per_class() {
        let l = labels(&[("a", 167), ("b", 321), ("c", 217), ("d", 394)]);
        let idx = balance(l.iter().map(String::as_str), 30, 11).unwrap();
        assert_eq!(idx.len(), 120);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        for c in ["a", "b", "c", "d"] {
            assert_eq!(idx.iter().filter(|&&i| l[i] == c).count(), 30);
        }
        assert_eq!(idx, balance(l.iter().map(String::as_str), 30, 11).unwrap());
        assert_ne!(idx, balance(l.iter().map(String::as_str), 30, 12).unwrap());
        match balance(l.iter().map(String::as_str), 200, 11) {
            Err(Error::InsufficientRows { class, available, required }) => {
                assert_eq!((class.as_str(), available, required), ("a", 167, 200));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn registry() -> Vec<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn confusion_matrix_counts_pairs() {
        let truth = ["a", "a", "b", "c", "c", "c"];
        let pred = ["a", "b", "b", "c", "a", "c"];
        let cm = confusion_matrix(&truth, &pred, &registry()).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1, 0], vec![0, 1, 0], vec![1, 0, 2]]);
        assert_eq!(cm.row_sums(), [2, 1, 3]);
        assert_eq!(cm.total(), 6);
        assert!((accuracy(&cm).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!(confusion_matrix(&truth, &pred[..5], &registry()).is_err());
        assert!(confusion_matrix(&["z"], &["a"], &registry()).is_err());
        let empty = confusion_matrix::<&str, &str>(&[], &[], &registry()).unwrap();
        assert!(accuracy(&empty).is_err());
    }

    #[test]
    fn uniform_random_predictions_score_near_chance() {
        let classes: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let mut rng = seed::rng(5);
        let truth: Vec<&str> = (0..1000).map(|i| classes[i % 4].as_str()).collect();
        let pred: Vec<&str> = (0..1000).map(|_| classes[rng.random_range(0..4)].as_str()).collect();
        let acc = accuracy(&confusion_matrix(&truth, &pred, &classes).unwrap()).unwrap();
        assert!((acc - 0.25).abs() < 0.05, "{acc}");
    }

    #[test]
    fn top_k_parses_and_resolves() {
        assert_eq!("10".parse::<TopK>().unwrap(), TopK::Count(10));
        assert_eq!("all".parse::<TopK>().unwrap(), TopK::All);
        assert!("0".parse::<TopK>().is_err());
        assert_eq!(TopK::All.resolve(40).unwrap(), 40);
        assert!(TopK::Count(41).resolve(40).is_err());
        assert_eq!(TopK::Count(3).to_string(), "3");
    }

    /// Four tone classes, `n_clips` clips each, `per_clip` windows per clip.
    fn tone_instances(n_clips: u32, per_clip: u32, len: usize) -> Vec<Instance> {
        let mut rng = seed::rng(99);
        let mut out = Vec::new();
        for (c, class) in ["c1", "c2", "c3", "c4"].iter().enumerate() {
            for clip in 1..=n_clips {
                let f = 400.0 * (c as f64 + 1.0) * (1.0 + 0.01 * f64::from(clip));
                for w in 1..=per_clip {
                    let samples = (0..len)
                        .map(|t| {
                            0.5 * libm::sin(2.0 * PI * f * t as f64 / 22050.0 + f64::from(w))
                                + 0.01 * seed::normal(&mut rng)
                        })
                        .collect();
                    out.push(Instance {
                        samples,
                        class_label: class.to_string(),
                        clip_id: format!("{class}_clip{clip}"),
                        clip_ordinal: clip,
                        segment_number: 1,
                        window_number: w,
                        augmentation: Augmentation::None,
                    });
                }
            }
        }
        out
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            models: vec![ModelKind::DecisionTree, ModelKind::Knn],
            balanced_i: vec![4],
            top_k: vec![TopK::Count(5), TopK::All],
            augmentation: Some(crate::augmentation::preset_narrow()),
            mfcc: MfccConfig {
                aggregation: crate::features::Aggregation::Mean,
                ..MfccConfig::default()
            },
            ranking_model: ModelKind::DecisionTree,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn experiment_grid_has_every_cell_and_clean_folds() {
        let data = tone_instances(3, 6, 2048);
        let cfg = small_config();
        let report = run_experiment(&data, &cfg).unwrap();
        assert_eq!(report.folds.len(), 3);
        assert_eq!(report.cells.len(), 3 * 2 * 2 * 2);
        assert_eq!(report.failed_cells(), 0);
        assert_eq!(report.records.len(), 3 * 2);
        for r in &report.records {
            assert_eq!(r.test_augmented, 0);
            assert!(r.train_clip_ids.is_disjoint(&r.test_clip_ids));
            let per_class = if r.augmented { 4 * 7 } else { 4 };
            assert!(r.train_rows_per_class.values().all(|&n| n == per_class));
            assert_eq!(r.test_rows_per_class.values().sum::<usize>(), 4 * 6);
            assert!((r.importance_sums[&30] - 1.0).abs() < 1e-12);
        }
        for c in &report.cells {
            let CellOutcome::Ok(r) = &c.outcome else { panic!("{c:?}") };
            assert_eq!(r.width, if c.key.top_k == TopK::All { 40 } else { 5 });
            assert_eq!(r.confusion.total() as usize, r.test_rows);
        }
        assert_eq!(report.averages.len(), 2 * 2 * 2);
        assert_eq!(report.deltas.len(), 2 * 2);
        assert!(report.averages.iter().all(|a| a.mean_accuracy.unwrap() > 0.5), "{:?}", report.averages);
        assert_eq!(report, run_experiment(&data, &cfg).unwrap());
    }

    #[test]
    fn ranking_ignores_test_data() {
        let data = tone_instances(3, 4, 2048);
        let mut cfg = small_config();
        cfg.augmentation = None;
        let before = run_experiment(&data, &cfg).unwrap();
        let mut noisy = data.clone();
        let mut rng = seed::rng(1);
        for inst in noisy.iter_mut().filter(|i| i.clip_ordinal == 2) {
            inst.samples.iter_mut().for_each(|s| *s = 0.3 * seed::normal(&mut rng));
        }
        let after = run_experiment(&noisy, &cfg).unwrap();
        let fold2 = |r: &ExperimentReport| r.records.iter().find(|x| x.fold == 2).unwrap().ranking.clone();
        assert_eq!(fold2(&before), fold2(&after));
    }

    #[test]
    fn unattainable_cells_fail_with_reasons() {
        let data = tone_instances(2, 3, 2048);
        let mut cfg = small_config();
        cfg.balanced_i = vec![2, 50];
        cfg.top_k = vec![TopK::Count(5), TopK::Count(100)];
        let report = run_experiment(&data, &cfg).unwrap();
        assert_eq!(report.cells.len(), 2 * 2 * 2 * 2 * 2);
        for c in &report.cells {
            match (&c.outcome, c.key.balanced_i, c.key.top_k) {
                (CellOutcome::Ok(_), 2, TopK::Count(5)) => {}
                (CellOutcome::Failed { reason }, 50, _) => assert!(reason.contains("c1"), "{reason}"),
                (CellOutcome::Failed { reason }, 2, TopK::Count(100)) => assert!(reason.contains("100")),
                other => panic!("{other:?}"),
            }
        }
        let a = report
            .averages
            .iter()
            .find(|a| a.balanced_i == 50)
            .unwrap();
        assert_eq!((a.mean_accuracy, a.folds_ok, a.folds_failed), (None, 0, 2));
    }

    #[test]
    fn random_split_protocol_runs_one_fold() {
        let data = tone_instances(2, 5, 2048);
        let mut cfg = small_config();
        cfg.protocol = Protocol::RandomSplit { test_fraction: 0.3 };
        cfg.augmentation = None;
        let report = run_experiment(&data, &cfg).unwrap();
        assert_eq!(report.folds.len(), 1);
        assert_eq!(report.records[0].test_rows_per_class.values().sum::<usize>(), 12);
    }
}
