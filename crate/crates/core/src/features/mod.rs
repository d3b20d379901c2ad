//! MFCC feature vectors, the dataset matrix and importance-based feature
//! selection.

mod mfcc;

pub use mfcc::{
    aggregate, hz_to_mel, mel_filterbank, mel_to_hz, mfcc, Aggregation, MelFilterbank, MfccConfig,
    MfccExtractor, MfccMatrix,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::segmentation::Instance;
use crate::{Error, Result};

/// Feature matrix with one label and one clip id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<String>,
    clip_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        values: Vec<f64>,
        labels: Vec<String>,
        clip_ids: Vec<String>,
    ) -> Result<Self> {
        let width = feature_names.len();
        if width == 0 {
            return Err(Error::Features("dataset needs at least one feature".into()));
        }
        let rows = labels.len();
        if clip_ids.len() != rows || values.len() != rows * width {
            return Err(Error::Features(format!(
                "inconsistent dataset: {} labels, {} clip ids, {} values for width {width}",
                rows,
                clip_ids.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Features(format!(
                "non-finite value at row {}, column {}",
                i / width,
                i % width
            )));
        }
        Ok(Dataset {
            feature_names,
            values,
            labels,
            clip_ids,
        })
    }

    /// Numeric rows with generated names `x0, x1, ...` and empty clip ids.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[&str]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Features("rows differ in width".into()));
        }
        Dataset::new(
            (0..width).map(|i| format!("x{i}")).collect(),
            rows.concat(),
            labels.iter().map(|s| String::from(*s)).collect(),
            labels.iter().map(|_| String::new()).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn clip_ids(&self) -> &[String] {
        &self.clip_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(idx.len() * self.width());
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            values,
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            clip_ids: idx.iter().map(|&i| self.clip_ids[i].clone()).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.width()) {
            return Err(Error::Features(format!("column {c} out of range")));
        }
        let mut values = Vec::with_capacity(cols.len() * self.n_rows());
        for r in self.rows() {
            values.extend(cols.iter().map(|&c| r[c]));
        }
        Dataset::new(
            cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            values,
            self.labels.clone(),
            self.clip_ids.clone(),
        )
    }
}

/// Feature names for `n_mfcc` coefficients over `n_frames` frames.
pub fn feature_names(mode: Aggregation, n_mfcc: usize, n_frames: usize) -> Vec<String> {
    match mode {
        Aggregation::Mean => (0..n_mfcc).map(|c| format!("mfcc{c}")).collect(),
        Aggregation::Flatten => (0..n_frames)
            .flat_map(|t| (0..n_mfcc).map(move |c| format!("mfcc{c}_f{t}")))
            .collect(),
    }
}

/// One feature row per instance, in input order.
pub fn extract_dataset(instances: &[Instance], extractor: &MfccExtractor) -> Result<Dataset> {
    let first = instances.first().ok_or(Error::EmptyDataset)?;
    let cfg = extractor.config();
    let len = first.samples.len();
    let names = feature_names(cfg.aggregation, cfg.n_mfcc, cfg.frame_count(len));
    let mut values = Vec::with_capacity(names.len() * instances.len());
    for inst in instances {
        if inst.samples.len() != len {
            return Err(Error::Features(format!(
                "instance {}#{}#{} has {} samples, expected {len}",
                inst.clip_id,
                inst.segment_number,
                inst.window_number,
                inst.samples.len()
            )));
        }
        values.extend(extractor.compute(&inst.samples)?.aggregate(cfg.aggregation));
    }
    Dataset::new(
        names,
        values,
        instances.iter().map(|i| i.class_label.clone()).collect(),
        instances.iter().map(|i| i.clip_id.clone()).collect(),
    )
}

/// Normalized importances and the feature order they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    importance: Vec<f64>,
    order: Vec<usize>,
}

impl FeatureRanking {
    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    /// Feature indices by descending importance, ties by lower index.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

pub fn rank_features(importance: &[f64]) -> Result<FeatureRanking> {
    if importance.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Features("importances must be finite and non-negative".into()));
    }
    let total: f64 = importance.iter().sum();
    if total <= 0.0 {
        return Err(Error::Features("all importances are zero".into()));
    }
    let importance: Vec<f64> = importance.iter().map(|w| w / total).collect();
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]));
    Ok(FeatureRanking { importance, order })
}

/// Share of total importance carried by the top `k` features.
pub fn importance_sum(ranking: &FeatureRanking, k: usize) -> Result<f64> {
    if k == 0 || k > ranking.len() {
        return Err(Error::Features(format!("k={k} outside 1..={}", ranking.len())));
    }
    if k == ranking.len() {
        return Ok(1.0);
    }
    // Normalized shares can round to just above 1 before the last feature.
    let sum: f64 = ranking.order[..k].iter().map(|&i| ranking.importance[i]).sum();
    Ok(sum.min(1.0))
}

/// Keep the top `k` ranked columns in their original relative order.
pub fn select_top_k(dataset: &Dataset, ranking: &FeatureRanking, k: usize) -> Result<Dataset> {
    if ranking.len() != dataset.width() {
        return Err(Error::WidthMismatch {
            expected: dataset.width(),
            found: ranking.len(),
        });
    }
    if k == 0 || k > dataset.width() {
        return Err(Error::Features(format!("k={k} outside 1..={}", dataset.width())));
    }
    if k == dataset.width() {
        return Ok(dataset.clone());
    }
    let mut cols = ranking.order[..k].to_vec();
    cols.sort_unstable();
    dataset.select_columns(&cols)
}
