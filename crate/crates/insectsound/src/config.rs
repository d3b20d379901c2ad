//! Run configuration. Defaults are overridden by an optional TOML file,
//! which is overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use insectsound_core::audio::DEFAULT_SAMPLE_RATE;
use insectsound_core::augmentation::{preset_narrow, preset_wide, AugmentationSpec};
use insectsound_core::classifiers::{HyperParams, ModelKind};
use insectsound_core::evaluation::{ExperimentConfig, Protocol, TopK};
use insectsound_core::features::{Aggregation, MfccConfig};
use insectsound_core::projection::TsneParams;
use insectsound_core::segmentation::duration_to_samples;
use serde::{Deserialize, Serialize};

use crate::error::{format, io, Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// An integer or a string in TOML; any token on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Token {
    Int(u64),
    Str(String),
}

impl std::str::FromStr for Token {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Token::Str(s.to_string()))
    }
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Token::Int(v) => write!(f, "{v}"),
            Token::Str(s) => f.write_str(s),
        }
    }
}

/// One layer of settings; unset fields fall through to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,

    /// Instance length in seconds
    #[arg(long, global = true)]
    pub w_seconds: Option<f64>,
    /// Working sample rate; audio is resampled to it
    #[arg(long, global = true)]
    pub sample_rate: Option<u32>,
    /// Balanced training instances per class, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub balanced_i: Option<Vec<usize>>,
    /// Feature counts to keep, comma separated ("all" keeps every feature)
    #[arg(long, global = true, value_delimiter = ',')]
    pub top_k: Option<Vec<Token>>,
    /// Classifiers: decision_tree, random_forest, knn, svm_rbf, gradient_boosted
    #[arg(long, global = true, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Augmentation preset: wide, narrow or none
    #[arg(long, global = true)]
    pub augmentation: Option<String>,
    /// MFCC aggregation: flatten or mean
    #[arg(long, global = true)]
    pub aggregation: Option<String>,
    /// Master seed for balancing, splits, random forests and t-SNE
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for reports, features and plot data
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Dataset manifest (segment)
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Instance store; defaults to <output-dir>/store
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Evaluation protocol: loco or random
    #[arg(long, global = true)]
    pub protocol: Option<String>,
    /// Test share for the random protocol
    #[arg(long, global = true)]
    pub test_fraction: Option<f64>,
    /// Tree model that ranks features: decision_tree, random_forest or gradient_boosted
    #[arg(long, global = true)]
    pub ranking_model: Option<String>,
    /// MFCC coefficients per frame
    #[arg(long, global = true)]
    pub n_mfcc: Option<usize>,
    /// FFT size in samples
    #[arg(long, global = true)]
    pub n_fft: Option<usize>,
    /// Frame hop in samples
    #[arg(long, global = true)]
    pub hop: Option<usize>,
    /// Mel bands
    #[arg(long, global = true)]
    pub n_mels: Option<usize>,
    /// t-SNE perplexity
    #[arg(long, global = true)]
    pub perplexity: Option<f64>,
    /// t-SNE gradient steps
    #[arg(long, global = true)]
    pub tsne_iterations: Option<usize>,
    /// Largest number of points fed to t-SNE; larger sets are subsampled
    #[arg(long, global = true)]
    pub tsne_max_points: Option<usize>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write models trained on the whole store (evaluate)
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub save_models: Option<bool>,
}

impl ConfigLayer {
    /// Read a TOML layer; relative paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let mut layer: ConfigLayer = toml::from_str(&text).map_err(|e| format(path, e))?;
        if let Some(v) = layer.schema_version {
            if v != CONFIG_SCHEMA_VERSION {
                return Err(format(
                    path,
                    format!("schema_version {v} is not supported (expected {CONFIG_SCHEMA_VERSION})"),
                ));
            }
        }
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut layer.output_dir, &mut layer.manifest, &mut layer.store].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(layer)
    }

    /// `over` wins wherever it is set.
    pub fn merge(self, over: ConfigLayer) -> ConfigLayer {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigLayer { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            schema_version, w_seconds, sample_rate, balanced_i, top_k, models, augmentation, aggregation, seed,
            output_dir, manifest, store, protocol, test_fraction, ranking_model, n_mfcc, n_fft, hop, n_mels,
            perplexity, tsne_iterations, tsne_max_points, threads, save_models
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Wide,
    Narrow,
    None,
}

impl Preset {
    pub fn spec(self) -> Option<AugmentationSpec> {
        match self {
            Preset::Wide => Some(preset_wide()),
            Preset::Narrow => Some(preset_narrow()),
            Preset::None => None,
        }
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub w_seconds: f64,
    pub sample_rate: u32,
    pub window_samples: usize,
    pub balanced_i: Vec<usize>,
    pub top_k: Vec<TopK>,
    pub models: Vec<ModelKind>,
    pub augmentation: Preset,
    pub mfcc: MfccConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub manifest: Option<PathBuf>,
    pub store: PathBuf,
    pub protocol: Protocol,
    pub ranking_model: ModelKind,
    pub hyper: HyperParams,
    pub tsne: TsneParams,
    pub tsne_max_points: usize,
    pub threads: Option<usize>,
    pub save_models: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(ConfigLayer::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Apply defaults to `layer` and check every field, reporting all problems.
    pub fn resolve(layer: ConfigLayer) -> Result<Self> {
        let mut problems = Vec::new();
        let mut check = |r: std::result::Result<(), String>| {
            if let Err(e) = r {
                problems.push(e);
            }
        };

        let w_seconds = layer.w_seconds.unwrap_or(0.1);
        let sample_rate = layer.sample_rate.unwrap_or(DEFAULT_SAMPLE_RATE);
        let window_samples = duration_to_samples(w_seconds, sample_rate).unwrap_or_else(|e| {
            check(Err(format!("w_seconds/sample_rate: {e}")));
            0
        });

        let balanced_i = layer.balanced_i.unwrap_or_else(|| vec![30, 145]);
        if balanced_i.is_empty() || balanced_i.contains(&0) {
            check(Err(format!("balanced_i {balanced_i:?} must be a non-empty list of positive counts")));
        }

        let top_k: Vec<TopK> = layer
            .top_k
            .unwrap_or_else(|| [10, 20, 30, 40].map(Token::Int).to_vec())
            .iter()
            .filter_map(|t| {
                t.to_string()
                    .parse()
                    .map_err(|e| check(Err(format!("top_k: {e}"))))
                    .ok()
            })
            .collect();

        let models: Vec<ModelKind> = match layer.models {
            None => ModelKind::ALL.to_vec(),
            Some(names) => names
                .iter()
                .filter_map(|n| n.parse().map_err(|e| check(Err(format!("models: {e}")))).ok())
                .collect(),
        };
        let mut seen = std::collections::BTreeSet::new();
        for m in &models {
            if !seen.insert(*m) {
                check(Err(format!("models: {m} listed twice")));
            }
        }

        let augmentation = match layer.augmentation.as_deref().unwrap_or("narrow") {
            "wide" => Preset::Wide,
            "narrow" => Preset::Narrow,
            "none" | "off" => Preset::None,
            other => {
                check(Err(format!("augmentation {other:?} is not wide, narrow or none")));
                Preset::None
            }
        };
        let aggregation = match layer.aggregation.as_deref().unwrap_or("flatten") {
            "flatten" => Aggregation::Flatten,
            "mean" => Aggregation::Mean,
            other => {
                check(Err(format!("aggregation {other:?} is not flatten or mean")));
                Aggregation::Flatten
            }
        };
        let defaults = MfccConfig::default();
        let mfcc = MfccConfig {
            n_mfcc: layer.n_mfcc.unwrap_or(defaults.n_mfcc),
            n_fft: layer.n_fft.unwrap_or(defaults.n_fft),
            hop: layer.hop.unwrap_or(defaults.hop),
            n_mels: layer.n_mels.unwrap_or(defaults.n_mels),
            aggregation,
            ..defaults
        };
        check(mfcc.validate(sample_rate).map_err(|e| format!("mfcc: {e}")));

        let protocol = match layer.protocol.as_deref().unwrap_or("loco") {
            "loco" | "leave-one-clip-out" => {
                if layer.test_fraction.is_some() {
                    check(Err("test_fraction only applies to the random protocol".into()));
                }
                Protocol::LeaveOneClipOut
            }
            "random" => {
                let f = layer.test_fraction.unwrap_or(0.2);
                if !(f > 0.0 && f < 1.0) {
                    check(Err(format!("test_fraction {f} outside (0, 1)")));
                }
                Protocol::RandomSplit { test_fraction: f }
            }
            other => {
                check(Err(format!("protocol {other:?} is not loco or random")));
                Protocol::LeaveOneClipOut
            }
        };

        let ranking_model = match layer.ranking_model.as_deref().unwrap_or("random_forest").parse::<ModelKind>() {
            Ok(m) if m.supports_importance() => m,
            Ok(m) => {
                check(Err(format!("ranking_model {m} has no feature importances")));
                ModelKind::RandomForest
            }
            Err(e) => {
                check(Err(format!("ranking_model: {e}")));
                ModelKind::RandomForest
            }
        };

        let seed = layer.seed.unwrap_or(0);
        let tsne = TsneParams {
            perplexity: layer.perplexity.unwrap_or(30.0),
            iterations: layer.tsne_iterations.unwrap_or(1000),
            seed,
            ..TsneParams::default()
        };
        if !(tsne.perplexity >= 1.0) || tsne.iterations == 0 {
            check(Err("perplexity must be >= 1 and tsne_iterations >= 1".into()));
        }
        let tsne_max_points = layer.tsne_max_points.unwrap_or(500);
        if (tsne_max_points as f64) <= tsne.perplexity {
            check(Err(format!(
                "tsne_max_points {tsne_max_points} must exceed perplexity {}",
                tsne.perplexity
            )));
        }
        if layer.threads == Some(0) {
            check(Err("threads must be positive".into()));
        }

        let output_dir = layer.output_dir.unwrap_or_else(|| PathBuf::from("out"));
        let store = layer.store.unwrap_or_else(|| output_dir.join("store"));
        if problems.is_empty() {
            Ok(RunConfig {
                w_seconds,
                sample_rate,
                window_samples,
                balanced_i,
                top_k,
                models,
                augmentation,
                mfcc,
                seed,
                output_dir,
                manifest: layer.manifest,
                store,
                protocol,
                ranking_model,
                hyper: HyperParams::default(),
                tsne,
                tsne_max_points,
                threads: layer.threads,
                save_models: layer.save_models.unwrap_or(false),
            })
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            models: self.models.clone(),
            balanced_i: self.balanced_i.clone(),
            top_k: self.top_k.clone(),
            augmentation: self.augmentation.spec(),
            mfcc: self.mfcc.clone(),
            sample_rate: self.sample_rate,
            seed: self.seed,
            protocol: self.protocol,
            ranking_model: self.ranking_model,
            hyper: self.hyper.clone(),
        }
    }
}
