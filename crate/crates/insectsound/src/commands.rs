//! The work behind each subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use insectsound_core::audio::resample;
use insectsound_core::augmentation::augment_all;
use insectsound_core::classifiers::train;
use insectsound_core::evaluation::{plan_folds, run_fold, summarize, ExperimentReport};
use insectsound_core::features::{feature_names, Dataset, MfccExtractor};
use insectsound_core::projection::{embedding_report, tsne, Grouping, PlotData};
use insectsound_core::segmentation::{duration_stats, extract_instances, min_segment_duration, Instance, SegmentSpan};
use insectsound_core::seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset_io::write_dataset_csv;
use crate::error::{csv_err, io, Error, Result};
use crate::fixture::{write_fixture, FixtureParams};
use crate::lock::DirLock;
use crate::manifest::Manifest;
use crate::model_io::save_model;
use crate::report::{write_json, write_report_csv, FullReport, Provenance};
use crate::store::{read_store, write_store};
use crate::wav::load_wav;

pub const AUGMENTED_DIR: &str = "augmented";
pub const FEATURES_FILE: &str = "features.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const MODELS_DIR: &str = "models";
pub const PLOT_BY_CLASS: &str = "tsne_by_class.csv";
pub const PLOT_BY_CLIP: &str = "tsne_by_clip.csv";
pub const PLOT_AUGMENTED: &str = "tsne_augmented.csv";

const STREAM_PROJECT: u64 = 11;
const STREAM_FINAL_MODEL: u64 = 12;

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        b = b.num_threads(n);
    }
    Ok(b.build().map_err(|e| Error::Config(vec![format!("thread pool: {e}")]))?)
}

/// MFCC rows for `instances`, computed in parallel, in input order.
pub fn extract_features(instances: &[Instance], cfg: &RunConfig) -> Result<Dataset> {
    let first = instances.first().ok_or(insectsound_core::Error::EmptyDataset)?;
    let extractor = MfccExtractor::new(cfg.mfcc.clone(), cfg.sample_rate)?;
    let len = first.samples.len();
    let rows = instances
        .par_iter()
        .map(|inst| {
            if inst.samples.len() != len {
                return Err(insectsound_core::Error::Features(format!(
                    "instance {} has {} samples, expected {len}",
                    inst.name().original_file,
                    inst.samples.len()
                )));
            }
            Ok(extractor.compute(&inst.samples)?.aggregate(cfg.mfcc.aggregation))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(
        feature_names(cfg.mfcc.aggregation, cfg.mfcc.n_mfcc, cfg.mfcc.frame_count(len)),
        rows.concat(),
        instances.iter().map(|i| i.class_label.clone()).collect(),
        instances.iter().map(|i| i.clip_id.clone()).collect(),
    )?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Discarded {
    pub clip_id: String,
    pub segment: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentSummary {
    pub window_samples: usize,
    pub min_segment_duration_s: f64,
    pub instances: usize,
    pub instances_per_class: BTreeMap<String, usize>,
    pub instances_per_clip: BTreeMap<String, usize>,
    pub discarded: Vec<Discarded>,
    pub durations: BTreeMap<String, insectsound_core::segmentation::DurationStats>,
}

/// Cut the manifest's segments into instances and replace the store.
pub fn cmd_segment(cfg: &RunConfig) -> Result<SegmentSummary> {
    let manifest_path = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["segment needs --manifest".into()]))?;
    let (manifest, base) = Manifest::load(manifest_path)?;
    let clips = manifest.validate(&base)?;
    let _lock = DirLock::acquire(&cfg.output_dir)?;

    let decoded = clips
        .par_iter()
        .map(|spec| {
            let clip = load_wav(&spec.path)?;
            if clip.sample_rate() == cfg.sample_rate {
                Ok(clip)
            } else {
                log::info!("resampling {} from {} Hz", spec.path.display(), clip.sample_rate());
                Ok(resample(&clip, cfg.sample_rate)?)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let problems: Vec<String> = clips
        .iter()
        .zip(&decoded)
        .flat_map(|(spec, clip)| {
            spec.spans
                .iter()
                .filter_map(|s| s.validate(Some(clip.duration_s()), cfg.sample_rate).err())
                .map(move |e| format!("{}: {e}", spec.path.display()))
        })
        .collect();
    if !problems.is_empty() {
        return Err(Error::Manifest(problems));
    }

    let mut instances = Vec::new();
    let mut discarded = Vec::new();
    for (spec, clip) in clips.iter().zip(&decoded) {
        let ex = extract_instances(clip, &spec.spans, spec.ordinal, cfg.window_samples)?;
        instances.extend(ex.instances);
        discarded.extend(ex.discarded.into_iter().map(|segment| Discarded {
            clip_id: spec.clip_id.clone(),
            segment,
        }));
    }
    if instances.is_empty() {
        return Err(Error::Manifest(vec![format!(
            "no segment is at least {} s long; nothing to store",
            cfg.w_seconds
        )]));
    }
    let spans: Vec<SegmentSpan> = clips.iter().flat_map(|c| c.spans.iter().cloned()).collect();
    let count = |key: fn(&Instance) -> &String| {
        let mut m = BTreeMap::new();
        for i in &instances {
            *m.entry(key(i).clone()).or_insert(0) += 1;
        }
        m
    };
    let summary = SegmentSummary {
        window_samples: cfg.window_samples,
        min_segment_duration_s: min_segment_duration(&spans)?,
        instances: instances.len(),
        instances_per_class: count(|i| &i.class_label),
        instances_per_clip: count(|i| &i.clip_id),
        discarded,
        durations: duration_stats(&spans),
    };
    std::fs::create_dir_all(&cfg.store).map_err(io(&cfg.store))?;
    write_store(&cfg.store, &instances, cfg.sample_rate)?;
    write_json(&cfg.store.join("durations.json"), &summary)?;
    write_json(&cfg.store.join("segment.json"), &Provenance::new("segment", cfg))?;
    log::info!("stored {} instances in {}", instances.len(), cfg.store.display());
    Ok(summary)
}

fn load_instances(cfg: &RunConfig) -> Result<Vec<Instance>> {
    let index = cfg.store.join(crate::store::INDEX_FILE);
    if !index.is_file() {
        return Err(crate::error::format(
            &cfg.store,
            "no instance store here; run `segment` first or pass --store",
        ));
    }
    read_store(&cfg.store, cfg.sample_rate)
}

fn augmentation_spec(cfg: &RunConfig) -> Result<insectsound_core::augmentation::AugmentationSpec> {
    cfg.augmentation
        .spec()
        .ok_or_else(|| Error::Config(vec!["this command needs an augmentation preset other than none".into()]))
}

fn augment_parallel(instances: &[Instance], cfg: &RunConfig) -> Result<Vec<Instance>> {
    let spec = augmentation_spec(cfg)?;
    let parts = instances
        .par_chunks(64)
        .map(|chunk| augment_all(chunk, &spec))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.concat())
}

/// Write every augmented variant of the store to `<output>/augmented`.
pub fn cmd_augment(cfg: &RunConfig) -> Result<PathBuf> {
    augmentation_spec(cfg)?;
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let instances = load_instances(cfg)?;
    let augmented = augment_parallel(&instances, cfg)?;
    let dir = cfg.output_dir.join(AUGMENTED_DIR);
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    write_store(&dir, &augmented, cfg.sample_rate)?;
    write_json(&dir.join("augment.json"), &Provenance::new("augment", cfg))?;
    log::info!("wrote {} augmented instances to {}", augmented.len(), dir.display());
    Ok(dir)
}

/// Export the store's MFCC features as CSV.
pub fn cmd_extract(cfg: &RunConfig) -> Result<PathBuf> {
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let data = extract_features(&load_instances(cfg)?, cfg)?;
    let path = cfg.output_dir.join(FEATURES_FILE);
    write_dataset_csv(&path, &data)?;
    write_json(&cfg.output_dir.join("extract.json"), &Provenance::new("extract", cfg))?;
    Ok(path)
}

pub fn run_evaluation(instances: &[Instance], cfg: &RunConfig) -> Result<ExperimentReport> {
    let exp = cfg.experiment();
    exp.validate()?;
    let folds = plan_folds(instances, &exp)?;
    let outputs = pool(cfg)?.install(|| {
        folds
            .par_iter()
            .map(|f| run_fold(instances, f, &exp))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(summarize(folds, outputs))
}

/// Run the evaluation grid and write `report.csv` and `report.json`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.experiment().validate()?;
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let instances = load_instances(cfg)?;
    let report = run_evaluation(&instances, cfg)?;
    write_report_csv(&cfg.output_dir.join(REPORT_CSV), &report)?;
    write_json(
        &cfg.output_dir.join(REPORT_JSON),
        &FullReport {
            provenance: Provenance::new("evaluate", cfg),
            failed_cells: report.failed_cells(),
            report: &report,
        },
    )?;
    if cfg.save_models {
        let data = extract_features(&instances, cfg)?;
        let dir = cfg.output_dir.join(MODELS_DIR);
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        for &kind in &cfg.models {
            let s = seed::derive(cfg.seed, &[STREAM_FINAL_MODEL, seed::hash_str(kind.name())]);
            let model = train(kind, &data, &cfg.hyper, s)?;
            save_model(&dir.join(format!("{kind}.json")), &model)?;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionSummary {
    pub files: Vec<PathBuf>,
    pub points: usize,
    pub final_kl: Vec<f64>,
}

fn write_plot(path: &Path, plot: &PlotData, mode: Grouping) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in plot.grouped(mode) {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

fn project(instances: &[Instance], cfg: &RunConfig, stream: u64) -> Result<(PlotData, f64)> {
    let mut data = extract_features(instances, cfg)?;
    if data.n_rows() > cfg.tsne_max_points {
        let mut rng = seed::rng(seed::derive(cfg.seed, &[STREAM_PROJECT, stream]));
        let mut idx = rand::seq::index::sample(&mut rng, data.n_rows(), cfg.tsne_max_points).into_vec();
        idx.sort_unstable();
        log::info!("projecting {} of {} points", idx.len(), data.n_rows());
        data = data.select_rows(&idx);
    }
    let emb = tsne(&data, &cfg.tsne)?;
    let plot = embedding_report(&emb.coords, data.labels(), data.clip_ids())?;
    Ok((plot, *emb.kl.last().expect("at least one KL value")))
}

/// t-SNE plot data grouped by class and by clip, and optionally after augmentation.
pub fn cmd_project(cfg: &RunConfig, with_augmented: bool) -> Result<ProjectionSummary> {
    if with_augmented {
        augmentation_spec(cfg)?;
    }
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let instances = load_instances(cfg)?;
    let (plot, kl) = pool(cfg)?.install(|| project(&instances, cfg, 0))?;
    let mut summary = ProjectionSummary {
        files: vec![cfg.output_dir.join(PLOT_BY_CLASS), cfg.output_dir.join(PLOT_BY_CLIP)],
        points: plot.rows.len(),
        final_kl: vec![kl],
    };
    write_plot(&summary.files[0], &plot, Grouping::Class)?;
    write_plot(&summary.files[1], &plot, Grouping::Clip)?;
    if with_augmented {
        let augmented = augment_parallel(&instances, cfg)?;
        let (plot, kl) = pool(cfg)?.install(|| project(&augmented, cfg, 1))?;
        let path = cfg.output_dir.join(PLOT_AUGMENTED);
        write_plot(&path, &plot, Grouping::Class)?;
        summary.files.push(path);
        summary.final_kl.push(kl);
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        #[serde(flatten)]
        provenance: Provenance<'a, RunConfig>,
        summary: &'a ProjectionSummary,
    }
    write_json(
        &cfg.output_dir.join("project.json"),
        &Doc {
            provenance: Provenance::new("project", cfg),
            summary: &summary,
        },
    )?;
    Ok(summary)
}

/// Generate the synthetic dataset; returns the manifest path.
pub fn cmd_synth_fixture(dir: &Path, params: &FixtureParams) -> Result<PathBuf> {
    let _lock = DirLock::acquire(dir)?;
    write_fixture(dir, params)
}
