use std::f64::consts::PI;
use std::path::Path;

use insectsound::commands::{cmd_evaluate, cmd_extract, cmd_project, cmd_segment, cmd_synth_fixture, run_evaluation};
use insectsound::config::{ConfigLayer, RunConfig, Token};
use insectsound::core::classifiers::{train, HyperParams, ModelKind};
use insectsound::core::evaluation::TopK;
use insectsound::core::segmentation::InsectClass;
use insectsound::dataset_io::read_dataset_csv;
use insectsound::fixture::{generate, FixtureParams, CARRIERS_HZ};
use insectsound::manifest::Manifest;
use insectsound::model_io::{load_model, save_model};
use insectsound::store::read_store;

fn small_fixture(dir: &Path) -> std::path::PathBuf {
    let params = FixtureParams {
        clips_per_class: 3,
        voiced_seconds: 1.2,
        ..FixtureParams::default()
    };
    cmd_synth_fixture(&dir.join("fx"), &params).unwrap()
}

fn config(dir: &Path, manifest: Option<&Path>, over: ConfigLayer) -> RunConfig {
    let base = ConfigLayer {
        output_dir: Some(dir.join("out")),
        manifest: manifest.map(Path::to_path_buf),
        models: Some(vec!["dt".into(), "knn".into()]),
        balanced_i: Some(vec![8]),
        top_k: Some(vec![Token::Int(10), Token::Str("all".into())]),
        aggregation: Some("mean".into()),
        ..ConfigLayer::default()
    };
    RunConfig::resolve(base.merge(over)).unwrap()
}

fn dominant_hz(x: &[f64], rate: f64) -> f64 {
    let n = x.len();
    let best = (1..n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let a = 2.0 * PI * (k * t) as f64 / n as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            (k, re * re + im * im)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    best as f64 * rate / n as f64
}

#[test]
fn fixture_carriers_are_distinguishable() {
    let params = FixtureParams::default();
    let clips = generate(&params);
    assert_eq!(clips.len(), 20);
    let bin = 22050.0 / 2048.0;
    for clip in &clips {
        let c = InsectClass::ALL.iter().position(|&k| k == clip.class).unwrap();
        let start = (clip.segments[0][0] * 22050.0).round() as usize;
        let f = dominant_hz(&clip.samples[start..start + 2048], 22050.0);
        assert!((f - clip.carrier_hz).abs() <= bin, "{:?} {f} vs {}", clip.class, clip.carrier_hz);
        for (other, &carrier) in CARRIERS_HZ.iter().enumerate() {
            if other != c {
                assert!((f - carrier).abs() > 10.0 * bin);
            }
        }
    }
}

#[test]
fn fixture_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let params = FixtureParams {
        clips_per_class: 2,
        voiced_seconds: 0.5,
        seed: 4,
        ..FixtureParams::default()
    };
    let a = cmd_synth_fixture(&dir.path().join("a"), &params).unwrap();
    let b = cmd_synth_fixture(&dir.path().join("b"), &params).unwrap();
    let (m, _) = Manifest::load(&a).unwrap();
    assert_eq!(m.clips.len(), 8);
    for entry in &m.clips {
        let fa = std::fs::read(a.parent().unwrap().join(&entry.path)).unwrap();
        let fb = std::fs::read(b.parent().unwrap().join(&entry.path)).unwrap();
        assert_eq!(fa, fb);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn segment_partitions_the_store_by_class_and_clip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path());
    let cfg = config(dir.path(), Some(&manifest), ConfigLayer::default());
    let summary = cmd_segment(&cfg).unwrap();
    assert_eq!(summary.instances_per_class.len(), 4);
    assert_eq!(summary.instances_per_clip.len(), 12);
    for class in ["C1", "C2", "C3", "C4"] {
        for clip in 1..=3 {
            assert!(cfg.store.join(format!("instances/{class}/{class}_clip{clip}")).is_dir());
        }
    }
    let instances = read_store(&cfg.store, cfg.sample_rate).unwrap();
    assert_eq!(instances.len(), summary.instances);
    assert!(instances.iter().all(|i| i.samples.len() == 2205));
    assert!(cfg.store.join("durations.json").is_file());
    assert!(cfg.store.join("segment.json").is_file());
}

#[test]
fn overlapping_spans_are_accepted_and_missing_audio_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path());
    let (mut m, _) = Manifest::load(&manifest).unwrap();
    let first = m.clips[0].segments[0];
    m.clips[0].segments.push([first[0] + 0.05, first[1]]);
    std::fs::write(&manifest, m.to_toml()).unwrap();
    let cfg = config(dir.path(), Some(&manifest), ConfigLayer::default());
    cmd_segment(&cfg).unwrap();

    m.clips[5].path = "nowhere.wav".into();
    std::fs::write(&manifest, m.to_toml()).unwrap();
    let err = cmd_segment(&cfg).unwrap_err().to_string();
    assert!(err.contains("nowhere.wav"), "{err}");
}

#[test]
fn segment_end_beyond_audio_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path());
    let (mut m, _) = Manifest::load(&manifest).unwrap();
    m.clips[2].segments.push([1.0, 500.0]);
    std::fs::write(&manifest, m.to_toml()).unwrap();
    let cfg = config(dir.path(), Some(&manifest), ConfigLayer::default());
    let err = cmd_segment(&cfg).unwrap_err().to_string();
    assert!(err.contains("exceeds clip duration"), "{err}");
    assert!(!cfg.store.join("index.csv").exists());
}

#[test]
fn evaluate_writes_the_grid_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path());
    let cfg = config(dir.path(), Some(&manifest), ConfigLayer::default());
    cmd_segment(&cfg).unwrap();
    let report = cmd_evaluate(&cfg).unwrap();
    // 3 folds x 2 arms x 2 k x 2 models
    assert_eq!(report.cells.len(), 24);
    assert_eq!(report.failed_cells(), 0);
    let csv1 = std::fs::read(cfg.output_dir.join("report.csv")).unwrap();
    let text = String::from_utf8(csv1.clone()).unwrap();
    assert!(text.starts_with("model,k,i,augmented,fold,accuracy\n"));
    assert_eq!(text.lines().count(), 25);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(cfg.output_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], 0);
    assert_eq!(json["tool"], "insectsound");
    cmd_evaluate(&cfg).unwrap();
    assert_eq!(csv1, std::fs::read(cfg.output_dir.join("report.csv")).unwrap());
}

#[test]
fn unknown_model_fails_before_any_work() {
    let layer = ConfigLayer {
        models: Some(vec!["rf".into(), "lstm".into()]),
        ..ConfigLayer::default()
    };
    let err = RunConfig::resolve(layer).unwrap_err().to_string();
    assert!(err.contains("lstm"), "{err}");
}

#[test]
fn short_classes_produce_failed_cells_not_errors() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path());
    let cfg = config(
        dir.path(),
        Some(&manifest),
        ConfigLayer {
            balanced_i: Some(vec![8, 100_000]),
            augmentation: Some("none".into()),
            ..ConfigLayer::default()
        },
    );
    cmd_segment(&cfg).unwrap();
    let instances = read_store(&cfg.store, cfg.sample_rate).unwrap();
    let report = run_evaluation(&instances, &cfg).unwrap();
    assert_eq!(report.failed_cells(), 3 * 2 * 2);
    assert!(report
        .cells
        .iter()
        .all(|c| (c.key.balanced_i == 8) == c.accuracy().is_some()));
}

#[test]
fn extract_and_project_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path());
    let cfg = config(
        dir.path(),
        Some(&manifest),
        ConfigLayer {
            perplexity: Some(10.0),
            tsne_iterations: Some(300),
            tsne_max_points: Some(120),
            ..ConfigLayer::default()
        },
    );
    let err = cmd_project(&cfg, false).unwrap_err().to_string();
    assert!(err.contains("segment"), "{err}");

    let summary = cmd_segment(&cfg).unwrap();
    let features = cmd_extract(&cfg).unwrap();
    let data = read_dataset_csv(&features).unwrap();
    assert_eq!(data.n_rows(), summary.instances);
    assert_eq!(data.width(), 40);

    let p = cmd_project(&cfg, false).unwrap();
    assert_eq!(p.files.len(), 2);
    let p = cmd_project(&cfg, true).unwrap();
    assert_eq!(p.files.len(), 3);
    for f in &p.files {
        let text = std::fs::read_to_string(f).unwrap();
        assert!(text.starts_with("x,y,class,clip_id\n"));
        assert_eq!(text.lines().count(), 121);
    }
}

#[test]
fn models_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = insectsound::core::seed::rng(2);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            (0..4)
                .map(|d| (i % 3) as f64 * if d == 0 { 2.0 } else { 0.0 } + insectsound::core::seed::normal(&mut rng))
                .collect()
        })
        .collect();
    let labels: Vec<&str> = (0..60).map(|i| ["a", "b", "c"][i % 3]).collect();
    let data = insectsound::core::features::Dataset::from_rows(&rows, &labels).unwrap();
    for kind in ModelKind::ALL {
        let model = train(kind, &data, &HyperParams::default(), 5).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model, "{kind}");
        assert_eq!(back.predict_batch(&data).unwrap(), model.predict_batch(&data).unwrap());
    }
}

#[test]
fn top_k_beyond_width_fails_only_that_k() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path());
    let cfg = config(
        dir.path(),
        Some(&manifest),
        ConfigLayer {
            top_k: Some(vec![Token::Int(10), Token::Int(41)]),
            augmentation: Some("none".into()),
            ..ConfigLayer::default()
        },
    );
    cmd_segment(&cfg).unwrap();
    let report = run_evaluation(&read_store(&cfg.store, cfg.sample_rate).unwrap(), &cfg).unwrap();
    for c in &report.cells {
        assert_eq!(c.accuracy().is_some(), c.key.top_k == TopK::Count(10));
    }
}
