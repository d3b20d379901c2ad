//! On-disk instance store.
//!
//! ```text
//! <store>/index.csv                      one row per instance
//! <store>/instances/<class>/<clip>/*.wav PCM16, named by the instance grammar
//! ```

use std::path::{Path, PathBuf};

use insectsound_core::naming::{format_instance_name, parse_instance_name};
use insectsound_core::segmentation::Instance;
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, format, io, Result};
use crate::wav::{load_wav, write_wav};

pub const INDEX_FILE: &str = "index.csv";
pub const INSTANCE_DIR: &str = "instances";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    /// Path relative to the store root, with `/` separators.
    pub file: String,
    pub class: String,
    pub clip_id: String,
    pub clip_ordinal: u32,
    pub segment: u32,
    pub window: u32,
    pub augmentation: String,
    pub samples: usize,
}

/// Replace the store's instances with `instances`.
pub fn write_store(root: &Path, instances: &[Instance], sample_rate: u32) -> Result<Vec<IndexRow>> {
    let inst_dir = root.join(INSTANCE_DIR);
    if inst_dir.exists() {
        std::fs::remove_dir_all(&inst_dir).map_err(io(&inst_dir))?;
    }
    let mut rows = Vec::with_capacity(instances.len());
    for inst in instances {
        let name = format_instance_name(&inst.name())?;
        let rel = format!("{INSTANCE_DIR}/{}/{}/{name}", inst.class_label, inst.clip_id);
        let path = root.join(&rel);
        let parent = path.parent().expect("instance path has a parent");
        std::fs::create_dir_all(parent).map_err(io(parent))?;
        write_wav(&path, &inst.samples, sample_rate)?;
        rows.push(IndexRow {
            file: rel,
            class: inst.class_label.clone(),
            clip_id: inst.clip_id.clone(),
            clip_ordinal: inst.clip_ordinal,
            segment: inst.segment_number,
            window: inst.window_number,
            augmentation: inst.augmentation.to_string(),
            samples: inst.samples.len(),
        });
    }
    let index = root.join(INDEX_FILE);
    let mut w = csv::Writer::from_path(&index).map_err(csv_err(&index))?;
    for r in &rows {
        w.serialize(r).map_err(csv_err(&index))?;
    }
    w.flush().map_err(io(&index))?;
    Ok(rows)
}

pub fn read_index(root: &Path) -> Result<Vec<IndexRow>> {
    let index = root.join(INDEX_FILE);
    let mut r = csv::Reader::from_path(&index).map_err(csv_err(&index))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(&index))
}

/// Load every instance, checking each file name against its index row.
pub fn read_store(root: &Path, sample_rate: u32) -> Result<Vec<Instance>> {
    let rows = read_index(root)?;
    if rows.is_empty() {
        return Err(format(root.join(INDEX_FILE), "the store holds no instances"));
    }
    rows.iter().map(|row| load_instance(root, row, sample_rate)).collect()
}

fn load_instance(root: &Path, row: &IndexRow, sample_rate: u32) -> Result<Instance> {
    let path: PathBuf = root.join(&row.file);
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let name = parse_instance_name(file_name)?;
    let augmentation = name.augmentation;
    if name.original_file != row.clip_id
        || name.segment_number != row.segment
        || name.window_number != row.window
        || augmentation.to_string() != row.augmentation
    {
        return Err(format(&path, "file name disagrees with its index row"));
    }
    let clip = load_wav(&path)?;
    if clip.sample_rate() != sample_rate {
        return Err(format(
            &path,
            format!("stored at {} Hz but the run uses {sample_rate} Hz", clip.sample_rate()),
        ));
    }
    if clip.len() != row.samples {
        return Err(format(&path, format!("{} samples, index says {}", clip.len(), row.samples)));
    }
    Ok(Instance {
        samples: clip.into_samples(),
        class_label: row.class.clone(),
        clip_id: row.clip_id.clone(),
        clip_ordinal: row.clip_ordinal,
        segment_number: row.segment,
        window_number: row.window,
        augmentation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use insectsound_core::audio::pcm16_to_amplitude;
    use insectsound_core::naming::Augmentation;

    fn inst(clip: &str, ordinal: u32, w: u32, aug: Augmentation) -> Instance {
        Instance {
            samples: (0..64).map(|i| pcm16_to_amplitude((i * 97 - 3000) as i16)).collect(),
            class_label: "C2".into(),
            clip_id: clip.into(),
            clip_ordinal: ordinal,
            segment_number: 3,
            window_number: w,
            augmentation: aug,
        }
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let items = vec![
            inst("mos_a", 1, 1, Augmentation::None),
            inst("mos_a", 1, 2, Augmentation::Pitch(Some(-2.0))),
            inst("mos_b", 2, 1, Augmentation::Stretch(Some(0.5))),
        ];
        let rows = write_store(dir.path(), &items, 8000).unwrap();
        assert_eq!(rows[1].file, "instances/C2/mos_a/mos_a#3#2#P-2#1.wav");
        assert_eq!(rows[0].augmentation, "");
        assert_eq!(read_store(dir.path(), 8000).unwrap(), items);
        let err = read_store(dir.path(), 16000).unwrap_err().to_string();
        assert!(err.contains("8000 Hz"), "{err}");
    }

    #[test]
    fn rewriting_drops_stale_files() {
        let dir = tempfile::tempdir().unwrap();
        write_store(dir.path(), &[inst("old", 1, 1, Augmentation::None)], 8000).unwrap();
        write_store(dir.path(), &[inst("new", 1, 1, Augmentation::None)], 8000).unwrap();
        assert!(!dir.path().join("instances/C2/old").exists());
        assert_eq!(read_store(dir.path(), 8000).unwrap().len(), 1);
    }

    #[test]
    fn mismatched_names_are_caught() {
        let dir = tempfile::tempdir().unwrap();
        write_store(dir.path(), &[inst("a", 1, 1, Augmentation::None)], 8000).unwrap();
        let index = dir.path().join(INDEX_FILE);
        let text = std::fs::read_to_string(&index).unwrap().replace(",3,1,", ",4,1,");
        std::fs::write(&index, text).unwrap();
        let err = read_store(dir.path(), 8000).unwrap_err().to_string();
        assert!(err.contains("disagrees"), "{err}");
    }
}
