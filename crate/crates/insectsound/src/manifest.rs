//! Dataset manifest: which recordings belong to which class, their order
//! within the class, and the annotated segments inside each recording.
//!
//! ```toml
//! schema_version = 1
//!
//! [[clip]]
//! path = "recordings/cricket_a.wav"
//! class = "C1"            # code C1..C4 or common name
//! ordinal = 1             # 1..n within the class
//! segments = [[0.12, 0.80], [1.05, 1.62]]
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use insectsound_core::segmentation::{InsectClass, SegmentSpan};
use serde::{Deserialize, Serialize};

use crate::error::{format, io, Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipEntry {
    pub path: PathBuf,
    pub class: String,
    pub ordinal: u32,
    pub segments: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    #[serde(rename = "clip", default)]
    pub clips: Vec<ClipEntry>,
}

/// A manifest entry after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSpec {
    pub path: PathBuf,
    pub clip_id: String,
    pub class: InsectClass,
    pub ordinal: u32,
    /// Segment numbers start at 1 in manifest order.
    pub spans: Vec<SegmentSpan>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| format(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Check every rule and report all problems at once. Audio files must
    /// exist; segment ends are checked against clip length later, when the
    /// audio is decoded.
    pub fn validate(&self, base: &Path) -> Result<Vec<ClipSpec>> {
        let mut problems = Vec::new();
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            problems.push(format!(
                "schema_version {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.clips.is_empty() {
            problems.push("no [[clip]] entries".to_string());
        }
        let mut ordinals: BTreeMap<InsectClass, Vec<u32>> = BTreeMap::new();
        let mut ids = BTreeSet::new();
        let mut specs = Vec::new();
        for (n, entry) in self.clips.iter().enumerate() {
            let at = format!("clip {} ({})", n + 1, entry.path.display());
            let path = base.join(&entry.path);
            if !path.is_file() {
                problems.push(format!("{at}: audio file {} does not exist", path.display()));
            }
            let clip_id = entry
                .path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            if clip_id.is_empty() || clip_id.contains('#') {
                problems.push(format!("{at}: file stem {clip_id:?} cannot name instances"));
            } else if !ids.insert(clip_id.clone()) {
                problems.push(format!("{at}: file stem {clip_id:?} is used by another clip"));
            }
            let class = match entry.class.parse::<InsectClass>() {
                Ok(c) => c,
                Err(e) => {
                    problems.push(format!("{at}: {e}"));
                    continue;
                }
            };
            ordinals.entry(class).or_default().push(entry.ordinal);
            if entry.segments.is_empty() {
                problems.push(format!("{at}: no segments"));
            }
            let spans: Vec<SegmentSpan> = entry
                .segments
                .iter()
                .enumerate()
                .map(|(i, &[start_s, end_s])| SegmentSpan {
                    clip_id: clip_id.clone(),
                    class_label: class.code().to_string(),
                    segment_number: i as u32 + 1,
                    start_s,
                    end_s,
                })
                .collect();
            for s in &spans {
                if let Err(e) = s.validate(None, 1) {
                    problems.push(format!("{at}: {e}"));
                }
            }
            specs.push(ClipSpec {
                path,
                clip_id,
                class,
                ordinal: entry.ordinal,
                spans,
            });
        }
        let mut counts = BTreeSet::new();
        for (class, ords) in &mut ordinals {
            ords.sort_unstable();
            let n = ords.len() as u32;
            if !ords.iter().copied().eq(1..=n) {
                problems.push(format!(
                    "class {}: clip ordinals {ords:?} must be unique and contiguous from 1",
                    class.code()
                ));
            }
            counts.insert(n);
        }
        if counts.len() > 1 {
            let desc: Vec<String> = ordinals.iter().map(|(c, o)| format!("{}={}", c.code(), o.len())).collect();
            problems.push(format!("classes have unequal clip counts ({})", desc.join(", ")));
        }
        if problems.is_empty() {
            specs.sort_by(|a, b| (a.class, a.ordinal).cmp(&(b.class, b.ordinal)));
            Ok(specs)
        } else {
            Err(Error::Manifest(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str) {
        std::fs::write(dir.join(name), b"").unwrap();
    }

    fn entry(path: &str, class: &str, ordinal: u32, segments: Vec<[f64; 2]>) -> ClipEntry {
        ClipEntry {
            path: path.into(),
            class: class.into(),
            ordinal,
            segments,
        }
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut clips = Vec::new();
        for (c, class) in ["C1", "cicada", "C3", "C4"].iter().enumerate() {
            for o in 1..=2 {
                let name = format!("k{c}_{o}.wav");
                touch(dir.path(), &name);
                clips.push(entry(&name, class, o, vec![[0.0, 0.5], [0.25, 0.75]]));
            }
        }
        let m = Manifest {
            schema_version: 1,
            clips,
        };
        let path = dir.path().join("manifest.toml");
        std::fs::write(&path, m.to_toml()).unwrap();
        let (loaded, base) = Manifest::load(&path).unwrap();
        assert_eq!(loaded, m);
        let specs = loaded.validate(&base).unwrap();
        assert_eq!(specs.len(), 8);
        assert_eq!(specs[2].class, InsectClass::C2);
        assert_eq!(specs[2].spans[1].segment_number, 2);
        assert_eq!(specs[2].spans[1].class_label, "C2");
    }

    #[test]
    fn all_problems_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.wav");
        touch(dir.path(), "b.wav");
        let m = Manifest {
            schema_version: 2,
            clips: vec![
                entry("a.wav", "C1", 1, vec![[0.5, 0.25]]),
                entry("b.wav", "C1", 3, vec![[0.0, 1.0]]),
                entry("gone.wav", "C2", 1, vec![]),
                entry("x.wav", "mosquito", 1, vec![[0.0, 1.0]]),
            ],
        };
        let Err(Error::Manifest(problems)) = m.validate(dir.path()) else {
            panic!("expected manifest errors")
        };
        let all = problems.join("\n");
        for needle in [
            "schema_version 2",
            "end 0.25 is not after start 0.5",
            "gone.wav does not exist",
            "no segments",
            "unknown insect class \"mosquito\"",
            "contiguous",
            "unequal clip counts",
        ] {
            assert!(all.contains(needle), "missing {needle:?} in\n{all}");
        }
    }

    #[test]
    fn duplicate_stems_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("x")).unwrap();
        touch(dir.path(), "a.wav");
        touch(&dir.path().join("x"), "a.wav");
        let m = Manifest {
            schema_version: 1,
            clips: vec![
                entry("a.wav", "C1", 1, vec![[0.0, 1.0]]),
                entry("x/a.wav", "C1", 2, vec![[0.0, 1.0]]),
            ],
        };
        let err = m.validate(dir.path()).unwrap_err().to_string();
        assert!(err.contains("used by another clip"), "{err}");
    }
}
