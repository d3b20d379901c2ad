//! Synthetic four-species dataset for tests and demos.
//!
//! Each species is a carrier tone with a second harmonic, amplitude
//! modulated at a species-specific rate. Every clip jitters the carrier and
//! modulation rate, places voiced segments at random offsets and sits on a
//! Gaussian noise floor.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use insectsound_core::seed;
use insectsound_core::segmentation::InsectClass;
use rand::Rng;

use crate::error::{io, Result};
use crate::manifest::{ClipEntry, Manifest, MANIFEST_SCHEMA_VERSION};
use crate::wav::write_wav;

pub const CARRIERS_HZ: [f64; 4] = [600.0, 1200.0, 2400.0, 4800.0];
pub const AM_RATES_HZ: [f64; 4] = [3.0, 7.0, 13.0, 29.0];
pub const MANIFEST_FILE: &str = "manifest.toml";

const CARRIER_JITTER: f64 = 0.03;
const AM_JITTER: f64 = 0.1;
const AM_DEPTH: f64 = 0.6;
const HARMONIC: f64 = 0.2;
const NOISE_SIGMA: f64 = 0.01;
const RAMP_S: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureParams {
    pub seed: u64,
    pub sample_rate: u32,
    pub clips_per_class: u32,
    /// Minimum total segment duration per clip.
    pub voiced_seconds: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            seed: 0,
            sample_rate: 22050,
            clips_per_class: 5,
            voiced_seconds: 4.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureClip {
    pub class: InsectClass,
    pub ordinal: u32,
    pub carrier_hz: f64,
    pub samples: Vec<f64>,
    pub segments: Vec<[f64; 2]>,
}

impl FixtureClip {
    pub fn file_name(&self) -> String {
        format!("{}_clip{}.wav", self.class.code(), self.ordinal)
    }
}

fn round_ms(t: f64) -> f64 {
    (t * 1e4).round() / 1e4
}

pub fn generate_clip(params: &FixtureParams, class: InsectClass, ordinal: u32) -> FixtureClip {
    let c = InsectClass::ALL.iter().position(|&k| k == class).expect("known class");
    let mut rng = seed::rng(seed::derive(params.seed, &[c as u64, u64::from(ordinal)]));
    let carrier_hz = CARRIERS_HZ[c] * (1.0 + rng.random_range(-CARRIER_JITTER..CARRIER_JITTER));
    let am_hz = AM_RATES_HZ[c] * (1.0 + rng.random_range(-AM_JITTER..AM_JITTER));

    let mut segments = Vec::new();
    let mut t = round_ms(rng.random_range(0.1..0.4));
    let mut voiced = 0.0;
    while voiced < params.voiced_seconds {
        let len = round_ms(rng.random_range(0.4..1.2));
        segments.push([t, round_ms(t + len)]);
        voiced += len;
        t = round_ms(t + len + rng.random_range(0.15..0.5));
    }
    let rate = f64::from(params.sample_rate);
    let n = ((t + 0.2) * rate).round() as usize;
    let mut samples: Vec<f64> = (0..n).map(|_| NOISE_SIGMA * seed::normal(&mut rng)).collect();
    for &[start, end] in &segments {
        let amp = rng.random_range(0.35..0.6);
        let phase = rng.random_range(0.0..2.0 * PI);
        let (a, b) = ((start * rate).round() as usize, ((end * rate).round() as usize).min(n));
        for (i, s) in samples[a..b].iter_mut().enumerate() {
            let tt = i as f64 / rate;
            let ramp = (tt / RAMP_S).min((end - start - tt) / RAMP_S).clamp(0.0, 1.0);
            let env = 1.0 - AM_DEPTH * 0.5 * (1.0 - (2.0 * PI * am_hz * tt).cos());
            let w = 2.0 * PI * carrier_hz * tt + phase;
            *s += amp * ramp * env * (w.sin() + HARMONIC * (2.0 * w).sin());
        }
    }
    FixtureClip {
        class,
        ordinal,
        carrier_hz,
        samples,
        segments,
    }
}

pub fn generate(params: &FixtureParams) -> Vec<FixtureClip> {
    InsectClass::ALL
        .into_iter()
        .flat_map(|class| (1..=params.clips_per_class).map(move |o| (class, o)))
        .map(|(class, o)| generate_clip(params, class, o))
        .collect()
}

/// Write the WAV files and `manifest.toml` into `dir`; returns the manifest path.
pub fn write_fixture(dir: &Path, params: &FixtureParams) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut clips = Vec::new();
    for clip in generate(params) {
        let name = clip.file_name();
        write_wav(&dir.join(&name), &clip.samples, params.sample_rate)?;
        clips.push(ClipEntry {
            path: name.into(),
            class: clip.class.code().to_string(),
            ordinal: clip.ordinal,
            segments: clip.segments,
        });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        clips,
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_toml()).map_err(io(&path))?;
    Ok(path)
}
