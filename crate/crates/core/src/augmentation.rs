//! Pitch-shift and time-stretch expansion of training instances.
//!
//! Time stretching is a phase vocoder (Hann window of 1024 samples, hop 256)
//! over a centered STFT. Pitch shifting stretches by `2^(s/12)` and reads the
//! result back at the original rate by linear interpolation, so the output
//! length equals the input length.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::audio::{fit_length, interpolate};
use crate::fft::{hann, reflect_pad, Complex, Fft};
use crate::naming::Augmentation;
use crate::segmentation::Instance;
use crate::{Error, Result};

pub const VOCODER_WINDOW: usize = 1024;
pub const VOCODER_HOP: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pitch_semitones: Vec<f64>,
    stretch_rates: Vec<f64>,
    include_original: bool,
}

impl AugmentationSpec {
    pub fn new(pitch_semitones: Vec<f64>, stretch_rates: Vec<f64>, include_original: bool) -> Result<Self> {
        if let Some(s) = pitch_semitones.iter().find(|s| !s.is_finite() || **s == 0.0) {
            return Err(Error::Augmentation(format!("invalid pitch offset {s}")));
        }
        if let Some(r) = stretch_rates
            .iter()
            .find(|r| !r.is_finite() || **r <= 0.0 || **r == 1.0)
        {
            return Err(Error::Augmentation(format!("invalid stretch rate {r}")));
        }
        Ok(AugmentationSpec {
            pitch_semitones,
            stretch_rates,
            include_original,
        })
    }

    pub fn pitch_semitones(&self) -> &[f64] {
        &self.pitch_semitones
    }

    pub fn stretch_rates(&self) -> &[f64] {
        &self.stretch_rates
    }

    pub fn include_original(&self) -> bool {
        self.include_original
    }

    /// Number of instances produced per input instance.
    pub fn expansion_factor(&self) -> usize {
        usize::from(self.include_original) + self.pitch_semitones.len() + self.stretch_rates.len()
    }
}

/// Pitch -3.5..=3.5 in half-semitone steps and speeds 0.25..=2.0 in quarter
/// steps, originals excluded: 1 + 14 + 7 = 22.
pub fn preset_wide() -> AugmentationSpec {
    let pitch = (-7..=7).filter(|&i| i != 0).map(|i| f64::from(i) * 0.5).collect();
    let rates = (1..=8).filter(|&i| i != 4).map(|i| f64::from(i) * 0.25).collect();
    AugmentationSpec::new(pitch, rates, true).expect("preset is valid")
}

/// Pitch {-2, -1, 1, 2} and speeds {0.5, 2.0}: 1 + 4 + 2 = 7.
pub fn preset_narrow() -> AugmentationSpec {
    AugmentationSpec::new(vec![-2.0, -1.0, 1.0, 2.0], vec![0.5, 2.0], true).expect("preset is valid")
}

fn stft(x: &[f64], fft: &Fft, window: &[f64], hop: usize) -> Vec<Vec<Complex>> {
    let n_fft = fft.len();
    let padded = reflect_pad(x, n_fft / 2);
    let n_frames = 1 + (padded.len() - n_fft) / hop;
    (0..n_frames)
        .map(|f| {
            let mut buf: Vec<Complex> = padded[f * hop..f * hop + n_fft]
                .iter()
                .zip(window)
                .map(|(s, w)| Complex::new(s * w, 0.0))
                .collect();
            fft.forward(&mut buf);
            buf.truncate(n_fft / 2 + 1);
            buf
        })
        .collect()
}

fn istft(frames: &[Vec<Complex>], fft: &Fft, window: &[f64], hop: usize, length: usize) -> Vec<f64> {
    let n_fft = fft.len();
    let full = n_fft + hop * frames.len().saturating_sub(1);
    let mut y = vec![0.0; full];
    let mut wss = vec![0.0; full];
    let mut buf = vec![Complex::ZERO; n_fft];
    for (f, frame) in frames.iter().enumerate() {
        buf[..frame.len()].copy_from_slice(frame);
        for k in 1..n_fft - frame.len() + 1 {
            let c = frame[k];
            buf[n_fft - k] = Complex::new(c.re, -c.im);
        }
        fft.inverse(&mut buf);
        let off = f * hop;
        for i in 0..n_fft {
            y[off + i] += buf[i].re / n_fft as f64 * window[i];
            wss[off + i] += window[i] * window[i];
        }
    }
    for (v, w) in y.iter_mut().zip(&wss) {
        if *w > 1e-10 {
            *v /= *w;
        }
    }
    let start = n_fft / 2;
    let mut out: Vec<f64> = y.into_iter().skip(start).take(length).collect();
    out.resize(length, 0.0);
    out
}

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * libm::round(p / (2.0 * PI))
}

/// Change duration by `1 / rate` keeping pitch. Output has exactly
/// `round(len / rate)` samples (at least one).
pub fn time_stretch(samples: &[f64], rate: f64) -> Result<Vec<f64>> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Augmentation(format!("stretch rate must be positive, got {rate}")));
    }
    if samples.is_empty() {
        return Err(Error::Augmentation("cannot stretch empty audio".into()));
    }
    if rate == 1.0 {
        return Ok(samples.to_vec());
    }
    let fft = Fft::new(VOCODER_WINDOW);
    let window = hann(VOCODER_WINDOW);
    let spec = stft(samples, &fft, &window, VOCODER_HOP);
    let n_frames = spec.len();
    let n_bins = VOCODER_WINDOW / 2 + 1;
    let advance: Vec<f64> = (0..n_bins)
        .map(|k| 2.0 * PI * k as f64 * VOCODER_HOP as f64 / VOCODER_WINDOW as f64)
        .collect();
    let zero = vec![Complex::ZERO; n_bins];
    let mut phase: Vec<f64> = spec[0].iter().map(|c| c.arg()).collect();
    let mut out = Vec::new();
    let mut step = 0usize;
    loop {
        let t = step as f64 * rate;
        if t >= n_frames as f64 {
            break;
        }
        let i = libm::floor(t) as usize;
        let alpha = t - i as f64;
        let a = &spec[i];
        let b = spec.get(i + 1).unwrap_or(&zero);
        let frame: Vec<Complex> = (0..n_bins)
            .map(|k| {
                let mag = (1.0 - alpha) * a[k].norm() + alpha * b[k].norm();
                Complex::from_polar(mag, phase[k])
            })
            .collect();
        for k in 0..n_bins {
            let dphi = wrap_phase(b[k].arg() - a[k].arg() - advance[k]);
            phase[k] += advance[k] + dphi;
        }
        out.push(frame);
        step += 1;
    }
    let length = (libm::round(samples.len() as f64 / rate) as usize).max(1);
    Ok(istft(&out, &fft, &window, VOCODER_HOP, length))
}

/// Shift pitch by `semitones` keeping the length.
pub fn pitch_shift(samples: &[f64], semitones: f64) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Augmentation("cannot pitch-shift empty audio".into()));
    }
    if !semitones.is_finite() {
        return Err(Error::Augmentation(format!("invalid semitone offset {semitones}")));
    }
    if semitones == 0.0 {
        return Ok(samples.to_vec());
    }
    let factor = libm::exp2(semitones / 12.0);
    let stretched = time_stretch(samples, 1.0 / factor)?;
    Ok(interpolate(&stretched, factor, samples.len()))
}

/// Expand one unaugmented instance into `spec.expansion_factor()` instances
/// of the same length: the original (if included), then the pitch variants,
/// then the stretch variants.
pub fn augment(instance: &Instance, spec: &AugmentationSpec) -> Result<Vec<Instance>> {
    if !instance.augmentation.is_none() {
        return Err(Error::Augmentation(format!(
            "instance {}#{}#{} is already augmented",
            instance.clip_id, instance.segment_number, instance.window_number
        )));
    }
    let n = instance.samples.len();
    let derived = |samples: Vec<f64>, augmentation: Augmentation| Instance {
        samples: fit_length(samples, n),
        augmentation,
        ..instance.clone()
    };
    let mut out = Vec::with_capacity(spec.expansion_factor());
    if spec.include_original {
        out.push(instance.clone());
    }
    for &s in &spec.pitch_semitones {
        out.push(derived(pitch_shift(&instance.samples, s)?, Augmentation::Pitch(Some(s))));
    }
    for &r in &spec.stretch_rates {
        out.push(derived(time_stretch(&instance.samples, r)?, Augmentation::Stretch(Some(r))));
    }
    Ok(out)
}

/// Augment every instance in order.
pub fn augment_all(instances: &[Instance], spec: &AugmentationSpec) -> Result<Vec<Instance>> {
    let mut out = Vec::with_capacity(instances.len() * spec.expansion_factor());
    for inst in instances {
        out.extend(augment(inst, spec)?);
    }
    Ok(out)
}
