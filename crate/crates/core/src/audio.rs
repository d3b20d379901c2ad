//! In-memory audio: the mono clip type, rate conversion and padding.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Working sample rate applied on ingestion.
pub const DEFAULT_SAMPLE_RATE: u32 = 22_050;

/// A decoded mono recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    /// Builds a clip, rejecting empty or non-finite audio and a zero rate.
    /// Amplitudes are clamped to `[-1, 1]`.
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::invalid("audio clip has no samples"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(alloc::format!("non-finite sample at index {i}")));
        }
        let samples = samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
        Ok(AudioClip {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// 16-bit PCM to amplitude; `-32768` maps to exactly `-1.0`.
pub fn pcm16_to_amplitude(v: i16) -> f64 {
    f64::from(v) / 32768.0
}

/// Amplitude to 16-bit PCM with rounding and saturation.
pub fn amplitude_to_pcm16(v: f64) -> i16 {
    let scaled = libm::round(v * 32768.0);
    scaled.clamp(-32768.0, 32767.0) as i16
}

/// Average interleaved frames of `channels` channels down to mono.
pub fn mixdown(interleaved: &[f64], channels: usize) -> Result<Vec<f64>> {
    match channels {
        1 => Ok(interleaved.to_vec()),
        2 => Ok(interleaved
            .chunks_exact(2)
            .map(|lr| (lr[0] + lr[1]) / 2.0)
            .collect()),
        n => Err(Error::invalid(alloc::format!(
            "unsupported channel count {n}"
        ))),
    }
}

/// Linear-interpolation resampling.
///
/// Output length is `round(len * target / source)`; output sample `i` reads
/// the input at position `i * source / target`. Positions past the last
/// sample interpolate towards zero.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::invalid("target rate must be positive"));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let ratio = f64::from(clip.sample_rate) / f64::from(target_rate);
    let out_len = libm::round(clip.len() as f64 / ratio) as usize;
    let samples = interpolate(clip.samples(), ratio, out_len.max(1));
    AudioClip::new(samples, target_rate, clip.source_id.clone())
}

/// Read `x` at positions `i * step` for `i in 0..out_len` by linear
/// interpolation, treating the signal as zero beyond its end.
pub fn interpolate(x: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    let at = |i: usize| x.get(i).copied().unwrap_or(0.0);
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let base = libm::floor(pos);
            let frac = pos - base;
            let j = base as usize;
            if frac == 0.0 {
                at(j)
            } else {
                at(j) * (1.0 - frac) + at(j + 1) * frac
            }
        })
        .collect()
}

/// Zero-pad to exactly `n` samples. Shortening is an error.
pub fn pad_to_length(clip: &AudioClip, n: usize) -> Result<AudioClip> {
    let samples = pad_samples(clip.samples(), n)?;
    Ok(AudioClip {
        samples,
        sample_rate: clip.sample_rate,
        source_id: clip.source_id.clone(),
    })
}

pub fn pad_samples(x: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < x.len() {
        return Err(Error::invalid(alloc::format!(
            "cannot pad {} samples to shorter length {n}",
            x.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(x);
    out.resize(n, 0.0);
    Ok(out)
}

/// Zero-pad or trim the tail so the result has exactly `n` samples.
pub fn fit_length(mut x: Vec<f64>, n: usize) -> Vec<f64> {
    x.resize(n, 0.0);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn tone(freq: f64, rate: u32, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 0.5 * libm::sin(2.0 * core::f64::consts::PI * freq * i as f64 / f64::from(rate)))
            .collect()
    }

    fn dominant_bin_hz(x: &[f64], rate: u32, max_hz: f64) -> f64 {
        // Direct DFT, independent of the crate FFT.
        let n = x.len();
        let max_bin = ((max_hz * n as f64 / f64::from(rate)) as usize).min(n / 2);
        let mut best = (0usize, -1.0f64);
        for k in 1..=max_bin {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let a = -2.0 * core::f64::consts::PI * (k * j % n) as f64 / n as f64;
                re += v * libm::cos(a);
                im += v * libm::sin(a);
            }
            let p = re * re + im * im;
            if p > best.1 {
                best = (k, p);
            }
        }
        best.0 as f64 * f64::from(rate) / n as f64
    }

    #[test]
    fn pcm16_extremes() {
        assert_eq!(pcm16_to_amplitude(-32768), -1.0);
        assert_eq!(pcm16_to_amplitude(0), 0.0);
        assert_eq!(amplitude_to_pcm16(-1.0), -32768);
        assert_eq!(amplitude_to_pcm16(1.0), 32767);
    }

    #[test]
    fn stereo_mixdown_of_identical_channels_is_exact() {
        let ch = [0.25, -0.5, 0.125];
        let inter: Vec<f64> = ch.iter().flat_map(|&v| [v, v]).collect();
        assert_eq!(mixdown(&inter, 2).unwrap(), ch.to_vec());
        assert!(mixdown(&inter, 3).is_err());
    }

    #[test]
    fn resample_halves_length() {
        let clip = AudioClip::new(vec![0.1; 44_100], 44_100, "a").unwrap();
        let out = resample(&clip, 22_050).unwrap();
        assert_eq!(out.len(), 22_050);
        assert_eq!(out.sample_rate(), 22_050);
    }

    #[test]
    fn resample_identity() {
        let clip = AudioClip::new(tone(440.0, 22_050, 1000), 22_050, "a").unwrap();
        assert_eq!(resample(&clip, 22_050).unwrap(), clip);
        assert!(resample(&clip, 0).is_err());
    }

    #[test]
    fn resampled_tone_keeps_dominant_frequency() {
        let clip = AudioClip::new(tone(440.0, 44_100, 4410), 44_100, "a").unwrap();
        let out = resample(&clip, 22_050).unwrap();
        let bin = 22_050.0 / out.len() as f64;
        let f = dominant_bin_hz(out.samples(), 22_050, 2000.0);
        assert!((f - 440.0).abs() <= bin, "dominant {f}");
    }

    #[test]
    fn pad_to_length_rules() {
        let clip = AudioClip::new(vec![0.3; 500], 22_050, "a").unwrap();
        let p = pad_to_length(&clip, 636).unwrap();
        assert_eq!(p.len(), 636);
        assert!(p.samples()[..500].iter().all(|&v| v == 0.3));
        assert!(p.samples()[500..].iter().all(|&v| v == 0.0));
        assert_eq!(pad_to_length(&clip, 500).unwrap(), clip);
        assert!(pad_to_length(&clip, 499).is_err());
    }

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(vec![], 100, "x").is_err());
        assert!(AudioClip::new(vec![0.0], 0, "x").is_err());
        assert!(AudioClip::new(vec![f64::NAN], 10, "x").is_err());
        assert_eq!(AudioClip::new(vec![0.0; 4], 10, "x").unwrap().samples(), &[0.0; 4]);
    }

    proptest! {
        // Linear interpolation attenuates by about (1 - cos theta) / 3 per
        // pass at fractional positions; tones below an eighth of the lower
        // Nyquist stay within 5 % over two passes.
        #[test]
        fn resample_round_trip_preserves_energy(
            rates in prop::sample::select(vec![(22_050u32, 44_100u32), (44_100, 22_050), (22_050, 16_000), (16_000, 22_050), (8_000, 11_025)]),
            frac in 0.01f64..0.12,
        ) {
            let (r0, r1) = rates;
            let nyq_low = f64::from(r0.min(r1)) / 2.0;
            let f = frac * nyq_low;
            let x = tone(f, r0, 4096);
            let clip = AudioClip::new(x.clone(), r0, "t").unwrap();
            let back = resample(&resample(&clip, r1).unwrap(), r0).unwrap();
            // Compare away from the tail, where interpolation runs into zero.
            let m = back.len().min(x.len()) - 16;
            let e0: f64 = x[..m].iter().map(|v| v * v).sum();
            let e1: f64 = back.samples()[..m].iter().map(|v| v * v).sum();
            prop_assert!((e1 / e0 - 1.0).abs() < 0.05, "ratio {}", e1 / e0);
        }

        #[test]
        fn pad_keeps_prefix(len in 1usize..300, extra in 0usize..300) {
            let x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.01).sin() * 0.5).collect();
            let clip = AudioClip::new(x.clone(), 1000, "p").unwrap();
            let p = pad_to_length(&clip, len + extra).unwrap();
            prop_assert_eq!(&p.samples()[..len], &x[..]);
            prop_assert_eq!(p.len(), len + extra);
        }
    }
}
