//! MFCC front end: centered reflect-padded Hann frames, power spectrum,
//! HTK-scale triangular mel filters, natural log with a floor and an
//! orthonormal DCT-II.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fft::{hann, real_spectrum, reflect_pad, Fft};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Per-coefficient mean over frames; width `n_mfcc`.
    Mean,
    /// Frame-major concatenation; width `n_mfcc * frames`.
    #[default]
    Flatten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub n_mfcc: usize,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f64,
    /// Defaults to half the sample rate.
    pub fmax: Option<f64>,
    pub log_floor: f64,
    pub aggregation: Aggregation,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_mfcc: 40,
            n_fft: 1024,
            hop: 512,
            n_mels: 64,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
            aggregation: Aggregation::Flatten,
        }
    }
}

impl MfccConfig {
    pub fn fmax_for(&self, rate: u32) -> f64 {
        self.fmax.unwrap_or(f64::from(rate) / 2.0)
    }

    pub fn validate(&self, rate: u32) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::Features(m));
        if rate == 0 {
            return bad("sample rate must be positive".into());
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad(format!("need 1 <= n_mfcc <= n_mels, got {} and {}", self.n_mfcc, self.n_mels));
        }
        if self.hop == 0 || self.n_fft < self.hop || self.n_fft < 2 {
            return bad(format!("need 0 < hop <= n_fft, got hop {} and n_fft {}", self.hop, self.n_fft));
        }
        let fmax = self.fmax_for(rate);
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= f64::from(rate) / 2.0) {
            return bad(format!("need 0 <= fmin < fmax <= rate/2, got {} and {}", self.fmin, fmax));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad("log floor must be positive".into());
        }
        Ok(())
    }

    /// Frames produced for an input of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        1 + len / self.hop
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Triangular filters, `n_mels` rows by `n_fft / 2 + 1` bins, peak 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_bins: usize,
    weights: Vec<f64>,
    /// Non-zero bin range per filter.
    support: Vec<(usize, usize)>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(config: &MfccConfig, rate: u32) -> Result<Self> {
        config.validate(rate)?;
        let n_bins = config.n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(config.fmin), hz_to_mel(config.fmax_for(rate)));
        let edges: Vec<f64> = (0..config.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (config.n_mels + 1) as f64))
            .collect();
        let bin_hz = f64::from(rate) / config.n_fft as f64;
        let mut weights = vec![0.0; config.n_mels * n_bins];
        let mut support = Vec::with_capacity(config.n_mels);
        for m in 0..config.n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            let mut first = None;
            let mut last = 0;
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let up = (f - left) / (center - left);
                let down = (right - f) / (right - center);
                *w = up.min(down).max(0.0);
                if *w > 0.0 {
                    first.get_or_insert(k);
                    last = k;
                }
            }
            match first {
                Some(f) => support.push((f, last + 1)),
                None => {
                    return Err(Error::Features(format!(
                        "mel filter {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; reduce n_mels or raise n_fft"
                    )))
                }
            }
        }
        Ok(MelFilterbank {
            n_bins,
            weights,
            support,
            centers_hz: edges[1..=config.n_mels].to_vec(),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.support.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            let (a, b) = self.support[m];
            let row = self.row(m);
            *o = (a..b).map(|k| row[k] * power[k]).sum();
        }
    }
}

pub fn mel_filterbank(config: &MfccConfig, rate: u32) -> Result<MelFilterbank> {
    MelFilterbank::new(config, rate)
}

/// Coefficients by frame: `get(c, t)` is coefficient `c` of frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    n_coeffs: usize,
    n_frames: usize,
    /// Frame-major.
    data: Vec<f64>,
}

impl MfccMatrix {
    pub fn from_frames(n_coeffs: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        if n_coeffs == 0 || frames.is_empty() || frames.iter().any(|f| f.len() != n_coeffs) {
            return Err(Error::Features("coefficient matrix must be non-empty and rectangular".into()));
        }
        let n_frames = frames.len();
        Ok(MfccMatrix {
            n_coeffs,
            n_frames,
            data: frames.concat(),
        })
    }

    pub fn n_coeffs(&self) -> usize {
        self.n_coeffs
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn get(&self, coeff: usize, frame: usize) -> f64 {
        self.data[frame * self.n_coeffs + coeff]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_coeffs..(t + 1) * self.n_coeffs]
    }

    pub fn aggregate(&self, mode: Aggregation) -> Vec<f64> {
        match mode {
            Aggregation::Flatten => self.data.clone(),
            Aggregation::Mean => (0..self.n_coeffs)
                .map(|c| (0..self.n_frames).map(|t| self.get(c, t)).sum::<f64>() / self.n_frames as f64)
                .collect(),
        }
    }
}

pub fn aggregate(matrix: &MfccMatrix, mode: Aggregation) -> Vec<f64> {
    matrix.aggregate(mode)
}

/// Planned MFCC computation for one configuration and sample rate.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    config: MfccConfig,
    fft: Fft,
    window: Vec<f64>,
    filters: MelFilterbank,
    /// `n_mfcc` rows of `n_mels` orthonormal DCT-II weights.
    dct: Vec<f64>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig, rate: u32) -> Result<Self> {
        let filters = MelFilterbank::new(&config, rate)?;
        let n = config.n_mels;
        let mut dct = Vec::with_capacity(config.n_mfcc * n);
        for k in 0..config.n_mfcc {
            let scale = if k == 0 { libm::sqrt(1.0 / n as f64) } else { libm::sqrt(2.0 / n as f64) };
            for m in 0..n {
                dct.push(scale * libm::cos(PI * k as f64 * (2 * m + 1) as f64 / (2 * n) as f64));
            }
        }
        Ok(MfccExtractor {
            fft: Fft::new(config.n_fft),
            window: hann(config.n_fft),
            filters,
            dct,
            config,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn compute(&self, samples: &[f64]) -> Result<MfccMatrix> {
        if samples.is_empty() {
            return Err(Error::Features("MFCC input is empty".into()));
        }
        let cfg = &self.config;
        let padded = reflect_pad(samples, cfg.n_fft / 2);
        let n_frames = cfg.frame_count(samples.len());
        let mut mel = vec![0.0; cfg.n_mels];
        let mut frame = vec![0.0; cfg.n_fft];
        let mut out = Vec::with_capacity(n_frames * cfg.n_mfcc);
        for t in 0..n_frames {
            let start = t * cfg.hop;
            for (i, f) in frame.iter_mut().enumerate() {
                *f = padded[start + i] * self.window[i];
            }
            let power: Vec<f64> = real_spectrum(&self.fft, &frame).iter().map(|c| c.norm_sqr()).collect();
            self.filters.apply(&power, &mut mel);
            for e in mel.iter_mut() {
                *e = libm::log(e.max(cfg.log_floor));
            }
            for k in 0..cfg.n_mfcc {
                let row = &self.dct[k * cfg.n_mels..(k + 1) * cfg.n_mels];
                out.push(row.iter().zip(&mel).map(|(w, e)| w * e).sum());
            }
        }
        Ok(MfccMatrix {
            n_coeffs: cfg.n_mfcc,
            n_frames,
            data: out,
        })
    }
}

pub fn mfcc(samples: &[f64], config: &MfccConfig, rate: u32) -> Result<MfccMatrix> {
    MfccExtractor::new(config.clone(), rate)?.compute(samples)
}
