//! Turning annotated segments into fixed-length instances.
//!
//! A segment of `len` samples yields `ceil(len / window)` windows starting
//! at `0, window, 2 * window, ...`; when `len` is not a multiple of the
//! window the last one is pulled back to end exactly at `len`, overlapping
//! its predecessor. Segments shorter than one window are discarded.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::naming::{Augmentation, InstanceName};
use crate::{Error, Result};

/// The four insect classes of the reference dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InsectClass {
    C1,
    C2,
    C3,
    C4,
}

impl InsectClass {
    pub const ALL: [InsectClass; 4] = [InsectClass::C1, InsectClass::C2, InsectClass::C3, InsectClass::C4];

    pub fn code(self) -> &'static str {
        match self {
            InsectClass::C1 => "C1",
            InsectClass::C2 => "C2",
            InsectClass::C3 => "C3",
            InsectClass::C4 => "C4",
        }
    }

    pub fn common_name(self) -> &'static str {
        match self {
            InsectClass::C1 => "cricket",
            InsectClass::C2 => "cicada",
            InsectClass::C3 => "termite",
            InsectClass::C4 => "beetle",
        }
    }
}

impl fmt::Display for InsectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for InsectClass {
    type Err = Error;

    /// Accepts the code (`C1`) or the common name (`cricket`).
    fn from_str(s: &str) -> Result<Self> {
        InsectClass::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(s) || c.common_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown insect class {s:?}")))
    }
}

/// An annotated span of one sound within an original clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub clip_id: String,
    pub class_label: String,
    pub segment_number: u32,
    pub start_s: f64,
    pub end_s: f64,
}

impl SegmentSpan {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Checks `0 <= start < end` and, given a clip duration, `end <= duration`
    /// up to half a sample at `rate`.
    pub fn validate(&self, clip_duration_s: Option<f64>, rate: u32) -> Result<()> {
        if !(self.start_s.is_finite() && self.end_s.is_finite()) || self.start_s < 0.0 {
            return Err(Error::invalid(format!(
                "segment {} of {}: start must be a finite non-negative time",
                self.segment_number, self.clip_id
            )));
        }
        if self.end_s <= self.start_s {
            return Err(Error::invalid(format!(
                "segment {} of {}: end {} is not after start {}",
                self.segment_number, self.clip_id, self.end_s, self.start_s
            )));
        }
        if let Some(d) = clip_duration_s {
            if self.end_s > d + 0.5 / f64::from(rate.max(1)) {
                return Err(Error::invalid(format!(
                    "segment {} of {}: end {} s exceeds clip duration {} s",
                    self.segment_number, self.clip_id, self.end_s, d
                )));
            }
        }
        Ok(())
    }
}

/// One fixed-length window cut from a segment, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub samples: Vec<f64>,
    pub class_label: String,
    pub clip_id: String,
    /// Position of the source clip within its class, starting at 1.
    pub clip_ordinal: u32,
    pub segment_number: u32,
    pub window_number: u32,
    pub augmentation: Augmentation,
}

impl Instance {
    pub fn name(&self) -> InstanceName {
        InstanceName::new(self.clip_id.clone(), self.segment_number, self.window_number)
            .with_augmentation(self.augmentation)
    }
}

/// `ceil(w * rate)`, treating products within 1e-9 of an integer as exact.
pub fn duration_to_samples(w_seconds: f64, rate: u32) -> Result<usize> {
    if !(w_seconds > 0.0 && w_seconds.is_finite()) || rate == 0 {
        return Err(Error::invalid(format!(
            "window duration and rate must be positive (got {w_seconds} s, {rate} Hz)"
        )));
    }
    let x = w_seconds * f64::from(rate);
    let r = libm::round(x);
    let n = if libm::fabs(x - r) <= 1e-9 * x.max(1.0) {
        r
    } else {
        libm::ceil(x)
    };
    Ok(n as usize)
}

/// Start offsets of the windows cut from a segment of `len` samples.
pub fn window_starts(len: usize, window: usize) -> Vec<usize> {
    if window == 0 || len < window {
        return Vec::new();
    }
    let count = len.div_ceil(window);
    (0..count).map(|i| (i * window).min(len - window)).collect()
}

pub fn window_segment(samples: &[f64], window: usize) -> Result<Vec<&[f64]>> {
    if window == 0 {
        return Err(Error::invalid("window size must be positive"));
    }
    Ok(window_starts(samples.len(), window)
        .into_iter()
        .map(|s| &samples[s..s + window])
        .collect())
}

pub fn min_segment_duration(spans: &[SegmentSpan]) -> Result<f64> {
    spans
        .iter()
        .map(SegmentSpan::duration_s)
        .reduce(f64::min)
        .ok_or_else(|| Error::invalid("no segments"))
}

/// Result of cutting one clip into instances.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub instances: Vec<Instance>,
    /// Segment numbers shorter than one window.
    pub discarded: Vec<u32>,
}

/// Cut every span of `clip` into windows of `window` samples.
///
/// Span times are mapped to sample indices by rounding and clamped to the
/// clip. Window numbers start at 1 within each segment.
pub fn extract_instances(
    clip: &AudioClip,
    spans: &[SegmentSpan],
    clip_ordinal: u32,
    window: usize,
) -> Result<Extraction> {
    if window == 0 {
        return Err(Error::invalid("window size must be positive"));
    }
    let rate = f64::from(clip.sample_rate());
    let mut out = Extraction::default();
    for span in spans {
        span.validate(Some(clip.duration_s()), clip.sample_rate())?;
        let start = (libm::round(span.start_s * rate) as usize).min(clip.len());
        let end = (libm::round(span.end_s * rate) as usize).min(clip.len());
        let seg = &clip.samples()[start..end];
        let windows = window_segment(seg, window)?;
        if windows.is_empty() {
            log::debug!(
                "discarding segment {} of {}: {} samples < window {}",
                span.segment_number,
                span.clip_id,
                seg.len(),
                window
            );
            out.discarded.push(span.segment_number);
            continue;
        }
        for (i, w) in windows.into_iter().enumerate() {
            out.instances.push(Instance {
                samples: w.to_vec(),
                class_label: span.class_label.clone(),
                clip_id: span.clip_id.clone(),
                clip_ordinal,
                segment_number: span.segment_number,
                window_number: i as u32 + 1,
                augmentation: Augmentation::None,
            });
        }
    }
    Ok(out)
}

/// Box-plot summary of segment durations for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub count: usize,
    pub min_s: f64,
    pub q1_s: f64,
    pub median_s: f64,
    pub q3_s: f64,
    pub max_s: f64,
    pub outliers: Vec<f64>,
}

/// Quantile by linear interpolation between order statistics of a sorted
/// slice (position `p * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Per-class duration statistics; classes without spans do not appear.
pub fn duration_stats(spans: &[SegmentSpan]) -> BTreeMap<String, DurationStats> {
    let mut by_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in spans {
        by_class.entry(s.class_label.clone()).or_default().push(s.duration_s());
    }
    by_class
        .into_iter()
        .map(|(class, mut d)| {
            d.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&d, 0.25);
            let q3 = quantile_sorted(&d, 0.75);
            let iqr = q3 - q1;
            let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
            let stats = DurationStats {
                count: d.len(),
                min_s: d[0],
                q1_s: q1,
                median_s: quantile_sorted(&d, 0.5),
                q3_s: q3,
                max_s: d[d.len() - 1],
                outliers: d.iter().copied().filter(|&v| v < lo || v > hi).collect(),
            };
            (class, stats)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn span(class: &str, seg: u32, start: f64, end: f64) -> SegmentSpan {
        SegmentSpan {
            clip_id: "clip".to_string(),
            class_label: class.to_string(),
            segment_number: seg,
            start_s: start,
            end_s: end,
        }
    }

    #[test]
    fn duration_to_samples_examples() {
        assert_eq!(duration_to_samples(0.0288, 22_050).unwrap(), 636);
        assert_eq!(duration_to_samples(0.1, 22_050).unwrap(), 2205);
        assert_eq!(duration_to_samples(0.1, 1000).unwrap(), 100);
        assert!(duration_to_samples(0.0, 1000).is_err());
        assert!(duration_to_samples(0.1, 0).is_err());
    }

    #[test]
    fn window_examples() {
        // Brute-force the rule: step by window, pull the last one back.
        let mut expected = Vec::new();
        let mut s = 0;
        while s < 250 {
            expected.push(if s + 100 > 250 { 150 } else { s });
            s += 100;
        }
        assert_eq!(expected, vec![0, 100, 150]);
        assert_eq!(window_starts(250, 100), expected);
        assert_eq!(window_starts(200, 100), vec![0, 100]);
        assert!(window_starts(80, 100).is_empty());
        assert!(window_segment(&[0.0; 10], 0).is_err());
    }

    #[test]
    fn short_segments_are_discarded() {
        let clip = AudioClip::new(vec![0.1; 1000], 1000, "clip").unwrap();
        let spans = [span("C1", 1, 0.0, 0.08), span("C1", 2, 0.1, 0.35)];
        let ex = extract_instances(&clip, &spans, 1, 100).unwrap();
        assert_eq!(ex.discarded, vec![1]);
        assert_eq!(ex.instances.len(), 3);
        assert!(ex.instances.iter().all(|i| i.samples.len() == 100));
        let nums: Vec<u32> = ex.instances.iter().map(|i| i.window_number).collect();
        assert_eq!(nums, vec![1, 2, 3]);
    }

    #[test]
    fn span_beyond_clip_is_rejected() {
        let clip = AudioClip::new(vec![0.1; 1000], 1000, "clip").unwrap();
        assert!(extract_instances(&clip, &[span("C1", 1, 0.5, 1.5)], 1, 100).is_err());
        assert!(extract_instances(&clip, &[span("C1", 1, 0.5, 0.5)], 1, 100).is_err());
    }

    #[test]
    fn min_duration() {
        let spans = [span("C1", 1, 0.0, 0.0288), span("C2", 1, 0.0, 0.1), span("C3", 1, 1.0, 4.0)];
        assert!((min_segment_duration(&spans).unwrap() - 0.0288).abs() < 1e-15);
        assert_eq!(min_segment_duration(&[span("C1", 1, 0.0, 1.0)]).unwrap(), 1.0);
        assert_eq!(
            min_segment_duration(&[span("C1", 1, 0.0, 0.5), span("C1", 2, 1.0, 1.5)]).unwrap(),
            0.5
        );
        assert!(min_segment_duration(&[]).is_err());
    }

    #[test]
    fn stats_symmetric_set() {
        let spans: Vec<_> = (1..=5).map(|d| span("C1", d, 0.0, f64::from(d))).collect();
        let s = &duration_stats(&spans)["C1"];
        assert_eq!((s.q1_s, s.median_s, s.q3_s), (2.0, 3.0, 4.0));
        assert!(s.outliers.is_empty());
        assert_eq!(s.count, 5);
    }

    #[test]
    fn stats_flag_outlier() {
        let spans: Vec<_> = [1.0, 1.0, 1.0, 1.0, 100.0]
            .iter()
            .enumerate()
            .map(|(i, &d)| span("C2", i as u32, 0.0, d))
            .collect();
        let stats = duration_stats(&spans);
        assert_eq!(stats.len(), 1);
        assert_eq!(stats["C2"].outliers, vec![100.0]);
    }

    #[test]
    fn class_codes() {
        assert_eq!("cricket".parse::<InsectClass>().unwrap(), InsectClass::C1);
        assert_eq!("C4".parse::<InsectClass>().unwrap().common_name(), "beetle");
        assert_eq!(InsectClass::C2.common_name(), "cicada");
        assert_eq!(InsectClass::C3.common_name(), "termite");
        assert!("C5".parse::<InsectClass>().is_err());
    }

    proptest! {
        #[test]
        fn window_law(len in 0usize..5000, window in 1usize..700) {
            let starts = window_starts(len, window);
            if len < window {
                prop_assert!(starts.is_empty());
            } else {
                prop_assert_eq!(starts.len(), len.div_ceil(window));
                prop_assert_eq!(*starts.last().unwrap() + window, len);
                // Coverage of [0, len).
                let mut covered = vec![false; len];
                for s in &starts {
                    for c in &mut covered[*s..*s + window] { *c = true; }
                }
                prop_assert!(covered.iter().all(|&c| c));
            }
        }

        #[test]
        fn stats_are_ordered(ds in prop::collection::vec(0.001f64..20.0, 1..40)) {
            let spans: Vec<_> = ds.iter().enumerate().map(|(i, &d)| span("C3", i as u32, 0.0, d)).collect();
            let s = &duration_stats(&spans)["C3"];
            prop_assert!(s.min_s <= s.q1_s && s.q1_s <= s.median_s && s.median_s <= s.q3_s && s.q3_s <= s.max_s);
            prop_assert_eq!(s.count, ds.len());
        }
    }
}
