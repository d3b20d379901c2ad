//! Instance filename grammar.
//!
//! `{original}#{segment}#{window}#{augmentation}#1.wav`, where the
//! augmentation field is omitted for unaugmented instances and otherwise is
//! `P<semitones>` or `T<rate>`. A bare `P` or `T` parses with an unknown
//! parameter.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How an instance was derived from its source window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Augmentation {
    #[default]
    None,
    /// Pitch shift by a signed number of semitones.
    Pitch(Option<f64>),
    /// Time stretch by a speed ratio.
    Stretch(Option<f64>),
}

impl Augmentation {
    pub fn is_none(&self) -> bool {
        matches!(self, Augmentation::None)
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Augmentation::None => Ok(()),
            Augmentation::Pitch(None) => f.write_str("P"),
            Augmentation::Pitch(Some(s)) => write!(f, "P{s}"),
            Augmentation::Stretch(None) => f.write_str("T"),
            Augmentation::Stretch(Some(r)) => write!(f, "T{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceName {
    pub original_file: String,
    pub segment_number: u32,
    pub window_number: u32,
    pub augmentation: Augmentation,
}

impl InstanceName {
    pub fn new(original_file: impl Into<String>, segment_number: u32, window_number: u32) -> Self {
        InstanceName {
            original_file: original_file.into(),
            segment_number,
            window_number,
            augmentation: Augmentation::None,
        }
    }

    pub fn with_augmentation(mut self, augmentation: Augmentation) -> Self {
        self.augmentation = augmentation;
        self
    }
}

pub fn format_instance_name(name: &InstanceName) -> Result<String> {
    let bad = |reason: &str| Error::InstanceName {
        name: name.original_file.clone(),
        reason: reason.to_string(),
    };
    if name.original_file.is_empty() {
        return Err(bad("empty original file name"));
    }
    if name.original_file.contains('#') {
        return Err(bad("original file name contains '#'"));
    }
    match name.augmentation {
        Augmentation::Pitch(Some(v)) | Augmentation::Stretch(Some(v)) if !v.is_finite() => {
            return Err(bad("non-finite augmentation parameter"));
        }
        Augmentation::Stretch(Some(r)) if r <= 0.0 => {
            return Err(bad("stretch rate must be positive"));
        }
        _ => {}
    }
    Ok(match name.augmentation {
        Augmentation::None => format!(
            "{}#{}#{}#1.wav",
            name.original_file, name.segment_number, name.window_number
        ),
        aug => format!(
            "{}#{}#{}#{}#1.wav",
            name.original_file, name.segment_number, name.window_number, aug
        ),
    })
}

pub fn parse_instance_name(text: &str) -> Result<InstanceName> {
    let bad = |reason: String| Error::InstanceName {
        name: text.to_string(),
        reason,
    };
    let stem = text
        .strip_suffix(".wav")
        .ok_or_else(|| bad("missing .wav extension".into()))?;
    let fields: alloc::vec::Vec<&str> = stem.split('#').collect();
    let (original, seg, win, aug, tail) = match fields.as_slice() {
        [o, s, w, t] => (*o, *s, *w, None, *t),
        [o, s, w, a, t] => (*o, *s, *w, Some(*a), *t),
        _ => return Err(bad(format!("expected 4 or 5 fields, found {}", fields.len()))),
    };
    if original.is_empty() {
        return Err(bad("empty original file name".into()));
    }
    if tail != "1" {
        return Err(bad(format!("trailing field must be 1, found {tail:?}")));
    }
    let number = |f: &str, what: &str| -> Result<u32> {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad(format!("non-numeric {what} {f:?}")));
        }
        u32::from_str(f).map_err(|_| bad(format!("{what} out of range")))
    };
    let segment_number = number(seg, "segment number")?;
    let window_number = number(win, "window number")?;
    let augmentation = match aug {
        None => Augmentation::None,
        Some(a) => parse_augmentation(a).map_err(bad)?,
    };
    Ok(InstanceName {
        original_file: original.to_string(),
        segment_number,
        window_number,
        augmentation,
    })
}

fn parse_augmentation(field: &str) -> core::result::Result<Augmentation, String> {
    let mut chars = field.chars();
    let letter = chars.next().ok_or_else(|| "empty augmentation field".to_string())?;
    let rest = chars.as_str();
    let param = if rest.is_empty() {
        None
    } else {
        let v = f64::from_str(rest).map_err(|_| format!("bad augmentation parameter {rest:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite augmentation parameter {rest:?}"));
        }
        Some(v)
    };
    match letter {
        'P' => Ok(Augmentation::Pitch(param)),
        'T' => match param {
            Some(r) if r <= 0.0 => Err(format!("stretch rate must be positive, found {r}")),
            _ => Ok(Augmentation::Stretch(param)),
        },
        other => Err(format!("unknown augmentation type {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_pitch_shift() {
        let n = InstanceName::new("clipA", 3, 12).with_augmentation(Augmentation::Pitch(Some(-2.0)));
        assert_eq!(format_instance_name(&n).unwrap(), "clipA#3#12#P-2#1.wav");
        let t = InstanceName::new("clipA", 3, 12).with_augmentation(Augmentation::Stretch(Some(0.5)));
        assert_eq!(format_instance_name(&t).unwrap(), "clipA#3#12#T0.5#1.wav");
    }

    #[test]
    fn parses_unaugmented_form() {
        assert_eq!(
            parse_instance_name("clipA#3#12#1.wav").unwrap(),
            InstanceName::new("clipA", 3, 12)
        );
        assert_eq!(
            format_instance_name(&InstanceName::new("clipA", 3, 12)).unwrap(),
            "clipA#3#12#1.wav"
        );
    }

    #[test]
    fn bare_letters_parse_with_unknown_parameter() {
        let n = parse_instance_name("x#0#0#P#1.wav").unwrap();
        assert_eq!(n.augmentation, Augmentation::Pitch(None));
        let n = parse_instance_name("x#0#0#T#1.wav").unwrap();
        assert_eq!(n.augmentation, Augmentation::Stretch(None));
    }

    #[test]
    fn rejects_malformed_names() {
        for bad in [
            "clipA#3#12#Q#1.wav",
            "clipA#3#12#1",
            "clipA#3#1.wav",
            "clipA#3#12#P#2#1.wav",
            "clipA#x#12#1.wav",
            "clipA#3#-1#1.wav",
            "clipA#3#12#2.wav",
            "#3#12#1.wav",
            "clipA#3#12#T-1#1.wav",
            "clipA#3#12#Pinf#1.wav",
        ] {
            assert!(parse_instance_name(bad).is_err(), "{bad} should fail");
        }
        assert!(format_instance_name(&InstanceName::new("a#b", 1, 1)).is_err());
    }

    fn arb_name() -> impl Strategy<Value = InstanceName> {
        let aug = prop_oneof![
            Just(Augmentation::None),
            Just(Augmentation::Pitch(None)),
            Just(Augmentation::Stretch(None)),
            (-48.0f64..48.0).prop_map(|s| Augmentation::Pitch(Some(s))),
            (-12i32..=12).prop_map(|s| Augmentation::Pitch(Some(f64::from(s) / 2.0))),
            (1e-6f64..16.0).prop_map(|r| Augmentation::Stretch(Some(r))),
        ];
        ("[A-Za-z0-9_.-]{1,24}", any::<u32>(), any::<u32>(), aug).prop_map(|(o, s, w, a)| {
            InstanceName::new(o, s, w).with_augmentation(a)
        })
    }

    proptest! {
        #[test]
        fn round_trip(name in arb_name()) {
            let text = format_instance_name(&name).unwrap();
            prop_assert_eq!(parse_instance_name(&text).unwrap(), name);
        }
    }
}
