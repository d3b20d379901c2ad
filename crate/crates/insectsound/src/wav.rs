//! RIFF/WAVE input (PCM16 or float32, mono or stereo) and PCM16 output.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use insectsound_core::audio::{amplitude_to_pcm16, mixdown, pcm16_to_amplitude, AudioClip};

use crate::error::{Error, Result};

fn wav_err(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Decode a WAV file into a mono clip whose source id is the file stem.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(cause) => Error::Io {
            path: path.to_path_buf(),
            cause,
        },
        other => wav_err(path, other),
    })?;
    let spec = reader.spec();
    let encoding = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) | (SampleFormat::Float, 32) => None,
        (SampleFormat::Int, b) => Some(format!("{b}-bit integer PCM")),
        (SampleFormat::Float, b) => Some(format!("{b}-bit float")),
    };
    if let Some(found) = encoding {
        return Err(wav_err(
            path,
            format!("unsupported encoding {found}; expected 16-bit PCM or 32-bit float"),
        ));
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(wav_err(path, format!("{} channels; only mono and stereo are supported", spec.channels)));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Int => reader
            .into_samples::<i16>()
            .map(|s| s.map(pcm16_to_amplitude))
            .collect::<Result<_, _>>(),
        SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>(),
    }
    .map_err(|e| wav_err(path, e))?;
    if interleaved.is_empty() {
        return Err(wav_err(path, "no audio samples"));
    }
    let samples = mixdown(&interleaved, usize::from(spec.channels))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| wav_err(path, "file name is not valid UTF-8"))?;
    Ok(AudioClip::new(samples, spec.sample_rate, stem)?)
}

/// Write mono PCM16, clamping amplitudes to [-1, 1].
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let write = || -> hound::Result<()> {
        let mut w = WavWriter::create(path, spec)?;
        let mut i16w = w.get_i16_writer(samples.len() as u32);
        for &s in samples {
            i16w.write_sample(amplitude_to_pcm16(s));
        }
        i16w.flush()?;
        w.finalize()
    };
    write().map_err(|e| match e {
        hound::Error::IoError(cause) => Error::Io {
            path: path.to_path_buf(),
            cause,
        },
        other => wav_err(path, other),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcm16_round_trip_is_exact_on_the_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone.wav");
        let samples: Vec<f64> = (-50..50).map(|i| f64::from(i * 300) / 32768.0).collect();
        write_wav(&path, &samples, 16000).unwrap();
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples(), &samples[..]);
        assert_eq!(clip.sample_rate(), 16000);
        assert_eq!(clip.source_id(), "tone");
    }

    fn write_raw(path: &Path, spec: WavSpec, frames: &[f32]) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for &f in frames {
            match (spec.sample_format, spec.bits_per_sample) {
                (SampleFormat::Float, _) => w.write_sample(f).unwrap(),
                (SampleFormat::Int, 16) => w.write_sample((f * 32768.0) as i16).unwrap(),
                (SampleFormat::Int, _) => w.write_sample((f * 8_388_608.0) as i32).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn stereo_float_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        write_raw(&path, spec, &[0.5, 0.25, -1.0, 0.0]);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples(), &[0.375, -0.5]);
    }

    #[test]
    fn unsupported_and_empty_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p24 = dir.path().join("deep.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        write_raw(&p24, spec, &[0.1, 0.2]);
        let msg = load_wav(&p24).unwrap_err().to_string();
        assert!(msg.contains("24-bit integer PCM"), "{msg}");

        let empty = dir.path().join("empty.wav");
        write_raw(&empty, WavSpec { bits_per_sample: 16, ..spec }, &[]);
        assert!(load_wav(&empty).unwrap_err().to_string().contains("no audio"));

        let missing = dir.path().join("missing.wav");
        assert!(load_wav(&missing).unwrap_err().to_string().contains("missing.wav"));
    }
}
