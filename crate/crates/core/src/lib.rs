//! Signal processing and classical classifiers for insect sound
//! classification.
//!
//! The pipeline cuts annotated segments of recordings into fixed-length
//! instances, optionally expands the training instances with pitch-shift and
//! time-stretch variants, turns every instance into MFCC features and
//! evaluates five classifiers under a leave-one-clip-out protocol. A t-SNE
//! projection is available for cluster diagnostics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, WAV decoding
//! and the command line live in the `insectsound` crate.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audio;
pub mod augmentation;
pub mod classifiers;
mod error;
pub mod evaluation;
pub mod features;
pub mod fft;
pub mod naming;
pub mod projection;
pub mod seed;
pub mod segmentation;

pub use error::{Error, Result};
