//! Blind modulation classification from STFT spectrogram images.
//!
//! The crate covers the whole chain: digitally modulated passband waveforms
//! ([`sigsynth`]), SISO/MIMO flat-fading channels with AWGN ([`channel`]),
//! spectrogram images ([`tfa`]), a compact convolutional classifier
//! ([`cnn`]), per-antenna decision fusion ([`fusion`]) and the dataset /
//! experiment tooling behind the `modclass` CLI ([`harness`]).

pub mod channel;
pub mod cnn;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod seed;
pub mod sigsynth;
pub mod tfa;

pub use error::{Error, Result};
