//! Waveforms and the seeded synthetic corpus standing in for field recordings.

mod synth;

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

pub use synth::{
    synthesize_clip, synthesize_parts, ClipSpec, CorpusSpec, EventKind, EventSpec, NoiseKind,
    SynthSpec,
};

#[derive(Debug, Error, PartialEq)]
pub enum AudioError {
    #[error("empty waveform")]
    EmptyWaveform,
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("waveform contains non-finite samples")]
    NonFiniteSamples,
    #[error("event '{0}' exceeds the clip duration")]
    EventOutOfRange(String),
    #[error("event '{name}' base frequency {freq_hz} Hz is at or above Nyquist ({nyquist_hz} Hz)")]
    EventAboveNyquist {
        name: String,
        freq_hz: f64,
        nyquist_hz: f64,
    },
}

/// Mono PCM sample sequence with its sample rate. Samples are dimensionless
/// amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyWaveform);
        }
        if !samples.iter().all(|s| s.is_finite()) {
            return Err(AudioError::NonFiniteSamples);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Nyquist frequency in Hz.
    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }
}
