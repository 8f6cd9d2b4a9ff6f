//! Seeded synthesis of labeled toy bioacoustic clips.
//!
//! Whistles are slow FM sweeps (a narrow ridge in the spectrogram), beluga
//! click trains are broadband noise bursts at a regular rate, porpoise click
//! trains are narrowband tone pips at a higher rate. Ground-truth masks come
//! from the clean signal's magnitude spectrogram thresholded at a fraction of
//! the clip peak, on the same pixel grid as the model input.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// Resolves float math to libm in no_std builds; std test builds shadow it.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::Grid;
use crate::hash::mix_seed;
use crate::mask::BinaryMask;
use crate::metrics::{joint_to_label, JointClass, LabelVector};
use crate::spectro::{magnitude_image, origin_config, stft};

use super::{AudioError, Waveform};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Fraction of the clean-spectrogram peak above which a pixel counts as
/// ground-truth foreground.
pub const GT_MASK_THRESHOLD: f64 = 0.1;

/// Kinds of biological events the generator can place in a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Whistle,
    BelugaClickTrain,
    PorpoiseClickTrain,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Whistle => "whistle",
            EventKind::BelugaClickTrain => "beluga_click_train",
            EventKind::PorpoiseClickTrain => "porpoise_click_train",
        }
    }
}

/// One event within a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    pub kind: EventKind,
    pub start_s: f64,
    pub duration_s: f64,
    pub base_freq_hz: f64,
}

/// Background noise family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    Pink,
    VesselBand,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::VesselBand => "vessel_band",
        }
    }
}

/// Recipe for one synthetic clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub snr_db: f64,
    pub events: Vec<EventSpec>,
    pub noise_kind: NoiseKind,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), AudioError> {
        if self.sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if !(self.duration_s > 0.0) {
            return Err(AudioError::EmptyWaveform);
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        for e in &self.events {
            let name = || format!("{} @ {:.3}s", e.kind.name(), e.start_s);
            if e.start_s < 0.0 || e.duration_s <= 0.0 || e.start_s + e.duration_s > self.duration_s
            {
                return Err(AudioError::EventOutOfRange(name()));
            }
            // whistles sweep up to 1.3x their base frequency
            let top = match e.kind {
                EventKind::Whistle => e.base_freq_hz * 1.3,
                _ => e.base_freq_hz,
            };
            if top >= nyquist {
                return Err(AudioError::EventAboveNyquist {
                    name: name(),
                    freq_hz: e.base_freq_hz,
                    nyquist_hz: nyquist,
                });
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64) as usize
    }

    /// Presence vector implied by the event list.
    pub fn label(&self) -> LabelVector {
        LabelVector {
            whistle: self.events.iter().any(|e| e.kind == EventKind::Whistle),
            beluga: self
                .events
                .iter()
                .any(|e| e.kind == EventKind::BelugaClickTrain),
            porpoise: self
                .events
                .iter()
                .any(|e| e.kind == EventKind::PorpoiseClickTrain),
        }
    }
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0,1] so the log stays finite.
    let u1 = 1.0 - rng.gen_range(0.0..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (TWO_PI * u2).cos()
}

/// Raised-cosine attack/release envelope over `[0, 1]` of event time.
fn event_envelope(pos: f64, ramp: f64) -> f64 {
    if pos < ramp {
        0.5 * (1.0 - (core::f64::consts::PI * pos / ramp).cos())
    } else if pos > 1.0 - ramp {
        0.5 * (1.0 - (core::f64::consts::PI * (1.0 - pos) / ramp).cos())
    } else {
        1.0
    }
}

fn add_whistle(buf: &mut [f64], e: &EventSpec, fs: f64, rng: &mut ChaCha8Rng) {
    let depth = rng.gen_range(0.05..0.25);
    let fm_rate = rng.gen_range(0.3..1.5);
    let phi0 = rng.gen_range(0.0..TWO_PI);
    let amp = 0.35 * rng.gen_range(0.8..1.2);
    let start = (e.start_s * fs) as usize;
    let len = (e.duration_s * fs) as usize;
    let mut phase = rng.gen_range(0.0..TWO_PI);
    for i in 0..len.min(buf.len().saturating_sub(start)) {
        let t = i as f64 / fs;
        let inst_freq = e.base_freq_hz * (1.0 + depth * (TWO_PI * fm_rate * t + phi0).sin());
        phase += TWO_PI * inst_freq / fs;
        let env = event_envelope(i as f64 / len as f64, 0.1);
        buf[start + i] += amp * env * phase.sin();
    }
}

fn add_click_train(buf: &mut [f64], e: &EventSpec, fs: f64, rng: &mut ChaCha8Rng, broadband: bool) {
    let rate = if broadband {
        rng.gen_range(8.0..25.0)
    } else {
        rng.gen_range(40.0..110.0)
    };
    let interval = fs / rate;
    let start = (e.start_s * fs) as usize;
    let len = (e.duration_s * fs) as usize;
    let mut pos = 0.0f64;
    while (pos as usize) < len {
        let jitter = rng.gen_range(-0.1..0.1) * interval;
        let click_at = start + (pos + jitter.max(-pos)) as usize;
        let amp = rng.gen_range(0.75..1.0);
        if broadband {
            // short decaying noise burst spanning the whole band
            let burst = (0.0004 * fs) as usize; // 0.4 ms
            let tau = 0.00012 * fs; // decay constant in samples
            for i in 0..burst {
                let idx = click_at + i;
                if idx >= buf.len() {
                    break;
                }
                buf[idx] += amp * randn(rng) * (-(i as f64) / tau).exp();
            }
        } else {
            // narrowband tone pip: a dozen cycles at the base frequency
            let cycles = 12.0;
            let burst = ((cycles / e.base_freq_hz) * fs) as usize;
            let phi = rng.gen_range(0.0..TWO_PI);
            for i in 0..burst {
                let idx = click_at + i;
                if idx >= buf.len() {
                    break;
                }
                let env = event_envelope(i as f64 / burst as f64, 0.3);
                buf[idx] += amp * env * (TWO_PI * e.base_freq_hz * i as f64 / fs + phi).sin();
            }
        }
        pos += interval;
    }
}

fn noise_buffer(kind: NoiseKind, n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    match kind {
        NoiseKind::White => {
            for o in out.iter_mut() {
                *o = randn(rng);
            }
        }
        NoiseKind::Pink => {
            // Kellet's economy pink-noise filter.
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            for o in out.iter_mut() {
                let w = randn(rng);
                b0 = 0.99765 * b0 + w * 0.0990460;
                b1 = 0.96300 * b1 + w * 0.2965164;
                b2 = 0.57000 * b2 + w * 1.0526913;
                *o = b0 + b1 + b2 + w * 0.1848;
            }
        }
        NoiseKind::VesselBand => {
            // low-frequency rumble (one-pole lowpass) over a weak broadband floor
            let fc = 800.0;
            let a = (-TWO_PI * fc / fs).exp();
            let mut y = 0.0;
            for o in out.iter_mut() {
                let w = randn(rng);
                y = a * y + (1.0 - a) * w;
                *o = 14.0 * y + 0.08 * randn(rng);
            }
        }
    }
    // unit RMS
    let power: f64 = out.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if power > 0.0 {
        let scale = 1.0 / power.sqrt();
        for o in out.iter_mut() {
            *o *= scale;
        }
    }
    out
}

/// Synthesizes the clean-signal and noise components separately, already
/// scaled to the requested SNR and jointly peak-limited to `[-1, 1]`.
/// Deterministic in `(spec, seed)`.
pub fn synthesize_parts(spec: &SynthSpec, seed: u64) -> Result<(Vec<f64>, Vec<f64>), AudioError> {
    spec.validate()?;
    let n = spec.n_samples();
    if n == 0 {
        return Err(AudioError::EmptyWaveform);
    }
    let fs = spec.sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut clean = vec![0.0; n];
    for e in &spec.events {
        match e.kind {
            EventKind::Whistle => add_whistle(&mut clean, e, fs, &mut rng),
            EventKind::BelugaClickTrain => add_click_train(&mut clean, e, fs, &mut rng, true),
            EventKind::PorpoiseClickTrain => add_click_train(&mut clean, e, fs, &mut rng, false),
        }
    }

    let mut noise = noise_buffer(spec.noise_kind, n, fs, &mut rng);
    let signal_power: f64 = clean.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if signal_power > 0.0 {
        // noise currently has unit power; scale to hit the SNR
        let noise_power = signal_power / 10f64.powf(spec.snr_db / 10.0);
        let scale = noise_power.sqrt();
        for v in noise.iter_mut() {
            *v *= scale;
        }
    } else {
        for v in noise.iter_mut() {
            *v *= 0.05;
        }
    }

    let peak = clean
        .iter()
        .zip(noise.iter())
        .map(|(c, m)| (c + m).abs())
        .fold(0.0f64, f64::max);
    if peak > 0.99 {
        let scale = 0.99 / peak;
        for v in clean.iter_mut() {
            *v *= scale;
        }
        for v in noise.iter_mut() {
            *v *= scale;
        }
    }
    Ok((clean, noise))
}

/// Ground-truth mask of event energy: the clean signal's magnitude
/// spectrogram (origin-preset geometry) thresholded at
/// [`GT_MASK_THRESHOLD`] × clip peak. A silent clean signal gives the empty
/// mask.
pub fn ground_truth_mask(clean: &[f64], sample_rate: u32) -> Result<BinaryMask, AudioError> {
    let cfg = origin_config();
    let w = Waveform::new(clean.to_vec(), sample_rate)?;
    let m = stft(&w, &cfg.stft).map_err(|e| AudioError::EventOutOfRange(format!("{e}")))?;
    let img = magnitude_image(&m, &cfg).map_err(|e| AudioError::EventOutOfRange(format!("{e}")))?;
    let peak = img.data().iter().cloned().fold(0.0f64, f64::max);
    let grid = if peak > 0.0 {
        let thr = GT_MASK_THRESHOLD * peak;
        Grid::from_fn(img.h(), img.w(), |y, x| (img.get(y, x) >= thr) as u8)
    } else {
        Grid::filled(img.h(), img.w(), 0u8)
    };
    Ok(BinaryMask::new(grid).expect("thresholded grid is binary"))
}

/// Full clip synthesis: mixed waveform, presence labels, and the ground-truth
/// mask in spectrogram coordinates. A pure function of `(spec, seed)`.
pub fn synthesize_clip(
    spec: &SynthSpec,
    seed: u64,
) -> Result<(Waveform, LabelVector, BinaryMask), AudioError> {
    let (clean, noise) = synthesize_parts(spec, seed)?;
    let mixed: Vec<f64> = clean.iter().zip(noise.iter()).map(|(c, m)| c + m).collect();
    let wave = Waveform::new(mixed, spec.sample_rate)?;
    let mask = ground_truth_mask(&clean, spec.sample_rate)?;
    Ok((wave, spec.label(), mask))
}

/// Which split a corpus clip belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Recipe for the whole seeded corpus. Joint classes cycle round-robin so the
/// eight combinations stay uniformly represented in every split.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub clip_duration_s: f64,
    pub sample_rate: u32,
    pub snr_lo_db: f64,
    pub snr_hi_db: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_train: 2000,
            n_val: 500,
            n_test: 500,
            clip_duration_s: 3.0,
            sample_rate: 64_000,
            snr_lo_db: -5.0,
            snr_hi_db: 15.0,
            seed: 17,
        }
    }
}

/// One corpus entry: everything needed to synthesize and label clip `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSpec {
    pub id: usize,
    pub split: Split,
    pub synth: SynthSpec,
    pub seed: u64,
    pub label: LabelVector,
}

impl ClipSpec {
    pub fn clip_name(&self) -> String {
        format!("clip_{:05}", self.id)
    }
}

impl CorpusSpec {
    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }

    pub fn split_of(&self, id: usize) -> Split {
        if id < self.n_train {
            Split::Train
        } else if id < self.n_train + self.n_val {
            Split::Val
        } else {
            Split::Test
        }
    }

    pub fn ids_in(&self, split: Split) -> core::ops::Range<usize> {
        match split {
            Split::Train => 0..self.n_train,
            Split::Val => self.n_train..self.n_train + self.n_val,
            Split::Test => self.n_train + self.n_val..self.total(),
        }
    }

    /// Deterministic per-clip recipe. Event parameters and the sample-level
    /// noise use independent streams derived from the corpus seed and clip id.
    pub fn clip(&self, id: usize) -> ClipSpec {
        assert!(id < self.total(), "clip id {id} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, (id as u64) * 2));
        let label = joint_to_label(JointClass::new(id % 8).expect("mod 8 in range"));
        let dur = self.clip_duration_s;
        let mut events = Vec::new();
        if label.whistle {
            let duration_s = rng.gen_range(0.6..1.6);
            events.push(EventSpec {
                kind: EventKind::Whistle,
                start_s: rng.gen_range(0.0..dur - duration_s),
                duration_s,
                base_freq_hz: rng.gen_range(4_000.0..12_000.0),
            });
        }
        if label.beluga {
            let duration_s = rng.gen_range(0.5..1.5);
            events.push(EventSpec {
                kind: EventKind::BelugaClickTrain,
                start_s: rng.gen_range(0.0..dur - duration_s),
                duration_s,
                base_freq_hz: rng.gen_range(8_000.0..20_000.0),
            });
        }
        if label.porpoise {
            let duration_s = rng.gen_range(0.4..1.2);
            events.push(EventSpec {
                kind: EventKind::PorpoiseClickTrain,
                start_s: rng.gen_range(0.0..dur - duration_s),
                duration_s,
                base_freq_hz: rng.gen_range(20_000.0..30_000.0),
            });
        }
        let snr_db = rng.gen_range(self.snr_lo_db..self.snr_hi_db);
        let noise_kind = match rng.gen_range(0..3u32) {
            0 => NoiseKind::White,
            1 => NoiseKind::Pink,
            _ => NoiseKind::VesselBand,
        };
        ClipSpec {
            id,
            split: self.split_of(id),
            synth: SynthSpec {
                duration_s: dur,
                sample_rate: self.sample_rate,
                snr_db,
                events,
                noise_kind,
            },
            seed: mix_seed(self.seed, (id as u64) * 2 + 1),
            label,
        }
    }
}
