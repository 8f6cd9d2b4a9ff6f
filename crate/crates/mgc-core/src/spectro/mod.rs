//! Waveform → spectrogram transforms, including the alternative preset used
//! for the out-of-distribution evaluation.

mod fft;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;
// Resolves float math to libm in no_std builds; std test builds shadow it.
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::audio::Waveform;
use crate::grid::Grid;
use crate::hash::fnv1a64;

pub use fft::Fft;

#[derive(Debug, Error, PartialEq)]
pub enum SpectroError {
    #[error("invalid STFT config: {0}")]
    BadStftConfig(String),
    #[error("invalid spectrogram config: {0}")]
    BadSpectrogramConfig(String),
    #[error("waveform too short: {len} samples < window {window_len} (center_pad off)")]
    WaveformTooShort { len: usize, window_len: usize },
    #[error("frequency band [{lo_hz}, {hi_hz}] Hz selects no bins")]
    EmptyBand { lo_hz: f64, hi_hz: f64 },
}

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowFn {
    Hann,
    Hamming,
    Rect,
}

impl WindowFn {
    pub fn name(self) -> &'static str {
        match self {
            WindowFn::Hann => "hann",
            WindowFn::Hamming => "hamming",
            WindowFn::Rect => "rect",
        }
    }

    fn sample(self, n: usize, len: usize) -> f64 {
        if len < 2 {
            return 1.0;
        }
        let phase = 2.0 * core::f64::consts::PI * n as f64 / (len - 1) as f64;
        match self {
            WindowFn::Hann => 0.5 * (1.0 - phase.cos()),
            WindowFn::Hamming => 0.54 - 0.46 * phase.cos(),
            WindowFn::Rect => 1.0,
        }
    }
}

/// Short-time Fourier transform parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window_fn: WindowFn,
    pub center_pad: bool,
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), SpectroError> {
        if self.hop == 0 || self.hop > self.window_len || self.window_len > self.fft_len {
            return Err(SpectroError::BadStftConfig(format!(
                "need 0 < hop <= window_len <= fft_len, got hop {}, window {}, fft {}",
                self.hop, self.window_len, self.fft_len
            )));
        }
        if !self.fft_len.is_power_of_two() {
            return Err(SpectroError::BadStftConfig(format!(
                "fft_len {} is not a power of two",
                self.fft_len
            )));
        }
        Ok(())
    }
}

/// Complex STFT output: `frames × bins`, frame-major, `bins = fft_len/2 + 1`.
#[derive(Debug, Clone)]
pub struct StftMatrix {
    pub frames: usize,
    pub bins: usize,
    pub fft_len: usize,
    pub sample_rate: u32,
    data: Vec<Complex<f64>>,
}

impl StftMatrix {
    pub fn frame(&self, t: usize) -> &[Complex<f64>] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn data(&self) -> &[Complex<f64>] {
        &self.data
    }
}

/// Full spectrogram-image recipe: STFT, band crop, dB scaling, resize and
/// normalization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramConfig {
    pub stft: StftConfig,
    pub freq_lo_hz: f64,
    pub freq_hi_hz: f64,
    pub log_floor_db: f64,
    pub gain_db: f64,
    pub out_h: usize,
    pub out_w: usize,
    pub norm_mean: f64,
    pub norm_std: f64,
}

impl SpectrogramConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<(), SpectroError> {
        self.stft.validate()?;
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.freq_lo_hz < self.freq_hi_hz && self.freq_hi_hz <= nyquist) {
            return Err(SpectroError::BadSpectrogramConfig(format!(
                "need freq_lo < freq_hi <= Nyquist ({} Hz), got [{}, {}]",
                nyquist, self.freq_lo_hz, self.freq_hi_hz
            )));
        }
        if self.out_h == 0 || self.out_w == 0 {
            return Err(SpectroError::BadSpectrogramConfig(String::from(
                "output size must be positive",
            )));
        }
        if !(self.norm_std > 0.0) {
            return Err(SpectroError::BadSpectrogramConfig(String::from(
                "norm_std must be positive",
            )));
        }
        if !(self.log_floor_db < 0.0) {
            return Err(SpectroError::BadSpectrogramConfig(String::from(
                "log_floor_db must be negative",
            )));
        }
        Ok(())
    }

    /// Stable fingerprint over every field plus the sample rate.
    pub fn fingerprint(&self, sample_rate: u32) -> u64 {
        let desc = format!(
            "stft(win={},hop={},fft={},fn={},center={});band=[{:e},{:e}];floor={:e};gain={:e};out={}x{};norm=({:e},{:e});fs={}",
            self.stft.window_len,
            self.stft.hop,
            self.stft.fft_len,
            self.stft.window_fn.name(),
            self.stft.center_pad,
            self.freq_lo_hz,
            self.freq_hi_hz,
            self.log_floor_db,
            self.gain_db,
            self.out_h,
            self.out_w,
            self.norm_mean,
            self.norm_std,
            sample_rate
        );
        fnv1a64(desc.as_bytes())
    }

    /// Maps a normalized pixel back to its pre-normalization dB value.
    pub fn denormalize(&self, px: f64) -> f64 {
        let unit = px * self.norm_std + self.norm_mean;
        unit * (0.0 - self.log_floor_db) + self.log_floor_db
    }
}

/// Normalized spectrogram image: rows are frequency (low to high), columns
/// are time. Carries the fingerprint of the producing config.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub pixels: Grid<f64>,
    pub cfg_fingerprint: u64,
}

/// Windowed FFT frames of a waveform.
///
/// Without `center_pad`, frame `t` covers samples `[t·hop, t·hop + window_len)`
/// and `frames = 1 + (len - window_len) / hop`. With `center_pad`, the signal
/// is zero-padded by `window_len/2` on both sides first. Linear in the input.
pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<StftMatrix, SpectroError> {
    cfg.validate()?;
    let padded;
    let samples: &[f64] = if cfg.center_pad {
        let half = cfg.window_len / 2;
        let mut buf = vec![0.0; w.len() + 2 * half];
        buf[half..half + w.len()].copy_from_slice(w.samples());
        padded = buf;
        &padded
    } else {
        w.samples()
    };
    if samples.len() < cfg.window_len {
        return Err(SpectroError::WaveformTooShort {
            len: samples.len(),
            window_len: cfg.window_len,
        });
    }
    let frames = 1 + (samples.len() - cfg.window_len) / cfg.hop;
    let bins = cfg.fft_len / 2 + 1;
    let window: Vec<f64> = (0..cfg.window_len)
        .map(|n| cfg.window_fn.sample(n, cfg.window_len))
        .collect();
    let plan = Fft::new(cfg.fft_len);
    let mut data = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_len];
    for t in 0..frames {
        let start = t * cfg.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if i < cfg.window_len {
                Complex::new(samples[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        plan.forward(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }
    Ok(StftMatrix {
        frames,
        bins,
        fft_len: cfg.fft_len,
        sample_rate: w.sample_rate(),
        data,
    })
}

/// Bilinear resize with half-pixel centres (`align_corners = false`).
/// Resizing to the input size is the identity.
pub fn resize_bilinear(src: &Grid<f64>, out_h: usize, out_w: usize) -> Grid<f64> {
    if src.h() == out_h && src.w() == out_w {
        return src.clone();
    }
    let mut out = Grid::filled(out_h, out_w, 0.0);
    for oy in 0..out_h {
        let (y0, y1, fy) = coord(oy, src.h(), out_h);
        for ox in 0..out_w {
            let (x0, x1, fx) = coord(ox, src.w(), out_w);
            let v00 = src.get(y0, x0);
            let v01 = src.get(y0, x1);
            let v10 = src.get(y1, x0);
            let v11 = src.get(y1, x1);
            let top = v00 + (v01 - v00) * fx;
            let bot = v10 + (v11 - v10) * fx;
            out.set(oy, ox, top + (bot - top) * fy);
        }
    }
    out
}

fn coord(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = pos as usize;
    let hi = if lo + 1 < src_len { lo + 1 } else { lo };
    (lo, hi, pos - lo as f64)
}

/// Inclusive bin range covering `[freq_lo_hz, freq_hi_hz]`.
fn band_bins(cfg: &SpectrogramConfig, sample_rate: u32, bins: usize) -> Result<(usize, usize), SpectroError> {
    let hz_per_bin = sample_rate as f64 / cfg.stft.fft_len as f64;
    let lo = (cfg.freq_lo_hz / hz_per_bin).ceil() as usize;
    let hi = ((cfg.freq_hi_hz / hz_per_bin).floor() as usize).min(bins - 1);
    if lo > hi {
        return Err(SpectroError::EmptyBand {
            lo_hz: cfg.freq_lo_hz,
            hi_hz: cfg.freq_hi_hz,
        });
    }
    Ok((lo, hi))
}

/// Linear-magnitude image in the config's band and output geometry, with no
/// dB scaling or normalization. Used to derive ground-truth masks from clean
/// signals on the same pixel grid as the model input.
pub fn magnitude_image(s: &StftMatrix, cfg: &SpectrogramConfig) -> Result<Grid<f64>, SpectroError> {
    cfg.validate(s.sample_rate)?;
    let (bin_lo, bin_hi) = band_bins(cfg, s.sample_rate, s.bins)?;
    let band = bin_hi - bin_lo + 1;
    let mut img = Grid::filled(band, s.frames, 0.0);
    for t in 0..s.frames {
        let frame = s.frame(t);
        for (r, b) in (bin_lo..=bin_hi).enumerate() {
            img.set(r, t, frame[b].norm());
        }
    }
    Ok(resize_bilinear(&img, cfg.out_h, cfg.out_w))
}

/// Magnitude → dB (clamped at the floor) → gain → band crop → bilinear
/// resize → normalization.
///
/// The pre-normalization pixel domain is decibels; normalization first maps
/// `[log_floor_db, 0]` to the unit interval, then standardizes with
/// `(x - norm_mean) / norm_std`. [`SpectrogramConfig::denormalize`] inverts it.
pub fn to_spectrogram(s: &StftMatrix, cfg: &SpectrogramConfig) -> Result<Spectrogram, SpectroError> {
    cfg.validate(s.sample_rate)?;
    let (bin_lo, bin_hi) = band_bins(cfg, s.sample_rate, s.bins)?;
    let band = bin_hi - bin_lo + 1;
    // rows = frequency ascending, cols = time
    let mut img = Grid::filled(band, s.frames, 0.0);
    for t in 0..s.frames {
        let frame = s.frame(t);
        for (r, b) in (bin_lo..=bin_hi).enumerate() {
            let mag = frame[b].norm();
            let db = if mag > 0.0 {
                (20.0 * mag.log10()).max(cfg.log_floor_db)
            } else {
                cfg.log_floor_db
            };
            img.set(r, t, db + cfg.gain_db);
        }
    }
    let resized = resize_bilinear(&img, cfg.out_h, cfg.out_w);
    let inv_range = 1.0 / (0.0 - cfg.log_floor_db);
    let pixels = resized.map(|db| {
        let unit = (db - cfg.log_floor_db) * inv_range;
        (unit - cfg.norm_mean) / cfg.norm_std
    });
    Ok(Spectrogram {
        pixels,
        cfg_fingerprint: cfg.fingerprint(s.sample_rate),
    })
}

/// The transform the models are trained on.
pub fn origin_config() -> SpectrogramConfig {
    SpectrogramConfig {
        stft: StftConfig {
            window_len: 1024,
            hop: 256,
            fft_len: 1024,
            window_fn: WindowFn::Hann,
            center_pad: false,
        },
        freq_lo_hz: 2_000.0,
        freq_hi_hz: 28_000.0,
        log_floor_db: -80.0,
        gain_db: 0.0,
        out_h: 128,
        out_w: 128,
        norm_mean: 0.45,
        norm_std: 0.225,
    }
}

/// The alternative transform driving the out-of-distribution evaluation:
/// different window length, band crop and intensity scaling, same output size.
pub fn alt_config() -> SpectrogramConfig {
    SpectrogramConfig {
        stft: StftConfig {
            window_len: 512,
            hop: 128,
            fft_len: 512,
            window_fn: WindowFn::Hamming,
            center_pad: false,
        },
        freq_lo_hz: 500.0,
        freq_hi_hz: 32_000.0,
        log_floor_db: -100.0,
        gain_db: 6.0,
        out_h: 128,
        out_w: 128,
        norm_mean: 0.45,
        norm_std: 0.225,
    }
}

/// Named spectrogram transform presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformPreset {
    Origin,
    Alt,
}

impl TransformPreset {
    pub fn config(self) -> SpectrogramConfig {
        match self {
            TransformPreset::Origin => origin_config(),
            TransformPreset::Alt => alt_config(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformPreset::Origin => "origin",
            TransformPreset::Alt => "alt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "origin" => Some(TransformPreset::Origin),
            "alt" => Some(TransformPreset::Alt),
            _ => None,
        }
    }

    pub fn apply(self, w: &Waveform) -> Result<Spectrogram, SpectroError> {
        let cfg = self.config();
        let m = stft(w, &cfg.stft)?;
        to_spectrogram(&m, &cfg)
    }
}

/// Applies the origin preset.
pub fn origin_transform(w: &Waveform) -> Result<Spectrogram, SpectroError> {
    TransformPreset::Origin.apply(w)
}

/// Applies the alternative (OOD) preset.
pub fn alt_transform(w: &Waveform) -> Result<Spectrogram, SpectroError> {
    TransformPreset::Alt.apply(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(samples: Vec<f64>, fs: u32) -> Waveform {
        Waveform::new(samples, fs).unwrap()
    }

    fn rect_cfg(n: usize, hop: usize) -> StftConfig {
        StftConfig {
            window_len: n,
            hop,
            fft_len: n,
            window_fn: WindowFn::Rect,
            center_pad: false,
        }
    }

    #[test]
    fn stft_of_zero_waveform_is_zero() {
        let w = wave(vec![0.0; 2048], 16_000);
        let m = stft(&w, &rect_cfg(256, 128)).unwrap();
        assert_eq!(m.frames, 1 + (2048 - 256) / 128);
        assert_eq!(m.bins, 129);
        assert!(m.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn stft_frame_count_and_too_short() {
        let w = wave(vec![0.1; 1000], 8_000);
        let m = stft(&w, &rect_cfg(512, 256)).unwrap();
        assert_eq!(m.frames, 1 + (1000 - 512) / 256);
        let short = wave(vec![0.1; 100], 8_000);
        assert!(matches!(
            stft(&short, &rect_cfg(512, 256)),
            Err(SpectroError::WaveformTooShort { .. })
        ));
        // center_pad rescues short inputs
        let mut cfg = rect_cfg(512, 256);
        cfg.center_pad = true;
        assert!(stft(&short, &cfg).is_ok());
    }

    #[test]
    fn sine_at_bin_frequency_concentrates_on_that_bin() {
        // x[n] = sin(2π k n / N) with a rect window, one frame of length N.
        let n = 512;
        let k = 37;
        let fs = 16_000;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * core::f64::consts::PI * k as f64 * i as f64 / n as f64).sin())
            .collect();
        let m = stft(&wave(x, fs), &rect_cfg(n, n)).unwrap();
        assert_eq!(m.frames, 1);
        let frame = m.frame(0);
        let peak = frame[k].norm();
        assert!((peak - n as f64 / 2.0).abs() < 1e-9 * n as f64);
        for (b, c) in frame.iter().enumerate() {
            if b != k {
                assert!(c.norm() < 1e-9 * peak, "bin {b} leaks {}", c.norm());
            }
        }
    }

    #[test]
    fn stft_is_linear_in_the_input() {
        let fs = 8_000;
        let x: Vec<f64> = (0..2000)
            .map(|i| ((i * 7919) % 997) as f64 / 500.0 - 1.0)
            .collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let cfg = StftConfig {
            window_len: 256,
            hop: 64,
            fft_len: 512,
            window_fn: WindowFn::Hann,
            center_pad: false,
        };
        let a = stft(&wave(x, fs), &cfg).unwrap();
        let b = stft(&wave(x2, fs), &cfg).unwrap();
        for (ca, cb) in a.data().iter().zip(b.data().iter()) {
            let scaled = ca * 2.0;
            let denom = cb.norm().max(1e-30);
            assert!((scaled - cb).norm() / denom < 1e-12);
        }
    }

    #[test]
    fn parseval_holds_for_rect_window() {
        // rect window, hop == window_len: full-spectrum |X|² sums to N × frame energy.
        let n = 256;
        let fs = 8_000;
        let x: Vec<f64> = (0..n).map(|i| ((i * 31 % 17) as f64) / 8.0 - 1.0).collect();
        let frame_energy: f64 = x.iter().map(|v| v * v).sum();
        let m = stft(&wave(x, fs), &rect_cfg(n, n)).unwrap();
        let f = m.frame(0);
        let mut sum = f[0].norm_sqr() + f[n / 2].norm_sqr();
        for b in f.iter().take(n / 2).skip(1) {
            sum += 2.0 * b.norm_sqr();
        }
        let expect = n as f64 * frame_energy;
        assert!((sum - expect).abs() / expect < 1e-9, "{sum} vs {expect}");
    }

    fn const_magnitude_matrix(mag: f64, frames: usize, fft_len: usize, fs: u32) -> StftMatrix {
        let bins = fft_len / 2 + 1;
        StftMatrix {
            frames,
            bins,
            fft_len,
            sample_rate: fs,
            data: vec![Complex::new(mag, 0.0); frames * bins],
        }
    }

    fn test_cfg() -> SpectrogramConfig {
        SpectrogramConfig {
            stft: StftConfig {
                window_len: 256,
                hop: 128,
                fft_len: 256,
                window_fn: WindowFn::Hann,
                center_pad: false,
            },
            freq_lo_hz: 500.0,
            freq_hi_hz: 3_500.0,
            log_floor_db: -80.0,
            gain_db: 0.0,
            out_h: 32,
            out_w: 32,
            norm_mean: 0.45,
            norm_std: 0.225,
        }
    }

    #[test]
    fn unit_magnitude_maps_to_zero_db_pre_normalization() {
        let m = const_magnitude_matrix(1.0, 10, 256, 8_000);
        let cfg = test_cfg();
        let s = to_spectrogram(&m, &cfg).unwrap();
        for &px in s.pixels.data() {
            assert!((cfg.denormalize(px) - 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_clamps_to_the_floor() {
        let m = const_magnitude_matrix(0.0, 10, 256, 8_000);
        let cfg = test_cfg();
        let s = to_spectrogram(&m, &cfg).unwrap();
        for &px in s.pixels.data() {
            assert!((cfg.denormalize(px) - cfg.log_floor_db).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_at_output_size_is_identity() {
        let g = Grid::from_fn(32, 32, |y, x| (y * 13 + x * 7) as f64 * 0.01);
        let r = resize_bilinear(&g, 32, 32);
        for (a, b) in r.data().iter().zip(g.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_band_is_an_error() {
        let m = const_magnitude_matrix(1.0, 4, 256, 8_000);
        let mut cfg = test_cfg();
        cfg.freq_lo_hz = 3_010.0;
        cfg.freq_hi_hz = 3_015.0; // falls between bin centres (31.25 Hz/bin)
        assert!(matches!(
            to_spectrogram(&m, &cfg),
            Err(SpectroError::EmptyBand { .. })
        ));
    }

    #[test]
    fn normalization_round_trips() {
        let cfg = test_cfg();
        for db in [-80.0, -42.5, -3.25, 0.0] {
            let unit = (db - cfg.log_floor_db) / (0.0 - cfg.log_floor_db);
            let px = (unit - cfg.norm_mean) / cfg.norm_std;
            assert!((cfg.denormalize(px) - db).abs() < 1e-12);
        }
    }

    #[test]
    fn preset_fingerprints_differ() {
        let o = origin_config().fingerprint(64_000);
        let a = alt_config().fingerprint(64_000);
        assert_ne!(o, a);
        // and are stable
        assert_eq!(o, origin_config().fingerprint(64_000));
        // sample rate participates
        assert_ne!(o, origin_config().fingerprint(48_000));
    }

    #[test]
    fn both_presets_validate_at_the_corpus_rate() {
        assert!(origin_config().validate(64_000).is_ok());
        assert!(alt_config().validate(64_000).is_ok());
    }
}
