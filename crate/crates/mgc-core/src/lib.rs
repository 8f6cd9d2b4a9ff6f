//! Core algorithms for mask-guided classification of bioacoustic spectrograms.
//!
//! Everything in this crate is pure computation over in-memory buffers:
//! waveform synthesis, STFT spectrograms, pseudo-attention masks (adaptive
//! thresholding, exact Euclidean distance transform, Gaussian soft masks), a
//! dense-tensor reverse-mode autodiff engine, the segmentation and fusion
//! classifier models, training loops, and evaluation metrics.
//!
//! The crate is `no_std` (with `alloc`); file formats, manifests and the
//! command-line harness live in the companion `mgc-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audio;
pub mod grid;
pub mod hash;
pub mod mask;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod spectro;
pub mod train;

pub use grid::Grid;
