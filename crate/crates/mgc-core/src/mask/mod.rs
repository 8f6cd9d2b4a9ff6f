//! Pseudo-attention masks: binary regions of interest, their exact Euclidean
//! distance transform, and the Gaussian soft-mask relaxation.

mod candidate;
mod distance;

// Resolves float math to libm in no_std builds; std test builds shadow it.
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::grid::Grid;

pub use crate::grid::hflip;
pub use candidate::{
    adaptive_threshold, candidate_mask, closing, remove_small_components, sobel_magnitude,
    CandidateParams,
};
pub use distance::distance_transform;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("mask values must be strictly 0 or 1")]
    NonBinaryValue,
    #[error("sigma must be positive, got {0}")]
    SigmaNotPositive(f64),
}

/// H×W mask with values in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    grid: Grid<u8>,
}

impl BinaryMask {
    pub fn new(grid: Grid<u8>) -> Result<Self, MaskError> {
        if !grid.data().iter().all(|&v| v <= 1) {
            return Err(MaskError::NonBinaryValue);
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &Grid<u8> {
        &self.grid
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        self.grid.data_mut()
    }

    pub fn count_foreground(&self) -> usize {
        self.grid.data().iter().filter(|&&v| v != 0).count()
    }

    pub fn is_all_background(&self) -> bool {
        self.count_foreground() == 0
    }

    /// Mask pixels as a real-valued image (0.0 / 1.0) for model input.
    pub fn to_f64(&self) -> Grid<f64> {
        self.grid.map(|v| v as f64)
    }
}

/// Per-pixel Euclidean distance to the nearest foreground pixel, in pixel
/// units. All distances are `+inf` when the source mask was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    grid: Grid<f64>,
}

impl DistanceMap {
    pub(crate) fn new(grid: Grid<f64>) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn has_foreground(&self) -> bool {
        self.grid.data().iter().any(|&d| d == 0.0)
    }
}

/// Gaussian relaxation of a binary mask: `S = exp(-d² / 2σ²)`.
///
/// For a nonempty source mask every value lies in `(0, 1]` with `S = 1`
/// exactly where `d = 0`. For an empty mask the values are all zero and
/// `empty` is set, so consumers can treat "no detection" explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    pub pixels: Grid<f64>,
    pub sigma: f64,
    pub empty: bool,
}

/// Applies the decreasing Gaussian to a distance map.
pub fn soft_mask(d: &DistanceMap, sigma: f64) -> Result<SoftMask, MaskError> {
    if !(sigma > 0.0) {
        return Err(MaskError::SigmaNotPositive(sigma));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let pixels = d.grid().map(|dist| {
        if dist.is_infinite() {
            0.0
        } else {
            (-dist * dist * inv).exp()
        }
    });
    Ok(SoftMask {
        pixels,
        sigma,
        empty: !d.has_foreground(),
    })
}

/// Default spatial decay at the 128×128 working resolution.
pub const DEFAULT_SIGMA: f64 = 6.0;

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_pixel_mask(h: usize, w: usize, y: usize, x: usize) -> BinaryMask {
        let mut g = Grid::filled(h, w, 0u8);
        g.set(y, x, 1);
        BinaryMask::new(g).unwrap()
    }

    #[test]
    fn binary_mask_rejects_other_values() {
        let g = Grid::from_vec(1, 2, alloc::vec![0u8, 2]);
        assert_eq!(BinaryMask::new(g).unwrap_err(), MaskError::NonBinaryValue);
    }

    #[test]
    fn soft_mask_analytic_values() {
        let sigma = 6.0;
        let m = single_pixel_mask(32, 32, 10, 10);
        let d = distance_transform(&m);
        let s = soft_mask(&d, sigma).unwrap();
        // d = 0 -> exactly 1
        assert_eq!(s.pixels.get(10, 10), 1.0);
        // d = sigma -> exp(-1/2)
        assert!((s.pixels.get(10, 16) - (-0.5f64).exp()).abs() < 1e-12);
        // d = 3 sigma -> exp(-4.5)
        assert!((s.pixels.get(10, 28) - (-4.5f64).exp()).abs() < 1e-12);
        assert!(!s.empty);
    }

    #[test]
    fn soft_mask_requires_positive_sigma() {
        let d = distance_transform(&single_pixel_mask(4, 4, 0, 0));
        assert_eq!(soft_mask(&d, 0.0).unwrap_err(), MaskError::SigmaNotPositive(0.0));
        assert_eq!(soft_mask(&d, -1.0).unwrap_err(), MaskError::SigmaNotPositive(-1.0));
    }

    #[test]
    fn empty_mask_is_flagged_and_all_zero() {
        let m = BinaryMask::new(Grid::filled(8, 8, 0u8)).unwrap();
        let d = distance_transform(&m);
        let s = soft_mask(&d, 6.0).unwrap();
        assert!(s.empty);
        assert!(s.pixels.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soft_mask_range_and_unit_set_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let g = Grid::from_fn(24, 24, |_, _| (rng.gen_range(0.0..1.0) < 0.08) as u8);
            let m = BinaryMask::new(g).unwrap();
            if m.is_all_background() {
                continue;
            }
            let d = distance_transform(&m);
            let s = soft_mask(&d, 4.0).unwrap();
            for (idx, &v) in s.pixels.data().iter().enumerate() {
                assert!(v > 0.0 && v <= 1.0);
                let dist = d.grid().data()[idx];
                assert_eq!(v == 1.0, dist == 0.0, "S=1 iff d=0");
            }
        }
    }

    #[test]
    fn soft_mask_is_monotone_in_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let g = Grid::from_fn(32, 32, |_, _| (rng.gen_range(0.0..1.0) < 0.03) as u8);
        let m = BinaryMask::new(g).unwrap();
        let d = distance_transform(&m);
        let s = soft_mask(&d, 6.0).unwrap();
        let mut pairs: Vec<(f64, f64)> = d
            .grid()
            .data()
            .iter()
            .zip(s.pixels.data().iter())
            .map(|(&a, &b)| (a, b))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in pairs.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15, "S must not increase with d");
        }
    }

    #[test]
    fn soft_mask_commutes_with_hflip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = Grid::from_fn(16, 20, |_, _| (rng.gen_range(0.0..1.0) < 0.1) as u8);
        let m = BinaryMask::new(g).unwrap();
        let a = soft_mask(&distance_transform(&m), 3.0).unwrap();
        let flipped = BinaryMask::new(hflip(m.grid())).unwrap();
        let b = soft_mask(&distance_transform(&flipped), 3.0).unwrap();
        assert_eq!(hflip(&a.pixels).data(), b.pixels.data());
    }
}
