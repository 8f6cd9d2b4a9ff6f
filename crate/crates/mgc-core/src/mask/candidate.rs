//! Automatic candidate masks from classical signal processing: Sobel edges
//! and adaptive thresholding, cleaned up by morphological closing and a
//! minimum component area.

use alloc::vec;
use alloc::vec::Vec;

// Resolves float math to libm in no_std builds; std test builds shadow it.
#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::Grid;
use crate::spectro::Spectrogram;

use super::BinaryMask;

/// Tuning knobs for [`candidate_mask`]. Offsets are in normalized-pixel units
/// (the spectrogram is already standardized).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateParams {
    /// Side of the local-mean window for adaptive thresholding (odd).
    pub window: usize,
    /// A pixel fires when it exceeds its local mean by this offset.
    pub offset: f64,
    /// Iterations of 3×3 closing applied to the thresholded union.
    pub closing_iters: usize,
    /// Connected components smaller than this are dropped.
    pub min_area: usize,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self {
            window: 31,
            offset: 2.0,
            closing_iters: 2,
            min_area: 20,
        }
    }
}

/// Sobel gradient magnitude with clamp-to-edge borders.
pub fn sobel_magnitude(img: &Grid<f64>) -> Grid<f64> {
    let (h, w) = (img.h(), img.w());
    let at = |y: isize, x: isize| -> f64 {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        img.get(y, x)
    };
    Grid::from_fn(h, w, |y, x| {
        let (y, x) = (y as isize, x as isize);
        let gx = -at(y - 1, x - 1) + at(y - 1, x + 1) - 2.0 * at(y, x - 1) + 2.0 * at(y, x + 1)
            - at(y + 1, x - 1)
            + at(y + 1, x + 1);
        let gy = -at(y - 1, x - 1) - 2.0 * at(y - 1, x) - at(y - 1, x + 1)
            + at(y + 1, x - 1)
            + 2.0 * at(y + 1, x)
            + at(y + 1, x + 1);
        (gx * gx + gy * gy).sqrt()
    })
}

/// Local mean over a clamped `window × window` neighbourhood via an integral
/// image. Border windows shrink to the valid region.
fn local_mean(img: &Grid<f64>, window: usize) -> Grid<f64> {
    let (h, w) = (img.h(), img.w());
    let r = window / 2;
    // integral[y+1][x+1] = sum of img[0..=y][0..=x]
    let mut integral = vec![0.0f64; (h + 1) * (w + 1)];
    for y in 0..h {
        let mut row_sum = 0.0;
        for x in 0..w {
            row_sum += img.get(y, x);
            integral[(y + 1) * (w + 1) + (x + 1)] = integral[y * (w + 1) + (x + 1)] + row_sum;
        }
    }
    Grid::from_fn(h, w, |y, x| {
        let y0 = y.saturating_sub(r);
        let x0 = x.saturating_sub(r);
        let y1 = (y + r).min(h - 1);
        let x1 = (x + r).min(w - 1);
        let sum = integral[(y1 + 1) * (w + 1) + (x1 + 1)] - integral[y0 * (w + 1) + (x1 + 1)]
            - integral[(y1 + 1) * (w + 1) + x0]
            + integral[y0 * (w + 1) + x0];
        sum / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64
    })
}

/// Pixel fires iff it exceeds its local mean by `offset`.
pub fn adaptive_threshold(img: &Grid<f64>, window: usize, offset: f64) -> BinaryMask {
    let means = local_mean(img, window);
    let g = Grid::from_fn(img.h(), img.w(), |y, x| {
        (img.get(y, x) > means.get(y, x) + offset) as u8
    });
    BinaryMask::new(g).expect("thresholded grid is binary")
}

fn dilate3(m: &Grid<u8>) -> Grid<u8> {
    let (h, w) = (m.h(), m.w());
    Grid::from_fn(h, w, |y, x| {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let ny = y as isize + dy;
                let nx = x as isize + dx;
                if ny >= 0 && ny < h as isize && nx >= 0 && nx < w as isize
                    && m.get(ny as usize, nx as usize) != 0
                {
                    return 1;
                }
            }
        }
        0
    })
}

fn erode3(m: &Grid<u8>) -> Grid<u8> {
    let (h, w) = (m.h(), m.w());
    Grid::from_fn(h, w, |y, x| {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let ny = y as isize + dy;
                let nx = x as isize + dx;
                // outside the image counts as background
                if ny < 0 || ny >= h as isize || nx < 0 || nx >= w as isize
                    || m.get(ny as usize, nx as usize) == 0
                {
                    return 0;
                }
            }
        }
        1
    })
}

/// Morphological closing by the square structuring element of radius
/// `iters`: `iters` dilations followed by `iters` erosions. Idempotent for a
/// fixed `iters`.
pub fn closing(m: &BinaryMask, iters: usize) -> BinaryMask {
    let mut g = m.grid().clone();
    for _ in 0..iters {
        g = dilate3(&g);
    }
    for _ in 0..iters {
        g = erode3(&g);
    }
    BinaryMask::new(g).expect("morphology preserves binarity")
}

/// Removes 8-connected components with fewer than `min_area` pixels.
pub fn remove_small_components(m: &BinaryMask, min_area: usize) -> BinaryMask {
    let (h, w) = (m.grid().h(), m.grid().w());
    let mut labels = vec![0u32; h * w]; // 0 = unvisited/background
    let mut keep = m.grid().clone();
    let mut next = 1u32;
    let mut stack: Vec<usize> = Vec::new();
    let mut component: Vec<usize> = Vec::new();
    for start in 0..h * w {
        if m.grid().data()[start] == 0 || labels[start] != 0 {
            continue;
        }
        stack.clear();
        component.clear();
        stack.push(start);
        labels[start] = next;
        while let Some(idx) = stack.pop() {
            component.push(idx);
            let (y, x) = (idx / w, idx % w);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dy == 0 && dx == 0 {
                        continue;
                    }
                    let ny = y as isize + dy;
                    let nx = x as isize + dx;
                    if ny < 0 || ny >= h as isize || nx < 0 || nx >= w as isize {
                        continue;
                    }
                    let nidx = ny as usize * w + nx as usize;
                    if m.grid().data()[nidx] != 0 && labels[nidx] == 0 {
                        labels[nidx] = next;
                        stack.push(nidx);
                    }
                }
            }
        }
        if component.len() < min_area {
            for &idx in &component {
                keep.data_mut()[idx] = 0;
            }
        }
        next += 1;
    }
    BinaryMask::new(keep).expect("component removal preserves binarity")
}

/// Candidate regions of interest from a spectrogram image:
/// Sobel gradient magnitude → adaptive threshold, unioned with an intensity
/// adaptive threshold, then closing and small-component removal. An
/// all-background result is valid.
pub fn candidate_mask(spec: &Spectrogram, params: &CandidateParams) -> BinaryMask {
    let edges = sobel_magnitude(&spec.pixels);
    let edge_mask = adaptive_threshold(&edges, params.window, params.offset);
    let intensity_mask = adaptive_threshold(&spec.pixels, params.window, params.offset);
    let union = Grid::from_fn(spec.pixels.h(), spec.pixels.w(), |y, x| {
        (edge_mask.grid().get(y, x) != 0 || intensity_mask.grid().get(y, x) != 0) as u8
    });
    let closed = closing(&BinaryMask::new(union).expect("union is binary"), params.closing_iters);
    remove_small_components(&closed, params.min_area)
}
