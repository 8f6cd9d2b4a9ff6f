//! Low-level compute kernels behind the tape ops.
//!
//! Every kernel accumulates in a fixed order (reduction indices ascending),
//! so repeated runs on identical inputs are bitwise identical. Inner loops
//! run over contiguous output lanes so the compiler can vectorize them
//! without reassociating any reduction.

use alloc::vec;
use alloc::vec::Vec;

/// `out[m][n] += a[m][k] * b[k][n]` with `k` ascending for every output cell.
/// `out` must be pre-initialized (zeros or bias).
pub fn matmul_acc(a: &[f64], rows: usize, inner: usize, b: &[f64], cols: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * inner);
    debug_assert_eq!(b.len(), inner * cols);
    debug_assert_eq!(out.len(), rows * cols);
    for m in 0..rows {
        let a_row = &a[m * inner..(m + 1) * inner];
        let out_row = &mut out[m * cols..(m + 1) * cols];
        for (k, &av) in a_row.iter().enumerate() {
            let b_row = &b[k * cols..(k + 1) * cols];
            for (o, &bv) in out_row.iter_mut().zip(b_row.iter()) {
                *o += av * bv;
            }
        }
    }
}

/// Row-major transpose of a `rows × cols` matrix.
pub fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(m.len(), rows * cols);
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

/// Spatial output size of a convolution/pool along one axis.
pub fn conv_out_len(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Unfolds one `ci × h × w` image into a `(ci*kh*kw) × (ho*wo)` patch matrix.
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    x: &[f64],
    ci: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    cols: &mut [f64],
) {
    let ho = conv_out_len(h, kh, stride, pad);
    let wo = conv_out_len(w, kw, stride, pad);
    debug_assert_eq!(cols.len(), ci * kh * kw * ho * wo);
    let mut row = 0;
    for c in 0..ci {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let dst_base = row * ho * wo;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let dst = &mut cols[dst_base + oy * wo..dst_base + (oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Folds patch-matrix gradients back onto the input image, accumulating.
#[allow(clippy::too_many_arguments)]
pub fn col2im_acc(
    dcols: &[f64],
    ci: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    dx: &mut [f64],
) {
    let ho = conv_out_len(h, kh, stride, pad);
    let wo = conv_out_len(w, kw, stride, pad);
    debug_assert_eq!(dcols.len(), ci * kh * kw * ho * wo);
    debug_assert_eq!(dx.len(), ci * h * w);
    let mut row = 0;
    for c in 0..ci {
        let plane = &mut dx[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let src_base = row * ho * wo;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &dcols[src_base + oy * wo..src_base + (oy + 1) * wo];
                    let dst_row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &g) in src.iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst_row[ix as usize] += g;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Bilinear source coordinate for half-pixel-centred resizing
/// (`align_corners = false`), clamped to the valid range.
pub fn bilinear_coord(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = (dst as f64 + 0.5) * scale - 0.5;
    let pos = pos.clamp(0.0, (src_len - 1) as f64);
    let lo = pos as usize;
    let hi = if lo + 1 < src_len { lo + 1 } else { lo };
    let frac = pos - lo as f64;
    (lo, hi, frac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &[f64], rows: usize, inner: usize, b: &[f64], cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows * cols];
        for m in 0..rows {
            for n in 0..cols {
                let mut acc = 0.0;
                for k in 0..inner {
                    acc += a[m * inner + k] * b[k * cols + n];
                }
                out[m * cols + n] = acc;
            }
        }
        out
    }

    #[test]
    fn matmul_matches_naive() {
        let a: Vec<f64> = (0..6).map(|i| i as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let mut out = vec![0.0; 2 * 4];
        matmul_acc(&a, 2, 3, &b, 4, &mut out);
        let expect = naive_matmul(&a, 2, 3, &b, 4);
        for (x, y) in out.iter().zip(expect.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        // <im2col(x), c> == <x, col2im(c)> for random x, c.
        let (ci, h, w, kh, kw, s, p) = (2, 5, 4, 3, 3, 2, 1);
        let ho = conv_out_len(h, kh, s, p);
        let wo = conv_out_len(w, kw, s, p);
        let x: Vec<f64> = (0..ci * h * w).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let c: Vec<f64> = (0..ci * kh * kw * ho * wo)
            .map(|i| ((i * 13 % 7) as f64) - 3.0)
            .collect();
        let mut cols = vec![0.0; c.len()];
        im2col(&x, ci, h, w, kh, kw, s, p, &mut cols);
        let mut dx = vec![0.0; x.len()];
        col2im_acc(&c, ci, h, w, kh, kw, s, p, &mut dx);
        let lhs: f64 = cols.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(dx.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn bilinear_identity_when_same_size() {
        for i in 0..9 {
            let (lo, _hi, frac) = bilinear_coord(i, 9, 9);
            assert_eq!(lo, i);
            assert_eq!(frac, 0.0);
        }
    }
}
