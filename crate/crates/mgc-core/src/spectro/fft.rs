//! Iterative radix-2 FFT with a precomputed twiddle table.

use alloc::vec::Vec;
use num_complex::Complex;
// Resolves float math to libm in no_std builds; std test builds shadow it.
#[allow(unused_imports)]
use num_traits::Float;

/// Forward FFT plan for a fixed power-of-two length.
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex<f64>>,
}

impl Fft {
    /// `n` must be a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let mut twiddles = Vec::with_capacity(n / 2);
        for j in 0..n / 2 {
            let angle = -2.0 * core::f64::consts::PI * j as f64 / n as f64;
            twiddles.push(Complex::new(angle.cos(), angle.sin()));
        }
        Self { n, twiddles }
    }

    /// In-place decimation-in-time transform of `buf` (length `n`).
    pub fn forward(&self, buf: &mut [Complex<f64>]) {
        let n = self.n;
        assert_eq!(buf.len(), n);
        if n <= 1 {
            return;
        }
        // bit-reversal permutation
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..len / 2 {
                    let w = self.twiddles[j * step];
                    let a = buf[start + j];
                    let b = buf[start + j + len / 2] * w;
                    buf[start + j] = a + b;
                    buf[start + j + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
    }
}
