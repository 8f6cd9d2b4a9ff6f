//! Exact Euclidean distance transform (two-pass lower-envelope algorithm).
//!
//! Computes, for every pixel, the exact L2 distance to the nearest foreground
//! pixel: first a 1-D squared-distance transform down each column, then one
//! across each row of the intermediate result. Exactness is what lets tests
//! pin it against the brute-force minimum over the foreground set.

use alloc::vec;

// Resolves float math to libm in no_std builds; std test builds shadow it.
#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::Grid;

use super::{BinaryMask, DistanceMap};

/// 1-D squared-distance transform of sampled function `f` into `d`.
///
/// `v` (parabola locations) and `z` (boundaries) are scratch buffers of
/// lengths `n` and `n + 1`.
fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    debug_assert!(d.len() == n && v.len() == n && z.len() == n + 1);
    let intersect = |q: usize, p: usize| -> f64 {
        let (fq, fp) = (f[q], f[p]);
        let (qf, pf) = (q as f64, p as f64);
        ((fq + qf * qf) - (fp + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };

    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        if k == 0 && f[v[0]] == f64::INFINITY {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            continue;
        }
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }

    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dist = q as f64 - v[k] as f64;
        d[q] = dist * dist + f[v[k]];
    }
}

/// Exact Euclidean distance to the nearest foreground pixel.
///
/// Foreground pixels map to 0. If the mask has no foreground at all, every
/// distance is `+inf` (the minimum over an empty set).
pub fn distance_transform(mask: &BinaryMask) -> DistanceMap {
    let (h, w) = (mask.grid().h(), mask.grid().w());
    let mut sq = Grid::filled(h, w, 0.0f64);

    // column pass
    let mut f = vec![0.0; h];
    let mut d = vec![0.0; h];
    let mut v = vec![0usize; h];
    let mut z = vec![0.0; h + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = if mask.grid().get(y, x) != 0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
        dt_1d(&f, &mut d, &mut v, &mut z);
        for y in 0..h {
            sq.set(y, x, d[y]);
        }
    }

    // row pass
    let mut f = vec![0.0; w];
    let mut d = vec![0.0; w];
    let mut v = vec![0usize; w];
    let mut z = vec![0.0; w + 1];
    for y in 0..h {
        f.copy_from_slice(sq.row(y));
        dt_1d(&f, &mut d, &mut v, &mut z);
        for x in 0..w {
            sq.set(y, x, d[x]);
        }
    }

    DistanceMap::new(sq.map(|s| s.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::hflip;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: minimum over every foreground pixel of the exact
    /// L2 distance, O(H·W·|Ω|).
    fn brute_force_dt(mask: &BinaryMask) -> Grid<f64> {
        let (h, w) = (mask.grid().h(), mask.grid().w());
        Grid::from_fn(h, w, |y, x| {
            let mut best = f64::INFINITY;
            for fy in 0..h {
                for fx in 0..w {
                    if mask.grid().get(fy, fx) != 0 {
                        let dy = y as f64 - fy as f64;
                        let dx = x as f64 - fx as f64;
                        best = best.min((dy * dy + dx * dx).sqrt());
                    }
                }
            }
            best
        })
    }

    fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> BinaryMask {
        BinaryMask::new(Grid::from_fn(h, w, |_, _| {
            (rng.gen_range(0.0..1.0) < density) as u8
        }))
        .unwrap()
    }

    #[test]
    fn all_foreground_is_zero_everywhere() {
        let m = BinaryMask::new(Grid::filled(7, 5, 1u8)).unwrap();
        let d = distance_transform(&m);
        assert!(d.grid().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_distances_are_analytic() {
        let mut g = Grid::filled(5, 5, 0u8);
        g.set(2, 2, 1);
        let d = distance_transform(&BinaryMask::new(g).unwrap());
        assert_eq!(d.grid().get(2, 2), 0.0);
        assert_eq!(d.grid().get(2, 3), 1.0);
        assert!((d.grid().get(4, 4) - 8.0f64.sqrt()).abs() < 1e-12);
        assert!((d.grid().get(0, 0) - 8.0f64.sqrt()).abs() < 1e-12);
        assert!((d.grid().get(0, 3) - 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_gives_infinite_distances() {
        let m = BinaryMask::new(Grid::filled(4, 4, 0u8)).unwrap();
        let d = distance_transform(&m);
        assert!(d.grid().data().iter().all(|&v| v == f64::INFINITY));
    }

    #[test]
    fn matches_bruteforce_oracle_on_seeded_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..50 {
            let density = [0.01, 0.05, 0.2, 0.6][trial % 4];
            let m = random_mask(&mut rng, 32, 32, density);
            let fast = distance_transform(&m);
            let slow = brute_force_dt(&m);
            for (a, e) in fast.grid().data().iter().zip(slow.data().iter()) {
                if e.is_infinite() {
                    assert!(a.is_infinite());
                } else {
                    assert!((a - e).abs() <= 1e-9, "trial {trial}: {a} vs {e}");
                }
            }
        }
    }

    #[test]
    fn matches_bruteforce_on_assorted_small_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (h, w) in [(1, 1), (1, 9), (9, 1), (2, 3), (5, 8), (17, 13), (32, 32)] {
            let m = random_mask(&mut rng, h, w, 0.15);
            let fast = distance_transform(&m);
            let slow = brute_force_dt(&m);
            for (a, e) in fast.grid().data().iter().zip(slow.data().iter()) {
                if e.is_infinite() {
                    assert!(a.is_infinite());
                } else {
                    assert!((a - e).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn commutes_with_horizontal_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let m = random_mask(&mut rng, 16, 24, 0.1);
            let flipped = BinaryMask::new(hflip(m.grid())).unwrap();
            let a = distance_transform(&flipped);
            let b = hflip(distance_transform(&m).grid());
            assert_eq!(a.grid().data(), b.data());
        }
    }

    #[test]
    fn adding_foreground_never_increases_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_mask(&mut rng, 20, 20, 0.05);
        let base = distance_transform(&m);
        let mut g2 = m.grid().clone();
        g2.set(11, 3, 1);
        let more = distance_transform(&BinaryMask::new(g2).unwrap());
        for (a, b) in more.grid().data().iter().zip(base.grid().data().iter()) {
            assert!(a <= b || (a.is_infinite() && b.is_infinite()));
        }
    }
}
