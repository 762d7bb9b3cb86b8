//! Small numeric helpers shared by every module: torus phases, pairwise
//! summation, least squares and the seeded generator.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::ops::Add;

pub const CHUNK: usize = 1024;

/// e(x) = exp(2 pi i x), reduced mod 1 first.
#[inline]
pub fn e(x: f64) -> Complex64 {
    let r = x - x.round();
    Complex64::from_polar(1.0, TAU * r)
}

/// Fractional part of m*alpha in [-1/2, 1/2), using an fma to recover the
/// low bits of the product.
#[inline]
pub fn frac_mul(m: i64, alpha: f64) -> f64 {
    let mf = m as f64;
    if mf.abs() < 9.007_199_254_740_992e15 {
        let p = mf * alpha;
        let err = mf.mul_add(alpha, -p);
        let r = p - p.round();
        let t = r + err;
        t - t.round()
    } else {
        // beyond 2^53 split m into two exact halves
        let hi = (m >> 26) << 26;
        let lo = m - hi;
        let t = frac_mul(hi >> 26, alpha * 67_108_864.0) + frac_mul(lo, alpha);
        t - t.round()
    }
}

/// e(m*alpha) with the reduction done by [`frac_mul`].
#[inline]
pub fn e_int(m: i64, alpha: f64) -> Complex64 {
    e(frac_mul(m, alpha))
}

/// Exact e(a/q) for integers.
#[inline]
pub fn e_rat(a: i64, q: i64) -> Complex64 {
    let r = a.rem_euclid(q);
    e(r as f64 / q as f64)
}

/// ||x||, distance to the nearest integer.
#[inline]
pub fn torus_dist(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Representative of x mod 1 in [-1/2, 1/2].
#[inline]
pub fn centered(x: f64) -> f64 {
    x - x.round()
}

/// Pairwise summation of `f(0..n)`: naive within chunks of [`CHUNK`] terms,
/// then a balanced tree over the chunk sums. The order depends only on `n`.
pub fn pairwise_sum_by<T, F>(n: usize, mut f: F) -> T
where
    T: Copy + Default + Add<Output = T>,
    F: FnMut(usize) -> T,
{
    if n == 0 {
        return T::default();
    }
    let chunks = n.div_ceil(CHUNK);
    let mut partial = Vec::with_capacity(chunks);
    for c in 0..chunks {
        let mut acc = T::default();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            acc = acc + f(i);
        }
        partial.push(acc);
    }
    tree_reduce(&partial)
}

pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + Default + Add<Output = T>,
{
    pairwise_sum_by(xs.len(), |i| xs[i])
}

fn tree_reduce<T>(xs: &[T]) -> T
where
    T: Copy + Default + Add<Output = T>,
{
    match xs.len() {
        0 => T::default(),
        1 => xs[0],
        n => {
            let h = n / 2;
            tree_reduce(&xs[..h]) + tree_reduce(&xs[h..])
        }
    }
}

/// Ordinary least squares fit y = slope*x + intercept.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    let intercept = my - slope * mx;
    let residuals = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    LinearFit { slope, intercept, residuals }
}

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ipow(n: i64, k: u32) -> Option<i64> {
    n.checked_pow(k)
}

/// floor(x^(1/k)) for nonnegative integers.
pub fn iroot(x: u64, k: u32) -> u64 {
    if x == 0 {
        return 0;
    }
    let mut r = (x as f64).powf(1.0 / k as f64).round() as u64;
    while r > 0 && r.checked_pow(k).is_none_or(|v| v > x) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|v| v <= x) {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_mul_matches_exact_rational() {
        // alpha = j/M exactly representable; m*j mod M is the exact answer
        let m_big = 65_536i64;
        for &(m, j) in &[(4096i64, 12345i64), (-3375, 777), (1 << 40, 3)] {
            let alpha = j as f64 / m_big as f64;
            let exact = ((m as i128 * j as i128).rem_euclid(m_big as i128)) as f64 / m_big as f64;
            let got = frac_mul(m, alpha).rem_euclid(1.0);
            assert!(torus_dist(got - exact) < 1e-15, "{m} {j}");
        }
    }

    #[test]
    fn pairwise_is_order_stable() {
        let xs: Vec<f64> = (0..5000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let a = pairwise_sum(&xs);
        let b = pairwise_sum_by(xs.len(), |i| xs[i]);
        assert_eq!(a.to_bits(), b.to_bits());
        let naive: f64 = xs.iter().sum();
        assert!((a - naive).abs() < 1e-12);
    }

    #[test]
    fn iroot_edges() {
        assert_eq!(iroot(50, 2), 7);
        assert_eq!(iroot(64, 3), 4);
        assert_eq!(iroot(63, 3), 3);
        assert_eq!(iroot(100_000, 3), 46);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope - 2.5).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
    }
}
