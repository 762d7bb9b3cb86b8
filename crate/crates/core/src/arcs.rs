//! Rational approximation, major/minor arc classification and the arc
//! mollifier family.

use crate::arith::ramanujan_sum;
use crate::error::{Error, Result};
use crate::numeric::{e_rat, torus_dist};
use crate::quad;
use crate::surfaces::Profile;
use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FareyFraction {
    pub a: u64,
    pub q: u64,
}

impl FareyFraction {
    pub fn new(a: u64, q: u64) -> Result<Self> {
        if q < 1 || a < 1 || a > q || a.gcd(&q) != 1 {
            return Err(Error::InvalidParameter(format!("{a}/{q} is not a reduced fraction with 1 <= a <= q")));
        }
        Ok(FareyFraction { a, q })
    }

    pub fn value(&self) -> f64 {
        self.a as f64 / self.q as f64
    }
}

/// Last continued-fraction convergent of alpha (mod 1) with denominator at
/// most qmax, and its torus distance to alpha.
pub fn best_rational(alpha: f64, qmax: u64) -> (FareyFraction, f64) {
    let qmax = qmax.max(1);
    let x = alpha.rem_euclid(1.0);
    let scale = 18_446_744_073_709_551_616.0; // 2^64
    let mut num = (x * scale).round() as u128;
    let mut den: u128 = 1 << 64;
    if num >= den {
        num = 0;
    }
    let (mut h2, mut h1) = (0u128, 1u128);
    let (mut k2, mut k1) = (1u128, 0u128);
    let (mut best_h, mut best_k) = (0u128, 1u128);
    loop {
        let a = num / den;
        let h = a * h1 + h2;
        let k = a * k1 + k2;
        if k > qmax as u128 {
            break;
        }
        best_h = h;
        best_k = k;
        let rem = num - a * den;
        if rem == 0 {
            break;
        }
        (h2, h1, k2, k1) = (h1, h, k1, k);
        num = den;
        den = rem;
    }
    let q = best_k as u64;
    let a = (best_h as u64) % q;
    let frac = FareyFraction { a: if a == 0 { q } else { a }, q };
    (frac, torus_dist(alpha - best_h as f64 / q as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ArcClass {
    Major { a: u64, q: u64 },
    Minor,
}

/// Major(a, q) iff some q <= Q, (a, q) = 1 has ||alpha - a/q|| <= Q/N^k;
/// ties go to the smallest q, then the smallest a.
pub fn classify_arc(alpha: f64, q_level: u64, n: u64, k: u32) -> ArcClass {
    let radius = q_level as f64 / (n as f64).powi(k as i32);
    if radius >= 0.5 {
        return ArcClass::Major { a: 1, q: 1 };
    }
    let x = alpha.rem_euclid(1.0);
    for q in 1..=q_level {
        let qf = q as f64;
        let lo = (qf * (x - radius)).ceil() as i64 - 1;
        let hi = (qf * (x + radius)).floor() as i64 + 1;
        let mut best: Option<u64> = None;
        for a in lo..=hi {
            let ar = a.rem_euclid(q as i64) as u64;
            let ar = if ar == 0 { q } else { ar };
            if ar.gcd(&q) != 1 {
                continue;
            }
            if torus_dist(x - a as f64 / qf) <= radius {
                best = Some(best.map_or(ar, |b| b.min(ar)));
            }
        }
        if let Some(a) = best {
            return ArcClass::Major { a, q };
        }
    }
    ArcClass::Minor
}

/// Memoized Fourier transform of the bump kappa.
#[derive(Debug, Default)]
struct KappaCache {
    map: Mutex<HashMap<u64, f64>>,
}

/// The arc mollifier family for given (k, N, c1, kappa).
#[derive(Debug)]
pub struct MollifierFamily {
    pub k: u32,
    pub n: u64,
    pub c1: f64,
    pub kappa: Profile,
    pub n1: u64,
    pub ntilde: u64,
    /// N^{k-1}
    pub m: u64,
    cache: KappaCache,
}

impl Clone for MollifierFamily {
    fn clone(&self) -> Self {
        MollifierFamily { cache: KappaCache::default(), ..*self }
    }
}

impl MollifierFamily {
    /// Builds the family and verifies interval disjointness exactly.
    pub fn new(k: u32, n: u64, c1: f64, kappa: Profile) -> Result<Self> {
        let fam = Self::new_unverified(k, n, c1, kappa)?;
        if !disjointness_check(&fam) {
            return Err(Error::InvalidParameter(format!(
                "major-arc intervals overlap for k={k}, N={n}, c1={c1}; choose a smaller c1"
            )));
        }
        Ok(fam)
    }

    /// Builds the family without the disjointness requirement.
    pub fn new_unverified(k: u32, n: u64, c1: f64, kappa: Profile) -> Result<Self> {
        if k < 2 || n < 2 {
            return Err(Error::InvalidParameter(format!("need k >= 2 and N >= 2, got k={k}, N={n}")));
        }
        if !(c1 > 0.0 && c1 <= 1.0) {
            return Err(Error::InvalidParameter(format!("c1 must lie in (0, 1], got {c1}")));
        }
        let n1 = (c1 * n as f64).floor() as u64;
        if n1 < 1 {
            return Err(Error::InvalidParameter(format!("N1 = floor(c1 N) = 0 for c1={c1}, N={n}")));
        }
        let m = n.checked_pow(k - 1).filter(|&m| m < 1 << 52).ok_or_else(|| Error::OverflowRisk("N^{k-1} too large".into()))?;
        let ntilde = 1u64 << (63 - n.leading_zeros());
        Ok(MollifierFamily { k, n, c1, kappa, n1, ntilde, m, cache: KappaCache::default() })
    }

    pub fn log_ntilde(&self) -> u32 {
        self.ntilde.trailing_zeros()
    }

    /// Dyadic levels Q <= N1.
    pub fn q_levels(&self) -> Vec<u64> {
        let mut v = Vec::new();
        let mut q = 1;
        while q <= self.n1 {
            v.push(q);
            q *= 2;
        }
        v
    }

    /// All (Q, s) with Q dyadic <= N1 and Q <= 2^s <= Ntilde.
    pub fn levels(&self) -> Vec<(u64, u32)> {
        let top = self.log_ntilde();
        let mut out = Vec::new();
        for q in self.q_levels() {
            for s in q.trailing_zeros()..=top {
                out.push((q, s));
            }
        }
        out
    }

    /// Reduced fractions a/q with q in [Q, 2Q), 1 <= a <= q.
    pub fn fractions(&self, q_level: u64) -> Vec<(u64, u64)> {
        let mut v = Vec::new();
        for q in q_level..2 * q_level {
            for a in 1..=q {
                if a.gcd(&q) == 1 {
                    v.push((a, q));
                }
            }
        }
        v
    }

    fn check_level(&self, q_level: u64, s: u32) -> Result<()> {
        if !q_level.is_power_of_two() || q_level > self.n1 {
            return Err(Error::LevelOutOfRange(format!("Q={q_level} must be dyadic and <= N1={}", self.n1)));
        }
        if s > 62 || (1u64 << s) < q_level || (1u64 << s) > self.ntilde {
            return Err(Error::LevelOutOfRange(format!("need Q={q_level} <= 2^s <= Ntilde={} (s={s})", self.ntilde)));
        }
        Ok(())
    }

    /// Half-width of the support of phi^(s).
    pub fn support_halfwidth(&self, s: u32) -> f64 {
        2.0 / ((1u64 << s) as f64 * self.m as f64)
    }

    fn kappa_hat(&self, xi: f64) -> f64 {
        let key = xi.abs().to_bits();
        if let Some(v) = self.cache.map.lock().unwrap().get(&key) {
            return *v;
        }
        let v = kappa_transform(self.kappa, xi);
        self.cache.map.lock().unwrap().insert(key, v);
        v
    }

    /// Transform of gamma^(s) = kappa - kappa(2.), or kappa at the top level.
    pub fn gamma_hat(&self, s: u32, xi: f64) -> f64 {
        if 1u64 << s == self.ntilde {
            self.kappa_hat(xi)
        } else {
            self.kappa_hat(xi) - 0.5 * self.kappa_hat(0.5 * xi)
        }
    }
}

/// kappa-hat(xi) = 2 * integral over [0, 2] of kappa(x) cos(2 pi xi x).
pub fn kappa_transform(kappa: Profile, xi: f64) -> f64 {
    let per_unit = match kappa {
        Profile::QuinticPlateau => (xi.abs().ceil() as usize).max(1),
        Profile::ExpBump => (2.0 * xi.abs()).ceil().max(8.0) as usize,
    };
    let w = std::f64::consts::TAU * xi;
    let f = |x: f64| kappa.eval(x) * (w * x).cos();
    2.0 * (quad::gl_panels(f, 0.0, 1.0, per_unit) + quad::gl_panels(f, 1.0, 2.0, per_unit))
}

/// phi^(s)(x).
pub fn phi_s(fam: &MollifierFamily, s: u32, x: f64) -> Result<f64> {
    if s > 62 || (1u64 << s) > fam.ntilde {
        return Err(Error::LevelOutOfRange(format!("need 1 <= 2^s <= Ntilde={} (s={s})", fam.ntilde)));
    }
    Ok(phi_unchecked(fam, s, x))
}

fn phi_unchecked(fam: &MollifierFamily, s: u32, x: f64) -> f64 {
    let t = (1u64 << s) as f64 * fam.m as f64 * x;
    if 1u64 << s == fam.ntilde {
        fam.kappa.eval(t)
    } else {
        fam.kappa.eval(t) - fam.kappa.eval(2.0 * t)
    }
}

/// Signed offsets alpha - a/q for the two candidate numerators around q*alpha.
fn candidates(alpha: f64, q: u64) -> [(u64, f64); 2] {
    let x = alpha.rem_euclid(1.0);
    let qf = q as f64;
    let a0 = (qf * x).floor();
    [(a0 as u64, x - a0 / qf), (a0 as u64 + 1, x - (a0 + 1.0) / qf)]
}

/// Phi_{Q,s}(alpha).
pub fn arc_mollifier(fam: &MollifierFamily, q_level: u64, s: u32, alpha: f64) -> Result<f64> {
    fam.check_level(q_level, s)?;
    let h = fam.support_halfwidth(s);
    let mut total = 0.0;
    for q in q_level..2 * q_level {
        for (a, off) in candidates(alpha, q) {
            if off.abs() < h && a.gcd(&q) == 1 {
                total += phi_unchecked(fam, s, off);
            }
        }
    }
    Ok(total)
}

/// (lambda, rho) at alpha, lambda in collapsed form.
pub fn lambda_rho(fam: &MollifierFamily, alpha: f64) -> (f64, f64) {
    let mut lam = 0.0;
    for q_level in fam.q_levels() {
        let scale = q_level as f64 * fam.m as f64;
        let h = 2.0 / scale;
        for q in q_level..2 * q_level {
            for (a, off) in candidates(alpha, q) {
                if off.abs() < h && a.gcd(&q) == 1 {
                    lam += fam.kappa.eval(scale * off);
                }
            }
        }
    }
    (lam, 1.0 - lam)
}

/// max over samples of |sum_{Q <= 2^s <= Ntilde} phi^(s)(x) - kappa(Q N^{k-1} x)|.
pub fn partition_check(fam: &MollifierFamily, q_level: u64, samples: &[f64]) -> Result<f64> {
    if !q_level.is_power_of_two() || q_level > fam.ntilde {
        return Err(Error::LevelOutOfRange(format!("Q={q_level} must be dyadic and <= Ntilde={}", fam.ntilde)));
    }
    let s0 = q_level.trailing_zeros();
    let top = fam.log_ntilde();
    let scale = q_level as f64 * fam.m as f64;
    Ok(samples.iter().fold(0.0f64, |acc, &x| {
        let sum: f64 = (s0..=top).map(|s| phi_unchecked(fam, s, x)).sum();
        acc.max((sum - fam.kappa.eval(scale * x)).abs())
    }))
}

/// Sum over q in [Q, 2Q) of c_q(n).
pub fn ramanujan_block(q_level: u64, n: i64) -> i64 {
    (q_level..2 * q_level).map(|q| ramanujan_sum(q, n)).sum()
}

/// Closed-form Phi_{Q,s}-hat(n) (real, since Phi is even).
pub fn mollifier_fourier(fam: &MollifierFamily, q_level: u64, s: u32, n: i64) -> Result<f64> {
    fam.check_level(q_level, s)?;
    let scale = (1u64 << s) as f64 * fam.m as f64;
    Ok(ramanujan_block(q_level, n) as f64 / scale * fam.gamma_hat(s, n as f64 / scale))
}

/// Phi_{Q,s}-hat(n) by physical-space quadrature of `arc_mollifier` over
/// each fraction's support inside the fundamental domain.
pub fn mollifier_fourier_quadrature(fam: &MollifierFamily, q_level: u64, s: u32, n: i64) -> Result<f64> {
    fam.check_level(q_level, s)?;
    let unit = 1.0 / ((1u64 << s) as f64 * fam.m as f64);
    let h = 2.0 * unit;
    let knots = [-h, -unit, -0.5 * unit, 0.0, 0.5 * unit, unit, h];
    let mut total = Complex64::new(0.0, 0.0);
    for (a, q) in fam.fractions(q_level) {
        let center = a as f64 / q as f64;
        let mut local = Complex64::new(0.0, 0.0);
        for w in knots.windows(2) {
            let panels = ((n.unsigned_abs() as f64 * (w[1] - w[0]) * 2.0).ceil() as usize).max(1);
            let f = |x: f64| {
                let v = arc_mollifier(fam, q_level, s, center + x).unwrap_or(0.0);
                crate::numeric::e(-(n as f64) * x) * v
            };
            local += quad::gl_panels(f, w[0], w[1], panels);
        }
        total += e_rat(-((a as i128 * n as i128).rem_euclid(q as i128) as i64), q as i64) * local;
    }
    Ok(total.re)
}

/// lambda-hat(n) from the level sum of closed forms.
pub fn lambda_fourier(fam: &MollifierFamily, n: i64) -> f64 {
    fam.levels().iter().map(|&(q, s)| mollifier_fourier(fam, q, s, n).unwrap()).sum()
}

/// lambda-hat(n) from the collapsed form sum_Q (sum c_q(n)) (QM)^{-1} kappa-hat(n/(QM)).
pub fn lambda_fourier_collapsed(fam: &MollifierFamily, n: i64) -> f64 {
    fam.q_levels()
        .iter()
        .map(|&q| {
            let scale = q as f64 * fam.m as f64;
            ramanujan_block(q, n) as f64 / scale * fam.kappa_hat(n as f64 / scale)
        })
        .sum()
}

pub const DEFAULT_RHO_RANGE_EXPONENT: u32 = 2;

/// rho-hat(n) = 1_{n=0} - lambda-hat(n), for |n| <= A N^A.
pub fn rho_fourier(fam: &MollifierFamily, n: i64, a_exp: u32) -> Result<f64> {
    let limit = (a_exp as f64) * (fam.n as f64).powi(a_exp as i32);
    if n.unsigned_abs() as f64 > limit {
        return Err(Error::RangeExceeded(format!("|n|={} exceeds A N^A = {limit}", n.unsigned_abs())));
    }
    Ok(if n == 0 { 1.0 } else { 0.0 } - lambda_fourier(fam, n))
}

/// Integral of lambda over the fundamental domain by physical quadrature.
pub fn lambda_integral_quadrature(fam: &MollifierFamily) -> f64 {
    let mut total = 0.0;
    for q_level in fam.q_levels() {
        let unit = 1.0 / (q_level as f64 * fam.m as f64);
        let knots = [-2.0 * unit, -unit, 0.0, unit, 2.0 * unit];
        for (a, q) in fam.fractions(q_level) {
            let c = a as f64 / q as f64;
            for w in knots.windows(2) {
                total += quad::gl_panels(|x| lambda_rho(fam, c + x).0, w[0], w[1], 1);
            }
        }
    }
    total
}

/// Exact check that all intervals a/q +- 2/(Q N^{k-1}) are pairwise disjoint
/// on the torus. Returns false if exact arithmetic would overflow.
pub fn disjointness_check(fam: &MollifierFamily) -> bool {
    // (a, q, Q)
    let mut iv: Vec<(i128, i128, i128)> = Vec::new();
    for q_level in fam.q_levels() {
        for (a, q) in fam.fractions(q_level) {
            iv.push((a as i128, q as i128, q_level as i128));
        }
    }
    iv.sort_by(|x, y| (x.0 * y.1).cmp(&(y.0 * x.1)));
    let m = fam.m as i128;
    // right end of x < left end of y (shifted by `shift` turns)
    let separated = |x: &(i128, i128, i128), y: &(i128, i128, i128), shift: i128| -> Option<bool> {
        // a/q + 2/(Q m) < (a' + shift q')/q' - 2/(Q' m), scaled by q q' Q Q' m
        let (a, q, bq) = *x;
        let (a2, q2, bq2) = *y;
        let lhs = a.checked_mul(q2)?.checked_mul(bq)?.checked_mul(bq2)?.checked_mul(m)?.checked_add(2 * q * q2 * bq2)?;
        let rhs = (a2 + shift * q2).checked_mul(q)?.checked_mul(bq)?.checked_mul(bq2)?.checked_mul(m)?.checked_sub(2 * q * q2 * bq)?;
        Some(lhs < rhs)
    };
    for w in iv.windows(2) {
        if separated(&w[0], &w[1], 0) != Some(true) {
            return false;
        }
    }
    if iv.len() > 1 {
        return separated(iv.last().unwrap(), &iv[0], 1) == Some(true);
    }
    true
}

/// CSV rows (Q, s, a, q, center, halfwidth) of the arc decomposition.
pub fn write_arc_csv<W: Write>(fam: &MollifierFamily, mut w: W) -> std::io::Result<()> {
    writeln!(w, "Q,s,a,q,center,halfwidth")?;
    for (ql, s) in fam.levels() {
        let h = fam.support_halfwidth(s);
        for (a, q) in fam.fractions(ql) {
            writeln!(w, "{ql},{s},{a},{q},{},{h}", a as f64 / q as f64)?;
        }
    }
    Ok(())
}

/// CSV rows (alpha, lambda, rho) on a uniform sample of the fundamental domain.
pub fn write_profile_csv<W: Write>(fam: &MollifierFamily, points: usize, mut w: W) -> std::io::Result<()> {
    writeln!(w, "alpha,lambda,rho")?;
    let start = 1.0 / (2.0 * fam.n1 as f64);
    for i in 1..=points {
        let al = start + i as f64 / points as f64;
        let (l, r) = lambda_rho(fam, al);
        writeln!(w, "{al},{l},{r}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam64() -> MollifierFamily {
        MollifierFamily::new(3, 64, 0.125, Profile::QuinticPlateau).unwrap()
    }

    #[test]
    fn best_rational_examples() {
        let (f, e) = best_rational(0.5, 10);
        assert_eq!((f.a, f.q), (1, 2));
        assert_eq!(e, 0.0);
        let (f, e) = best_rational(0.3333, 100);
        assert_eq!((f.a, f.q), (1, 3));
        assert!(e <= 1.0 / 300.0 && (e - 3.333e-5).abs() < 1e-7);
        let (f, e) = best_rational(0.6180339887, 50);
        assert_eq!((f.a, f.q), (21, 34));
        assert!(e <= 1.0 / (34.0 * 50.0));
        let (f, _) = best_rational(0.0, 10);
        assert_eq!((f.a, f.q), (1, 1));
        let (f, _) = best_rational(0.9999, 10);
        assert_eq!((f.a, f.q), (1, 1));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_arc(2.0 / 7.0, 8, 16, 3), ArcClass::Major { a: 2, q: 7 });
        assert_eq!(classify_arc(0.123, 64, 4, 3), ArcClass::Major { a: 1, q: 1 });
        let (q_level, n) = (3u64, 32u64);
        let al = 0.5 + 2.0 * q_level as f64 / (n as f64).powi(3);
        assert_eq!(classify_arc(al, q_level, n, 3), ArcClass::Minor);
        // tie handling: alpha = 0 is within every arc around 0 = 1/1
        assert_eq!(classify_arc(0.0, 5, 10, 3), ArcClass::Major { a: 1, q: 1 });
    }

    #[test]
    fn phi_examples() {
        let f = fam64();
        assert_eq!(phi_s(&f, 0, 0.0).unwrap(), 0.0);
        assert_eq!(phi_s(&f, f.log_ntilde(), 0.0).unwrap(), 1.0);
        let s = 2;
        let x = 1.5 / ((1u64 << s) as f64 * f.m as f64);
        assert!((phi_s(&f, s, x).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(phi_s(&f, 7, 0.0), Err(Error::LevelOutOfRange(_))));
    }

    #[test]
    fn mollifier_examples() {
        let f = fam64();
        let top = f.log_ntilde();
        assert_eq!(arc_mollifier(&f, 4, top, 3.0 / 5.0).unwrap(), 1.0);
        let al = 0.5 / ((1u64 << top) as f64 * f.m as f64);
        assert_eq!(arc_mollifier(&f, 1, top, al).unwrap(), 1.0);
        assert_eq!(arc_mollifier(&f, 1, top, 0.3).unwrap(), 0.0);
        assert!(matches!(arc_mollifier(&f, 3, 3, 0.1), Err(Error::LevelOutOfRange(_))));
        assert!(matches!(arc_mollifier(&f, 16, 5, 0.1), Err(Error::LevelOutOfRange(_))));
    }

    #[test]
    fn lambda_core_and_far() {
        let f = fam64();
        let (l, r) = lambda_rho(&f, 2.0 / 7.0);
        assert_eq!((l, r), (1.0, 0.0));
        let (l, r) = lambda_rho(&f, 0.5 + 1.0 / 16.0 + 0.0123);
        assert!(l == 0.0 && r == 1.0);
    }

    #[test]
    fn disjointness_examples() {
        assert!(disjointness_check(&fam64()));
        let bad = MollifierFamily::new_unverified(3, 8, 1.0, Profile::QuinticPlateau).unwrap();
        assert!(!disjointness_check(&bad));
        assert!(MollifierFamily::new(3, 8, 1.0, Profile::QuinticPlateau).is_err());
        let single = MollifierFamily::new_unverified(3, 8, 0.125, Profile::QuinticPlateau).unwrap();
        assert_eq!(single.n1, 1);
        assert!(disjointness_check(&single));
    }

    #[test]
    fn kappa_mass() {
        assert!((kappa_transform(Profile::QuinticPlateau, 0.0) - 3.0).abs() < 1e-14);
        assert!((kappa_transform(Profile::ExpBump, 0.0) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn collapsed_lambda_matches_level_sum() {
        let f = fam64();
        for n in [0i64, 1, 7, 60, 511, 4096, 9999] {
            let a = lambda_fourier(&f, n);
            let b = lambda_fourier_collapsed(&f, n);
            assert!((a - b).abs() < 1e-12, "{n}: {a} {b}");
        }
    }

    #[test]
    fn rho_range() {
        let f = fam64();
        assert!(matches!(rho_fourier(&f, 10_000_000, 2), Err(Error::RangeExceeded(_))));
        let r0 = rho_fourier(&f, 0, 2).unwrap();
        assert!(r0 <= 1.0 && r0 > 0.9);
        let rq = 1.0 - lambda_integral_quadrature(&f);
        assert!((r0 - rq).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let f = fam64();
        for &(ql, s) in &[(1u64, 0u32), (1, 6), (2, 3), (4, 2), (8, 5), (8, 3)] {
            let mass = mollifier_fourier(&f, ql, s, 0).unwrap();
            for n in [0i64, 1, -3, 12, 100, 777, 4000] {
                let a = mollifier_fourier(&f, ql, s, n).unwrap();
                let b = mollifier_fourier_quadrature(&f, ql, s, n).unwrap();
                assert!((a - b).abs() <= 1e-9 * mass, "Q={ql} s={s} n={n}: {a} {b}");
            }
        }
    }
}
