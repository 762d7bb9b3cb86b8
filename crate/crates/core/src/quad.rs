//! Gauss-Legendre panels and adaptive Gauss-Kronrod quadrature.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

pub trait QuadValue: Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

pub const GL_ORDER: usize = 20;

pub fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Composite 20-point Gauss-Legendre over `panels` equal panels of [a, b].
pub fn gl_panels<T: QuadValue, F: FnMut(f64) -> T>(mut f: F, a: f64, b: f64, panels: usize) -> T {
    let (x, w) = gl20();
    let h = (b - a) / panels as f64;
    let mut total = T::default();
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let mut acc = T::default();
        for (xi, wi) in x.iter().zip(w) {
            acc = acc + f(mid + 0.5 * h * xi) * *wi;
        }
        total = total + acc * (0.5 * h);
    }
    total
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).magnitude())
}

/// Adaptive Gauss-Kronrod (7/15) by recursive bisection. Fails if any branch
/// needs more than `max_depth` bisections to meet its share of `tol`.
pub fn adaptive<T: QuadValue, F: FnMut(f64) -> T>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<T> {
    fn rec<T: QuadValue, F: FnMut(f64) -> T>(
        f: &mut F,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
        max_depth: u32,
        floor: f64,
        whole: (T, f64),
    ) -> Result<T> {
        let (val, err) = whole;
        if err <= tol.max(floor) || (b - a).abs() < 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            return Ok(val);
        }
        if depth >= max_depth {
            return Err(Error::QuadratureFailure(format!(
                "adaptive refinement exceeded depth {max_depth} on [{a}, {b}] (error estimate {err:e})"
            )));
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        let l = rec(f, a, m, 0.5 * tol, depth + 1, max_depth, floor, left)?;
        let r = rec(f, m, b, 0.5 * tol, depth + 1, max_depth, floor, right)?;
        Ok(l + r)
    }
    let whole = gk15(&mut f, a, b);
    // local errors below rounding level of the whole integral are accepted
    let floor = 1e-15 * whole.0.magnitude();
    rec(&mut f, a, b, tol, 0, max_depth, floor, whole)
}

/// Adaptive integration over consecutive breakpoints.
pub fn adaptive_pieces<T: QuadValue, F: FnMut(f64) -> T>(mut f: F, breaks: &[f64], tol: f64, max_depth: u32) -> Result<T> {
    let mut total = T::default();
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total = total + adaptive(&mut f, w[0], w[1], tol / pieces, max_depth)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_high_degree() {
        let (x, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // integral of x^38 over [-1,1] = 2/39
        let v: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(38) * b).sum();
        assert!((v - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn panels_integrate_oscillation() {
        let v: Complex64 = gl_panels(|x| crate::numeric::e(7.25 * x), 0.0, 1.0, 8);
        let exact = (crate::numeric::e(7.25) - 1.0) / Complex64::new(0.0, std::f64::consts::TAU * 7.25);
        assert!((v - exact).norm() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kink() {
        let v: f64 = adaptive(|x: f64| x.abs().sqrt(), -1.0, 1.0, 1e-10, 30).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_reports_failure() {
        let r: Result<f64> = adaptive(|x: f64| if x > 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, 1e-300, 5);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
