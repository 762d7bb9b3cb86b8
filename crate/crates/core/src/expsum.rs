//! Extension operators, the smoothed kernel and Weyl sums, evaluated directly
//! or on uniform torus grids by folding plus FFT.

use crate::error::{Error, Result};
use crate::numeric::{e, e_int, frac_mul, pairwise_sum_by, Rng};
use crate::surfaces::{for_each_box_point, SurfaceSystem, WeightProfile};
use num_complex::Complex64;
use rand::Rng as _;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const DEFAULT_BUDGET: usize = 1 << 27;
pub const BUDGET_ENV: &str = "CIRCLE_LAB_BUDGET";

/// Grid point budget, overridable through `CIRCLE_LAB_BUDGET`.
pub fn grid_budget() -> usize {
    std::env::var(BUDGET_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub dims: Vec<usize>,
    pub offsets: Vec<f64>,
}

impl TorusGrid {
    pub fn new(dims: Vec<usize>, offsets: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&m| m == 0) {
            return Err(Error::InvalidParameter(format!("grid sizes must be >= 1, got {dims:?}")));
        }
        if offsets.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!("{} offsets for {} dims", offsets.len(), dims.len())));
        }
        if offsets.iter().any(|o| !(0.0..1.0).contains(o)) {
            return Err(Error::InvalidParameter(format!("offsets must lie in [0,1), got {offsets:?}")));
        }
        Ok(TorusGrid { dims, offsets })
    }

    pub fn uniform(dims: Vec<usize>) -> Result<Self> {
        let r = dims.len();
        TorusGrid::new(dims, vec![0.0; r])
    }

    pub fn r(&self) -> usize {
        self.dims.len()
    }

    /// Total number of points, `None` on overflow.
    pub fn size(&self) -> Option<usize> {
        self.dims.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m))
    }

    pub fn check_budget(&self, budget: usize) -> Result<usize> {
        match self.size() {
            Some(s) if s <= budget => Ok(s),
            _ => Err(Error::BudgetExceeded(format!("grid {:?} exceeds budget of {budget} points", self.dims))),
        }
    }

    /// Multi-index of the flat row-major index.
    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.r()];
        for i in (0..self.r()).rev() {
            out[i] = idx % self.dims[i];
            idx /= self.dims[i];
        }
        out
    }

    pub fn flatten(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.dims).fold(0, |acc, (&j, &m)| acc * m + j)
    }

    /// Torus coordinates of a flat index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.unflatten(idx)
            .iter()
            .zip(&self.dims)
            .zip(&self.offsets)
            .map(|((&j, &m), &o)| j as f64 / m as f64 + o)
            .collect()
    }

    pub fn doubled(&self) -> TorusGrid {
        TorusGrid { dims: self.dims.iter().map(|m| 2 * m).collect(), offsets: self.offsets.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumKind {
    Extension,
    Kernel,
    Weyl,
    Piece,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: SumKind,
    #[serde(default)]
    pub sys: Option<SurfaceSystem>,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub coeff_l1: Option<f64>,
    #[serde(default)]
    pub coeff_l2: Option<f64>,
    #[serde(default)]
    pub note: Option<String>,
}

impl Provenance {
    pub fn new(kind: SumKind) -> Self {
        Provenance { kind, sys: None, n: None, coeff_l1: None, coeff_l2: None, note: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
    pub provenance: Provenance,
}

const TABLE_MAGIC: &[u8; 8] = b"CLFTAB01";

#[derive(Serialize, Deserialize)]
struct TableHeader {
    dims: Vec<usize>,
    offsets: Vec<f64>,
    provenance: Provenance,
}

impl FourierTable {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Binary layout: magic, u64 header length, JSON header, then the values
    /// as little-endian (re, im) binary64 pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = TableHeader { dims: self.grid.dims.clone(), offsets: self.grid.offsets.clone(), provenance: self.provenance.clone() };
        let json = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
        w.write_all(TABLE_MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != TABLE_MAGIC {
            return Err(bad("not a Fourier table file"));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let h: TableHeader = serde_json::from_slice(&json).map_err(|e| bad(&e.to_string()))?;
        let grid = TorusGrid::new(h.dims, h.offsets).map_err(|e| bad(&e.to_string()))?;
        let n = grid.size().ok_or_else(|| bad("grid too large"))?;
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 16];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            values.push(Complex64::new(re, im));
        }
        Ok(FourierTable { grid, values, provenance: h.provenance })
    }

    /// CSV of grid coordinates and |value|.
    pub fn write_abs_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let cols: Vec<String> = (0..self.grid.r()).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},abs", cols.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            let coords: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{},{}", coords.join(","), v.norm())?;
        }
        Ok(())
    }
}

/// Complex weights a(n) on lattice points of [-N, N]^d, sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSequence {
    d: usize,
    n: u64,
    points: Vec<i64>,
    values: Vec<Complex64>,
    l2: f64,
}

impl CoefficientSequence {
    pub fn from_entries(d: usize, n: u64, mut entries: Vec<(Vec<i64>, Complex64)>) -> Result<Self> {
        let lim = n as i64;
        for (p, _) in &entries {
            if p.len() != d {
                return Err(Error::DimensionMismatch(format!("point {p:?} is not {d}-dimensional")));
            }
            if p.iter().any(|&x| x.abs() > lim) {
                return Err(Error::InvalidParameter(format!("point {p:?} outside [-{n},{n}]^{d}")));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate lattice point in coefficient sequence".into()));
        }
        let mut points = Vec::with_capacity(entries.len() * d);
        let mut values = Vec::with_capacity(entries.len());
        for (p, v) in entries {
            points.extend_from_slice(&p);
            values.push(v);
        }
        let l2 = pairwise_sum_by(values.len(), |i| values[i].norm_sqr()).sqrt();
        Ok(CoefficientSequence { d, n, points, values, l2 })
    }

    /// a(n) = f(n) over the natural support of `sys` at radius n.
    pub fn from_fn<F: FnMut(&[i64]) -> Complex64>(sys: &SurfaceSystem, n: u64, mut f: F) -> Result<Self> {
        let (lo, hi) = sys.support_bounds(n);
        let mut entries = Vec::new();
        for_each_box_point(sys.d(), lo, hi, |p| entries.push((p.to_vec(), f(p))));
        CoefficientSequence::from_entries(sys.d(), n, entries)
    }

    pub fn all_ones(sys: &SurfaceSystem, n: u64) -> Result<Self> {
        Self::from_fn(sys, n, |_| Complex64::new(1.0, 0.0))
    }

    /// Random complex coefficients normalized to unit l2 norm.
    pub fn random_unit(sys: &SurfaceSystem, n: u64, rng: &mut Rng) -> Result<Self> {
        let raw = Self::from_fn(sys, n, |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))?;
        let s = 1.0 / raw.l2;
        let entries = raw.iter().map(|(p, v)| (p.to_vec(), v * s)).collect();
        Self::from_entries(raw.d, n, entries)
    }

    /// Checks the family-specific support restriction.
    pub fn check_family(&self, sys: &SurfaceSystem) -> Result<()> {
        if self.d != sys.d() {
            return Err(Error::DimensionMismatch(format!("coefficients are {}-dimensional, system has d={}", self.d, sys.d())));
        }
        if let SurfaceSystem::KthPowers { .. } = sys {
            if self.points.iter().any(|&x| x < 1) {
                return Err(Error::InvalidParameter("k-th power coefficients must be supported on [1,N]".into()));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn point(&self, i: usize) -> &[i64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }
    pub fn value(&self, i: usize) -> Complex64 {
        self.values[i]
    }
    pub fn iter(&self) -> impl Iterator<Item = (&[i64], Complex64)> + '_ {
        (0..self.len()).map(move |i| (self.point(i), self.values[i]))
    }
    pub fn l2_norm(&self) -> f64 {
        self.l2
    }
    pub fn l1_norm(&self) -> f64 {
        pairwise_sum_by(self.len(), |i| self.values[i].norm())
    }
    pub fn is_all_ones(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::new(1.0, 0.0))
    }
    pub fn conj(&self) -> Self {
        CoefficientSequence { values: self.values.iter().map(|v| v.conj()).collect(), ..self.clone() }
    }
}

/// F_a(alpha) by direct pairwise-reduced summation.
pub fn eval_extension(a: &CoefficientSequence, sys: &SurfaceSystem, alpha: &[f64]) -> Result<Complex64> {
    if a.d() != sys.d() {
        return Err(Error::DimensionMismatch(format!("coefficients are {}-dimensional, system has d={}", a.d(), sys.d())));
    }
    if alpha.len() != sys.r() {
        return Err(Error::DimensionMismatch(format!("alpha has {} coordinates, system has r={}", alpha.len(), sys.r())));
    }
    let mut imgs = vec![0i64; a.len() * sys.r()];
    for (i, chunk) in imgs.chunks_mut(sys.r()).enumerate() {
        sys.map_into(a.point(i), chunk)?;
    }
    let r = sys.r();
    Ok(pairwise_sum_by(a.len(), |i| {
        let ph: f64 = (0..r).map(|j| frac_mul(imgs[i * r + j], alpha[j])).sum();
        a.value(i) * e(ph)
    }))
}

fn pow_frac(n: i64, k: u32, alpha: f64) -> f64 {
    match n.checked_pow(k) {
        Some(m) => frac_mul(m, alpha),
        None => {
            let m = (n as f64).powi(k as i32) * alpha;
            m - m.round()
        }
    }
}

/// T(alpha, theta) = sum over |n| <= 2N of omega(n) e(alpha n^k + theta n).
pub fn eval_weyl(w: &WeightProfile, k: u32, alpha: f64, theta: f64) -> Complex64 {
    let two_n = 2 * w.n as i64;
    pairwise_sum_by((2 * two_n + 1) as usize, |i| {
        let n = i as i64 - two_n;
        e(pow_frac(n, k, alpha) + frac_mul(n, theta)) * w.omega(n as f64)
    })
}

/// T(a/q + beta, theta) with the rational part of the phase reduced exactly.
pub fn eval_weyl_rational(w: &WeightProfile, k: u32, a: i64, q: i64, beta: f64, theta: f64) -> Complex64 {
    let two_n = 2 * w.n as i64;
    pairwise_sum_by((2 * two_n + 1) as usize, |i| {
        let n = i as i64 - two_n;
        let nk = (n as i128).pow(k);
        let rat = ((a as i128 * nk).rem_euclid(q as i128)) as f64 / q as f64;
        let beta_part = nk as f64 * beta;
        e(rat + (beta_part - beta_part.round()) + frac_mul(n, theta)) * w.omega(n as f64)
    })
}

/// F(alpha, theta) = prod_i T(alpha, theta_i). For k-th powers theta is empty
/// and F(alpha) = T(alpha, 0).
pub fn eval_kernel(w: &WeightProfile, sys: &SurfaceSystem, alpha: f64, theta: &[f64]) -> Result<Complex64> {
    match sys {
        SurfaceSystem::KParaboloid { d, k } => {
            if theta.len() != *d {
                return Err(Error::DimensionMismatch(format!("theta has {} coordinates, expected {d}", theta.len())));
            }
            Ok(theta.iter().map(|&t| eval_weyl(w, *k, alpha, t)).product())
        }
        SurfaceSystem::KthPowers { k } => {
            if !theta.is_empty() {
                return Err(Error::DimensionMismatch("k-th power kernel takes no theta".into()));
            }
            Ok(eval_weyl(w, *k, alpha, 0.0))
        }
        SurfaceSystem::MonomialCurve { .. } => Err(Error::UnsupportedFamily("kernel defined for paraboloids and k-th powers".into())),
    }
}

/// The same kernel by direct summation over [-2N, 2N]^d.
pub fn eval_kernel_direct(w: &WeightProfile, sys: &SurfaceSystem, alpha: f64, theta: &[f64]) -> Result<Complex64> {
    let pts = kernel_points(w, sys)?;
    let r = sys.r();
    // alpha is the last P coordinate for paraboloids and the only one for powers
    let mut coords = theta.to_vec();
    coords.push(alpha);
    if coords.len() != r {
        return Err(Error::DimensionMismatch("theta length does not match the system".into()));
    }
    Ok(pairwise_sum_by(pts.1.len(), |i| {
        let ph: f64 = (0..r).map(|j| frac_mul(pts.0[i * r + j], coords[j])).sum();
        e(ph) * pts.1[i]
    }))
}

/// Images P(n) and weights omega_d(n) for n in [-2N, 2N]^d with nonzero weight.
fn kernel_points(w: &WeightProfile, sys: &SurfaceSystem) -> Result<(Vec<i64>, Vec<Complex64>)> {
    if let SurfaceSystem::MonomialCurve { .. } = sys {
        return Err(Error::UnsupportedFamily("kernel defined for paraboloids and k-th powers".into()));
    }
    let two_n = 2 * w.n as i64;
    let (mut imgs, mut wts) = (Vec::new(), Vec::new());
    let mut buf = vec![0i64; sys.r()];
    let mut err = None;
    let mut xf = vec![0.0; sys.d()];
    for_each_box_point(sys.d(), -two_n, two_n, |p| {
        for (x, &pi) in xf.iter_mut().zip(p) {
            *x = pi as f64;
        }
        let wt = w.weight(&xf);
        if wt == 0.0 || err.is_some() {
            return;
        }
        // the power map on a single coordinate gives the k-th power image
        let res = match sys {
            SurfaceSystem::KthPowers { k } => (p[0] as i128)
                .checked_pow(*k)
                .filter(|v| v.abs() < 1 << 62)
                .map(|v| buf[0] = v as i64)
                .ok_or_else(|| Error::OverflowRisk("kernel image exceeds 2^62".into())),
            _ => sys.map_into(p, &mut buf),
        };
        match res {
            Ok(()) => {
                imgs.extend_from_slice(&buf);
                wts.push(Complex64::new(wt, 0.0));
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok((imgs, wts)),
    }
}

/// Folds weighted points into the grid, applying offset phases, then takes
/// the unnormalized inverse DFT so that entry j is sum_m b(m) e(m.j/M).
fn fold_and_transform(grid: &TorusGrid, imgs: &[i64], wts: &[Complex64]) -> Result<Vec<Complex64>> {
    let size = grid.check_budget(grid_budget())?;
    let r = grid.r();
    let mut b = vec![Complex64::new(0.0, 0.0); size];
    let any_offset = grid.offsets.iter().any(|&o| o != 0.0);
    for (i, &wt) in wts.iter().enumerate() {
        let p = &imgs[i * r..(i + 1) * r];
        let mut idx = 0usize;
        for j in 0..r {
            idx = idx * grid.dims[j] + p[j].rem_euclid(grid.dims[j] as i64) as usize;
        }
        let v = if any_offset {
            let ph: f64 = (0..r).map(|j| frac_mul(p[j], grid.offsets[j])).sum();
            wt * e(ph)
        } else {
            wt
        };
        b[idx] += v;
    }
    fft_nd(&mut b, &grid.dims, true);
    Ok(b)
}

/// In-place multidimensional DFT over a row-major array. `inverse` selects
/// the +2 pi i sign; neither direction is normalized.
pub fn fft_nd(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = dims.iter().product();
    for (ax, &m) in dims.iter().enumerate() {
        if m == 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
        let stride: usize = dims[ax + 1..].iter().product();
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let outer = total / (m * stride);
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * m * stride + s;
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * stride] = *v;
                }
            }
        }
    }
}

/// Samples F_a on the grid: values[j] = F_a(j/M + offsets).
pub fn grid_sample(a: &CoefficientSequence, sys: &SurfaceSystem, grid: &TorusGrid) -> Result<FourierTable> {
    a.check_family(sys)?;
    if grid.r() != sys.r() {
        return Err(Error::DimensionMismatch(format!("grid has r={}, system has r={}", grid.r(), sys.r())));
    }
    let r = sys.r();
    let mut imgs = vec![0i64; a.len() * r];
    for (i, chunk) in imgs.chunks_mut(r).enumerate() {
        sys.map_into(a.point(i), chunk)?;
    }
    let wts: Vec<Complex64> = (0..a.len()).map(|i| a.value(i)).collect();
    let values = fold_and_transform(grid, &imgs, &wts)?;
    let mut provenance = Provenance::new(SumKind::Extension);
    provenance.sys = Some(sys.clone());
    provenance.n = Some(a.n());
    provenance.coeff_l1 = Some(a.l1_norm());
    provenance.coeff_l2 = Some(a.l2_norm());
    Ok(FourierTable { grid: grid.clone(), values, provenance })
}

/// Samples the smoothed kernel F (weights omega_d over [-2N, 2N]^d).
/// Coordinates follow P: (theta_1..theta_d, alpha) for paraboloids.
pub fn kernel_grid_sample(w: &WeightProfile, sys: &SurfaceSystem, grid: &TorusGrid) -> Result<FourierTable> {
    if grid.r() != sys.r() {
        return Err(Error::GridMismatch(format!("grid has r={}, system has r={}", grid.r(), sys.r())));
    }
    let (imgs, wts) = kernel_points(w, sys)?;
    let values = fold_and_transform(grid, &imgs, &wts)?;
    let mut provenance = Provenance::new(SumKind::Kernel);
    provenance.sys = Some(sys.clone());
    provenance.n = Some(w.n);
    Ok(FourierTable { grid: grid.clone(), values, provenance })
}

/// Smallest grid with M_i >= 2 s extent_i + 1, exact for |F_a|^{2s}.
pub fn nyquist_grid(sys: &SurfaceSystem, n: u64, s: u32) -> Result<TorusGrid> {
    if s < 1 {
        return Err(Error::InvalidParameter("s must be >= 1".into()));
    }
    let dims = sys
        .frequency_extent(n)?
        .iter()
        .map(|&ext| {
            (ext as u128 * 2 * s as u128 + 1)
                .try_into()
                .map_err(|_| Error::BudgetExceeded("grid dimension overflows".into()))
        })
        .collect::<Result<Vec<usize>>>()?;
    let g = TorusGrid::uniform(dims)?;
    g.check_budget(grid_budget())?;
    Ok(g)
}

/// Direct evaluation of a table entry, used to probe FFT output.
pub fn probe_direct(a: &CoefficientSequence, sys: &SurfaceSystem, grid: &TorusGrid, idx: usize) -> Result<Complex64> {
    eval_extension(a, sys, &grid.point(idx))
}

/// e(m alpha) helper re-exported for callers assembling phases by hand.
pub fn phase(m: i64, alpha: f64) -> Complex64 {
    e_int(m, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng;
    use crate::surfaces::Profile;

    fn cubes() -> SurfaceSystem {
        SurfaceSystem::kth_powers(3).unwrap()
    }

    #[test]
    fn extension_small_cases() {
        let sys = cubes();
        let a = CoefficientSequence::all_ones(&sys, 2).unwrap();
        let v = eval_extension(&a, &sys, &[0.5]).unwrap();
        assert!(v.norm() < 1e-15);
        let z = eval_extension(&a, &sys, &[0.0]).unwrap();
        assert_eq!(z, Complex64::new(2.0, 0.0));
    }

    #[test]
    fn conjugation_symmetry() {
        let sys = SurfaceSystem::paraboloid(2, 3).unwrap();
        let mut g = rng(3);
        let a = CoefficientSequence::random_unit(&sys, 3, &mut g).unwrap();
        let al = [0.123, -0.77, 0.31];
        let lhs = eval_extension(&a, &sys, &al).unwrap().conj();
        let neg: Vec<f64> = al.iter().map(|x| -x).collect();
        let rhs = eval_extension(&a.conj(), &sys, &neg).unwrap();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn weyl_basic() {
        let w = WeightProfile::new(64, Profile::QuinticPlateau).unwrap();
        let t0 = eval_weyl(&w, 3, 0.0, 0.0);
        assert!(t0.re > 128.0 && t0.im.abs() < 1e-12);
        // brute-force two-sided sum at alpha = 1/2
        let th = eval_weyl(&w, 3, 0.5, 0.0);
        let mut brute = Complex64::new(0.0, 0.0);
        for n in -128i64..=128 {
            brute += Complex64::from_polar(w.omega(n as f64), std::f64::consts::PI * (n * n * n) as f64);
        }
        assert!(th.im.abs() < 1e-9 && (th - brute).norm() < 1e-9);
        let a = eval_weyl(&w, 3, 0.31, 0.17).conj();
        let b = eval_weyl(&w, 3, -0.31, -0.17);
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn kernel_product_matches_direct() {
        let w = WeightProfile::new(8, Profile::QuinticPlateau).unwrap();
        let sys = SurfaceSystem::paraboloid(2, 3).unwrap();
        let mut g = rng(11);
        for _ in 0..5 {
            let al: f64 = g.gen();
            let th = [g.gen::<f64>(), g.gen::<f64>()];
            let p = eval_kernel(&w, &sys, al, &th).unwrap();
            let d = eval_kernel_direct(&w, &sys, al, &th).unwrap();
            assert!((p - d).norm() <= 1e-12 * d.norm().max(1.0), "{p} {d}");
        }
        let f = eval_kernel(&w, &sys, 0.2, &[0.3, 0.3]).unwrap();
        let t = eval_weyl(&w, 3, 0.2, 0.3);
        assert!((f - t * t).norm() < 1e-10);
        let f0 = eval_kernel(&w, &sys, 0.0, &[0.0, 0.0]).unwrap();
        assert!((f0.re - w.mass().powi(2)).abs() < 1e-9);
        let curve = SurfaceSystem::monomial_curve(vec![1, 3]).unwrap();
        assert!(matches!(eval_kernel(&w, &curve, 0.0, &[0.0]), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn grid_matches_direct_all_families() {
        let mut g = rng(5);
        let systems = [
            (cubes(), 16u64),
            (SurfaceSystem::paraboloid(1, 3).unwrap(), 6),
            (SurfaceSystem::paraboloid(2, 2).unwrap(), 3),
            (SurfaceSystem::monomial_curve(vec![1, 2]).unwrap(), 10),
        ];
        for (sys, n) in systems {
            let a = CoefficientSequence::random_unit(&sys, n, &mut g).unwrap();
            let dims: Vec<usize> = sys.frequency_extent(n).unwrap().iter().map(|&e| (e as usize).min(300) + 7).collect();
            let offs: Vec<f64> = dims.iter().map(|_| g.gen_range(0.0..1.0)).collect();
            let grid = TorusGrid::new(dims, offs).unwrap();
            let t = grid_sample(&a, &sys, &grid).unwrap();
            let l1 = a.l1_norm();
            for _ in 0..20 {
                let idx = g.gen_range(0..t.values.len());
                let d = probe_direct(&a, &sys, &grid, idx).unwrap();
                assert!((t.values[idx] - d).norm() <= 1e-9 * l1, "{sys:?}");
            }
        }
    }

    #[test]
    fn parseval_and_single_point() {
        let sys = cubes();
        let a = CoefficientSequence::all_ones(&sys, 5).unwrap();
        let grid = TorusGrid::uniform(vec![251]).unwrap();
        let t = grid_sample(&a, &sys, &grid).unwrap();
        let mean: f64 = t.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / 251.0;
        assert!((mean - 5.0).abs() < 1e-9);
        let one = TorusGrid::new(vec![1], vec![0.25]).unwrap();
        let t1 = grid_sample(&a, &sys, &one).unwrap();
        let d = eval_extension(&a, &sys, &[0.25]).unwrap();
        assert!((t1.values[0] - d).norm() < 1e-12);
    }

    #[test]
    fn nyquist_examples() {
        assert_eq!(nyquist_grid(&cubes(), 4, 2).unwrap().dims, vec![257]);
        assert_eq!(nyquist_grid(&SurfaceSystem::paraboloid(1, 3).unwrap(), 4, 1).unwrap().dims, vec![9, 129]);
    }

    #[test]
    fn kernel_table_matches_pointwise() {
        let w = WeightProfile::new(4, Profile::QuinticPlateau).unwrap();
        let sys = SurfaceSystem::paraboloid(1, 3).unwrap();
        let grid = TorusGrid::uniform(vec![17, 1025]).unwrap();
        let t = kernel_grid_sample(&w, &sys, &grid).unwrap();
        for idx in [0usize, 5, 999, 17 * 1025 - 1, 8000] {
            let p = grid.point(idx);
            let v = eval_kernel(&w, &sys, p[1], &[p[0]]).unwrap();
            assert!((t.values[idx] - v).norm() < 1e-10 * w.mass());
        }
    }

    #[test]
    fn binary_roundtrip() {
        let sys = cubes();
        let a = CoefficientSequence::all_ones(&sys, 3).unwrap();
        let grid = TorusGrid::new(vec![55], vec![0.1]).unwrap();
        let t = grid_sample(&a, &sys, &grid).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        let back = FourierTable::read_binary(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn budget_is_enforced() {
        let sys = cubes();
        let a = CoefficientSequence::all_ones(&sys, 3).unwrap();
        let grid = TorusGrid::uniform(vec![1 << 14, 1 << 14]).unwrap();
        let sys2 = SurfaceSystem::monomial_curve(vec![1, 2]).unwrap();
        let a2 = CoefficientSequence::all_ones(&sys2, 3).unwrap();
        assert!(matches!(grid_sample(&a2, &sys2, &grid), Err(Error::BudgetExceeded(_))));
        assert!(matches!(grid_sample(&a, &sys, &grid), Err(Error::DimensionMismatch(_))));
    }
}
