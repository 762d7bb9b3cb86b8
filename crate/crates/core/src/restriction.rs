//! Moments, level sets, the Tomas-Stein functional, kernel decompositions
//! over the arc mollifiers, Weyl minor-arc scans, Poisson major-arc checks
//! and scaling fits.

use crate::arcs::{arc_mollifier, best_rational, lambda_fourier, lambda_rho, mollifier_fourier, mollifier_fourier_quadrature,
    lambda_integral_quadrature, FareyFraction, MollifierFamily};
use crate::arith::{gaussian_sums_all_b, Sumset, DEFAULT_OPS_BUDGET};
use crate::error::{Error, Result};
use crate::expsum::{
    eval_weyl_rational, fft_nd, grid_budget, grid_sample, kernel_grid_sample, nyquist_grid, CoefficientSequence,
    FourierTable, Provenance, SumKind, TorusGrid,
};
use crate::numeric::{e, frac_mul, linear_fit, pairwise_sum, pairwise_sum_by, rng, LinearFit, Rng};
use crate::quad::gl_panels;
use crate::surfaces::{exponent_table, rat_f64, weyl_tau, SurfaceSystem, WeightProfile};
use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    ExactEven,
    Quadrature,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub p: f64,
    pub value: f64,
    pub method: MomentMethod,
    /// exact count for a = 1 (even moments only)
    pub exact: Option<u128>,
    pub predicted_exponent: Option<f64>,
    pub fitted_slope: Option<f64>,
    pub refinement_delta: Option<f64>,
}

fn predicted(sys: Option<&SurfaceSystem>, p: f64) -> Option<f64> {
    sys.map(|s| s.d() as f64 * p / 2.0 - s.total_degree() as f64)
}

/// Integral of |F_a|^{2s} as the squared l2 norm of the s-fold weighted
/// sumset of a.
pub fn even_moment_exact(a: &CoefficientSequence, sys: &SurfaceSystem, s: u32) -> Result<MomentReport> {
    a.check_family(sys)?;
    let mut imgs = Vec::with_capacity(a.len());
    for (pt, _) in a.iter() {
        imgs.push(crate::surfaces::evaluate_map(sys, pt)?);
    }
    let (value, exact) = if a.is_all_ones() {
        let ones = vec![1u64; imgs.len()];
        let t = Sumset::build(&imgs, &ones, s, DEFAULT_OPS_BUDGET)?;
        let sq: u128 = t.values().iter().map(|&c| c as u128 * c as u128).sum();
        (sq as f64, Some(sq))
    } else {
        let wts: Vec<Complex64> = a.iter().map(|(_, v)| v).collect();
        let t = Sumset::build(&imgs, &wts, s, DEFAULT_OPS_BUDGET)?;
        let v: Vec<f64> = t.values().iter().map(|c| c.norm_sqr()).collect();
        (pairwise_sum(&v), None)
    };
    Ok(MomentReport {
        p: 2.0 * s as f64,
        value,
        method: MomentMethod::ExactEven,
        exact,
        predicted_exponent: predicted(Some(sys), 2.0 * s as f64),
        fitted_slope: None,
        refinement_delta: None,
    })
}

/// (1/M) sum of |values|^p over the grid.
pub fn moment_quadrature(table: &FourierTable, p: f64) -> Result<MomentReport> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p={p} must be positive")));
    }
    let v = &table.values;
    let value = pairwise_sum_by(v.len(), |i| v[i].norm().powf(p)) / v.len() as f64;
    Ok(MomentReport {
        p,
        value,
        method: MomentMethod::Quadrature,
        exact: None,
        predicted_exponent: predicted(table.provenance.sys.as_ref(), p),
        fitted_slope: None,
        refinement_delta: None,
    })
}

/// Moment on `grid` with the difference against the doubled grid.
pub fn moment_quadrature_refined(a: &CoefficientSequence, sys: &SurfaceSystem, grid: &TorusGrid, p: f64) -> Result<MomentReport> {
    let mut rep = moment_quadrature(&grid_sample(a, sys, grid)?, p)?;
    let fine = moment_quadrature(&grid_sample(a, sys, &grid.doubled())?, p)?;
    rep.refinement_delta = Some((fine.value - rep.value).abs());
    Ok(rep)
}

/// Squared l2 norm of the Fourier coefficients of F_a^s, read off by a
/// forward DFT of F_a^s sampled on the Nyquist grid.
pub fn even_moment_parseval(a: &CoefficientSequence, sys: &SurfaceSystem, s: u32) -> Result<f64> {
    let grid = nyquist_grid(sys, a.n(), s)?;
    let table = grid_sample(a, sys, &grid)?;
    let mut data: Vec<Complex64> = table.values.iter().map(|v| v.powu(s)).collect();
    fft_nd(&mut data, &grid.dims, false);
    let m = data.len() as f64;
    Ok(pairwise_sum_by(data.len(), |i| (data[i] / m).norm_sqr()))
}

/// (moment, max R_{s,P} * ||a||_2^{2s}): the first link of the even moment bound.
pub fn even_moment_bound(a: &CoefficientSequence, sys: &SurfaceSystem, s: u32) -> Result<(f64, f64)> {
    let m = even_moment_exact(a, sys, s)?.value;
    let rep = crate::arith::representation_table(sys, s, a.n())?;
    Ok((m, rep.max() as f64 * a.l2_norm().powi(2 * s as i32)))
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetReport {
    pub lambda: f64,
    pub eta: Option<f64>,
    pub measure: f64,
    pub grid: TorusGrid,
    pub refinement_delta: Option<f64>,
}

/// lambda / (N^{d/2} ||a||_2) when the table records N, the system and ||a||_2.
fn eta_of(table: &FourierTable, lambda: f64) -> Option<f64> {
    let p = &table.provenance;
    match (p.n, p.sys.as_ref(), p.coeff_l2) {
        (Some(n), Some(sys), Some(l2)) if l2 > 0.0 => Some(lambda / ((n as f64).powf(sys.d() as f64 / 2.0) * l2)),
        _ => None,
    }
}

fn count_at_least(values: &[Complex64], lambda: f64) -> usize {
    values.iter().filter(|v| v.norm() >= lambda).count()
}

/// Fraction of grid points with |F_a| >= lambda.
pub fn level_set_measure(table: &FourierTable, lambda: f64) -> Result<LevelSetReport> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda={lambda} must be >= 0")));
    }
    let measure = count_at_least(&table.values, lambda) as f64 / table.values.len() as f64;
    Ok(LevelSetReport { lambda, eta: eta_of(table, lambda), measure, grid: table.grid.clone(), refinement_delta: None })
}

/// Level set measure on `grid` with the doubled-grid difference.
pub fn level_set_measure_refined(a: &CoefficientSequence, sys: &SurfaceSystem, grid: &TorusGrid, lambda: f64) -> Result<LevelSetReport> {
    let mut rep = level_set_measure(&grid_sample(a, sys, grid)?, lambda)?;
    let fine = level_set_measure(&grid_sample(a, sys, &grid.doubled())?, lambda)?;
    rep.refinement_delta = Some((fine.measure - rep.measure).abs());
    Ok(rep)
}

/// (1/M) sum of |F_a|^p over grid points with |F_a| >= lambda_cut.
pub fn truncated_moment(table: &FourierTable, p: f64, lambda_cut: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p={p} must be positive")));
    }
    let v: Vec<f64> = table.values.iter().map(|z| z.norm()).filter(|&x| x >= lambda_cut).map(|x| x.powf(p)).collect();
    Ok(pairwise_sum(&v) / table.values.len() as f64)
}

/// Layer-cake form p * int_{cut}^inf l^{p-1} m(E_l) dl + cut^p m(E_cut),
/// integrated exactly over the step function m(E_l) of the grid.
pub fn truncated_moment_layer_cake(table: &FourierTable, p: f64, lambda_cut: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p={p} must be positive")));
    }
    let mut mags: Vec<f64> = table.values.iter().map(|z| z.norm()).filter(|&x| x >= lambda_cut).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total = table.values.len() as f64;
    let mut terms = Vec::with_capacity(mags.len() + 1);
    terms.push(lambda_cut.powf(p) * mags.len() as f64 / total);
    // between consecutive levels m(E_l) equals the share of points at or above the upper one
    let mut prev = lambda_cut;
    for (i, &x) in mags.iter().enumerate() {
        if x > prev {
            terms.push((x.powf(p) - prev.powf(p)) * (mags.len() - i) as f64 / total);
            prev = x;
        }
    }
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, Serialize)]
pub struct TomasSteinReport {
    pub lambda: f64,
    pub measure: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs / rhs
    pub slack: f64,
    pub holds: bool,
}

/// lhs = lambda^2 m(E)^2 against rhs = ||a||_2^2 <g * |F|, g>, g the grid
/// indicator of E = {|F_a| >= lambda}. Both tables must share one grid with
/// zero offsets; `table_f` is the smoothed kernel.
pub fn tomas_stein_check(table_fa: &FourierTable, table_f: &FourierTable, lambda: f64) -> Result<TomasSteinReport> {
    if table_fa.grid != table_f.grid {
        return Err(Error::GridMismatch(format!("grids differ: {:?} vs {:?}", table_fa.grid.dims, table_f.grid.dims)));
    }
    if table_fa.grid.offsets.iter().any(|&o| o != 0.0) {
        return Err(Error::GridMismatch("the discrete inequality needs zero grid offsets".into()));
    }
    let l2 = table_fa
        .provenance
        .coeff_l2
        .ok_or_else(|| Error::InvalidParameter("F_a table does not record ||a||_2".into()))?;
    let dims = &table_fa.grid.dims;
    let m = table_fa.values.len() as f64;
    let mut g: Vec<Complex64> =
        table_fa.values.iter().map(|v| if v.norm() >= lambda { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).collect();
    let count = g.iter().filter(|v| v.re > 0.0).count();
    let measure = count as f64 / m;
    let rhs = if count == 0 {
        0.0
    } else {
        let mut h: Vec<Complex64> = table_f.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
        fft_nd(&mut g, dims, false);
        fft_nd(&mut h, dims, false);
        let s = pairwise_sum_by(g.len(), |i| g[i].norm_sqr() * h[i].re);
        l2 * l2 * s / (m * m * m)
    };
    let lhs = lambda * lambda * measure * measure;
    let slack = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(TomasSteinReport { lambda, measure, lhs, rhs, slack, holds: lhs <= rhs * (1.0 + 1e-6) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Corrected,
}

#[derive(Debug, Clone)]
pub struct RetainedPiece {
    pub q: u64,
    pub s: u32,
    /// c_{Q,s} = int Phi / int rho (zero for the plain variant)
    pub correction: f64,
    pub table: FourierTable,
}

#[derive(Debug, Clone)]
pub struct KernelDecomposition {
    pub variant: Variant,
    pub n: u64,
    pub k: u32,
    pub d: usize,
    pub c1: f64,
    pub q1: Option<u64>,
    pub weight: WeightProfile,
    pub fam: MollifierFamily,
    pub f: FourierTable,
    pub f_major: FourierTable,
    pub f_minor: FourierTable,
    /// F_minor = factor * rho * F
    pub minor_factor: f64,
    pub f1: Option<FourierTable>,
    pub f2: Option<FourierTable>,
    pub pieces: Vec<RetainedPiece>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionSummary {
    pub variant: Variant,
    pub n: u64,
    pub k: u32,
    pub d: usize,
    pub c1: f64,
    pub q1: Option<u64>,
    pub grid: TorusGrid,
    pub levels: usize,
    pub minor_factor: f64,
    pub identity_error: f64,
    pub split_error: Option<f64>,
    /// max over levels of |Psi-hat(0)| from physical quadratures
    pub hat_zero_error: f64,
    pub minor_sup: f64,
    /// sup |F_minor| / N^{d(1 - tau + 0.05)}
    pub minor_sup_constant: f64,
}

fn table_like(base: &FourierTable, values: Vec<Complex64>, note: &str) -> FourierTable {
    let mut provenance = Provenance::new(SumKind::Piece);
    provenance.sys = base.provenance.sys.clone();
    provenance.n = base.provenance.n;
    provenance.note = Some(note.to_string());
    FourierTable { grid: base.grid.clone(), values, provenance }
}

fn kernel_k(sys: &SurfaceSystem) -> Result<u32> {
    match sys {
        SurfaceSystem::KParaboloid { k, .. } | SurfaceSystem::KthPowers { k } => Ok(*k),
        SurfaceSystem::MonomialCurve { .. } => Err(Error::UnsupportedFamily("decomposition needs a paraboloid or k-th powers".into())),
    }
}

/// Per-level correction c_{Q,s} = Phi-hat(0) / rho-hat(0) in closed form.
fn corrections(fam: &MollifierFamily, variant: Variant) -> Vec<((u64, u32), f64)> {
    let levels = fam.levels();
    match variant {
        Variant::Plain => levels.into_iter().map(|l| (l, 0.0)).collect(),
        Variant::Corrected => {
            let rho0 = 1.0 - lambda_fourier(fam, 0);
            levels.into_iter().map(|(q, s)| ((q, s), mollifier_fourier(fam, q, s, 0).unwrap() / rho0)).collect()
        }
    }
}

/// Splits the kernel F over the grid into arc pieces Psi_{Q,s}(alpha) F and
/// the minor part. alpha is the last grid coordinate.
pub fn kernel_decompose(
    w: &WeightProfile,
    sys: &SurfaceSystem,
    fam: &MollifierFamily,
    grid: &TorusGrid,
    variant: Variant,
    q1: Option<u64>,
    retain: &[(u64, u32)],
) -> Result<KernelDecomposition> {
    let k = kernel_k(sys)?;
    if k != fam.k || w.n != fam.n {
        return Err(Error::InvalidParameter(format!("family (k={}, N={}) does not match kernel (k={k}, N={})", fam.k, fam.n, w.n)));
    }
    if grid.offsets.iter().any(|&o| o != 0.0) {
        return Err(Error::GridMismatch("decomposition grids must have zero offsets".into()));
    }
    let levels = fam.levels();
    for l in retain {
        if !levels.contains(l) {
            return Err(Error::LevelOutOfRange(format!("retained level (Q={}, s={}) is not a level of the family", l.0, l.1)));
        }
    }
    let f = kernel_grid_sample(w, sys, grid)?;
    let ma = *grid.dims.last().unwrap();
    let inner: usize = grid.dims[..grid.r() - 1].iter().product();
    let alphas: Vec<f64> = (0..ma).map(|j| j as f64 / ma as f64).collect();
    let corr = corrections(fam, variant);
    let rho: Vec<f64> = alphas.par_iter().map(|&a| lambda_rho(fam, a).1).collect();
    let weight_of = |(q, s): (u64, u32), c: f64| -> Vec<f64> {
        alphas.par_iter().zip(&rho).map(|(&a, &r)| arc_mollifier(fam, q, s, a).unwrap() - c * r).collect()
    };
    let total_c: f64 = corr.iter().map(|(_, c)| c).sum();
    let minor_factor = 1.0 + total_c;
    let mut major_w = vec![0.0; ma];
    let mut f1_w = q1.map(|_| vec![0.0; ma]);
    let mut pieces = Vec::new();
    for &(lvl, c) in &corr {
        let wt = weight_of(lvl, c);
        for (m, x) in major_w.iter_mut().zip(&wt) {
            *m += x;
        }
        if let (Some(qq), Some(f1)) = (q1, f1_w.as_mut()) {
            if lvl.0 <= qq {
                for (m, x) in f1.iter_mut().zip(&wt) {
                    *m += x;
                }
            }
        }
        if retain.contains(&lvl) {
            let vals = scale_rows(&f.values, &wt, inner, ma);
            pieces.push(RetainedPiece {
                q: lvl.0,
                s: lvl.1,
                correction: c,
                table: table_like(&f, vals, &format!("piece Q={} s={}", lvl.0, lvl.1)),
            });
        }
    }
    let minor_w: Vec<f64> = rho.iter().map(|r| minor_factor * r).collect();
    let f_major = table_like(&f, scale_rows(&f.values, &major_w, inner, ma), "major");
    let f_minor = table_like(&f, scale_rows(&f.values, &minor_w, inner, ma), "minor");
    let (f1, f2) = match f1_w {
        Some(w1) => {
            let w2: Vec<f64> = major_w.iter().zip(&w1).map(|(a, b)| a - b).collect();
            (
                Some(table_like(&f, scale_rows(&f.values, &w1, inner, ma), "F1")),
                Some(table_like(&f, scale_rows(&f.values, &w2, inner, ma), "F2")),
            )
        }
        None => (None, None),
    };
    Ok(KernelDecomposition {
        variant,
        n: w.n,
        k,
        d: sys.d(),
        c1: fam.c1,
        q1,
        weight: *w,
        fam: fam.clone(),
        f,
        f_major,
        f_minor,
        minor_factor,
        f1,
        f2,
        pieces,
    })
}

/// values[row, j] * weight[j] over rows of length `ma`.
fn scale_rows(values: &[Complex64], weight: &[f64], rows: usize, ma: usize) -> Vec<Complex64> {
    let mut out = values.to_vec();
    for r in 0..rows {
        for (v, w) in out[r * ma..(r + 1) * ma].iter_mut().zip(weight) {
            *v *= *w;
        }
    }
    out
}

fn max_dev(a: &[Complex64], b: &[Complex64], c: &[Complex64]) -> f64 {
    a.iter().zip(b).zip(c).fold(0.0f64, |m, ((x, y), z)| m.max((x - y - z).norm()))
}

impl KernelDecomposition {
    /// max |F - (F_major + F_minor)|.
    pub fn identity_error(&self) -> f64 {
        max_dev(&self.f.values, &self.f_major.values, &self.f_minor.values)
    }

    /// max |F_major - (F1 + F2)| when split.
    pub fn split_error(&self) -> Option<f64> {
        match (&self.f1, &self.f2) {
            (Some(a), Some(b)) => Some(max_dev(&self.f_major.values, &a.values, &b.values)),
            _ => None,
        }
    }

    /// Psi-hat_{Q,s}(0) from physical quadratures of Phi and lambda, using the
    /// closed-form correction; zero for the plain variant by definition.
    pub fn hat_zero_error(&self) -> f64 {
        if self.variant == Variant::Plain {
            return 0.0;
        }
        let rho0 = 1.0 - lambda_integral_quadrature(&self.fam);
        corrections(&self.fam, self.variant)
            .iter()
            .map(|&((q, s), c)| (mollifier_fourier_quadrature(&self.fam, q, s, 0).unwrap() - c * rho0).abs())
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> DecompositionSummary {
        let minor_sup = self.f_minor.max_abs();
        let tau = rat_f64(weyl_tau(self.k));
        let norm = (self.n as f64).powf(self.d as f64 * (1.0 - tau + 0.05));
        DecompositionSummary {
            variant: self.variant,
            n: self.n,
            k: self.k,
            d: self.d,
            c1: self.c1,
            q1: self.q1,
            grid: self.f.grid.clone(),
            levels: self.fam.levels().len(),
            minor_factor: self.minor_factor,
            identity_error: self.identity_error(),
            split_error: self.split_error(),
            hat_zero_error: self.hat_zero_error(),
            minor_sup,
            minor_sup_constant: minor_sup / norm,
        }
    }

    fn piece(&self, q: u64, s: u32) -> Result<&RetainedPiece> {
        self.pieces
            .iter()
            .find(|p| p.q == q && p.s == s)
            .ok_or_else(|| Error::MissingPieces(format!("piece (Q={q}, s={s}) was not retained")))
    }

    /// Psi-hat_{Q,s}(n) in closed form.
    pub fn weight_hat(&self, q: u64, s: u32, n: i64) -> Result<f64> {
        let p = self.piece(q, s)?;
        let phi = mollifier_fourier(&self.fam, q, s, n)?;
        if p.correction == 0.0 {
            return Ok(phi);
        }
        let rho = if n == 0 { 1.0 } else { 0.0 } - lambda_fourier(&self.fam, n);
        Ok(phi - p.correction * rho)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PieceBound {
    pub q: u64,
    pub s: u32,
    pub sup: f64,
    pub bound: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PieceBoundReport {
    pub pieces: Vec<PieceBound>,
    pub max_constant: f64,
}

/// sup |piece| against Q^{0.01} (2^s/Q)^{d/k} N^{d(1-1/k)} for each retained piece.
pub fn piece_bound_scan(dcp: &KernelDecomposition) -> Result<PieceBoundReport> {
    if dcp.pieces.is_empty() {
        return Err(Error::MissingPieces("no pieces retained".into()));
    }
    let (d, k, n) = (dcp.d as f64, dcp.k as f64, dcp.n as f64);
    let pieces: Vec<PieceBound> = dcp
        .pieces
        .iter()
        .map(|p| {
            let sup = p.table.max_abs();
            let q = p.q as f64;
            let bound = q.powf(0.01) * ((1u64 << p.s) as f64 / q).powf(d / k) * n.powf(d * (1.0 - 1.0 / k));
            PieceBound { q: p.q, s: p.s, sup, bound, constant: sup / bound }
        })
        .collect();
    let max_constant = pieces.iter().map(|p| p.constant).fold(0.0, f64::max);
    Ok(PieceBoundReport { pieces, max_constant })
}

#[derive(Debug, Clone, Serialize)]
pub struct PieceFourierReport {
    pub q: u64,
    pub s: u32,
    pub samples: usize,
    pub max_error: f64,
    /// mean |piece| over the grid
    pub scale: f64,
    pub relative_error: f64,
    /// largest |hat| at m = |l|^k
    pub diagonal_hat: f64,
}

const ALIAS_TERMS: i64 = 8;

/// Compares the grid DFT of a retained piece with omega_d(l) Psi-hat(m - |l|^k),
/// summing the alpha aliases within +-8 periods.
pub fn piece_fourier_check(dcp: &KernelDecomposition, q: u64, s: u32, samples: usize, rng: &mut Rng) -> Result<PieceFourierReport> {
    let piece = dcp.piece(q, s)?;
    let grid = &piece.table.grid;
    let mut hat = piece.table.values.clone();
    fft_nd(&mut hat, &grid.dims, false);
    let total = hat.len() as f64;
    let d = dcp.d;
    let ma = *grid.dims.last().unwrap() as i64;
    let two_n = 2 * dcp.n as i64;
    let band = 2 * (1i64 << s) * dcp.fam.m as i64;
    let k = dcp.k;
    let mut max_error = 0.0f64;
    let mut diagonal_hat = 0.0f64;
    for i in 0..samples {
        // centered representatives only; others alias back into the support
        let l: Vec<i64> = grid.dims[..d]
            .iter()
            .map(|&md| {
                let h = (md as i64 - 1) / 2;
                rng.gen_range(-h.min(two_n + 2)..=(md as i64 / 2).min(two_n + 2))
            })
            .collect();
        let lk: i64 = l.iter().map(|&x| x.pow(k)).sum();
        let m = match i % 3 {
            0 => lk,
            1 => lk + rng.gen_range(-band..=band),
            _ => rng.gen_range(-ma / 2..=ma / 2),
        };
        let mut multi: Vec<usize> = l.iter().zip(&grid.dims).map(|(&x, &md)| x.rem_euclid(md as i64) as usize).collect();
        multi.push(m.rem_euclid(ma) as usize);
        let got = hat[grid.flatten(&multi)] / total;
        let wl = dcp.weight.weight(&l.iter().map(|&x| x as f64).collect::<Vec<_>>());
        let mut expect = 0.0;
        if wl != 0.0 {
            // aliases of m within the grid period
            let base = m.rem_euclid(ma) - ma * (((m.rem_euclid(ma) - lk) as f64 / ma as f64).round() as i64);
            for t in -ALIAS_TERMS..=ALIAS_TERMS {
                expect += dcp.weight_hat(q, s, base + t * ma - lk)?;
            }
            expect *= wl;
        }
        max_error = max_error.max((got - expect).norm());
        if m == lk {
            diagonal_hat = diagonal_hat.max(got.norm());
        }
    }
    let scale = pairwise_sum_by(piece.table.values.len(), |i| piece.table.values[i].norm()) / total;
    Ok(PieceFourierReport { q, s, samples, max_error, scale, relative_error: max_error / scale, diagonal_hat })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylScanRow {
    pub n: u64,
    pub kept: usize,
    pub max_normalized: f64,
    pub argmax_alpha: f64,
    pub argmax_q: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylScanReport {
    pub k: u32,
    pub tau: f64,
    pub rows: Vec<WeylScanRow>,
    /// consecutive ratios of max_normalized
    pub ratios: Vec<f64>,
    /// allowed growth (N2/N1)^{0.05} * 1.5 per step
    pub allowed: Vec<f64>,
    pub pass: bool,
}

pub const THETA_POINTS: usize = 64;

/// max over theta = j/64 of |T(alpha, theta)|, by folding n mod 64.
fn weyl_theta_max(w: &WeightProfile, k: u32, alpha: f64) -> f64 {
    let two_n = 2 * w.n as i64;
    let mut b = vec![Complex64::new(0.0, 0.0); THETA_POINTS];
    for n in -two_n..=two_n {
        let om = w.omega(n as f64);
        if om == 0.0 {
            continue;
        }
        let ph = match n.checked_pow(k) {
            Some(v) => frac_mul(v, alpha),
            None => ((n as f64).powi(k as i32) * alpha).fract(),
        };
        b[n.rem_euclid(THETA_POINTS as i64) as usize] += e(ph) * om;
    }
    fft_nd(&mut b, &[THETA_POINTS], true);
    b.iter().fold(0.0, |m, v| m.max(v.norm()))
}

/// Minor-arc maxima of |T| / N^{1 - tau}, keeping alpha whose best rational
/// approximation with q <= N^{k-1} has q >= N.
pub fn weyl_minor_scan(k: u32, n_list: &[u64], samples: usize, tau_override: Option<f64>, seed: u64) -> Result<WeylScanReport> {
    if n_list.iter().any(|&n| n > 512 || n < 2) {
        return Err(Error::InvalidParameter("each N must lie in [2, 512]".into()));
    }
    if k < 2 {
        return Err(Error::InvalidParameter("k must be >= 2".into()));
    }
    let tau = tau_override.unwrap_or_else(|| rat_f64(weyl_tau(k)));
    let mut rows = Vec::new();
    for (idx, &n) in n_list.iter().enumerate() {
        let w = WeightProfile::new(n, Default::default())?;
        let mut r = rng(seed.wrapping_add(idx as u64));
        let qmax = n.pow(k - 1);
        let alphas: Vec<(f64, u64)> = (0..samples)
            .filter_map(|_| {
                let a: f64 = r.gen();
                let (f, _) = best_rational(a, qmax);
                (f.q >= n).then_some((a, f.q))
            })
            .collect();
        let norm = (n as f64).powf(1.0 - tau);
        let vals: Vec<f64> = alphas.par_iter().map(|&(a, _)| weyl_theta_max(&w, k, a) / norm).collect();
        let (mut best, mut arg) = (0.0, 0);
        for (i, &v) in vals.iter().enumerate() {
            if v > best {
                best = v;
                arg = i;
            }
        }
        let (argmax_alpha, argmax_q) = alphas.get(arg).copied().unwrap_or((f64::NAN, 0));
        rows.push(WeylScanRow { n, kept: alphas.len(), max_normalized: best, argmax_alpha, argmax_q });
    }
    let mut ratios = Vec::new();
    let mut allowed = Vec::new();
    for w in rows.windows(2) {
        ratios.push(w[1].max_normalized / w[0].max_normalized);
        allowed.push((w[1].n as f64 / w[0].n as f64).powf(0.05) * 1.5);
    }
    let pass = ratios.iter().zip(&allowed).all(|(r, a)| r <= a);
    Ok(WeylScanReport { k, tau, rows, ratios, allowed, pass })
}

pub const PHASE_BUDGET: f64 = 1e6;

/// J(beta, gamma; N) = int eta(x) e(beta N^k x^k + gamma N x) dx, with panel
/// counts doubled until the result moves by less than 1e-9.
pub fn oscillatory_integral(w: &WeightProfile, k: u32, beta: f64, gamma: f64, n: u64) -> Result<Complex64> {
    let nf = n as f64;
    let b = beta * nf.powi(k as i32);
    if b.abs() > PHASE_BUDGET {
        return Err(Error::InvalidParameter(format!("|beta| N^k = {} exceeds the phase budget {PHASE_BUDGET}", b.abs())));
    }
    let g = gamma * nf;
    let eta = w.profile;
    // max |phi'| on [-2, 2]
    let slope = k as f64 * b.abs() * 2f64.powi(k as i32 - 1) + g.abs();
    let f = |x: f64| e(b * x.powi(k as i32) + g * x) * eta.eval(x);
    let knots = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let eval = |per_unit: usize| -> Complex64 { knots.windows(2).map(|s| gl_panels(f, s[0], s[1], per_unit)).sum() };
    let mut per_unit = ((2.0 * slope).ceil() as usize).max(2);
    let mut prev = eval(per_unit);
    for _ in 0..12 {
        per_unit *= 2;
        let cur = eval(per_unit);
        if (cur - prev).norm() < 1e-9 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureFailure(format!("oscillatory integral did not settle (beta={beta}, gamma={gamma}, N={n})")))
}

#[derive(Debug, Clone, Serialize)]
pub struct PoissonReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub error: f64,
    pub m_cut: u32,
}

/// T(a/q + beta, theta) directly against its Poisson expansion truncated at |m| <= m_cut.
pub fn poisson_majorarc_check(
    w: &WeightProfile,
    k: u32,
    frac: FareyFraction,
    beta: f64,
    theta: f64,
    m_cut: u32,
) -> Result<PoissonReport> {
    let n = w.n;
    let q = frac.q;
    if q > n {
        return Err(Error::NotMajorArc(format!("q={q} exceeds N={n}")));
    }
    let lim = 1.0 / (q as f64 * (n as f64).powi(k as i32 - 1));
    if beta.abs() > lim {
        return Err(Error::NotMajorArc(format!("|beta|={} exceeds 1/(q N^(k-1)) = {lim}", beta.abs())));
    }
    let a = (frac.a % q) as i64;
    let lhs = eval_weyl_rational(w, k, a, q as i64, beta, theta);
    let sums = gaussian_sums_all_b(a, q, k);
    let nf = n as f64;
    let mut terms = Vec::new();
    for (b, sab) in sums.iter().enumerate() {
        for m in -(m_cut as i64)..=m_cut as i64 {
            let gamma = theta - b as f64 / q as f64 - m as f64;
            terms.push(sab / q as f64 * nf * oscillatory_integral(w, k, beta, gamma, n)?);
        }
    }
    let rhs = pairwise_sum(&terms);
    Ok(PoissonReport { lhs, rhs, error: (lhs - rhs).norm(), m_cut })
}

/// Errors at m_cut, 2 m_cut, 4 m_cut, ... and whether they are nonincreasing
/// up to 1e-12.
pub fn poisson_convergence(
    w: &WeightProfile,
    k: u32,
    frac: FareyFraction,
    beta: f64,
    theta: f64,
    cuts: &[u32],
) -> Result<(Vec<PoissonReport>, bool)> {
    let reps = cuts.iter().map(|&m| poisson_majorarc_check(w, k, frac, beta, theta, m)).collect::<Result<Vec<_>>>()?;
    let mono = reps.windows(2).all(|p| p[1].error <= p[0].error + 1e-12);
    Ok((reps, mono))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffRule {
    AllOnes,
    RandomUnit,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub p: f64,
    pub rule: CoeffRule,
    pub ns: Vec<u64>,
    pub moments: Vec<f64>,
    /// exact even-moment oracle per N (even p only)
    pub oracle: Vec<Option<f64>>,
    pub max_oracle_deviation: Option<f64>,
    pub refinement_deltas: Vec<Option<f64>>,
    pub fit: LinearFit,
    pub predicted: f64,
}

/// Slope of log(moment) against log(N).
pub fn scaling_fit(sys: &SurfaceSystem, p: f64, n_list: &[u64], rule: CoeffRule, seed: u64) -> Result<ScalingReport> {
    if n_list.len() < 4 {
        return Err(Error::InvalidParameter("scaling fits need at least 4 values of N".into()));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p={p} must be positive")));
    }
    let even = p.fract() == 0.0 && (p as u64) % 2 == 0;
    let s = (p / 2.0).ceil().max(1.0) as u32;
    let mut r = rng(seed);
    let (mut moments, mut oracle, mut deltas) = (Vec::new(), Vec::new(), Vec::new());
    for &n in n_list {
        let a = match rule {
            CoeffRule::AllOnes => CoefficientSequence::all_ones(sys, n)?,
            CoeffRule::RandomUnit => CoefficientSequence::random_unit(sys, n, &mut r)?,
        };
        let grid = nyquist_grid(sys, n, s)?;
        if even {
            let table = grid_sample(&a, sys, &grid)?;
            moments.push(moment_quadrature(&table, p)?.value);
            oracle.push(Some(even_moment_exact(&a, sys, s)?.value));
            deltas.push(None);
        } else {
            let rep = moment_quadrature_refined(&a, sys, &grid, p)?;
            moments.push(rep.value);
            oracle.push(None);
            deltas.push(rep.refinement_delta);
        }
    }
    let max_oracle_deviation = if even {
        Some(moments.iter().zip(&oracle).map(|(m, o)| ((m - o.unwrap()) / o.unwrap()).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    let (d, kk) = (sys.d() as f64, sys.total_degree() as f64);
    let predicted = match rule {
        CoeffRule::AllOnes => (p * d - kk).max(p * d / 2.0),
        CoeffRule::RandomUnit => (p * d / 2.0 - kk).max(0.0),
    };
    Ok(ScalingReport {
        p,
        rule,
        ns: n_list.to_vec(),
        moments,
        oracle,
        max_oracle_deviation,
        refinement_deltas: deltas,
        fit,
        predicted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum EtaRule {
    /// eta fixed across N
    Fixed(f64),
    /// eta = N^{-e}
    Power(f64),
}

impl EtaRule {
    pub fn at(self, n: u64) -> f64 {
        match self {
            EtaRule::Fixed(x) => x,
            EtaRule::Power(x) => (n as f64).powf(-x),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetFitReport {
    pub eta_rule: EtaRule,
    pub ns: Vec<u64>,
    pub etas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub measures: Vec<f64>,
    pub grids: Vec<Vec<usize>>,
    pub refinement_deltas: Vec<Option<f64>>,
    pub fit: LinearFit,
    pub predicted: f64,
}

pub const LEVEL_OVERSAMPLE: usize = 8;

/// Fits log m(E_lambda) against log N with lambda = eta N^{d/2} ||a||_2 and a = 1.
pub fn level_set_exponent_fit(sys: &SurfaceSystem, eta_rule: EtaRule, n_list: &[u64], refine: bool) -> Result<LevelSetFitReport> {
    if n_list.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 values of N".into()));
    }
    let zeta = rat_f64(exponent_table(sys)?.zeta_bound);
    let d = sys.d() as f64;
    let mut rep = LevelSetFitReport {
        eta_rule,
        ns: n_list.to_vec(),
        etas: vec![],
        lambdas: vec![],
        measures: vec![],
        grids: vec![],
        refinement_deltas: vec![],
        fit: LinearFit { slope: f64::NAN, intercept: f64::NAN, residuals: vec![] },
        predicted: -(sys.total_degree() as f64),
    };
    for &n in n_list {
        let eta = eta_rule.at(n);
        let floor = (n as f64).powf(-zeta);
        if !(eta > floor && eta <= 1.0) {
            return Err(Error::RangeViolation(format!("eta={eta} outside (N^-zeta, 1] = ({floor}, 1] at N={n}")));
        }
        let a = CoefficientSequence::all_ones(sys, n)?;
        let lambda = eta * (n as f64).powf(d / 2.0) * a.l2_norm();
        let dims: Vec<usize> = sys.frequency_extent(n)?.iter().map(|&x| 2 * LEVEL_OVERSAMPLE * x as usize + 1).collect();
        let grid = TorusGrid::uniform(dims)?;
        grid.check_budget(grid_budget())?;
        let lrep = if refine && grid.doubled().check_budget(grid_budget()).is_ok() {
            level_set_measure_refined(&a, sys, &grid, lambda)?
        } else {
            level_set_measure(&grid_sample(&a, sys, &grid)?, lambda)?
        };
        if lrep.measure <= 0.0 {
            return Err(Error::RangeViolation(format!("empty level set at N={n}; eta too close to 1 for this grid")));
        }
        rep.etas.push(eta);
        rep.lambdas.push(lambda);
        rep.measures.push(lrep.measure);
        rep.grids.push(grid.dims.clone());
        rep.refinement_deltas.push(lrep.refinement_delta);
    }
    let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rep.measures.iter().map(|m| m.ln()).collect();
    rep.fit = linear_fit(&xs, &ys);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::Profile;

    fn cubes() -> SurfaceSystem {
        SurfaceSystem::kth_powers(3).unwrap()
    }

    #[test]
    fn even_moment_examples() {
        let sys = cubes();
        let a = CoefficientSequence::all_ones(&sys, 4).unwrap();
        let r = even_moment_exact(&a, &sys, 2).unwrap();
        assert_eq!(r.exact, Some(28));
        assert_eq!(even_moment_exact(&a, &sys, 1).unwrap().value, 4.0);
        let b = CoefficientSequence::all_ones(&sys, 5).unwrap();
        assert!(even_moment_exact(&b, &sys, 2).unwrap().value >= 28.0);
        let g = nyquist_grid(&sys, 4, 2).unwrap();
        let q = moment_quadrature(&grid_sample(&a, &sys, &g).unwrap(), 4.0).unwrap();
        assert!((q.value - 28.0).abs() < 1e-9);
        assert!((even_moment_parseval(&a, &sys, 2).unwrap() - 28.0).abs() < 1e-9);
    }

    #[test]
    fn weighted_moment_matches_grid() {
        let sys = SurfaceSystem::paraboloid(1, 3).unwrap();
        let mut r = rng(3);
        let a = CoefficientSequence::random_unit(&sys, 3, &mut r).unwrap();
        let ex = even_moment_exact(&a, &sys, 2).unwrap().value;
        let g = nyquist_grid(&sys, 3, 2).unwrap();
        let q = moment_quadrature(&grid_sample(&a, &sys, &g).unwrap(), 4.0).unwrap().value;
        assert!((ex - q).abs() < 1e-12 * ex.max(1.0));
        let (m, b) = even_moment_bound(&a, &sys, 2).unwrap();
        assert!(m <= b * (1.0 + 1e-12));
    }

    #[test]
    fn constant_table_moment() {
        let grid = TorusGrid::uniform(vec![10]).unwrap();
        let t = FourierTable { grid, values: vec![Complex64::new(0.0, 2.0); 10], provenance: Provenance::new(SumKind::Derived) };
        assert!((moment_quadrature(&t, 3.0).unwrap().value - 8.0).abs() < 1e-14);
        assert_eq!(level_set_measure(&t, 0.0).unwrap().measure, 1.0);
        assert_eq!(level_set_measure(&t, 2.5).unwrap().measure, 0.0);
    }

    #[test]
    fn layer_cake_agrees() {
        let sys = cubes();
        let a = CoefficientSequence::all_ones(&sys, 8).unwrap();
        let t = grid_sample(&a, &sys, &nyquist_grid(&sys, 8, 2).unwrap()).unwrap();
        for (p, cut) in [(4.0, 0.0), (3.5, 2.0), (8.0, 5.0), (2.0, 100.0)] {
            let x = truncated_moment(&t, p, cut).unwrap();
            let y = truncated_moment_layer_cake(&t, p, cut).unwrap();
            assert!((x - y).abs() <= 1e-10 * x.max(1e-300), "{p} {cut}: {x} {y}");
        }
        assert_eq!(truncated_moment(&t, 4.0, 9.0).unwrap(), 0.0);
    }

    #[test]
    fn tomas_stein_holds_and_matches_direct() {
        let sys = cubes();
        let n = 6;
        let w = WeightProfile::new(n, Profile::QuinticPlateau).unwrap();
        let grid = TorusGrid::uniform(vec![2 * 1728 + 1]).unwrap();
        let a = CoefficientSequence::all_ones(&sys, n).unwrap();
        let fa = grid_sample(&a, &sys, &grid).unwrap();
        let f = kernel_grid_sample(&w, &sys, &grid).unwrap();
        let lam = 0.5 * fa.max_abs();
        let rep = tomas_stein_check(&fa, &f, lam).unwrap();
        assert!(rep.holds && rep.lhs > 0.0);
        // direct double sum of the same functional
        let m = fa.values.len();
        let e: Vec<usize> = (0..m).filter(|&j| fa.values[j].norm() >= lam).collect();
        let mut s = 0.0;
        for &j in &e {
            for &jj in &e {
                s += f.values[(j + m - jj) % m].norm();
            }
        }
        let direct = a.l2_norm().powi(2) * s / (m * m) as f64;
        assert!((direct - rep.rhs).abs() < 1e-9 * direct);
        let top = tomas_stein_check(&fa, &f, fa.max_abs() * 1.01).unwrap();
        assert_eq!(top.lhs, 0.0);
        let bad = kernel_grid_sample(&w, &sys, &TorusGrid::uniform(vec![100]).unwrap()).unwrap();
        assert!(matches!(tomas_stein_check(&fa, &bad, lam), Err(Error::GridMismatch(_))));
    }

    fn small_dcp(variant: Variant) -> KernelDecomposition {
        let n = 8;
        let sys = SurfaceSystem::paraboloid(1, 3).unwrap();
        let w = WeightProfile::new(n, Profile::QuinticPlateau).unwrap();
        let fam = MollifierFamily::new(3, n, 0.25, Profile::QuinticPlateau).unwrap();
        let grid = TorusGrid::uniform(vec![33, 16384]).unwrap();
        kernel_decompose(&w, &sys, &fam, &grid, variant, Some(1), &[(1, 3), (2, 3), (2, 1)]).unwrap()
    }

    #[test]
    fn decomposition_identities() {
        for v in [Variant::Plain, Variant::Corrected] {
            let d = small_dcp(v);
            let s = d.summary();
            assert!(s.identity_error <= 1e-10 * 8.0, "{v:?}: {}", s.identity_error);
            assert!(s.split_error.unwrap() <= 1e-10 * 8.0);
            assert!(s.hat_zero_error <= 1e-10, "{v:?}: {}", s.hat_zero_error);
            let mut r = rng(1);
            let pf = piece_fourier_check(&d, 2, 3, 60, &mut r).unwrap();
            assert!(pf.relative_error <= 1e-6, "{v:?}: {pf:?}");
            if v == Variant::Corrected {
                assert!(pf.diagonal_hat <= 1e-10 * pf.scale.max(1.0));
            }
            let pb = piece_bound_scan(&d).unwrap();
            assert!(pb.max_constant.is_finite() && pb.max_constant > 0.0);
            assert!(matches!(piece_fourier_check(&d, 1, 0, 1, &mut r), Err(Error::MissingPieces(_))));
        }
    }

    #[test]
    fn oscillatory_examples() {
        let w = WeightProfile::new(16, Profile::QuinticPlateau).unwrap();
        let j0 = oscillatory_integral(&w, 3, 0.0, 0.0, 16).unwrap();
        assert!((j0.re - 3.0).abs() < 1e-12 && j0.im.abs() < 1e-12);
        let a = oscillatory_integral(&w, 3, 1e-3, 0.7, 16).unwrap();
        let b = oscillatory_integral(&w, 3, -1e-3, -0.7, 16).unwrap();
        assert!((a.conj() - b).norm() < 1e-10);
        assert!(oscillatory_integral(&w, 3, 1e3, 0.0, 16).is_err());
    }

    #[test]
    fn poisson_window_case() {
        let w = WeightProfile::new(64, Profile::QuinticPlateau).unwrap();
        let one = FareyFraction::new(1, 1).unwrap();
        let rep = poisson_majorarc_check(&w, 3, one, 0.0, 0.0, 8).unwrap();
        assert!(rep.error <= 1e-6 * 64.0, "{}", rep.error);
        let far = poisson_majorarc_check(&w, 3, FareyFraction::new(1, 3).unwrap(), 1.0, 0.0, 4);
        assert!(matches!(far, Err(Error::NotMajorArc(_))));
    }

    #[test]
    fn weyl_scan_excludes_rationals() {
        let rep = weyl_minor_scan(3, &[16, 32], 200, None, 5).unwrap();
        assert!(rep.rows.iter().all(|r| r.argmax_q >= r.n && r.kept > 0));
        assert!(weyl_minor_scan(3, &[1024], 10, None, 1).is_err());
    }

    #[test]
    fn parseval_slope_is_dimension() {
        let sys = cubes();
        let rep = scaling_fit(&sys, 2.0, &[4, 6, 8, 10], CoeffRule::AllOnes, 1).unwrap();
        assert!((rep.fit.slope - 1.0).abs() < 1e-6);
        assert_eq!(rep.predicted, 1.0);
    }

    #[test]
    fn level_fit_range() {
        let sys = cubes();
        assert!(matches!(
            level_set_exponent_fit(&sys, EtaRule::Fixed(1.5), &[4, 8], false),
            Err(Error::RangeViolation(_))
        ));
        assert!(matches!(
            level_set_exponent_fit(&sys, EtaRule::Power(0.5), &[4, 8], false),
            Err(Error::RangeViolation(_))
        ));
    }
}
