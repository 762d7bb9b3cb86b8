//! The major-arc majorant V_{p,Q}, its Fourier coefficients, domination
//! against the Weyl kernel, and the band-limiting multiplier.

use crate::arcs::{classify_arc, ArcClass};
use crate::arith::truncated_divisor;
use crate::error::{Error, Result};
use crate::expsum::{eval_weyl, fft_nd, FourierTable};
use crate::numeric::{torus_dist, Rng};
use crate::quad::gl_panels;
use crate::surfaces::{rat_f64, weyl_tau, SurfaceSystem, WeightProfile};
use num_complex::Complex64;
use num_integer::Integer;
use rand::Rng as _;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

pub const DEFAULT_EPS: f64 = 1e-3;
pub const MAX_Q: u64 = 10_000;

#[derive(Debug)]
pub struct MajorantParams {
    pub p: f64,
    pub q: u64,
    pub eps: f64,
    pub n: u64,
    pub k: u32,
    /// k tau + eps
    pub delta: f64,
    /// whether Q <= N^delta; recorded, not enforced
    pub q_within_delta: bool,
    zhat: Mutex<HashMap<i64, f64>>,
}

impl Clone for MajorantParams {
    fn clone(&self) -> Self {
        MajorantParams { zhat: Mutex::new(HashMap::new()), ..*self }
    }
}

impl MajorantParams {
    pub fn new(p: f64, q: u64, eps: f64, n: u64, k: u32) -> Result<Self> {
        if k < 2 || n < 1 {
            return Err(Error::InvalidParameter(format!("need k >= 2, N >= 1 (k={k}, N={n})")));
        }
        if !(p >= k as f64) {
            return Err(Error::InvalidParameter(format!("p={p} must be >= k={k}")));
        }
        if q < 1 {
            return Err(Error::InvalidParameter("Q must be >= 1".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps={eps} must be positive")));
        }
        let delta = k as f64 * rat_f64(weyl_tau(k)) + eps;
        let q_within_delta = (q as f64) <= (n as f64).powf(delta);
        Ok(MajorantParams { p, q, eps, n, k, delta, q_within_delta, zhat: Mutex::new(HashMap::new()) })
    }

    fn nk(&self) -> f64 {
        (self.n as f64).powi(self.k as i32)
    }
}

/// Z_p(theta) = (1 + N^k ||theta||)^{-p/k}.
pub fn z_kernel(params: &MajorantParams, theta: f64) -> f64 {
    (1.0 + params.nk() * torus_dist(theta)).powf(-params.p / params.k as f64)
}

/// V_{p,Q}(theta) by the direct double sum over q <= Q and all a mod q.
pub fn majorant_eval(params: &MajorantParams, theta: f64) -> Result<f64> {
    if params.q > MAX_Q {
        return Err(Error::BudgetExceeded(format!("Q={} exceeds {MAX_Q}", params.q)));
    }
    Ok(v_unchecked(params, theta))
}

fn v_unchecked(params: &MajorantParams, theta: f64) -> f64 {
    let ex = params.eps - params.p / params.k as f64;
    let mut total = 0.0;
    for q in 1..=params.q {
        let qf = q as f64;
        let inner: f64 = (0..q).map(|a| z_kernel(params, theta - a as f64 / qf)).sum();
        total += qf.powf(ex) * inner;
    }
    total
}

/// Breakpoints 0, N^{-k}, 2N^{-k}, 4N^{-k}, ... capped at 1/2.
fn geometric_breaks(h: f64, end: f64) -> Vec<f64> {
    let mut v = vec![0.0];
    let mut x = h;
    while x < end {
        v.push(x);
        x *= 2.0;
    }
    v.push(end);
    v
}

fn panels_for(freq: f64, width: f64) -> usize {
    ((2.0 * freq.abs() * width).ceil() as usize).max(1)
}

/// Z_p-hat(l) = 2 * integral over [0, 1/2] of Z_p(theta) cos(2 pi l theta).
pub fn z_fourier(params: &MajorantParams, l: i64) -> f64 {
    let key = l.abs();
    if let Some(v) = params.zhat.lock().unwrap().get(&key) {
        return *v;
    }
    let br = geometric_breaks(1.0 / params.nk(), 0.5);
    let w = std::f64::consts::TAU * key as f64;
    let mut total = 0.0;
    for s in br.windows(2) {
        total += gl_panels(|t| z_kernel(params, t) * (w * t).cos(), s[0], s[1], panels_for(key as f64, s[1] - s[0]));
    }
    let v = 2.0 * total;
    params.zhat.lock().unwrap().insert(key, v);
    v
}

/// Sum over q <= Q, q | l of q^{eps + 1 - p/k}.
pub fn divisor_factor(params: &MajorantParams, l: i64) -> f64 {
    let ex = params.eps + 1.0 - params.p / params.k as f64;
    (1..=params.q).filter(|&q| l % q as i64 == 0).map(|q| (q as f64).powf(ex)).sum()
}

/// V-hat(l) in closed form.
pub fn majorant_fourier(params: &MajorantParams, l: i64) -> f64 {
    divisor_factor(params, l) * z_fourier(params, l)
}

/// V-hat(l) by direct quadrature of V with breakpoints refined geometrically
/// towards every a/q, q <= Q.
pub fn majorant_fourier_quadrature(params: &MajorantParams, l: i64) -> Result<f64> {
    if params.q > MAX_Q {
        return Err(Error::BudgetExceeded(format!("Q={} exceeds {MAX_Q}", params.q)));
    }
    // kinks sit at every a/q and at its antipode a/q + 1/2
    let h = 1.0 / params.nk();
    let mut pts = vec![0.0, 1.0];
    for q in 1..=params.q {
        for a in 0..q {
            if a.gcd(&q) != 1 {
                continue;
            }
            let c = a as f64 / q as f64;
            pts.push((c + 0.5).rem_euclid(1.0));
            let mut x = h;
            while x < 0.5 {
                pts.push((c + x).rem_euclid(1.0));
                pts.push((c - x).rem_euclid(1.0));
                x *= 2.0;
            }
            pts.push(c);
        }
    }
    pts.retain(|x| (0.0..=1.0).contains(x));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let w = std::f64::consts::TAU * l as f64;
    let mut total = 0.0;
    for s in pts.windows(2) {
        total += gl_panels(|t| v_unchecked(params, t) * (w * t).cos(), s[0], s[1], panels_for(l as f64, s[1] - s[0]));
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub c_major: f64,
    pub c_minor: f64,
    pub major_samples: usize,
    pub minor_samples: usize,
    pub worst_major_alpha: f64,
    pub worst_minor_alpha: f64,
}

/// Stratified sample of alpha: half drawn inside explicit level-Q arcs, half
/// uniform, each then classified by `classify_arc`. F = T(alpha, 0).
pub fn domination_check(params: &MajorantParams, w: &WeightProfile, samples: usize, rng: &mut Rng) -> Result<DominationReport> {
    if w.n != params.n {
        return Err(Error::InvalidParameter(format!("weight scale {} differs from N={}", w.n, params.n)));
    }
    let radius = params.q as f64 / params.nk();
    let mut alphas = vec![0.0];
    for i in 0..samples.saturating_sub(1) {
        if i % 2 == 0 {
            let q = rng.gen_range(1..=params.q);
            let a = loop {
                let a = rng.gen_range(1..=q);
                if a.gcd(&q) == 1 {
                    break a;
                }
            };
            let off = rng.gen_range(-radius..=radius).clamp(-0.5, 0.5);
            alphas.push((a as f64 / q as f64 + off).rem_euclid(1.0));
        } else {
            alphas.push(rng.gen::<f64>());
        }
    }
    let nf = params.n as f64;
    let minor_norm = (params.q as f64).powf(params.eps - 1.0 / params.k as f64) * nf;
    let mut rep = DominationReport {
        c_major: 0.0,
        c_minor: 0.0,
        major_samples: 0,
        minor_samples: 0,
        worst_major_alpha: 0.0,
        worst_minor_alpha: f64::NAN,
    };
    for al in alphas {
        let f = eval_weyl(w, params.k, al, 0.0).norm();
        match classify_arc(al, params.q, params.n, params.k) {
            ArcClass::Major { .. } => {
                rep.major_samples += 1;
                let c = (f / nf).powf(params.p) / majorant_eval(params, al)?;
                if c > rep.c_major {
                    rep.c_major = c;
                    rep.worst_major_alpha = al;
                }
            }
            ArcClass::Minor => {
                rep.minor_samples += 1;
                let c = f / minor_norm;
                if c > rep.c_minor {
                    rep.c_minor = c;
                    rep.worst_minor_alpha = al;
                }
            }
        }
    }
    Ok(rep)
}

/// max over 1 <= |l| <= lmax of |V-hat(l)| N^k / d(l, Q).
pub fn fourier_bound_constant(params: &MajorantParams, lmax: i64) -> f64 {
    (1..=lmax).fold(0.0f64, |acc, l| {
        acc.max(majorant_fourier(params, l).abs() * params.nk() / truncated_divisor(l, params.q) as f64)
    })
}

fn trap(j: i64, n: f64) -> f64 {
    let a = j.unsigned_abs() as f64;
    if a <= n {
        1.0
    } else if a >= 2.0 * n {
        0.0
    } else {
        2.0 - a / n
    }
}

/// Per-coordinate plateau widths of the multiplier.
pub fn band_widths(sys: &SurfaceSystem, n: u64) -> Result<Vec<f64>> {
    let two_n = 2.0 * n as f64;
    Ok(match sys {
        SurfaceSystem::KthPowers { k } => vec![two_n.powi(*k as i32)],
        SurfaceSystem::KParaboloid { d, k } => {
            let mut v = vec![two_n; *d];
            v.push(*d as f64 * two_n.powi(*k as i32));
            v
        }
        SurfaceSystem::MonomialCurve { exponents } => exponents.iter().map(|&k| (n as f64).powi(k as i32)).collect(),
    })
}

/// psi-hat_N(j) = prod_i trap(j_i; n_i).
pub fn band_multiplier(sys: &SurfaceSystem, n: u64, j: &[i64]) -> Result<f64> {
    let widths = band_widths(sys, n)?;
    if j.len() != widths.len() {
        return Err(Error::DimensionMismatch(format!("frequency has {} coordinates, expected {}", j.len(), widths.len())));
    }
    Ok(j.iter().zip(&widths).map(|(&ji, &ni)| trap(ji, ni)).product())
}

/// Applies psi_N on the Fourier side of a table; returns the filtered table.
/// Grid residues are read as centered frequencies.
pub fn band_limit(table: &FourierTable, sys: &SurfaceSystem, n: u64) -> Result<FourierTable> {
    let widths = band_widths(sys, n)?;
    let g = &table.grid;
    if widths.len() != g.r() {
        return Err(Error::GridMismatch(format!("grid has r={}, system has r={}", g.r(), widths.len())));
    }
    let mut data = table.values.clone();
    fft_nd(&mut data, &g.dims, false);
    let size = data.len() as f64;
    for (idx, v) in data.iter_mut().enumerate() {
        let multi = g.unflatten(idx);
        let mut f = 1.0 / size;
        for ((&r, &m), &w) in multi.iter().zip(&g.dims).zip(&widths) {
            let c = if 2 * r > m { r as i64 - m as i64 } else { r as i64 };
            f *= trap(c, w);
        }
        *v *= f;
    }
    fft_nd(&mut data, &g.dims, true);
    Ok(FourierTable { grid: g.clone(), values: data, provenance: table.provenance.clone() })
}

/// Max deviation |F * psi_N - F| over the grid.
pub fn band_reproducing_error(table: &FourierTable, sys: &SurfaceSystem, n: u64) -> Result<f64> {
    let f = band_limit(table, sys, n)?;
    Ok(f.values.iter().zip(&table.values).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())))
}

/// L1 norm of the one-dimensional multiplier kernel with plateau width n,
/// by a Riemann sum over 64 * (2n) points.
pub fn psi_l1_norm(n: u64) -> f64 {
    let n = n.max(1);
    let len = (128 * n) as usize;
    let mut data = vec![Complex64::new(0.0, 0.0); len];
    let nf = n as f64;
    for j in -(2 * n as i64)..=(2 * n as i64) {
        data[j.rem_euclid(len as i64) as usize] += trap(j, nf);
    }
    fft_nd(&mut data, &[len], true);
    data.iter().map(|v| v.norm()).sum::<f64>() / len as f64
}

/// CSV rows (theta, V, |F|^p / N^p) on a uniform grid.
pub fn write_profile_csv<W: Write>(params: &MajorantParams, w: &WeightProfile, points: usize, mut out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidParameter(format!("write failed: {e}"));
    writeln!(out, "theta,V,F_ratio").map_err(io)?;
    for i in 0..points {
        let th = i as f64 / points as f64;
        let v = majorant_eval(params, th)?;
        let f = (eval_weyl(w, params.k, th, 0.0).norm() / params.n as f64).powf(params.p);
        writeln!(out, "{th},{v},{f}").map_err(io)?;
    }
    Ok(())
}
