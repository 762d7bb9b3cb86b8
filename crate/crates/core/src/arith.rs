//! Exact integer kernels: truncated divisors, Ramanujan and Gaussian sums,
//! representation and Vinogradov counts, divisor moments, and truncated
//! singular series / integrals.

use crate::error::{Error, Result};
use crate::expsum::fft_nd;
use crate::numeric::{e, e_rat, linear_fit, pairwise_sum_by};
use crate::quad;
use crate::surfaces::{for_each_box_point, Profile, SurfaceSystem};
use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

pub const DEFAULT_OPS_BUDGET: u128 = 1_000_000_000;

/// d(n, Q) = #{1 <= q <= Q : q | n}, with d(0, Q) = Q.
pub fn truncated_divisor(n: i64, q_max: u64) -> u64 {
    if n == 0 {
        return q_max;
    }
    let m = n.unsigned_abs();
    let mut c = 0;
    let mut q = 1u64;
    while q * q <= m {
        if m % q == 0 {
            if q <= q_max {
                c += 1;
            }
            let o = m / q;
            if o != q && o <= q_max {
                c += 1;
            }
        }
        q += 1;
    }
    c
}

/// Moebius function by trial division.
pub fn mobius(mut n: u64) -> i64 {
    assert!(n >= 1);
    let mut mu = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

pub fn euler_phi(n: u64) -> u64 {
    let mut m = n;
    let mut out = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            out -= out / p;
        }
        p += 1;
    }
    if m > 1 {
        out -= out / m;
    }
    out
}

/// Prime factorization as (p, e) pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// c_q(n) = sum over d | (q, n) of d mu(q/d).
pub fn ramanujan_sum(q: u64, n: i64) -> i64 {
    assert!(q >= 1);
    let g = q.gcd(&n.unsigned_abs());
    let mut s = 0i64;
    let mut d = 1;
    while d * d <= g {
        if g % d == 0 {
            s += d as i64 * mobius(q / d);
            let o = g / d;
            if o != d {
                s += o as i64 * mobius(q / o);
            }
        }
        d += 1;
    }
    s
}

/// c_q(n) by summing e(an/q) over units a mod q.
pub fn ramanujan_sum_direct(q: u64, n: i64) -> Complex64 {
    let qi = q as i64;
    pairwise_sum_by(q as usize, |i| {
        let a = i as u64 + 1;
        if a.gcd(&q) == 1 {
            e_rat((a as i128 * n as i128).rem_euclid(qi as i128) as i64, qi)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn pow_mod(u: u64, k: u32, q: u64) -> u64 {
    let mut r: u128 = 1;
    let m = q as u128;
    for _ in 0..k {
        r = r * u as u128 % m;
    }
    r as u64
}

/// S(a, b; q) = sum over u mod q of e_q(a u^k + b u).
pub fn gaussian_sum(a: i64, b: i64, q: u64, k: u32) -> Complex64 {
    assert!(q >= 1);
    let qi = q as i128;
    pairwise_sum_by(q as usize, |u| {
        let uk = pow_mod(u as u64, k, q) as i128;
        let ph = (a as i128 * uk + b as i128 * u as i128).rem_euclid(qi);
        e_rat(ph as i64, q as i64)
    })
}

/// S(a, b; q) for every b, ordered by b, through one DFT of e_q(a u^k).
pub fn gaussian_sums_all_b(a: i64, q: u64, k: u32) -> Vec<Complex64> {
    let mut x: Vec<Complex64> = (0..q)
        .map(|u| e_rat((a as i128 * pow_mod(u, k, q) as i128).rem_euclid(q as i128) as i64, q as i64))
        .collect();
    // the inverse transform carries e(+ub/q)
    fft_nd(&mut x, &[q as usize], true);
    x
}

#[derive(Debug, Clone, Serialize)]
pub struct HuaReport {
    pub k: u32,
    pub qmax: u64,
    pub eps: f64,
    pub max_ratio: f64,
    /// (q, a, b) attaining the maximum, smallest in lexicographic order.
    pub argmax: (u64, u64, u64),
    /// Running maximum after each q.
    pub running_max: Vec<f64>,
}

/// max over q <= qmax, (a,q)=1, b mod q of |S(a,b;q)/q| q^{1/k - eps}.
pub fn hua_constant_scan(k: u32, qmax: u64, eps: f64) -> Result<HuaReport> {
    if qmax > 10_000 {
        return Err(Error::BudgetExceeded(format!("qmax={qmax} exceeds 10^4")));
    }
    if qmax < 1 {
        return Err(Error::InvalidParameter("qmax must be >= 1".into()));
    }
    let per_q: Vec<(f64, (u64, u64, u64))> = (1..=qmax)
        .into_par_iter()
        .map(|q| {
            let scale = (q as f64).powf(1.0 / k as f64 - eps) / q as f64;
            let mut best = (-1.0, (q, 0, 0));
            for a in 1..=q {
                if a.gcd(&q) != 1 {
                    continue;
                }
                let sums = if q <= 16 {
                    (0..q).map(|b| gaussian_sum(a as i64, b as i64, q, k)).collect()
                } else {
                    gaussian_sums_all_b(a as i64, q, k)
                };
                for (b, s) in sums.iter().enumerate() {
                    let r = s.norm() * scale;
                    if r > best.0 + 1e-12 {
                        best = (r, (q, a % q, b as u64));
                    }
                }
            }
            best
        })
        .collect();
    let mut running = Vec::with_capacity(per_q.len());
    let mut best = per_q[0];
    for v in &per_q {
        if v.0 > best.0 + 1e-12 {
            best = *v;
        }
        running.push(best.0);
    }
    Ok(HuaReport { k, qmax, eps, max_ratio: best.0, argmax: best.1, running_max: running })
}

/// Dense or sparse accumulator over linear indices of a fixed box.
#[derive(Debug, Clone)]
enum Store<T> {
    Dense(Vec<T>),
    Sparse(BTreeMap<u64, T>),
}

pub(crate) trait Cell: Copy + Default + PartialEq + std::ops::AddAssign + std::ops::Mul<Output = Self> + Send + Sync {}
impl Cell for u64 {}
impl Cell for Complex64 {}

const DENSE_LIMIT: u64 = 1 << 24;

/// Level-s sumset of weighted points given as linear offsets in a box whose
/// per-axis width is `span_i = s*(max_i - min_i) + 1`.
pub(crate) struct Sumset<T> {
    pub lo: Vec<i64>,
    pub spans: Vec<u64>,
    store: Store<T>,
}

impl<T: Cell> Sumset<T> {
    pub(crate) fn build(points: &[Vec<i64>], weights: &[T], s: u32, budget: u128) -> Result<Self> {
        if s < 1 {
            return Err(Error::InvalidParameter("s must be >= 1".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty support".into()));
        }
        let r = points[0].len();
        let mins: Vec<i64> = (0..r).map(|i| points.iter().map(|p| p[i]).min().unwrap()).collect();
        let maxs: Vec<i64> = (0..r).map(|i| points.iter().map(|p| p[i]).max().unwrap()).collect();
        let spans: Vec<u64> = (0..r).map(|i| (maxs[i] - mins[i]) as u64 * s as u64 + 1).collect();
        let total = spans.iter().try_fold(1u128, |a, &b| a.checked_mul(b as u128)).unwrap_or(u128::MAX);
        if total > u64::MAX as u128 / 2 {
            return Err(Error::BudgetExceeded("sumset box too large to index".into()));
        }
        // worst-case work: sum over levels of min(|pts|^j, box) * |pts|
        let np = points.len() as u128;
        let mut ops: u128 = 0;
        let mut level: u128 = np;
        for _ in 1..s {
            ops = ops.saturating_add(level.min(total).saturating_mul(np));
            level = level.saturating_mul(np);
        }
        if ops > budget {
            return Err(Error::BudgetExceeded(format!("about {ops} operations for s={s} exceeds budget {budget}")));
        }
        let strides: Vec<u64> = {
            let mut st = vec![1u64; r];
            for i in (0..r.saturating_sub(1)).rev() {
                st[i] = st[i + 1] * spans[i + 1];
            }
            st
        };
        let offs: Vec<u64> = points
            .iter()
            .map(|p| (0..r).map(|i| (p[i] - mins[i]) as u64 * strides[i]).sum())
            .collect();
        let dense = total as u64 <= DENSE_LIMIT;
        let mut cur: Store<T> = if dense {
            let mut v = vec![T::default(); total as usize];
            for (o, w) in offs.iter().zip(weights) {
                v[*o as usize] += *w;
            }
            Store::Dense(v)
        } else {
            let mut m = BTreeMap::new();
            for (o, w) in offs.iter().zip(weights) {
                *m.entry(*o).or_default() += *w;
            }
            Store::Sparse(m)
        };
        for _ in 1..s {
            cur = match cur {
                Store::Dense(v) => {
                    let mut next = vec![T::default(); v.len()];
                    for (i, x) in v.iter().enumerate() {
                        if *x == T::default() {
                            continue;
                        }
                        for (o, w) in offs.iter().zip(weights) {
                            next[i + *o as usize] += *x * *w;
                        }
                    }
                    Store::Dense(next)
                }
                Store::Sparse(m) => {
                    let mut next = BTreeMap::new();
                    for (i, x) in &m {
                        for (o, w) in offs.iter().zip(weights) {
                            *next.entry(i + o).or_default() += *x * *w;
                        }
                    }
                    Store::Sparse(next)
                }
            };
        }
        let lo = mins.iter().map(|m| m * s as i64).collect();
        Ok(Sumset { lo, spans, store: cur })
    }

    fn strides(&self) -> Vec<u64> {
        let r = self.spans.len();
        let mut st = vec![1u64; r];
        for i in (0..r.saturating_sub(1)).rev() {
            st[i] = st[i + 1] * self.spans[i + 1];
        }
        st
    }

    fn decode(&self, mut idx: u64) -> Vec<i64> {
        let r = self.spans.len();
        let mut out = vec![0; r];
        for i in (0..r).rev() {
            out[i] = self.lo[i] + (idx % self.spans[i]) as i64;
            idx /= self.spans[i];
        }
        out
    }

    pub(crate) fn get(&self, u: &[i64]) -> T {
        if u.len() != self.spans.len() {
            return T::default();
        }
        let st = self.strides();
        let mut idx = 0u64;
        for i in 0..u.len() {
            let off = u[i] - self.lo[i];
            if off < 0 || off as u64 >= self.spans[i] {
                return T::default();
            }
            idx += off as u64 * st[i];
        }
        match &self.store {
            Store::Dense(v) => v[idx as usize],
            Store::Sparse(m) => m.get(&idx).copied().unwrap_or_default(),
        }
    }

    /// Nonzero entries in increasing lexicographic order of u.
    pub(crate) fn entries(&self) -> Vec<(Vec<i64>, T)> {
        match &self.store {
            Store::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != T::default())
                .map(|(i, x)| (self.decode(i as u64), *x))
                .collect(),
            Store::Sparse(m) => m.iter().filter(|(_, x)| **x != T::default()).map(|(i, x)| (self.decode(*i), *x)).collect(),
        }
    }

    pub(crate) fn values(&self) -> Vec<T> {
        match &self.store {
            Store::Dense(v) => v.iter().copied().filter(|x| *x != T::default()).collect(),
            Store::Sparse(m) => m.values().copied().filter(|x| *x != T::default()).collect(),
        }
    }
}

/// Support points of `sys` at radius n, mapped through P.
pub fn support_images(sys: &SurfaceSystem, n: u64) -> Result<Vec<Vec<i64>>> {
    let (lo, hi) = sys.support_bounds(n);
    let mut out = Vec::new();
    let mut err = None;
    for_each_box_point(sys.d(), lo, hi, |p| match crate::surfaces::evaluate_map(sys, p) {
        Ok(v) => out.push(v),
        Err(e) => err = Some(e),
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Exact ordered representation counts R_{s,P}(u).
pub struct RepTable {
    pub sys: SurfaceSystem,
    pub s: u32,
    pub n: u64,
    support: usize,
    table: Sumset<u64>,
}

impl RepTable {
    pub fn get(&self, u: &[i64]) -> u64 {
        self.table.get(u)
    }

    /// Nonzero (u, count) pairs sorted by u.
    pub fn entries(&self) -> Vec<(Vec<i64>, u64)> {
        self.table.entries()
    }

    pub fn support_size(&self) -> usize {
        self.support
    }

    pub fn total(&self) -> u128 {
        self.table.values().iter().map(|&c| c as u128).sum()
    }

    pub fn sum_squares(&self) -> u128 {
        self.table.values().iter().map(|&c| c as u128 * c as u128).sum()
    }

    pub fn max(&self) -> u64 {
        self.table.values().into_iter().max().unwrap_or(0)
    }

    /// Table of the sum of both levels, by direct product of entries.
    pub fn convolve(&self, other: &RepTable) -> Result<BTreeMap<Vec<i64>, u64>> {
        if self.sys != other.sys || self.n != other.n {
            return Err(Error::InvalidParameter("tables differ in system or range".into()));
        }
        let a = self.entries();
        let b = other.entries();
        if (a.len() as u128) * (b.len() as u128) > DEFAULT_OPS_BUDGET {
            return Err(Error::BudgetExceeded("convolution of tables too large".into()));
        }
        let mut out = BTreeMap::new();
        for (u, x) in &a {
            for (v, y) in &b {
                let w: Vec<i64> = u.iter().zip(v).map(|(p, q)| p + q).collect();
                *out.entry(w).or_insert(0) += x * y;
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let cols: Vec<String> = (0..self.sys.r()).map(|i| format!("u{i}")).collect();
        writeln!(w, "{},count", cols.join(","))?;
        for (u, c) in self.entries() {
            let us: Vec<String> = u.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{}", us.join(","), c)?;
        }
        Ok(())
    }
}

pub fn representation_table(sys: &SurfaceSystem, s: u32, n: u64) -> Result<RepTable> {
    representation_table_with_budget(sys, s, n, DEFAULT_OPS_BUDGET)
}

pub fn representation_table_with_budget(sys: &SurfaceSystem, s: u32, n: u64, budget: u128) -> Result<RepTable> {
    let pts = support_images(sys, n)?;
    let ones = vec![1u64; pts.len()];
    let table = Sumset::build(&pts, &ones, s, budget)?;
    Ok(RepTable { sys: sys.clone(), s, n, support: pts.len(), table })
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisKReport {
    pub k: u32,
    pub s: u32,
    pub x: u64,
    pub n: u64,
    pub max: u64,
    pub argmax: Vec<u64>,
    /// (X_j, max over n <= X_j) for dyadic X_j <= X, plus X itself.
    pub growth: Vec<(u64, u64)>,
}

/// max over n <= X of R_{s,k}(n), counting ordered representations by
/// positive k-th powers.
pub fn hypothesis_k_scan(k: u32, s: u32, x: u64) -> Result<HypothesisKReport> {
    if s < 1 || k < 1 {
        return Err(Error::InvalidParameter("need s >= 1 and k >= 1".into()));
    }
    let n = crate::numeric::iroot(x, k);
    let cost = (x as u128 + 1) * n as u128 * s as u128;
    if cost > DEFAULT_OPS_BUDGET || x > 1 << 28 {
        return Err(Error::BudgetExceeded(format!("scan to X={x} needs about {cost} operations")));
    }
    let powers: Vec<usize> = (1..=n).map(|m| m.pow(k) as usize).collect();
    let xs = x as usize;
    let mut cur = vec![0u64; xs + 1];
    for &p in &powers {
        cur[p] += 1;
    }
    for _ in 1..s {
        let mut next = vec![0u64; xs + 1];
        for (i, &c) in cur.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for &p in &powers {
                if i + p > xs {
                    break;
                }
                next[i + p] += c;
            }
        }
        cur = next;
    }
    let max = cur.iter().copied().max().unwrap_or(0);
    let argmax = if max == 0 { vec![] } else { (0..=x).filter(|&m| cur[m as usize] == max).collect() };
    let mut growth = Vec::new();
    let mut running = 0;
    let mut next_mark = 1u64;
    for m in 0..=x {
        running = running.max(cur[m as usize]);
        if m == next_mark || m == x {
            growth.push((m, running));
            while next_mark <= m {
                next_mark *= 2;
            }
        }
    }
    Ok(HypothesisKReport { k, s, x, n, max, argmax, growth })
}

#[derive(Debug, Clone, Serialize)]
pub struct VinogradovReport {
    pub s: u32,
    pub k: u32,
    pub n: u64,
    pub j: u128,
    /// Pairs (n, m) with m a rearrangement of n.
    pub diagonal: u128,
    pub trivial: u128,
}

fn binom(n: u128, k: u128) -> u128 {
    let mut r = 1u128;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Number of pairs of s-tuples over [N] that are rearrangements of each other.
pub fn vinogradov_diagonal(s: u32, n: u64) -> u128 {
    let s = s as usize;
    let mut dp = vec![0u128; s + 1];
    dp[0] = 1;
    for _ in 0..n {
        let mut nd = vec![0u128; s + 1];
        for t in 0..=s {
            if dp[t] == 0 {
                continue;
            }
            for c in 0..=(s - t) {
                let b = binom((t + c) as u128, c as u128);
                nd[t + c] += dp[t] * b * b;
            }
        }
        dp = nd;
    }
    dp[s]
}

/// J_{s,k}(N): solutions of n_1^j+..+n_s^j = m_1^j+..+m_s^j for 1 <= j <= k.
pub fn vinogradov_count(s: u32, k: u32, n: u64) -> Result<VinogradovReport> {
    if s < 1 || k < 1 || n < 1 {
        return Err(Error::InvalidParameter("need s, k, N >= 1".into()));
    }
    if s * k > 8 || n > 64 {
        return Err(Error::BudgetExceeded(format!("exact enumeration limited to s*k <= 8 and N <= 64 (got s={s}, k={k}, N={n})")));
    }
    let base: Vec<Vec<u64>> = (1..=n).map(|m| (1..=k).map(|j| m.pow(j)).collect()).collect();
    let mut cur: HashMap<Vec<u64>, u64> = HashMap::new();
    for v in &base {
        *cur.entry(v.clone()).or_insert(0) += 1;
    }
    for _ in 1..s {
        let mut next: HashMap<Vec<u64>, u64> = HashMap::with_capacity(cur.len() * 4);
        for (u, c) in &cur {
            for v in &base {
                let w: Vec<u64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
                *next.entry(w).or_insert(0) += c;
            }
        }
        cur = next;
    }
    let j: u128 = cur.values().map(|&c| c as u128 * c as u128).sum();
    Ok(VinogradovReport { s, k, n, j, diagonal: vinogradov_diagonal(s, n), trivial: (n as u128).pow(s) })
}

const SIEVE_BLOCK: u64 = 1 << 18;

/// Calls `f(block_counts)` for |l| in blocks [lo, hi) of 1..=X with
/// counts[i] = d(lo + i, Q); blocks are processed in parallel and combined
/// by the caller-supplied associative reducer.
fn sieve_reduce<T, F, R>(q: u64, x: u64, init: T, f: F, reduce: R) -> T
where
    T: Send + Sync + Clone,
    F: Fn(u64, &[u32]) -> T + Send + Sync,
    R: Fn(T, T) -> T + Send + Sync,
{
    if x == 0 {
        return init;
    }
    let blocks = x.div_ceil(SIEVE_BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = 1 + b * SIEVE_BLOCK;
            let hi = (lo + SIEVE_BLOCK).min(x + 1);
            let mut cnt = vec![0u32; (hi - lo) as usize];
            for d in 1..=q.min(hi - 1) {
                let mut m = lo.div_ceil(d) * d;
                while m < hi {
                    cnt[(m - lo) as usize] += 1;
                    m += d;
                }
            }
            f(lo, &cnt)
        })
        .reduce(|| init.clone(), &reduce)
}

/// Sum over |l| <= X of d(l, Q)^B, by sieving multiples of each q <= Q.
pub fn divisor_moment(b: u32, q: u64, x: u64) -> Result<u128> {
    if b < 1 || q < 1 {
        return Err(Error::InvalidParameter("need B >= 1 and Q >= 1".into()));
    }
    if x > 100_000_000 {
        return Err(Error::BudgetExceeded(format!("X={x} exceeds 10^8")));
    }
    let zero = (q as u128).pow(b);
    let half = sieve_reduce(q, x, 0u128, |_, cnt| cnt.iter().map(|&c| (c as u128).pow(b)).sum::<u128>(), |a, b| a + b);
    Ok(zero + 2 * half)
}

/// #{|n| <= X : d(n, Q) >= D}.
pub fn divisor_tail_count(dthr: f64, q: u64, x: u64) -> Result<u64> {
    if !(dthr >= 1.0) || q < 1 {
        return Err(Error::InvalidParameter("need D >= 1 and Q >= 1".into()));
    }
    if x > 100_000_000 {
        return Err(Error::BudgetExceeded(format!("X={x} exceeds 10^8")));
    }
    let zero = u64::from(q as f64 >= dthr);
    let half = sieve_reduce(q, x, 0u64, |_, cnt| cnt.iter().filter(|&&c| c as f64 >= dthr).count() as u64, |a, b| a + b);
    Ok(zero + 2 * half)
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularSeriesReport {
    pub kvec: Vec<u32>,
    pub p: f64,
    pub qmax: u64,
    pub terms: Vec<f64>,
    pub partial_sum: f64,
    /// Sums of terms over dyadic blocks [2^j, 2^{j+1}).
    pub block_sums: Vec<f64>,
    /// Geometric tail extrapolated from the last two complete blocks, if they decay.
    pub tail_estimate: Option<f64>,
    /// Least-squares slope of log(term) against log(q) over nonzero terms with q > qmax/4.
    pub decay_slope: Option<f64>,
}

/// A(q) = sum over primitive a mod q of |S(a;q)/q|^p for the monomial
/// system, computed by direct summation (FFT along a linear exponent).
pub fn singular_term_direct(kvec: &[u32], p: f64, q: u64) -> f64 {
    let t = kvec.len();
    let qi = q as i64;
    let lin = kvec.iter().position(|&k| k == 1);
    let pows: Vec<Vec<i64>> = kvec.iter().map(|&k| (0..q).map(|u| pow_mod(u, k, q) as i64).collect()).collect();
    let mut total = 0.0;
    // enumerate the non-linear coordinates; the linear one, if any, via DFT
    let others: Vec<usize> = (0..t).filter(|&i| Some(i) != lin).collect();
    let mut a = vec![0i64; t];
    let count = q.pow(others.len() as u32);
    for idx in 0..count {
        let mut r = idx;
        for &i in &others {
            a[i] = (r % q) as i64;
            r /= q;
        }
        let g0 = others.iter().fold(q, |g, &i| g.gcd(&(a[i] as u64)));
        match lin {
            Some(li) => {
                let mut x: Vec<Complex64> = (0..q as usize)
                    .map(|u| {
                        let ph: i128 = others.iter().map(|&i| a[i] as i128 * pows[i][u] as i128).sum();
                        e_rat(ph.rem_euclid(qi as i128) as i64, qi)
                    })
                    .collect();
                fft_nd(&mut x, &[q as usize], true);
                for (al, v) in x.iter().enumerate() {
                    if g0.gcd(&(al as u64)) == 1 {
                        total += (v.norm() / q as f64).powf(p);
                    }
                }
                let _ = li;
            }
            None => {
                if g0 != 1 {
                    continue;
                }
                let s = pairwise_sum_by(q as usize, |u| {
                    let ph: i128 = (0..t).map(|i| a[i] as i128 * pows[i][u] as i128).sum();
                    e_rat(ph.rem_euclid(qi as i128) as i64, qi)
                });
                total += (s.norm() / q as f64).powf(p);
            }
        }
    }
    total
}

/// Partial singular series using multiplicativity of A(q): prime powers are
/// computed directly, composite q as products.
pub fn singular_series_partial(kvec: &[u32], p: f64, qmax: u64) -> Result<SingularSeriesReport> {
    if kvec.is_empty() || kvec.len() > 3 || kvec.windows(2).any(|w| w[0] >= w[1]) || kvec[0] < 1 {
        return Err(Error::InvalidParameter(format!("need 1 to 3 strictly increasing exponents, got {kvec:?}")));
    }
    if qmax > 1000 || qmax < 1 {
        return Err(Error::BudgetExceeded(format!("Qmax={qmax} outside [1, 1000]")));
    }
    let t = kvec.len() as u32;
    let has_lin = kvec.contains(&1);
    let mut prime_powers = Vec::new();
    for q in 2..=qmax {
        let f = factorize(q);
        if f.len() == 1 {
            prime_powers.push(q);
        }
    }
    let cost: f64 = prime_powers
        .iter()
        .map(|&q| {
            let qf = q as f64;
            if has_lin {
                qf.powi(t as i32) * (qf.log2() + 1.0)
            } else {
                qf.powi(t as i32 + 1)
            }
        })
        .sum();
    if cost > 4e9 {
        return Err(Error::BudgetExceeded(format!("about {cost:.2e} operations for {kvec:?} up to {qmax}")));
    }
    let pp: HashMap<u64, f64> = prime_powers.par_iter().map(|&q| (q, singular_term_direct(kvec, p, q))).collect();
    let mut terms = vec![1.0];
    for q in 2..=qmax {
        let v: f64 = factorize(q).iter().map(|&(pr, ex)| pp[&pr.pow(ex)]).product();
        terms.push(v);
    }
    let partial_sum = pairwise_sum_by(terms.len(), |i| terms[i]);
    let mut block_sums = Vec::new();
    let mut lo = 1u64;
    while lo <= qmax {
        let hi = (2 * lo).min(qmax + 1);
        block_sums.push(terms[(lo - 1) as usize..(hi - 1) as usize].iter().sum());
        lo *= 2;
    }
    let complete = {
        let mut c = 0;
        let mut lo = 1u64;
        while 2 * lo - 1 <= qmax {
            c += 1;
            lo *= 2;
        }
        c
    };
    let tail_estimate = if complete >= 3 {
        let (b1, b2): (f64, f64) = (block_sums[complete - 2], block_sums[complete - 1]);
        let ratio = b2 / b1;
        if ratio < 1.0 && b1 > 0.0 {
            let partial_after: f64 = terms[(1usize << (complete)) - 1..].iter().sum();
            Some((b2 * ratio / (1.0 - ratio) - partial_after).max(0.0))
        } else {
            None
        }
    } else {
        None
    };
    let (lx, ly): (Vec<f64>, Vec<f64>) = (1..=qmax)
        .filter(|&q| 4 * q > qmax && terms[(q - 1) as usize] > 0.0)
        .map(|q| ((q as f64).ln(), terms[(q - 1) as usize].ln()))
        .unzip();
    let decay_slope = if lx.len() >= 3 { Some(linear_fit(&lx, &ly).slope) } else { None };
    Ok(SingularSeriesReport { kvec: kvec.to_vec(), p, qmax, terms, partial_sum, block_sums, tail_estimate, decay_slope })
}

/// I(xi) = integral of eta(x) e(sum_i xi_i x^{k_i}) over [-2, 2].
pub fn windowed_integral(profile: Profile, kvec: &[u32], xi: &[f64]) -> Complex64 {
    let deriv_bound: f64 = kvec.iter().zip(xi).map(|(&k, &x)| x.abs() * k as f64 * 2f64.powi(k as i32 - 1)).sum();
    let per_unit = (2.0 * deriv_bound).ceil().max(2.0) as usize;
    let f = |x: f64| {
        let ph: f64 = kvec.iter().zip(xi).map(|(&k, &c)| c * x.powi(k as i32)).sum();
        e(ph) * profile.eval(x)
    };
    quad::gl_panels(f, -2.0, -1.0, per_unit) + quad::gl_panels(f, -1.0, 1.0, 2 * per_unit) + quad::gl_panels(f, 1.0, 2.0, per_unit)
}

/// Integral of |I(xi)|^p over the box |xi_i| <= R.
pub fn singular_integral_truncated(profile: Profile, kvec: &[u32], p: f64, r: f64) -> Result<f64> {
    if kvec.is_empty() || kvec.len() > 2 {
        return Err(Error::InvalidParameter("singular integral supports one or two exponents".into()));
    }
    if !(r > 0.0 && r <= 1000.0) {
        return Err(Error::InvalidParameter(format!("R must lie in (0, 1000], got {r}")));
    }
    let tol = 1e-9;
    match kvec.len() {
        1 => {
            let g = |x: f64| windowed_integral(profile, kvec, &[x]).norm().powf(p);
            // I(-xi) = conj I(xi)
            Ok(2.0 * quad::adaptive(g, 0.0, r, tol, 30)?)
        }
        _ => {
            let inner = |x1: f64| -> Result<f64> {
                quad::adaptive(|x2: f64| windowed_integral(profile, kvec, &[x1, x2]).norm().powf(p), -r, r, tol, 30)
            };
            let mut failure = None;
            let v = quad::adaptive(
                |x1: f64| match inner(x1) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                0.0,
                r,
                tol * r,
                30,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(2.0 * v),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_examples() {
        assert_eq!(truncated_divisor(1, 7), 1);
        assert_eq!(truncated_divisor(0, 5), 5);
        assert_eq!(truncated_divisor(12, 3), 3);
        assert_eq!(truncated_divisor(-12, 100), 6);
    }

    #[test]
    fn ramanujan_examples() {
        assert_eq!(ramanujan_sum(1, 17), 1);
        assert_eq!(ramanujan_sum(6, 1), 1);
        assert_eq!(ramanujan_sum(4, 2), -2);
        assert_eq!(ramanujan_sum(12, 0), euler_phi(12) as i64);
    }

    #[test]
    fn gauss_examples() {
        assert!((gaussian_sum(5, 3, 1, 3) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(gaussian_sum(1, 0, 2, 3).norm() < 1e-15);
        assert!(gaussian_sum(1, 0, 3, 3).norm() < 1e-14);
        let all = gaussian_sums_all_b(2, 11, 3);
        for b in 0..11 {
            assert!((all[b] - gaussian_sum(2, b as i64, 11, 3)).norm() < 1e-12);
        }
    }

    #[test]
    fn hua_trivial() {
        let r = hua_constant_scan(3, 1, 0.0).unwrap();
        assert!((r.max_ratio - 1.0).abs() < 1e-15);
    }

    fn brute_r(k: u32, s: u32, n: i64, target: i64) -> u64 {
        let mut c = 0;
        let mut idx = vec![1i64; s as usize];
        loop {
            if idx.iter().map(|x| x.pow(k)).sum::<i64>() == target {
                c += 1;
            }
            let mut i = 0;
            loop {
                if i == idx.len() {
                    return c;
                }
                if idx[i] < n {
                    idx[i] += 1;
                    break;
                }
                idx[i] = 1;
                i += 1;
            }
        }
    }

    #[test]
    fn rep_table_examples() {
        let sys = SurfaceSystem::kth_powers(3).unwrap();
        let t = representation_table(&sys, 2, 12).unwrap();
        assert_eq!(t.get(&[2]), 1);
        assert_eq!(t.get(&[1729]), 4);
        assert_eq!(t.get(&[7]), 0);
        assert_eq!(t.total(), 144);
        for u in [9i64, 28, 35, 100, 1729, 1000] {
            assert_eq!(t.get(&[u]), brute_r(3, 2, 12, u));
        }
    }

    #[test]
    fn rep_table_associativity() {
        let sys = SurfaceSystem::paraboloid(1, 3).unwrap();
        let t2 = representation_table(&sys, 2, 3).unwrap();
        let t4 = representation_table(&sys, 4, 3).unwrap();
        let conv = t2.convolve(&t2).unwrap();
        let direct: BTreeMap<Vec<i64>, u64> = t4.entries().into_iter().collect();
        assert_eq!(conv, direct);
        assert_eq!(t4.total(), 7u128.pow(4));
    }

    #[test]
    fn hypothesis_k_examples() {
        let r = hypothesis_k_scan(2, 2, 50).unwrap();
        assert_eq!(r.max, 3);
        assert!(r.argmax.contains(&50));
        assert_eq!(hypothesis_k_scan(3, 2, 2).unwrap().max, 1);
    }

    #[test]
    fn vinogradov_examples() {
        assert_eq!(vinogradov_count(1, 1, 9).unwrap().j, 9);
        assert_eq!(vinogradov_count(2, 1, 3).unwrap().j, 19);
        // s <= k: only rearrangements solve the system
        for (s, k, n) in [(2, 2, 10), (2, 3, 7), (3, 2, 4)] {
            let rep = vinogradov_count(s, k, n).unwrap();
            assert!(rep.j >= rep.diagonal);
            if s <= k {
                assert_eq!(rep.j, rep.diagonal);
            }
        }
        assert!(matches!(vinogradov_count(3, 3, 10), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn divisor_moment_examples() {
        assert_eq!(divisor_moment(1, 2, 4).unwrap(), 14);
        assert_eq!(divisor_moment(3, 1, 1000).unwrap(), 2001);
        let brute: u128 = (-300i64..=300).map(|l| (truncated_divisor(l, 7) as u128).pow(2)).sum();
        assert_eq!(divisor_moment(2, 7, 300).unwrap(), brute);
    }

    #[test]
    fn tail_count_examples() {
        assert_eq!(divisor_tail_count(1.0, 4, 100).unwrap(), 201);
        assert_eq!(divisor_tail_count(5.0, 4, 100).unwrap(), 0);
        let brute = (-100i64..=100).filter(|&n| truncated_divisor(n, 4) >= 3).count() as u64;
        assert_eq!(divisor_tail_count(3.0, 4, 100).unwrap(), brute);
    }

    #[test]
    fn singular_term_is_multiplicative() {
        for kv in [vec![3u32], vec![1, 3], vec![2, 3]] {
            for (a, b) in [(3u64, 4u64), (4, 9), (5, 8)] {
                let lhs = singular_term_direct(&kv, 5.0, a * b);
                let rhs = singular_term_direct(&kv, 5.0, a) * singular_term_direct(&kv, 5.0, b);
                assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1e-12), "{kv:?} {a} {b}");
            }
        }
    }

    #[test]
    fn singular_series_trivial() {
        let r = singular_series_partial(&[3], 8.0, 1).unwrap();
        assert_eq!(r.partial_sum, 1.0);
    }

    #[test]
    fn window_integral_at_zero_is_mass() {
        let v = windowed_integral(Profile::QuinticPlateau, &[3], &[0.0]);
        assert!((v.re - 3.0).abs() < 1e-13 && v.im.abs() < 1e-15);
    }
}
