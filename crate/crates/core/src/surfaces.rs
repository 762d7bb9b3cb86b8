//! Polynomial surface systems, smooth weights and the exponent calculus.

use crate::error::{Error, Result};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

pub type Rational = Ratio<i64>;

const COMPONENT_LIMIT: i128 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", try_from = "RawSurface")]
pub enum SurfaceSystem {
    KthPowers { k: u32 },
    KParaboloid { d: usize, k: u32 },
    MonomialCurve { exponents: Vec<u32> },
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum RawSurface {
    KthPowers { k: u32 },
    KParaboloid { d: usize, k: u32 },
    MonomialCurve { exponents: Vec<u32> },
}

impl TryFrom<RawSurface> for SurfaceSystem {
    type Error = Error;
    fn try_from(raw: RawSurface) -> Result<Self> {
        match raw {
            RawSurface::KthPowers { k } => SurfaceSystem::kth_powers(k),
            RawSurface::KParaboloid { d, k } => SurfaceSystem::paraboloid(d, k),
            RawSurface::MonomialCurve { exponents } => SurfaceSystem::monomial_curve(exponents),
        }
    }
}

impl SurfaceSystem {
    pub fn kth_powers(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("k-th powers need k >= 2, got {k}")));
        }
        Ok(SurfaceSystem::KthPowers { k })
    }

    pub fn paraboloid(d: usize, k: u32) -> Result<Self> {
        if d < 1 || k < 2 {
            return Err(Error::InvalidParameter(format!("paraboloid needs d >= 1 and k >= 2, got d={d}, k={k}")));
        }
        Ok(SurfaceSystem::KParaboloid { d, k })
    }

    pub fn monomial_curve(exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() || exponents[0] < 1 || exponents.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "monomial curve exponents must be positive and strictly increasing, got {exponents:?}"
            )));
        }
        Ok(SurfaceSystem::MonomialCurve { exponents })
    }

    /// Input dimension.
    pub fn d(&self) -> usize {
        match self {
            SurfaceSystem::KParaboloid { d, .. } => *d,
            _ => 1,
        }
    }

    /// Output dimension.
    pub fn r(&self) -> usize {
        match self {
            SurfaceSystem::KthPowers { .. } => 1,
            SurfaceSystem::KParaboloid { d, .. } => d + 1,
            SurfaceSystem::MonomialCurve { exponents } => exponents.len(),
        }
    }

    /// Total degree K.
    pub fn total_degree(&self) -> u32 {
        match self {
            SurfaceSystem::KthPowers { k } => *k,
            SurfaceSystem::KParaboloid { d, k } => *d as u32 + k,
            SurfaceSystem::MonomialCurve { exponents } => exponents.iter().sum(),
        }
    }

    /// Leading degree k (largest exponent).
    pub fn degree(&self) -> u32 {
        match self {
            SurfaceSystem::KthPowers { k } | SurfaceSystem::KParaboloid { k, .. } => *k,
            SurfaceSystem::MonomialCurve { exponents } => *exponents.last().unwrap(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SurfaceSystem::KthPowers { .. } => "kth_powers",
            SurfaceSystem::KParaboloid { .. } => "k_paraboloid",
            SurfaceSystem::MonomialCurve { .. } => "monomial_curve",
        }
    }

    /// Per-coordinate bounds of the coefficient support at box radius n:
    /// [1, n] for one-variable families, [-n, n] for paraboloids.
    pub fn support_bounds(&self, n: u64) -> (i64, i64) {
        match self {
            SurfaceSystem::KParaboloid { .. } => (-(n as i64), n as i64),
            _ => (1, n as i64),
        }
    }

    /// Largest |P_i| over the support, per output coordinate.
    pub fn frequency_extent(&self, n: u64) -> Result<Vec<u64>> {
        let pw = |k: u32| -> Result<u64> {
            n.checked_pow(k)
                .filter(|v| (*v as i128) < COMPONENT_LIMIT)
                .ok_or_else(|| Error::OverflowRisk(format!("{n}^{k} exceeds 2^62")))
        };
        match self {
            SurfaceSystem::KthPowers { k } => Ok(vec![pw(*k)?]),
            SurfaceSystem::KParaboloid { d, k } => {
                let mut v = vec![n; *d];
                let top = pw(*k)?
                    .checked_mul(*d as u64)
                    .ok_or_else(|| Error::OverflowRisk("power sum exceeds 2^62".into()))?;
                v.push(top);
                Ok(v)
            }
            SurfaceSystem::MonomialCurve { exponents } => exponents.iter().map(|&k| pw(k)).collect(),
        }
    }

    /// P(n) written into `out` (length r).
    pub fn map_into(&self, n: &[i64], out: &mut [i64]) -> Result<()> {
        if n.len() != self.d() {
            return Err(Error::DimensionMismatch(format!("point has {} coordinates, system expects {}", n.len(), self.d())));
        }
        if out.len() != self.r() {
            return Err(Error::DimensionMismatch(format!("output has {} slots, system has r={}", out.len(), self.r())));
        }
        let pw = |x: i64, k: u32| -> Result<i128> {
            let v = (x as i128).checked_pow(k).filter(|v| v.abs() < COMPONENT_LIMIT);
            v.ok_or_else(|| Error::OverflowRisk(format!("{x}^{k} exceeds 2^62")))
        };
        match self {
            SurfaceSystem::KthPowers { k } => out[0] = pw(n[0], *k)? as i64,
            SurfaceSystem::KParaboloid { d, k } => {
                let mut s: i128 = 0;
                for i in 0..*d {
                    out[i] = n[i];
                    s += pw(n[i], *k)?;
                }
                if s.abs() >= COMPONENT_LIMIT {
                    return Err(Error::OverflowRisk("power sum exceeds 2^62".into()));
                }
                out[*d] = s as i64;
            }
            SurfaceSystem::MonomialCurve { exponents } => {
                for (o, &k) in out.iter_mut().zip(exponents) {
                    *o = pw(n[0], k)? as i64;
                }
            }
        }
        Ok(())
    }
}

/// P(n) in exact integer arithmetic.
pub fn evaluate_map(sys: &SurfaceSystem, n: &[i64]) -> Result<Vec<i64>> {
    let mut out = vec![0; sys.r()];
    sys.map_into(n, &mut out)?;
    Ok(out)
}

/// Calls `f` on every lattice point of the box [lo, hi]^d in lexicographic order.
pub fn for_each_box_point<F: FnMut(&[i64])>(d: usize, lo: i64, hi: i64, mut f: F) {
    if lo > hi {
        return;
    }
    let mut p = vec![lo; d];
    loop {
        f(&p);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if p[i] < hi {
                p[i] += 1;
                break;
            }
            p[i] = lo;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    QuinticPlateau,
    ExpBump,
}

impl Profile {
    /// eta(u): 1 on [-1,1], 0 outside (-2,2), smooth monotone transition.
    pub fn eval(self, u: f64) -> f64 {
        let a = u.abs();
        if a <= 1.0 {
            return 1.0;
        }
        if a >= 2.0 {
            return 0.0;
        }
        let t = a - 1.0;
        match self {
            Profile::QuinticPlateau => 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
            Profile::ExpBump => {
                let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
                let (l, r) = (f(1.0 - t), f(t));
                l / (l + r)
            }
        }
    }

    /// Breakpoints of the piecewise definition on [0, 2].
    pub fn knots(self) -> [f64; 3] {
        [0.0, 1.0, 2.0]
    }
}

/// Weight omega(x) = eta(x/N) and its tensor powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub n: u64,
    pub profile: Profile,
}

impl WeightProfile {
    pub fn new(n: u64, profile: Profile) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("weight scale N must be positive".into()));
        }
        Ok(WeightProfile { n, profile })
    }

    pub fn omega(&self, x: f64) -> f64 {
        self.profile.eval(x / self.n as f64)
    }

    /// omega_d(x) = prod omega(x_i).
    pub fn weight(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.omega(xi)).product()
    }

    /// Sum of omega(n) over all integers.
    pub fn mass(&self) -> f64 {
        let two_n = 2 * self.n as i64;
        crate::numeric::pairwise_sum_by((2 * two_n + 1) as usize, |i| self.omega((i as i64 - two_n) as f64))
    }
}

/// The low-dimensional truncated range for paraboloids.
#[derive(Debug, Clone, PartialEq)]
pub struct LowDim {
    /// Upper bound on d, `None` when 1 - k*tau = 0 (no constraint).
    pub dim_bound: Option<Rational>,
    pub valid: bool,
    pub threshold: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentProfile {
    pub tau: Rational,
    pub critical: Rational,
    pub truncated_threshold: Rational,
    pub full_threshold: Rational,
    pub zeta_bound: Rational,
    pub lowdim: Option<LowDim>,
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// tau = max(2^(1-k), 1/(k(k-1))).
pub fn weyl_tau(k: u32) -> Rational {
    let k = k as i64;
    let a = r(1, 1i64 << (k - 1));
    let b = r(1, k * (k - 1));
    if a > b {
        a
    } else {
        b
    }
}

pub fn exponent_table(sys: &SurfaceSystem) -> Result<ExponentProfile> {
    match sys {
        SurfaceSystem::KthPowers { k } => {
            if *k > 62 {
                return Err(Error::InvalidParameter("k too large for exact tau".into()));
            }
            let tau = weyl_tau(*k);
            let k = *k as i64;
            Ok(ExponentProfile {
                tau,
                critical: r(2 * k, 1),
                truncated_threshold: r(2 * k, 1),
                full_threshold: r(2, 1) + r(2 * (k - 1), 1) / tau,
                zeta_bound: tau / 2,
                lowdim: None,
            })
        }
        SurfaceSystem::KParaboloid { d, k } => {
            if *k > 62 {
                return Err(Error::InvalidParameter("k too large for exact tau".into()));
            }
            let tau = weyl_tau(*k);
            let (d, k) = (*d as i64, *k as i64);
            let kk = d + k;
            let critical = r(2 * kk, d);
            let gap = r(1, 1) - tau * k;
            let dim_bound = if gap == r(0, 1) { None } else { Some(r(k * k - 2 * k, 1) / gap) };
            let valid = dim_bound.map_or(true, |b| r(d, 1) < b);
            Ok(ExponentProfile {
                tau,
                critical,
                truncated_threshold: r(2 * kk + 2 * k, d),
                full_threshold: r(2, 1) + r(2 * k, 1) / (tau * d),
                zeta_bound: tau * d / 2,
                lowdim: Some(LowDim { dim_bound, valid, threshold: critical }),
            })
        }
        SurfaceSystem::MonomialCurve { .. } => Err(Error::UnsupportedFamily(
            "exponent table covers k-th powers and paraboloids only".into(),
        )),
    }
}

pub fn rat_f64(x: Rational) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// True iff an estimate at p with zeta-truncated gain removes the epsilon
/// loss at every q > p.
pub fn combine_eps_removal(p: f64, q: f64, zeta: f64, d: u32, k_total: u32) -> Result<bool> {
    if q <= p {
        return Err(Error::InvalidRange(format!("need q > p, got p={p}, q={q}")));
    }
    let half_d = d as f64 / 2.0;
    if !(zeta > 0.0 && zeta < half_d) {
        return Err(Error::InvalidRange(format!("need 0 < zeta < d/2 = {half_d}, got {zeta}")));
    }
    Ok(p >= 2.0 * k_total as f64 / d as f64)
}

/// max(p1, p0 + (K - d p0/2)/zeta) in exact arithmetic.
pub fn complete_subcritical_exact(p1: Rational, zeta: Rational, p0: Rational, d: u32, k_total: u32) -> Result<Rational> {
    let (d, kk) = (d as i64, k_total as i64);
    let crit = r(2 * kk, d);
    if p1 <= crit {
        return Err(Error::InvalidRange(format!("need p1 > 2K/d = {crit}, got {p1}")));
    }
    if !(zeta > r(0, 1) && zeta < r(d, 2)) {
        return Err(Error::InvalidRange(format!("need 0 < zeta < d/2, got {zeta}")));
    }
    if p0 > crit {
        return Err(Error::InvalidRange(format!("need p0 <= 2K/d = {crit}, got {p0}")));
    }
    let t = p0 + (r(kk, 1) - p0 * d / 2) / zeta;
    Ok(if t > p1 { t } else { p1 })
}

pub fn complete_subcritical(p1: f64, zeta: f64, p0: f64, d: u32, k_total: u32) -> Result<f64> {
    let crit = 2.0 * k_total as f64 / d as f64;
    if p1 <= crit {
        return Err(Error::InvalidRange(format!("need p1 > 2K/d = {crit}, got {p1}")));
    }
    if !(zeta > 0.0 && zeta < d as f64 / 2.0) {
        return Err(Error::InvalidRange(format!("need 0 < zeta < d/2, got {zeta}")));
    }
    if p0 > crit {
        return Err(Error::InvalidRange(format!("need p0 <= 2K/d = {crit}, got {p0}")));
    }
    Ok(p1.max(p0 + (k_total as f64 - d as f64 * p0 / 2.0) / zeta))
}
