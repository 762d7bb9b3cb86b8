//! Subcommand definitions and their mapping onto library operations.

use crate::report::{Ctx, Failure};
use anyhow::Result;
use circle_lab::arcs::{self, best_rational, classify_arc, ArcClass, FareyFraction, MollifierFamily};
use circle_lab::arith;
use circle_lab::expsum::{self, CoefficientSequence, TorusGrid};
use circle_lab::majorants::{self, MajorantParams};
use circle_lab::numeric::rng;
use circle_lab::restriction::{self, CoeffRule, EtaRule, Variant};
use circle_lab::surfaces::{self, Profile, Rational, SurfaceSystem, WeightProfile};
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Family {
    KthPowers,
    KParaboloid,
    MonomialCurve,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Default)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Kappa {
    #[default]
    QuinticPlateau,
    ExpBump,
}

impl From<Kappa> for Profile {
    fn from(k: Kappa) -> Profile {
        match k {
            Kappa::QuinticPlateau => Profile::QuinticPlateau,
            Kappa::ExpBump => Profile::ExpBump,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SurfaceArgs {
    #[arg(long, value_enum, default_value = "kth_powers")]
    pub family: Family,
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Paraboloid dimension
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Monomial curve exponents, strictly increasing
    #[arg(long, value_delimiter = ',')]
    pub exponents: Vec<u32>,
}

impl SurfaceArgs {
    pub fn system(&self) -> Result<SurfaceSystem> {
        Ok(match self.family {
            Family::KthPowers => SurfaceSystem::kth_powers(self.k)?,
            Family::KParaboloid => SurfaceSystem::paraboloid(self.d, self.k)?,
            Family::MonomialCurve => SurfaceSystem::monomial_curve(self.exponents.clone())?,
        })
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CoeffArgs {
    /// a = 1 on the support (the default)
    #[arg(long = "all-ones", conflicts_with = "random_unit")]
    pub all_ones: bool,
    /// Random complex coefficients with unit l2 norm, drawn from --seed
    #[arg(long = "random-unit")]
    pub random_unit: bool,
}

impl CoeffArgs {
    fn rule(&self) -> CoeffRule {
        if self.random_unit {
            CoeffRule::RandomUnit
        } else {
            CoeffRule::AllOnes
        }
    }

    fn build(&self, sys: &SurfaceSystem, n: u64, seed: u64) -> Result<CoefficientSequence> {
        Ok(match self.rule() {
            CoeffRule::AllOnes => CoefficientSequence::all_ones(sys, n)?,
            CoeffRule::RandomUnit => CoefficientSequence::random_unit(sys, n, &mut rng(seed))?,
        })
    }
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cmd {
    /// Weyl sum T(alpha, theta)
    Weylsum(WeylsumArgs),
    /// Extension operator F_a at one point
    Extension(ExtensionArgs),
    /// F_a on a torus grid by folding and FFT
    Gridsample(GridsampleArgs),
    /// Rational approximation and major/minor classification
    Arcs(ArcsArgs),
    /// Arc mollifier profiles, Fourier coefficients and partition check
    Mollifier(MollifierArgs),
    /// Majorant V, its Fourier coefficients and domination of |F|
    Majorant(MajorantArgs),
    /// Representation counts R_s(u)
    Repcount(RepcountArgs),
    /// Hypothesis K scan of sums of s k-th powers
    Hypk(HypkArgs),
    /// Vinogradov system count J_{s,k}(N)
    Vinogradov(VinogradovArgs),
    /// Divisor moments and tail counts
    Divisor(DivisorArgs),
    /// Complete exponential sum S(a, b; q)
    Gauss(GaussArgs),
    /// Scan of q^{1/k - eps} |S(a, b; q)| / q
    HuaScan(HuaArgs),
    /// Singular series and singular integral
    Singular(SingularArgs),
    /// Moments of F_a
    Moments(MomentsArgs),
    /// Level set measure of |F_a|
    Levelset(LevelsetArgs),
    /// Truncated moment with its layer-cake cross-check
    Truncated(TruncatedArgs),
    /// Tomas-Stein functional check
    TomasStein(TomasSteinArgs),
    /// Kernel decomposition into arc pieces
    Decompose(DecomposeArgs),
    /// Fourier identity of a retained arc piece
    PieceCheck(PieceCheckArgs),
    /// Minor-arc Weyl sum maxima
    WeylScan(WeylScanArgs),
    /// Weyl sum against its Poisson expansion on a major arc
    PoissonCheck(PoissonArgs),
    /// Log-log slope of moments in N
    Scaling(ScalingArgs),
    /// Log-log slope of level set measures in N
    LevelsetFit(LevelsetFitArgs),
    /// Exponent thresholds for a family
    Exponents(ExponentsArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WeylsumArgs {
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, value_enum, default_value = "quintic_plateau")]
    pub profile: Kappa,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExtensionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeff: CoeffArgs,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    /// One coordinate per output dimension of the surface
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Vec<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridsampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeff: CoeffArgs,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    /// Grid sizes; defaults to the Nyquist grid of level --s
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub offsets: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub s: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ArcsArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long = "Q")]
    #[serde(rename = "Q")]
    pub q: u64,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Denominator cap for best_rational (default N^{k-1})
    #[arg(long)]
    pub qmax: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
#[value(rename_all = "kebab-case")]
#[serde(rename_all = "kebab-case")]
pub enum MollifierAction {
    Profiles,
    Fourier,
    PartitionCheck,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MollifierArgs {
    #[arg(long, value_enum, default_value = "profiles")]
    pub action: MollifierAction,
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long, default_value_t = 0.125)]
    pub c1: f64,
    #[arg(long, value_enum, default_value = "quintic_plateau")]
    pub kappa: Kappa,
    #[arg(long = "Q", default_value_t = 1)]
    #[serde(rename = "Q")]
    pub q: u64,
    /// Shift level; defaults to the top level log2 Ntilde
    #[arg(long)]
    pub s: Option<u32>,
    #[arg(long = "n", value_delimiter = ',', allow_hyphen_values = true, default_value = "0,1")]
    #[serde(rename = "n")]
    pub freqs: Vec<i64>,
    /// Also evaluate the Fourier coefficients by direct quadrature
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MajorantArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long = "Q")]
    #[serde(rename = "Q")]
    pub q: u64,
    #[arg(long, default_value_t = majorants::DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long, value_delimiter = ',')]
    pub theta: Vec<f64>,
    #[arg(long = "l", value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(rename = "l")]
    pub freqs: Vec<i64>,
    /// Also evaluate V-hat by direct quadrature
    #[arg(long)]
    pub check: bool,
    /// Samples for the domination check (0 skips it)
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub points: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RepcountArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[arg(long)]
    pub s: u32,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HypkArgs {
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long)]
    pub s: u32,
    #[arg(long = "X")]
    #[serde(rename = "X")]
    pub x: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VinogradovArgs {
    #[arg(long)]
    pub s: u32,
    #[arg(long)]
    pub k: u32,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
#[value(rename_all = "kebab-case")]
#[serde(rename_all = "kebab-case")]
pub enum DivisorAction {
    Moment,
    Tail,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DivisorArgs {
    #[arg(long, value_enum, default_value = "moment")]
    pub action: DivisorAction,
    #[arg(long = "B", default_value_t = 1)]
    #[serde(rename = "B")]
    pub b: u32,
    #[arg(long = "Q")]
    #[serde(rename = "Q")]
    pub q: u64,
    #[arg(long = "X")]
    #[serde(rename = "X")]
    pub x: u64,
    /// Threshold for the tail count
    #[arg(long = "D", default_value_t = 2.0)]
    #[serde(rename = "D")]
    pub dthr: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GaussArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub b: i64,
    #[arg(long)]
    pub q: u64,
    #[arg(long, default_value_t = 2)]
    pub k: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HuaArgs {
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long)]
    pub qmax: u64,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
#[value(rename_all = "kebab-case")]
#[serde(rename_all = "kebab-case")]
pub enum SingularAction {
    Series,
    Integral,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SingularArgs {
    #[arg(long, value_enum, default_value = "series")]
    pub action: SingularAction,
    #[arg(long, value_delimiter = ',')]
    pub kvec: Vec<u32>,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 64)]
    pub qmax: u64,
    /// Box half-width for the truncated singular integral
    #[arg(long = "R", default_value_t = 8.0)]
    #[serde(rename = "R")]
    pub r: f64,
    #[arg(long, value_enum, default_value = "quintic_plateau")]
    pub profile: Kappa,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MomentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeff: CoeffArgs,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long)]
    pub p: f64,
    /// Exact even moment through representation counting
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LevelsetArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeff: CoeffArgs,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// Grid oversampling over the level-1 Nyquist grid
    #[arg(long, default_value_t = 4)]
    pub oversample: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TruncatedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeff: CoeffArgs,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long)]
    pub p: f64,
    #[arg(long = "lambda-cut")]
    pub lambda_cut: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TomasSteinArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeff: CoeffArgs,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    /// Levels as fractions of sup |F_a|
    #[arg(long = "lambda-frac", value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    pub lambda_frac: Vec<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DecomposeArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long, default_value_t = 0.25)]
    pub c1: f64,
    #[arg(long, value_enum, default_value = "plain")]
    pub variant: VariantArg,
    #[arg(long = "Q1")]
    #[serde(rename = "Q1")]
    pub q1: Option<u64>,
    /// Grid sizes (theta..., alpha); defaults to 4N+1 per theta and 2 (2N)^k d rounded up to a power of two
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    /// Levels kept as tables, written Q:s
    #[arg(long, value_delimiter = ',')]
    pub retain: Vec<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum VariantArg {
    Plain,
    Corrected,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PieceCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dcp: DecomposeArgs,
    #[arg(long = "Q")]
    #[serde(rename = "Q")]
    pub q: u64,
    #[arg(long)]
    pub s: u32,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WeylScanArgs {
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long = "N-list", value_delimiter = ',', default_value = "32,64,128,256")]
    #[serde(rename = "N_list")]
    pub n_list: Vec<u64>,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Replace tau in the normalization
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PoissonArgs {
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub a: u64,
    #[arg(long, default_value_t = 1)]
    pub q: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long = "m-cut", value_delimiter = ',', default_value = "4,8,16")]
    pub m_cut: Vec<u32>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScalingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub coeff: CoeffArgs,
    #[arg(long)]
    pub p: f64,
    #[arg(long = "N-list", value_delimiter = ',', default_value = "8,12,16,24,32")]
    #[serde(rename = "N_list")]
    pub n_list: Vec<u64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LevelsetFitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    /// Fixed eta across N
    #[arg(long, conflicts_with = "eta_power")]
    pub eta: Option<f64>,
    /// eta = N^{-e}
    #[arg(long = "eta-power")]
    pub eta_power: Option<f64>,
    #[arg(long = "N-list", value_delimiter = ',', default_value = "8,12,16,24,32")]
    #[serde(rename = "N_list")]
    pub n_list: Vec<u64>,
    /// Also measure on the doubled grid
    #[arg(long)]
    pub refine: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExponentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    /// Supercritical exponent for subcritical completion
    #[arg(long)]
    pub p1: Option<String>,
    /// Subcritical endpoint for completion (default 2)
    #[arg(long, default_value = "2")]
    pub p0: String,
    /// Level-set gain; defaults to the family's zeta bound
    #[arg(long)]
    pub zeta: Option<String>,
}

fn c(z: num_complex::Complex64) -> Value {
    json!({ "re": z.re, "im": z.im, "abs": z.norm() })
}

fn rat(x: Rational) -> String {
    x.to_string()
}

fn parse_rat(s: &str) -> Result<Rational> {
    let bad = || Failure::validation(format!("cannot read {s:?} as a rational number"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<i64>().map_err(|_| bad())?, d.trim().parse::<i64>().map_err(|_| bad())?),
        None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
    };
    if d == 0 {
        return Err(bad().into());
    }
    Ok(Rational::new(n, d))
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Failure::validation(msg).into())
    }
}

pub fn run(cmd: &Cmd, ctx: &Ctx) -> Result<()> {
    match cmd {
        Cmd::Weylsum(a) => {
            let w = WeightProfile::new(a.n, a.profile.into())?;
            let t = expsum::eval_weyl(&w, a.k, a.alpha, a.theta);
            ctx.emit("weylsum", a, json!({ "T": c(t) }), Value::Null, &format!("T = {} + {}i (|T| = {})", t.re, t.im, t.norm()))
        }
        Cmd::Extension(a) => {
            let sys = a.surface.system()?;
            let co = a.coeff.build(&sys, a.n, ctx.seed)?;
            let f = expsum::eval_extension(&co, &sys, &a.alpha)?;
            ctx.emit("extension", a, json!({ "F": c(f), "l2": co.l2_norm() }), Value::Null, &format!("F_a = {} + {}i", f.re, f.im))
        }
        Cmd::Gridsample(a) => {
            let sys = a.surface.system()?;
            let co = a.coeff.build(&sys, a.n, ctx.seed)?;
            let grid = if a.dims.is_empty() {
                expsum::nyquist_grid(&sys, a.n, a.s)?
            } else {
                let offs = if a.offsets.is_empty() { vec![0.0; a.dims.len()] } else { a.offsets.clone() };
                TorusGrid::new(a.dims.clone(), offs)?
            };
            let t = expsum::grid_sample(&co, &sys, &grid)?;
            if let Some(f) = ctx.file("table.bin")? {
                t.write_binary(f)?;
            }
            if let Some(f) = ctx.file("abs.csv")? {
                t.write_abs_csv(f)?;
            }
            let mean_sq = t.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / t.values.len() as f64;
            ctx.emit(
                "gridsample",
                a,
                json!({ "dims": grid.dims, "points": t.values.len(), "max_abs": t.max_abs(), "mean_square": mean_sq }),
                Value::Null,
                &format!("{} points, sup |F_a| = {}", t.values.len(), t.max_abs()),
            )
        }
        Cmd::Arcs(a) => {
            require(a.q >= 1, "Q must be >= 1")?;
            let qmax = match a.qmax {
                Some(q) => q,
                None => a.n.checked_pow(a.k - 1).ok_or_else(|| Failure::validation("N^{k-1} overflows"))?,
            };
            let (f, err) = best_rational(a.alpha, qmax);
            let cls = classify_arc(a.alpha, a.q, a.n, a.k);
            let label = match cls {
                ArcClass::Major { a, q } => format!("major {a}/{q}"),
                ArcClass::Minor => "minor".into(),
            };
            ctx.emit(
                "arcs",
                a,
                json!({ "best_rational": { "a": f.a, "q": f.q, "error": err, "qmax": qmax }, "class": cls }),
                Value::Null,
                &format!("best {}/{} (error {err:e}); {label}", f.a, f.q),
            )
        }
        Cmd::Mollifier(a) => run_mollifier(a, ctx),
        Cmd::Majorant(a) => run_majorant(a, ctx),
        Cmd::Repcount(a) => {
            let sys = a.surface.system()?;
            let t = arith::representation_table(&sys, a.s, a.n)?;
            if let Some(f) = ctx.file("repcount.csv")? {
                t.write_csv(f)?;
            }
            let sq = t.sum_squares();
            ctx.emit(
                "repcount",
                a,
                json!({ "support": t.support_size(), "distinct": t.entries().len(), "total": t.total().to_string(),
                        "sum_squares": sq.to_string(), "max": t.max() }),
                Value::Null,
                &format!("sum of R^2 = {sq}, max R = {}", t.max()),
            )
        }
        Cmd::Hypk(a) => {
            let r = arith::hypothesis_k_scan(a.k, a.s, a.x)?;
            let summary = format!("max r = {} at {:?}", r.max, r.argmax);
            ctx.emit("hypk", a, serde_json::to_value(&r)?, Value::Null, &summary)
        }
        Cmd::Vinogradov(a) => {
            let r = arith::vinogradov_count(a.s, a.k, a.n)?;
            let summary = format!("J = {} (diagonal {})", r.j, r.diagonal);
            let v = json!({ "J": r.j.to_string(), "diagonal": r.diagonal.to_string(), "trivial": r.trivial.to_string() });
            ctx.emit("vinogradov", a, v, Value::Null, &summary)
        }
        Cmd::Divisor(a) => match a.action {
            DivisorAction::Moment => {
                let m = arith::divisor_moment(a.b, a.q, a.x)?;
                ctx.emit("divisor", a, json!({ "moment": m.to_string() }), Value::Null, &format!("moment = {m}"))
            }
            DivisorAction::Tail => {
                let t = arith::divisor_tail_count(a.dthr, a.q, a.x)?;
                ctx.emit("divisor", a, json!({ "tail_count": t }), Value::Null, &format!("tail count = {t}"))
            }
        },
        Cmd::Gauss(a) => {
            require(a.q >= 1, "q must be >= 1")?;
            let s = arith::gaussian_sum(a.a, a.b, a.q, a.k);
            ctx.emit("gauss", a, json!({ "S": c(s), "sqrt_q": (a.q as f64).sqrt() }), Value::Null, &format!("|S| = {}", s.norm()))
        }
        Cmd::HuaScan(a) => {
            let r = arith::hua_constant_scan(a.k, a.qmax, a.eps)?;
            let summary = format!("max ratio {} at (q, a, b) = {:?}", r.max_ratio, r.argmax);
            ctx.emit("hua-scan", a, serde_json::to_value(&r)?, Value::Null, &summary)
        }
        Cmd::Singular(a) => {
            require(!a.kvec.is_empty(), "--kvec must list at least one degree")?;
            match a.action {
                SingularAction::Series => {
                    let r = arith::singular_series_partial(&a.kvec, a.p, a.qmax)?;
                    let fits = json!({ "decay_slope": r.decay_slope });
                    let summary = format!("partial sum {} (tail estimate {:?})", r.partial_sum, r.tail_estimate);
                    ctx.emit("singular", a, serde_json::to_value(&r)?, fits, &summary)
                }
                SingularAction::Integral => {
                    let v = arith::singular_integral_truncated(a.profile.into(), &a.kvec, a.p, a.r)?;
                    ctx.emit("singular", a, json!({ "integral": v }), Value::Null, &format!("truncated integral = {v}"))
                }
            }
        }
        Cmd::Moments(a) => {
            let sys = a.surface.system()?;
            let co = a.coeff.build(&sys, a.n, ctx.seed)?;
            let rep = if a.exact {
                require(a.p.fract() == 0.0 && a.p >= 2.0 && (a.p as u64) % 2 == 0, "--exact needs an even integer p")?;
                restriction::even_moment_exact(&co, &sys, (a.p / 2.0) as u32)?
            } else {
                let s = (a.p / 2.0).ceil().max(1.0) as u32;
                let grid = expsum::nyquist_grid(&sys, a.n, s)?;
                restriction::moment_quadrature_refined(&co, &sys, &grid, a.p)?
            };
            let summary = match rep.exact {
                Some(x) => format!("moment = {x}"),
                None => format!("moment = {}", rep.value),
            };
            let mut v = serde_json::to_value(&rep)?;
            if let Some(x) = rep.exact {
                v["exact"] = json!(x.to_string());
            }
            ctx.emit("moments", a, v, Value::Null, &summary)
        }
        Cmd::Levelset(a) => {
            require(!a.lambda.is_empty(), "--lambda needs at least one level")?;
            let sys = a.surface.system()?;
            let co = a.coeff.build(&sys, a.n, ctx.seed)?;
            let dims: Vec<usize> = sys.frequency_extent(a.n)?.iter().map(|&x| 2 * a.oversample.max(1) * x as usize + 1).collect();
            let grid = TorusGrid::uniform(dims)?;
            let mut rows = Vec::new();
            for &l in &a.lambda {
                rows.push(restriction::level_set_measure_refined(&co, &sys, &grid, l)?);
            }
            #[derive(Serialize)]
            struct Row {
                lambda: f64,
                eta: Option<f64>,
                measure: f64,
                refinement_delta: Option<f64>,
            }
            let csv: Vec<Row> =
                rows.iter().map(|r| Row { lambda: r.lambda, eta: r.eta, measure: r.measure, refinement_delta: r.refinement_delta }).collect();
            ctx.csv("levelset.csv", &csv)?;
            let summary = format!("m(E) = {:?}", rows.iter().map(|r| r.measure).collect::<Vec<_>>());
            ctx.emit("levelset", a, json!({ "grid": grid.dims, "levels": csv }), Value::Null, &summary)
        }
        Cmd::Truncated(a) => {
            let sys = a.surface.system()?;
            let co = a.coeff.build(&sys, a.n, ctx.seed)?;
            let s = (a.p / 2.0).ceil().max(1.0) as u32;
            let t = expsum::grid_sample(&co, &sys, &expsum::nyquist_grid(&sys, a.n, s)?)?;
            let v = restriction::truncated_moment(&t, a.p, a.lambda_cut)?;
            let lc = restriction::truncated_moment_layer_cake(&t, a.p, a.lambda_cut)?;
            let full = restriction::moment_quadrature(&t, a.p)?.value;
            let dev = if v != 0.0 { ((v - lc) / v).abs() } else { lc.abs() };
            if dev > 1e-6 {
                return Err(Failure::tolerance(format!("layer-cake reconstruction deviates by {dev:e}")).into());
            }
            ctx.emit(
                "truncated",
                a,
                json!({ "truncated": v, "layer_cake": lc, "relative_deviation": dev, "full_moment": full, "ratio": v / full }),
                Value::Null,
                &format!("truncated moment = {v} (full {full})"),
            )
        }
        Cmd::TomasStein(a) => {
            let sys = a.surface.system()?;
            let co = a.coeff.build(&sys, a.n, ctx.seed)?;
            let w = WeightProfile::new(a.n, Profile::QuinticPlateau)?;
            // kernel frequencies reach (2N)^k, so the grid covers those
            let dims: Vec<usize> = match &sys {
                SurfaceSystem::KthPowers { k } => vec![2 * (2 * a.n as usize).pow(*k) + 1],
                SurfaceSystem::KParaboloid { d, k } => {
                    let mut v = vec![8 * a.n as usize + 1; *d];
                    v.push(2 * d * (2 * a.n as usize).pow(*k) + 1);
                    v
                }
                SurfaceSystem::MonomialCurve { .. } => {
                    return Err(circle_lab::Error::UnsupportedFamily("Tomas-Stein check needs a kernel family".into()).into())
                }
            };
            let grid = TorusGrid::uniform(dims)?;
            let fa = expsum::grid_sample(&co, &sys, &grid)?;
            let f = expsum::kernel_grid_sample(&w, &sys, &grid)?;
            let sup = fa.max_abs();
            let mut reps = Vec::new();
            for &fr in &a.lambda_frac {
                reps.push(restriction::tomas_stein_check(&fa, &f, fr * sup)?);
            }
            ctx.csv("tomas_stein.csv", &reps)?;
            let all = reps.iter().all(|r| r.holds);
            let worst = reps.iter().map(|r| r.slack).fold(0.0, f64::max);
            ctx.emit("tomas-stein", a, json!({ "sup": sup, "checks": reps }), Value::Null, &format!("holds={all}, max lhs/rhs = {worst}"))?;
            if !all {
                return Err(Failure::tolerance("Tomas-Stein inequality failed on at least one level").into());
            }
            Ok(())
        }
        Cmd::Decompose(a) => {
            let dcp = build_decomposition(a)?;
            let sum = dcp.summary();
            let bounds = if dcp.pieces.is_empty() { None } else { Some(restriction::piece_bound_scan(&dcp)?) };
            if let Some(b) = &bounds {
                ctx.csv("piece_bounds.csv", &b.pieces)?;
            }
            let tol = 1e-10 * (a.n as f64).powi(a.d as i32);
            let summary = format!("identity error {:e}, hat(0) error {:e}", sum.identity_error, sum.hat_zero_error);
            ctx.emit("decompose", a, json!({ "summary": sum, "piece_bounds": bounds }), Value::Null, &summary)?;
            if sum.identity_error > tol {
                return Err(Failure::tolerance(format!("decomposition identity error {:e} exceeds {tol:e}", sum.identity_error)).into());
            }
            Ok(())
        }
        Cmd::PieceCheck(a) => {
            let mut dargs = a.dcp.clone();
            let key = format!("{}:{}", a.q, a.s);
            if !dargs.retain.contains(&key) {
                dargs.retain.push(key);
            }
            let dcp = build_decomposition(&dargs)?;
            let rep = restriction::piece_fourier_check(&dcp, a.q, a.s, a.samples, &mut rng(ctx.seed))?;
            let summary = format!("max error {:e} (relative {:e})", rep.max_error, rep.relative_error);
            ctx.emit("piece-check", a, serde_json::to_value(&rep)?, Value::Null, &summary)?;
            if rep.relative_error > 1e-6 {
                return Err(Failure::tolerance("piece Fourier identity error above 1e-6").into());
            }
            Ok(())
        }
        Cmd::WeylScan(a) => {
            let rep = restriction::weyl_minor_scan(a.k, &a.n_list, a.samples, a.tau, ctx.seed)?;
            ctx.csv("weyl_scan.csv", &rep.rows)?;
            let fits = json!({ "ratios": rep.ratios, "allowed": rep.allowed, "pass": rep.pass });
            let summary = format!(
                "normalized maxima {:?}, pass={}",
                rep.rows.iter().map(|r| r.max_normalized).collect::<Vec<_>>(),
                rep.pass
            );
            ctx.emit("weyl-scan", a, serde_json::to_value(&rep)?, fits, &summary)
        }
        Cmd::PoissonCheck(a) => {
            let w = WeightProfile::new(a.n, Profile::QuinticPlateau)?;
            let frac = FareyFraction::new(a.a, a.q)?;
            let (reps, mono) = restriction::poisson_convergence(&w, a.k, frac, a.beta, a.theta, &a.m_cut)?;
            let errs: Vec<f64> = reps.iter().map(|r| r.error).collect();
            let rows: Vec<Value> =
                reps.iter().map(|r| json!({ "m_cut": r.m_cut, "lhs": c(r.lhs), "rhs": c(r.rhs), "error": r.error })).collect();
            ctx.emit("poisson-check", a, json!({ "runs": rows, "monotone": mono }), Value::Null, &format!("errors {errs:?}, monotone={mono}"))
        }
        Cmd::Scaling(a) => {
            let sys = a.surface.system()?;
            let rep = restriction::scaling_fit(&sys, a.p, &a.n_list, a.coeff.rule(), ctx.seed)?;
            #[derive(Serialize)]
            struct Row {
                n: u64,
                moment: f64,
                oracle: Option<f64>,
            }
            let rows: Vec<Row> = rep.ns.iter().zip(&rep.moments).zip(&rep.oracle).map(|((&n, &m), &o)| Row { n, moment: m, oracle: o }).collect();
            ctx.csv("scaling.csv", &rows)?;
            let fits = json!({ "slope": rep.fit.slope, "intercept": rep.fit.intercept, "residuals": rep.fit.residuals, "predicted": rep.predicted });
            let summary = format!("slope {} (predicted {})", rep.fit.slope, rep.predicted);
            ctx.emit("scaling", a, serde_json::to_value(&rep)?, fits, &summary)
        }
        Cmd::LevelsetFit(a) => {
            let sys = a.surface.system()?;
            let rule = match (a.eta, a.eta_power) {
                (Some(e), None) => EtaRule::Fixed(e),
                (None, Some(p)) => EtaRule::Power(p),
                _ => return Err(Failure::validation("give exactly one of --eta or --eta-power").into()),
            };
            let rep = restriction::level_set_exponent_fit(&sys, rule, &a.n_list, a.refine)?;
            let fits = json!({ "slope": rep.fit.slope, "intercept": rep.fit.intercept, "residuals": rep.fit.residuals, "predicted": rep.predicted });
            let summary = format!("slope {} (predicted {})", rep.fit.slope, rep.predicted);
            ctx.emit("levelset-fit", a, serde_json::to_value(&rep)?, fits, &summary)
        }
        Cmd::Exponents(a) => {
            let sys = a.surface.system()?;
            let e = surfaces::exponent_table(&sys)?;
            let mut v = json!({
                "tau": rat(e.tau),
                "critical": rat(e.critical),
                "truncated_threshold": rat(e.truncated_threshold),
                "full_threshold": rat(e.full_threshold),
                "zeta_bound": rat(e.zeta_bound),
                "lowdim": e.lowdim.as_ref().map(|l| json!({
                    "dim_bound": l.dim_bound.map(rat), "valid": l.valid, "threshold": rat(l.threshold) })),
            });
            if let Some(p1) = &a.p1 {
                let zeta = match &a.zeta {
                    Some(z) => parse_rat(z)?,
                    None => e.zeta_bound,
                };
                let done = surfaces::complete_subcritical_exact(parse_rat(p1)?, zeta, parse_rat(&a.p0)?, sys.d() as u32, sys.total_degree())?;
                v["completed_threshold"] = json!(rat(done));
            }
            let summary = format!(
                "tau={}, truncated p>{}, full p>{}",
                surfaces::rat_f64(e.tau),
                rat(e.truncated_threshold),
                rat(e.full_threshold)
            );
            ctx.emit("exponents", a, v, Value::Null, &summary)
        }
    }
}

fn run_mollifier(a: &MollifierArgs, ctx: &Ctx) -> Result<()> {
    let fam = MollifierFamily::new(a.k, a.n, a.c1, a.kappa.into())?;
    let s = a.s.unwrap_or_else(|| fam.log_ntilde());
    let base = json!({ "N1": fam.n1, "Ntilde": fam.ntilde, "levels": fam.levels().len(), "disjoint": arcs::disjointness_check(&fam) });
    match a.action {
        MollifierAction::Profiles => {
            if let Some(f) = ctx.file("arcs.csv")? {
                arcs::write_arc_csv(&fam, f)?;
            }
            if let Some(f) = ctx.file("profile.csv")? {
                arcs::write_profile_csv(&fam, a.points, f)?;
            }
            let rho0 = arcs::rho_fourier(&fam, 0, arcs::DEFAULT_RHO_RANGE_EXPONENT)?;
            let mut v = base;
            v["rho_hat_0"] = json!(rho0);
            v["lambda_integral_quadrature"] = json!(arcs::lambda_integral_quadrature(&fam));
            ctx.emit("mollifier", a, v, Value::Null, &format!("N1={}, Ntilde={}, rho-hat(0)={rho0}", fam.n1, fam.ntilde))
        }
        MollifierAction::Fourier => {
            let mut rows = Vec::new();
            for &n in &a.freqs {
                let cf = arcs::mollifier_fourier(&fam, a.q, s, n)?;
                let qd = if a.check { Some(arcs::mollifier_fourier_quadrature(&fam, a.q, s, n)?) } else { None };
                rows.push(json!({ "n": n, "closed_form": cf, "quadrature": qd }));
            }
            let mut v = base;
            v["Q"] = json!(a.q);
            v["s"] = json!(s);
            v["coefficients"] = Value::Array(rows);
            ctx.emit("mollifier", a, v, Value::Null, &format!("{} coefficients at Q={}, s={s}", a.freqs.len(), a.q))
        }
        MollifierAction::PartitionCheck => {
            let w = 3.0 / (a.q as f64 * fam.m as f64);
            let xs: Vec<f64> = (0..a.samples).map(|i| -w + 2.0 * w * (i as f64 + 0.5) / a.samples as f64).collect();
            let dev = arcs::partition_check(&fam, a.q, &xs)?;
            let mut v = base;
            v["max_deviation"] = json!(dev);
            ctx.emit("mollifier", a, v, Value::Null, &format!("partition deviation {dev:e}"))?;
            if dev > 1e-14 {
                return Err(Failure::tolerance(format!("partition identity deviates by {dev:e}")).into());
            }
            Ok(())
        }
    }
}

fn run_majorant(a: &MajorantArgs, ctx: &Ctx) -> Result<()> {
    let params = MajorantParams::new(a.p, a.q, a.eps, a.n, a.k)?;
    let w = WeightProfile::new(a.n, Profile::QuinticPlateau)?;
    let mut vals = Vec::new();
    for &t in &a.theta {
        vals.push(json!({ "theta": t, "Z": majorants::z_kernel(&params, t), "V": majorants::majorant_eval(&params, t)? }));
    }
    let mut hats = Vec::new();
    for &l in &a.freqs {
        let cf = majorants::majorant_fourier(&params, l);
        let qd = if a.check { Some(majorants::majorant_fourier_quadrature(&params, l)?) } else { None };
        hats.push(json!({ "l": l, "closed_form": cf, "quadrature": qd }));
    }
    let dom = if a.samples > 0 { Some(majorants::domination_check(&params, &w, a.samples, &mut rng(ctx.seed))?) } else { None };
    if a.points > 0 {
        if let Some(f) = ctx.file("majorant_profile.csv")? {
            majorants::write_profile_csv(&params, &w, a.points, f)?;
        }
    }
    let summary = match &dom {
        Some(d) => format!("C_major = {}, C_minor = {}", d.c_major, d.c_minor),
        None => format!("{} values, {} coefficients", vals.len(), hats.len()),
    };
    ctx.emit(
        "majorant",
        a,
        json!({ "delta": params.delta, "q_within_delta": params.q_within_delta, "values": vals, "fourier": hats, "domination": dom }),
        Value::Null,
        &summary,
    )
}

fn parse_levels(items: &[String]) -> Result<Vec<(u64, u32)>> {
    items
        .iter()
        .map(|it| {
            let (q, s) = it.split_once(':').ok_or_else(|| Failure::validation(format!("level {it:?} is not of the form Q:s")))?;
            let q = q.parse().map_err(|_| Failure::validation(format!("bad Q in {it:?}")))?;
            let s = s.parse().map_err(|_| Failure::validation(format!("bad s in {it:?}")))?;
            Ok((q, s))
        })
        .collect()
}

fn build_decomposition(a: &DecomposeArgs) -> Result<restriction::KernelDecomposition> {
    let sys = if a.d == 0 { SurfaceSystem::kth_powers(a.k)? } else { SurfaceSystem::paraboloid(a.d, a.k)? };
    let w = WeightProfile::new(a.n, Profile::QuinticPlateau)?;
    let fam = MollifierFamily::new(a.k, a.n, a.c1, Profile::QuinticPlateau)?;
    let dims = if a.dims.is_empty() {
        let top = 2 * a.d.max(1) * (2 * a.n as usize).pow(a.k) + 1;
        let mut v = vec![4 * a.n as usize + 1; a.d];
        v.push(top.next_power_of_two());
        v
    } else {
        a.dims.clone()
    };
    let grid = TorusGrid::uniform(dims)?;
    let variant = match a.variant {
        VariantArg::Plain => Variant::Plain,
        VariantArg::Corrected => Variant::Corrected,
    };
    Ok(restriction::kernel_decompose(&w, &sys, &fam, &grid, variant, a.q1, &parse_levels(&a.retain)?)?)
}
