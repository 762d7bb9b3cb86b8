//! Quick identity checks across the library, run by `--selftest`.

use crate::report::{Ctx, Failure};
use anyhow::Result;
use circle_lab::arcs::{self, MollifierFamily};
use circle_lab::arith;
use circle_lab::expsum::{self, CoefficientSequence};
use circle_lab::majorants::{self, MajorantParams};
use circle_lab::numeric::rng;
use circle_lab::restriction;
use circle_lab::surfaces::{self, Profile, Rational, SurfaceSystem, WeightProfile};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
    pass: bool,
}

fn check(out: &mut Vec<Check>, name: &'static str, value: f64, tol: f64) {
    let pass = value.is_finite() && value <= tol;
    println!("[{}] {name}: {value:e} (tol {tol:e})", if pass { "PASS" } else { "FAIL" });
    out.push(Check { name, value, tol, pass });
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut out = Vec::new();

    let tau = surfaces::exponent_table(&SurfaceSystem::kth_powers(3)?)?.tau;
    check(&mut out, "surfaces: tau(3) = 1/4", (surfaces::rat_f64(tau - Rational::new(1, 4))).abs(), 0.0);

    let sys = SurfaceSystem::paraboloid(1, 2)?;
    let a = CoefficientSequence::random_unit(&sys, 6, &mut rng(ctx.seed))?;
    let grid = expsum::nyquist_grid(&sys, 6, 1)?;
    let t = expsum::grid_sample(&a, &sys, &grid)?;
    let mut fft_err: f64 = 0.0;
    for idx in [0, 7, t.values.len() / 2, t.values.len() - 1] {
        fft_err = fft_err.max((t.values[idx] - expsum::probe_direct(&a, &sys, &grid, idx)?).norm());
    }
    check(&mut out, "expsum: FFT grid vs direct", fft_err, 1e-10);

    let cube = SurfaceSystem::kth_powers(3)?;
    let ones = CoefficientSequence::all_ones(&cube, 4)?;
    let m4 = restriction::even_moment_exact(&ones, &cube, 2)?.exact.unwrap_or(0);
    check(&mut out, "arith: 4th moment of cubes up to 4 is 28", (m4 as f64 - 28.0).abs(), 0.0);

    let g = arith::gaussian_sum(1, 0, 7, 2).norm();
    check(&mut out, "arith: |S(1,0;7)| = sqrt 7", (g - 7f64.sqrt()).abs(), 1e-12);

    let fam = MollifierFamily::new(3, 16, 0.125, Profile::QuinticPlateau)?;
    let w = 3.0 / fam.m as f64;
    let xs: Vec<f64> = (0..512).map(|i| -w + 2.0 * w * (i as f64 + 0.5) / 512.0).collect();
    check(&mut out, "arcs: partition of unity at Q = 1", arcs::partition_check(&fam, 1, &xs)?, 1e-14);
    let mut lr: f64 = 0.0;
    for i in 0..200 {
        let (l, r) = arcs::lambda_rho(&fam, i as f64 / 200.0);
        lr = lr.max((l + r - 1.0).abs());
    }
    check(&mut out, "arcs: lambda + rho = 1", lr, 1e-14);
    let s = fam.log_ntilde();
    let cf = arcs::mollifier_fourier(&fam, 1, s, 1)?;
    let qd = arcs::mollifier_fourier_quadrature(&fam, 1, s, 1)?;
    let l1 = arcs::mollifier_fourier(&fam, 1, s, 0)?.abs();
    check(&mut out, "arcs: mollifier Fourier closed form vs quadrature", (cf - qd).abs() / l1, 1e-8);

    let params = MajorantParams::new(4.0, 2, majorants::DEFAULT_EPS, 16, 3)?;
    let vf = majorants::majorant_fourier(&params, 3);
    let vq = majorants::majorant_fourier_quadrature(&params, 3)?;
    check(&mut out, "majorants: V-hat closed form vs quadrature", (vf - vq).abs() / majorants::majorant_fourier(&params, 0), 1e-8);

    let fa = expsum::grid_sample(&ones, &cube, &expsum::nyquist_grid(&cube, 4, 2)?)?;
    let lam = 0.5 * fa.max_abs();
    let tm = restriction::truncated_moment(&fa, 3.0, lam)?;
    let lc = restriction::truncated_moment_layer_cake(&fa, 3.0, lam)?;
    check(&mut out, "restriction: layer cake", (tm - lc).abs() / tm.abs().max(1e-300), 1e-6);
    let wp = WeightProfile::new(4, Profile::QuinticPlateau)?;
    let kgrid = expsum::TorusGrid::uniform(vec![2 * 8usize.pow(3) + 1])?;
    let ts = restriction::tomas_stein_check(
        &expsum::grid_sample(&ones, &cube, &kgrid)?,
        &expsum::kernel_grid_sample(&wp, &cube, &kgrid)?,
        lam,
    )?;
    check(&mut out, "restriction: Tomas-Stein excess", (ts.lhs - ts.rhs).max(0.0) / ts.rhs, 0.0);

    let failed: Vec<&str> = out.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    ctx.emit(
        "selftest",
        &json!({}),
        json!({ "checks": out }),
        Value::Null,
        &format!("{} of {} checks passed", out.len() - failed.len(), out.len()),
    )?;
    if !failed.is_empty() {
        return Err(Failure::tolerance(format!("failed checks: {}", failed.join(", "))).into());
    }
    Ok(())
}
