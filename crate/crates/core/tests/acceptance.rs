//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! straight to stderr so it survives output capture.

use circle_lab::arcs::{
    arc_mollifier, disjointness_check, lambda_rho, mollifier_fourier, mollifier_fourier_quadrature, partition_check,
    FareyFraction, MollifierFamily,
};
use circle_lab::arith::{
    divisor_moment, divisor_tail_count, gaussian_sum, ramanujan_sum, ramanujan_sum_direct, representation_table,
};
use circle_lab::expsum::{
    eval_extension, grid_sample, kernel_grid_sample, nyquist_grid, CoefficientSequence, TorusGrid,
};
use circle_lab::numeric::rng;
use circle_lab::restriction::{
    even_moment_exact, even_moment_parseval, kernel_decompose, level_set_exponent_fit, moment_quadrature,
    piece_fourier_check, poisson_convergence, poisson_majorarc_check, scaling_fit, tomas_stein_check, weyl_minor_scan,
    CoeffRule, EtaRule, Variant,
};
use circle_lab::surfaces::{complete_subcritical_exact, exponent_table, Profile, Rational, SurfaceSystem, WeightProfile};
use rand::Rng;
use std::io::Write;
use std::time::Instant;

fn report(id: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {id:>2}: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn cubes() -> SurfaceSystem {
    SurfaceSystem::kth_powers(3).unwrap()
}

#[test]
fn criterion_01_exact_even_moment() {
    let t0 = Instant::now();
    let sys = cubes();
    let n = 4i64;
    // brute-force oracle: ordered pairs with n1^3 + n2^3 = n3^3 + n4^3
    let mut oracle = 0u64;
    for a in 1..=n {
        for b in 1..=n {
            for c in 1..=n {
                for d in 1..=n {
                    if a.pow(3) + b.pow(3) == c.pow(3) + d.pow(3) {
                        oracle += 1;
                    }
                }
            }
        }
    }
    let a = CoefficientSequence::all_ones(&sys, 4).unwrap();
    let counting = representation_table(&sys, 2, 4).unwrap().sum_squares() as f64;
    let exact = even_moment_exact(&a, &sys, 2).unwrap().value;
    let grid = nyquist_grid(&sys, 4, 2).unwrap();
    let quad = moment_quadrature(&grid_sample(&a, &sys, &grid).unwrap(), 4.0).unwrap().value;
    let parseval = even_moment_parseval(&a, &sys, 2).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let worst = [counting, exact, quad, parseval].iter().map(|&v| rel(v, 28.0)).fold(0.0, f64::max);
    let pass = oracle == 28 && worst <= 1e-9 && secs < 1.0;
    report(
        1,
        pass,
        &format!("oracle={oracle} counting={counting} quadrature={quad:.12} parseval={parseval:.12} max_rel={worst:.2e} time={secs:.3}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_fft_direct_agreement() {
    let t0 = Instant::now();
    let sys = cubes();
    let mut r = rng(2);
    let a = CoefficientSequence::from_fn(&sys, 16, |_| num_complex::Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
        .unwrap();
    let grid = TorusGrid::uniform(vec![65536]).unwrap();
    let table = grid_sample(&a, &sys, &grid).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..64 {
        let idx = r.gen_range(0..65536);
        let direct = eval_extension(&a, &sys, &grid.point(idx)).unwrap();
        // relative to |F| with ||a||_2 as the floor near zeros of F
        let err = (table.values[idx] - direct).norm() / direct.norm().max(a.l2_norm());
        worst = worst.max(err);
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && secs < 5.0;
    report(2, pass, &format!("64 probes, max_rel={worst:.2e} time={secs:.3}s"));
    assert!(pass);
}

#[test]
fn criterion_03_mollifier_identities() {
    let t0 = Instant::now();
    let fam = MollifierFamily::new(3, 64, 0.125, Profile::QuinticPlateau).unwrap();
    let m = fam.m as f64;
    let mut r = rng(3);

    // partition identity
    let mut part = 0.0f64;
    let mut q = 1;
    while q <= fam.ntilde {
        let w = 3.0 / (q as f64 * m);
        let xs: Vec<f64> = (0..4096).map(|_| r.gen_range(-w..w)).collect();
        part = part.max(partition_check(&fam, q, &xs).unwrap());
        q *= 2;
    }

    // flat cores
    let mut flat = 0.0f64;
    for _ in 0..200 {
        let qq = r.gen_range(1..=fam.n1);
        let a = loop {
            let a = r.gen_range(1..=qq);
            if num_integer::gcd(a, qq) == 1 {
                break a;
            }
        };
        let level = 1u64 << (63 - qq.leading_zeros());
        let u = r.gen_range(-1.0..=1.0) / (level as f64 * m);
        let (lam, rho) = lambda_rho(&fam, a as f64 / qq as f64 + u);
        flat = flat.max((lam - 1.0).abs()).max(rho.abs());
    }

    // closed form against quadrature
    let levels = fam.levels();
    let mut fourier = 0.0f64;
    for _ in 0..100 {
        let (ql, s) = levels[r.gen_range(0..levels.len())];
        let n: i64 = r.gen_range(-10_000..=10_000);
        let mass = mollifier_fourier(&fam, ql, s, 0).unwrap();
        let a = mollifier_fourier(&fam, ql, s, n).unwrap();
        let b = mollifier_fourier_quadrature(&fam, ql, s, n).unwrap();
        fourier = fourier.max((a - b).abs() / mass);
    }
    let disjoint = disjointness_check(&fam);
    // mollifier evaluates to one at a fraction on the top level
    let top = arc_mollifier(&fam, 4, fam.log_ntilde(), 3.0 / 5.0).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let pass = part <= 1e-14 && flat <= 1e-12 && fourier <= 1e-6 && disjoint && top == 1.0 && secs < 60.0;
    report(
        3,
        pass,
        &format!("partition={part:.1e} core={flat:.1e} fourier_rel={fourier:.1e} disjoint={disjoint} time={secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_ramanujan_gauss() {
    let t0 = Instant::now();
    let mut mismatches = 0usize;
    for q in 1..=200u64 {
        for n in -500..=500i64 {
            let c = ramanujan_sum(q, n);
            let d = ramanujan_sum_direct(q, n);
            if d.re.round() as i64 != c || (d.re - c as f64).abs() > 1e-6 || d.im.abs() > 1e-6 {
                mismatches += 1;
            }
        }
    }
    let primes: Vec<u64> = (3..=97u64).filter(|&p| (2..p).all(|d| p % d != 0)).collect();
    let gauss = primes
        .iter()
        .map(|&p| (gaussian_sum(1, 0, p, 2).norm() - (p as f64).sqrt()).abs())
        .fold(0.0, f64::max);
    let secs = t0.elapsed().as_secs_f64();
    let pass = mismatches == 0 && gauss <= 1e-9 && secs < 30.0;
    report(4, pass, &format!("c_q(n) mismatches={mismatches} odd primes<=97 max|S|-sqrt(p)={gauss:.1e} time={secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_05_kernel_decomposition() {
    let t0 = Instant::now();
    let n = 8;
    let sys = SurfaceSystem::paraboloid(1, 3).unwrap();
    let w = WeightProfile::new(n, Profile::QuinticPlateau).unwrap();
    // c1 = 1/4 keeps the Q = 2 level available at N = 8
    let fam = MollifierFamily::new(3, n, 0.25, Profile::QuinticPlateau).unwrap();
    let grid = TorusGrid::uniform(vec![33, 16384]).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for variant in [Variant::Plain, Variant::Corrected] {
        let dcp = kernel_decompose(&w, &sys, &fam, &grid, variant, Some(1), &[(2, 3), (1, 3), (1, 1)]).unwrap();
        let sum = dcp.summary();
        let mut r = rng(5);
        let pf = piece_fourier_check(&dcp, 2, 3, 200, &mut r).unwrap();
        let ok_id = sum.identity_error <= 1e-10 * n as f64;
        let ok_hat = variant == Variant::Plain || (sum.hat_zero_error <= 1e-10 && pf.diagonal_hat <= 1e-10);
        let ok_piece = pf.relative_error <= 1e-6;
        pass &= ok_id && ok_hat && ok_piece;
        details.push(format!(
            "{variant:?}: identity={:.1e} hat0={:.1e} diag={:.1e} piece_rel={:.1e}",
            sum.identity_error, sum.hat_zero_error, pf.diagonal_hat, pf.relative_error
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    report(5, pass, &format!("{} time={secs:.1}s", details.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_06_tomas_stein() {
    let sys = cubes();
    let n = 16;
    let w = WeightProfile::new(n, Profile::QuinticPlateau).unwrap();
    let grid = TorusGrid::uniform(vec![2 * 32768 + 1]).unwrap();
    let f = kernel_grid_sample(&w, &sys, &grid).unwrap();
    let mut r = rng(6);
    let mut seqs = vec![CoefficientSequence::all_ones(&sys, n).unwrap()];
    for _ in 0..20 {
        seqs.push(CoefficientSequence::random_unit(&sys, n, &mut r).unwrap());
    }
    let (mut checks, mut failures, mut worst) = (0, 0, 0.0f64);
    for a in &seqs {
        let fa = grid_sample(a, &sys, &grid).unwrap();
        let sup = fa.max_abs();
        for frac in [0.25, 0.5, 0.75] {
            let rep = tomas_stein_check(&fa, &f, frac * sup).unwrap();
            checks += 1;
            if !(rep.lhs <= rep.rhs * (1.0 + 1e-6)) {
                failures += 1;
            }
            worst = worst.max(rep.slack);
        }
    }
    let pass = failures == 0;
    report(6, pass, &format!("{checks} checks, failures={failures}, max lhs/rhs={worst:.4}"));
    assert!(pass);
}

#[test]
fn criterion_07_scaling_fits() {
    let t0 = Instant::now();
    let sys = cubes();
    let ns = [8u64, 12, 16, 24, 32];
    let a = scaling_fit(&sys, 2.0, &ns, CoeffRule::AllOnes, 7).unwrap();
    let ok_a = (a.fit.slope - 1.0).abs() <= 1e-6;
    let b = scaling_fit(&sys, 8.0, &ns, CoeffRule::AllOnes, 7).unwrap();
    let oracle_dev = b.max_oracle_deviation.unwrap();
    let ok_b = (4.5..=5.5).contains(&b.fit.slope) && oracle_dev <= 1e-9 && b.predicted == 5.0;
    let c = level_set_exponent_fit(&sys, EtaRule::Power(0.1), &ns, false).unwrap();
    let ok_c = (c.fit.slope + 3.0).abs() <= 0.6;
    let secs = t0.elapsed().as_secs_f64();
    let pass = ok_a && ok_b && ok_c && secs < 600.0;
    report(
        7,
        pass,
        &format!(
            "(a) p=2 slope={:.9} (b) p=8 slope={:.3} oracle_dev={oracle_dev:.1e} (c) level-set slope={:.3} time={secs:.1}s",
            a.fit.slope, b.fit.slope, c.fit.slope
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_weyl_minor_scan() {
    let t0 = Instant::now();
    let rep = weyl_minor_scan(3, &[32, 64, 128, 256], 2000, None, 8).unwrap();
    let growth_ok = rep.ratios.iter().all(|&x| x <= 1.5);
    let secs = t0.elapsed().as_secs_f64();
    let pass = growth_ok && secs < 300.0;
    let maxima: Vec<String> = rep.rows.iter().map(|r| format!("N={}:{:.3}", r.n, r.max_normalized)).collect();
    let ratios: Vec<String> = rep.ratios.iter().map(|x| format!("{x:.3}")).collect();
    report(8, pass, &format!("maxima [{}] ratios [{}] time={secs:.1}s", maxima.join(" "), ratios.join(" ")));
    assert!(pass);
}

#[test]
fn criterion_09_poisson_major_arc() {
    let n = 64u64;
    let w = WeightProfile::new(n, Profile::QuinticPlateau).unwrap();
    let window = poisson_majorarc_check(&w, 3, FareyFraction::new(1, 1).unwrap(), 0.0, 0.0, 8).unwrap();
    let ok_window = window.error <= 1e-6 * n as f64;
    let beta = 1.0 / (3.0 * (n as f64).powf(2.5));
    let (reps, mono) = poisson_convergence(&w, 3, FareyFraction::new(1, 3).unwrap(), beta, 0.3, &[4, 8, 16]).unwrap();
    let errs: Vec<String> = reps.iter().map(|r| format!("{:.2e}", r.error)).collect();
    let pass = ok_window && mono;
    report(9, pass, &format!("window error={:.2e} generic errors (m_cut 4,8,16)=[{}] monotone={mono}", window.error, errs.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_10_exponent_calculator() {
    let r = |a: i64, b: i64| Rational::new(a, b);
    let p = exponent_table(&cubes()).unwrap();
    let ok_p = p.truncated_threshold == r(6, 1) && p.full_threshold == r(18, 1) && p.zeta_bound == r(1, 8);
    let par = exponent_table(&SurfaceSystem::paraboloid(2, 3).unwrap()).unwrap();
    let low = par.lowdim.clone().unwrap();
    let ok_par = par.truncated_threshold == r(8, 1)
        && par.full_threshold == r(14, 1)
        && low.dim_bound == Some(r(12, 1))
        && par.critical == r(5, 1);
    // subcritical completion from the Parseval endpoint p0 = 2 at zeta = d tau / 2
    let mut ok_sub = true;
    for (d, k) in [(1u32, 3u32), (2, 3), (3, 4), (2, 5)] {
        let sys = SurfaceSystem::paraboloid(d as usize, k).unwrap();
        let e = exponent_table(&sys).unwrap();
        let kk = d + k;
        let got = complete_subcritical_exact(e.truncated_threshold, e.zeta_bound, r(2, 1), d, kk).unwrap();
        let expect = r(2, 1) + r(2 * k as i64, 1) / (e.tau * r(d as i64, 1));
        ok_sub &= got == expect.max(e.truncated_threshold) && got == e.full_threshold;
    }
    let pass = ok_p && ok_par && ok_sub;
    report(
        10,
        pass,
        &format!(
            "powers k=3: {} {} zeta={}; paraboloid d=2 k=3: {} {} low-dim {} critical {}; completion={ok_sub}",
            p.truncated_threshold,
            p.full_threshold,
            p.zeta_bound,
            par.truncated_threshold,
            par.full_threshold,
            low.dim_bound.unwrap(),
            par.critical
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_divisor_machinery() {
    let hand = divisor_moment(1, 2, 4).unwrap();
    let mut markov_ok = true;
    let mut checked = 0;
    for (q, x) in [(4u64, 1_000u64), (16, 100_000)] {
        for b in 1..=3u32 {
            let moment = divisor_moment(b, q, x).unwrap() as f64;
            for dthr in [1.0, 2.0, 3.0, 4.0, 6.0, 8.0] {
                let tail = divisor_tail_count(dthr, q, x).unwrap() as f64;
                markov_ok &= tail <= moment / dthr.powi(b as i32);
                checked += 1;
            }
        }
    }
    let pass = hand == 14 && markov_ok;
    report(11, pass, &format!("moment(B=1,Q=2,X=4)={hand}; {checked} Markov checks ok={markov_ok}"));
    assert!(pass);
}
