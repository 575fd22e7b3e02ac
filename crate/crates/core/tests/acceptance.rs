use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsop_core::operators::{
    berezin, bergman_projection, hankel_little, toeplitz_conj_coeff, toeplitz_quad, InnerFunctionSpec, KernelOrder,
    SymbolSpec,
};
use wsop_core::probes::{
    probe_berezin_bounded, probe_division, probe_hankel_bounded, probe_hankel_sharpness, probe_lemma2,
    probe_radial_identity, probe_toeplitz_bounded, sharpness_params, tensor_grid, FamilySetting, Lemma2Params,
    ProbeReport, TestFamily, Verdict, BEREZIN_INNER,
};
use wsop_core::pseries::{frac_antiderivative, frac_derivative, CoefficientSeries, FracOrder};
use wsop_core::quad::{DiskRule, PolydiskRule, TorusRule};
use wsop_core::weights::{CoordWeight, WeightSpec};
use wsop_core::Complex64;

const ROUND_TRIP_TOL: f64 = 1e-12;
const RADIAL_TOL: f64 = 1e-10;
const SCALAR_TOL: f64 = 1e-12;
const BETA_TOL: f64 = 1e-10;
const TOEPLITZ_TOL: f64 = 1e-10;
const HANKEL_TOL: f64 = 1e-8;
const BEREZIN_TOL: f64 = 1e-6;
const PROJECTION_TOL: f64 = 1e-8;
const DIVISION_TOL: f64 = 1e-8;
const LEMMA2_TOL: f64 = 0.10;
const BOUNDED_SPREAD: f64 = 1.2;
const SLOPE_CENTER: f64 = 0.15;
const SLOPE_TOL: f64 = 0.30;
const GROWTH_MIN: f64 = 2.0;
const NORM_BAND: f64 = 2.0;
const FAMILY_TOL: f64 = 0.10;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
    budget: Duration,
    elapsed: Duration,
}

fn run(id: &'static str, budget_secs: u64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    Outcome {
        id,
        pass,
        detail,
        budget: Duration::from_secs(budget_secs),
        elapsed: t.elapsed(),
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn power(a: f64) -> CoordWeight {
    CoordWeight::power(a).unwrap()
}

fn disk_points(rng: &mut ChaCha8Rng, count: usize, rmax: f64) -> Vec<Complex64> {
    (0..count)
        .map(|_| Complex64::from_polar(rmax * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>()))
        .collect()
}

fn fractional_round_trip() -> (bool, String) {
    let betas = [-0.5, 0.0, 1.0, 2.5];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = 1 + i % 3;
        let deg = rng.random_range(0..=8);
        let f = CoefficientSeries::random(n, deg, &mut rng).unwrap();
        let beta = FracOrder::new((0..n).map(|_| betas[rng.random_range(0..4)]).collect()).unwrap();
        let back = frac_antiderivative(&frac_derivative(&f, &beta).unwrap(), &beta).unwrap();
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            worst = worst.max((a - b).norm() / b.norm());
        }
    }
    (worst <= ROUND_TRIP_TOL, format!("max relative error {worst:.3e} (tol {ROUND_TRIP_TOL:.0e})"))
}

fn radial_identity() -> (bool, String) {
    let mut members = TestFamily::Random { n: 1, count: 10, degree: 8, seed: Some(2) }.members().unwrap();
    members.extend(TestFamily::Random { n: 2, count: 10, degree: 6, seed: Some(3) }.members().unwrap());
    let r = probe_radial_identity(&members, 32).unwrap();
    let res = r.summary_f64("max_residual").unwrap();
    let dev = r.summary_f64("scalar_discrepancy_deviation_from_one_third").unwrap();
    (
        res <= RADIAL_TOL && dev <= SCALAR_TOL,
        format!("max residual {res:.3e} (tol {RADIAL_TOL:.0e}), scalar check deviation {dev:.3e} (tol {SCALAR_TOL:.0e})"),
    )
}

fn beta_oracle() -> (bool, String) {
    let mut worst = 0.0f64;
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        let rule = DiskRule::new(64, 8).unwrap();
        for s in 0..=8 {
            let got = rule
                .integrate(|z, gap| c(z.norm_sqr().powi(s) * (gap * (2.0 - gap)).powf(alpha), 0.0))
                .re;
            let expect = PI * statrs::function::beta::beta(s as f64 + 1.0, alpha + 1.0);
            worst = worst.max((got - expect).abs() / expect);
        }
    }
    (worst <= BETA_TOL, format!("max relative error {worst:.3e} (tol {BETA_TOL:.0e})"))
}

fn toeplitz_agreement() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f = CoefficientSeries::random(1, 8, &mut rng).unwrap();
        let h = SymbolSpec::from_series(&CoefficientSeries::random(1, 4, &mut rng).unwrap());
        let rule = TorusRule::uniform(1, 2 * 12 + 2).unwrap();
        let tf = toeplitz_conj_coeff(&f, &h).unwrap();
        for z in disk_points(&mut rng, 25, 0.95) {
            let a = toeplitz_quad(&f, &h.conj(), &[z], &rule).unwrap();
            worst = worst.max((a - tf.eval_unchecked(&[z])).norm());
        }
    }
    (worst <= TOEPLITZ_TOL, format!("max deviation {worst:.3e} over 500 points (tol {TOEPLITZ_TOL:.0e})"))
}

fn closed_forms() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let one1 = CoefficientSeries::constant(1, c(1.0, 0.0)).unwrap();
    let a0 = KernelOrder::uniform(0.0, 1).unwrap();
    let rule = PolydiskRule::uniform(1, 64, 256).unwrap();
    let mut hankel = 0.0f64;
    for z in disk_points(&mut rng, 20, 0.9) {
        let v = hankel_little(&one1, &SymbolSpec::constant(1, c(1.0, 0.0)), &a0, &[z], &rule).unwrap();
        hankel = hankel.max((v - c(PI, 0.0)).norm());
    }
    let mut ber = 0.0f64;
    for n in 1..=2 {
        let one = CoefficientSeries::constant(n, c(1.0, 0.0)).unwrap();
        for alpha in [0.0, 1.0] {
            let order = KernelOrder::uniform(alpha, n).unwrap();
            let rule = order.rule(32, 16).unwrap();
            for z in tensor_grid(n, &disk_points(&mut rng, 5, 0.9)) {
                let v = berezin(&one, &SymbolSpec::constant(n, c(1.0, 0.0)), &order, &z, &rule).unwrap();
                ber = ber.max((v - c(1.0, 0.0)).norm());
            }
        }
    }
    // n = 2 points stay in |z_j| ≤ 0.6 to keep the tensor rule at desk size
    let mut proj = 0.0f64;
    for (n, alpha, rmax, radial, angular) in [(1, 0.0, 0.8, 32, 256), (1, 1.0, 0.8, 32, 256), (2, 0.0, 0.6, 24, 64)] {
        let order = KernelOrder::uniform(alpha, n).unwrap();
        let rule = order.rule(radial, angular).unwrap();
        let f = CoefficientSeries::random(n, 8, &mut rng).unwrap();
        for _ in 0..4 {
            let z = disk_points(&mut rng, n, rmax);
            let v = bergman_projection(&f, &order, &z, &rule).unwrap();
            proj = proj.max((v - f.eval_unchecked(&z)).norm());
        }
    }
    (
        hankel <= HANKEL_TOL && ber <= BEREZIN_TOL && proj <= PROJECTION_TOL,
        format!(
            "hankel(1,1) dev {hankel:.3e} (tol {HANKEL_TOL:.0e}), berezin(1,1) dev {ber:.3e} (tol {BEREZIN_TOL:.0e}), projection dev {proj:.3e} (tol {PROJECTION_TOL:.0e})"
        ),
    )
}

fn division() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut verdicts = true;
    for n in 1..=2 {
        for factors in 1..=2 {
            let zeros: Vec<Vec<Complex64>> = (0..n).map(|_| disk_points(&mut rng, factors, 0.9)).collect();
            let j = InnerFunctionSpec::new(zeros, c(1.0, 0.0)).unwrap();
            let f = CoefficientSeries::random(n, 6, &mut rng).unwrap();
            let w = WeightSpec::uniform(power(0.5), n).unwrap();
            let rule = PolydiskRule::uniform(n, 16, 32).unwrap();
            let torus = TorusRule::uniform(n, 16).unwrap();
            let r = probe_division(&j, &f, 2.0, &w, &rule, &torus).unwrap();
            worst = worst.max(r.summary_f64("sup_residual").unwrap());
            verdicts &= r.verdict == Verdict::Pass;
        }
    }
    (worst <= DIVISION_TOL && verdicts, format!("max sup-residual {worst:.3e} (tol {DIVISION_TOL:.0e})"))
}

fn lemma2() -> (bool, String) {
    let prm = Lemma2Params { a: 0.0, b: 3.0, weight: power(0.5), z_count: 21, z_max: 0.99 };
    let r = probe_lemma2(&prm, 64, 128).unwrap();
    let change = r.summary_f64("refinement_change").unwrap();
    (
        change < LEMMA2_TOL && r.summary_f64("sup_ratio").unwrap().is_finite(),
        format!("sup ratio change under doubling {change:.3e} (tol {LEMMA2_TOL}), verdict {:?}", r.verdict),
    )
}

fn sharpness() -> (bool, String) {
    let w = power(0.5);
    let mut bounded = sharpness_params(0.5, 2.0, w, 1, vec![0.9, 0.99, 0.999], None);
    bounded.radial = 256;
    let a = probe_hankel_sharpness(&bounded).unwrap();
    let spread = a.summary_f64("ratio_spread").unwrap_or(f64::NAN);
    let band_a = a.summary_f64("f_norm_band").unwrap_or(f64::NAN);

    let diverging = sharpness_params(-0.9, 2.0, w, 1, vec![0.9, 0.99, 0.999, 0.9999], None);
    let b = probe_hankel_sharpness(&diverging).unwrap();
    let slope = b.summary_f64("fitted_slope").unwrap_or(f64::NAN);
    let growth = match (b.sample_value("ratio@r=0.999"), b.sample_value("ratio@r=0.9")) {
        (Some(x), Some(y)) => x / y,
        _ => f64::NAN,
    };
    let band_b = b.summary_f64("f_norm_band").unwrap_or(f64::NAN);

    let pass_a = spread < BOUNDED_SPREAD;
    let pass_b = (slope - SLOPE_CENTER).abs() <= SLOPE_TOL * SLOPE_CENTER && growth >= GROWTH_MIN;
    let pass_c = band_a <= NORM_BAND && band_b <= NORM_BAND;
    (
        pass_a && pass_b && pass_c,
        format!(
            "(a) spread {spread:.4} < {BOUNDED_SPREAD} {}; (b) slope {slope:.4} in {SLOPE_CENTER} +/- {:.0}%, growth {growth:.3} >= {GROWTH_MIN} {}; (c) norm bands {band_a:.3}, {band_b:.3} <= {NORM_BAND} {}",
            tag(pass_a),
            100.0 * SLOPE_TOL,
            tag(pass_b),
            tag(pass_c)
        ),
    )
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn boundedness_reports() -> Vec<ProbeReport> {
    let family = TestFamily::Random { n: 1, count: 50, degree: 6, seed: Some(7) };
    let weight = WeightSpec::uniform(power(0.5), 1).unwrap();
    let alpha = KernelOrder::uniform(1.0, 1).unwrap();
    let rule = alpha.rule(32, 64).unwrap();
    let setting = FamilySetting { family: &family, p: 2.0, weight: &weight, rule: &rule };
    let g = SymbolSpec::term(c(0.5, 0.0), vec![0], vec![1]).unwrap();
    let h = SymbolSpec::from_series(&CoefficientSeries::new(vec![1], vec![c(1.0, 0.0), c(0.5, 0.0)]).unwrap());
    vec![
        probe_berezin_bounded(&g, &alpha, &setting, BEREZIN_INNER, None).unwrap(),
        probe_hankel_bounded(&g, &alpha, &setting, None).unwrap(),
        probe_toeplitz_bounded(&h, &setting, None).unwrap(),
    ]
}

fn family_stability() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in boundedness_reports() {
        let max = r.summary_f64("max_ratio").unwrap_or(f64::NAN);
        let change = r.summary_f64("family_change").unwrap_or(f64::NAN);
        let pass = max.is_finite() && change < FAMILY_TOL;
        ok &= pass;
        parts.push(format!("{} max {max:.4} change {change:.3e} {}", r.probe, tag(pass)));
    }
    (ok, format!("{} (tol {FAMILY_TOL})", parts.join("; ")))
}

fn determinism() -> (bool, String) {
    let members = TestFamily::Random { n: 2, count: 5, degree: 4, seed: Some(8) }.members().unwrap();
    let rad = |m: &[(String, CoefficientSeries)]| probe_radial_identity(m, 32).unwrap().deterministic_json();
    let sharp = || {
        let mut prm = sharpness_params(0.5, 2.0, power(0.5), 1, vec![0.9, 0.99], None);
        prm.radial = 64;
        let r = probe_hankel_sharpness(&prm).unwrap();
        (r.deterministic_json(), r.to_csv())
    };
    let bounded = || boundedness_reports().iter().map(|r| r.deterministic_json() + &r.to_csv()).collect::<Vec<_>>();
    let same = rad(&members) == rad(&members) && sharp() == sharp() && bounded() == bounded();
    (same, "radial identity, sharpness and boundedness reports compared byte for byte".into())
}

#[test]
fn acceptance() {
    let outcomes = [
        run("1 fractional round trip", 1, fractional_round_trip),
        run("2 radial identity", 1, radial_identity),
        run("3 quadrature beta oracle", 1, beta_oracle),
        run("4 toeplitz oracle agreement", 5, toeplitz_agreement),
        run("5 closed-form operator values", 30, closed_forms),
        run("6 division probe", 10, division),
        run("7 kernel integral estimate", 30, lemma2),
        run("8 sharpness sweep", 120, sharpness),
        run("9 boundedness probes", 120, family_stability),
        run("10 determinism", 60, determinism),
    ];
    // written to the process stderr directly so the lines survive output capture
    let mut err = std::io::stderr().lock();
    let mut failed = Vec::new();
    for o in &outcomes {
        writeln!(
            err,
            "[{}] criterion {}: {} ({:.2} s, budget {} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.detail,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs()
        )
        .unwrap();
        if !o.pass {
            failed.push(o.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
