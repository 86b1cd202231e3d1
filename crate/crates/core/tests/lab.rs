use std::f64::consts::PI;

use ergomix::checker::{BoundForm, ConstantSet};
use ergomix::drift::*;
use ergomix::integrator::SchemeSpec;
use ergomix::lab::*;
use ergomix::noise::*;
use ergomix::spectral::*;
use ergomix::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as Gauss};

fn interval(n: usize) -> Domain {
    build_domain(Geometry::Interval { length: 1.0 }, Boundary::Dirichlet, n).unwrap()
}

fn torus2(n: usize) -> Domain {
    build_domain(Geometry::Torus { dim: 2 }, Boundary::PeriodicMeanZero, n).unwrap()
}

fn model(kind: ModelKind, d: &Domain) -> DriftModel {
    DriftModel::new(kind, d, &Overrides::default()).unwrap()
}

fn heat(n: usize) -> DriftModel {
    model(ModelKind::Heat { nu: 1.0 }, &interval(n))
}

fn noise(m: &DriftModel, profile: NoiseProfile) -> NoiseOperator {
    build_noise(m.domain(), m.field_kind(), &profile).unwrap()
}

fn single(m: &DriftModel, sigma: f64) -> NoiseOperator {
    noise(m, NoiseProfile::SingleMode { mode: 0, sigma })
}

fn mode_one(m: &DriftModel, amp: f64) -> SpectralField {
    let mut u = m.zero_field();
    u.coeffs_mut()[0] = amp;
    u
}

fn opts(checkpoints: &[f64], keep: bool) -> EnsembleOptions {
    EnsembleOptions {
        checkpoints: checkpoints.to_vec(),
        keep_samples: keep,
        workers: None,
    }
}

fn heat_constants(m: &DriftModel, b: &NoiseOperator, lam: f64) -> ConstantSet {
    ConstantSet::from_parts(m.constants(), b).with_lambda([1.0 - lam, 0.0, 0.0, lam])
}

/// Φ by Simpson's rule on [0, |z|].
fn normal_cdf(z: f64) -> f64 {
    let n = 2000;
    let h = z.abs() / n as f64;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let mut s = f(0.0) + f(z.abs());
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half = s * h / 3.0;
    if z >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

#[test]
fn zero_noise_ensemble_paths_coincide() {
    let m = heat(8);
    let b = noise(&m, NoiseProfile::Zero);
    let s = run_ensemble(&m, &b, &mode_one(&m, 1.0), &SchemeSpec::semi_implicit(1e-3), 2, 1, &opts(&[0.0, 0.1], true)).unwrap();
    assert_eq!(s.samples[1][0], s.samples[1][1]);
    assert_eq!(s.se_pow[1], 0.0);
}

#[test]
fn ensemble_needs_two_paths() {
    let m = heat(8);
    let b = noise(&m, NoiseProfile::Zero);
    let r = run_ensemble(&m, &b, &m.zero_field(), &SchemeSpec::semi_implicit(1e-3), 1, 1, &opts(&[0.1], false));
    assert!(matches!(r, Err(Error::InsufficientSamples { need: 2, have: 1 })));
    let bad = run_ensemble(&m, &b, &m.zero_field(), &SchemeSpec::semi_implicit(1e-3), 4, 1, &opts(&[0.2, 0.1], false));
    assert!(bad.is_err());
}

#[test]
fn heat_ensemble_matches_chain_law() {
    let m = heat(8);
    let b = noise(&m, NoiseProfile::Flat { k_modes: 3, sigma: 0.1 });
    let t = 0.5;
    let n = 10_000;
    let s = run_ensemble(&m, &b, &m.zero_field(), &SchemeSpec::semi_implicit(1e-3), n, 7, &opts(&[t], true)).unwrap();
    let chain = heat_chain_law(&m, &b, &m.zero_field(), 1e-3, 500).unwrap();
    for k in 0..3 {
        let xs = s.coeff_samples(0, k);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let v = chain[k].sd.powi(2);
        assert!(mean.abs() <= 3.0 * (v / n as f64).sqrt(), "mode {k} mean {mean}");
        // Var of the sample variance of a Gaussian is 2v²/(n−1).
        assert!((var - v).abs() <= 3.0 * v * (2.0 / (n as f64 - 1.0)).sqrt(), "mode {k}: {var} vs {v}");
    }
    assert!(s.coeff_samples(0, 5).iter().all(|x| *x == 0.0));
}

#[test]
fn ensemble_is_deterministic_across_worker_counts() {
    let d = torus2(8);
    let m = model(ModelKind::NavierStokes2D { nu: 0.5 }, &d);
    let b = noise(&m, NoiseProfile::Flat { k_modes: 4, sigma: 0.2 });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_field(&d, FieldKind::Solenoidal, 0.3, 2.0, &mut rng);
    let spec = SchemeSpec::semi_implicit(0.01);
    let run = |w: Option<usize>| {
        let o = EnsembleOptions {
            workers: w,
            ..opts(&[0.0, 0.1, 0.2], true)
        };
        run_ensemble(&m, &b, &x, &spec, 16, 42, &o).unwrap()
    };
    let a = run(Some(1));
    assert_eq!(a, run(Some(4)));
    assert_eq!(a, run(None));
    let other = run_ensemble(&m, &b, &x, &spec, 16, 43, &opts(&[0.0, 0.1, 0.2], true)).unwrap();
    assert_ne!(a.samples, other.samples);
}

#[test]
fn oracle_at_time_zero_is_stationary_norm() {
    let m = heat(8);
    let b = noise(&m, NoiseProfile::Flat { k_modes: 3, sigma: 0.1 });
    let w = w2_gaussian_oracle(&m, &b, &m.zero_field(), 0.0).unwrap();
    let want: f64 = (0..3).map(|k| 0.01 / (2.0 * m.domain().eigenvalue(k))).sum::<f64>().sqrt();
    assert!((w.value - want).abs() < 1e-15);
    assert_eq!(w.method, W2Method::GaussianOracle);
    assert!(w2_gaussian_oracle(&m, &b, &m.zero_field(), 50.0).unwrap().value < 1e-12);
}

#[test]
fn oracle_without_noise_is_deterministic_decay() {
    let m = heat(8);
    let b = noise(&m, NoiseProfile::Zero);
    for t in [0.0, 0.1, 0.7] {
        let w = w2_gaussian_oracle(&m, &b, &mode_one(&m, -2.0), t).unwrap();
        assert!((w.value - 2.0 * (-PI * PI * t).exp()).abs() < 1e-14);
    }
}

#[test]
fn oracle_rejects_nonlinear_models() {
    let d = interval(8);
    let m = model(
        ModelKind::Semilinear {
            nu: 1.0,
            f: FSpec::Burgers,
            g: GSpec::Zero,
        },
        &d,
    );
    let b = noise(&m, NoiseProfile::Zero);
    assert!(matches!(w2_gaussian_oracle(&m, &b, &m.zero_field(), 1.0), Err(Error::Unsupported(_))));
}

#[test]
fn oracle_curve_is_nonincreasing_and_obeys_triangle_inequality() {
    let m = heat(8);
    let b = noise(&m, NoiseProfile::Flat { k_modes: 4, sigma: 0.3 });
    let x = mode_one(&m, 1.5);
    let mut prev = f64::INFINITY;
    for i in 0..200 {
        let w = w2_gaussian_oracle(&m, &b, &x, i as f64 * 0.005).unwrap().value;
        assert!(w <= prev);
        prev = w;
    }
    let l1 = heat_law(&m, &b, &x, 0.02).unwrap();
    let l2 = heat_law(&m, &b, &m.zero_field(), 0.3).unwrap();
    let l3 = heat_stationary_law(&m, &b).unwrap();
    let (a, c, e) = (w2_product_gaussians(&l1, &l2), w2_product_gaussians(&l2, &l3), w2_product_gaussians(&l1, &l3));
    assert!(e <= a + c + 1e-15);
}

#[test]
fn chain_law_converges_to_continuum_law() {
    let m = heat(4);
    let b = single(&m, 0.1);
    let x = mode_one(&m, 1.0);
    let exact = heat_law(&m, &b, &x, 0.5).unwrap()[0];
    let errs: Vec<f64> = [1e-3, 5e-4]
        .iter()
        .map(|&dt| gaussian_w2(heat_chain_law(&m, &b, &x, dt, (0.5 / dt) as usize).unwrap()[0], exact))
        .collect();
    assert!((errs[0] / errs[1] - 2.0).abs() < 0.05);
}

#[test]
fn empirical_1d_w2_basics() {
    let a = [0.3, -1.0, 2.0];
    assert_eq!(w2_1d(&a, &a), 0.0);
    // Quantile functions of {0,1} and {0,½,1} differ by ½ on (1/3, 2/3).
    assert!((w2_1d(&[0.0, 1.0], &[0.0, 0.5, 1.0]) - (1.0f64 / 12.0).sqrt()).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g0 = Gauss::new(0.0, 1.0).unwrap();
    let g1 = Gauss::new(1.0, 1.0).unwrap();
    let xs: Vec<f64> = (0..100_000).map(|_| g0.sample(&mut rng)).collect();
    let ys: Vec<f64> = (0..100_000).map(|_| g1.sample(&mut rng)).collect();
    assert!((w2_1d(&xs, &ys) - 1.0).abs() < 0.02);
}

#[test]
fn w2_to_gaussian_single_point_closed_form() {
    // W₂²(δ_x, N(m, s²)) = (x − m)² + s²
    let g = Gaussian1 { mean: 0.5, sd: 0.7 };
    let w = w2_to_gaussian(&[2.0], g);
    assert!((w * w - (1.5f64.powi(2) + 0.49)).abs() < 1e-14);
}

#[test]
fn w2_to_gaussian_matches_midpoint_quadrature() {
    let g = Gaussian1 { mean: -0.2, sd: 1.3 };
    let xs = [-1.0, 0.4, 0.5, 2.5];
    let std = statrs::distribution::Normal::standard();
    use statrs::distribution::ContinuousCDF;
    let m = 400_000;
    let mut acc = 0.0;
    for i in 0..m {
        let u = (i as f64 + 0.5) / m as f64;
        let q = xs[((u * 4.0) as usize).min(3)];
        acc += (q - g.mean - g.sd * std.inverse_cdf(u)).powi(2);
    }
    let w = w2_to_gaussian(&xs, g);
    assert!((w * w - acc / m as f64).abs() < 1e-4, "{} vs {}", w * w, acc / m as f64);
}

#[test]
fn large_gaussian_sample_is_close_to_its_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = Gauss::new(1.0, 2.0).unwrap();
    let xs: Vec<f64> = (0..50_000).map(|_| g.sample(&mut rng)).collect();
    let est = w2_to_gaussian_bootstrap(&xs, Gaussian1 { mean: 1.0, sd: 2.0 }, 100, 1).unwrap();
    assert!(est.value < 0.03);
    let far = w2_to_gaussian_bootstrap(&xs, Gaussian1 { mean: 0.0, sd: 2.0 }, 100, 1).unwrap();
    assert!((far.value - 1.0).abs() <= 3.0 * far.half_width.unwrap() + 0.01);
}

#[test]
fn heat_marginal_matches_chain_law_within_bootstrap() {
    let m = heat(8);
    let b = single(&m, 0.1);
    let x = mode_one(&m, 1.0);
    let dt = 1e-3;
    let t = 0.2;
    let s = run_ensemble(&m, &b, &x, &SchemeSpec::semi_implicit(dt), 4000, 5, &opts(&[t], true)).unwrap();
    let inv = heat_stationary_law(&m, &b).unwrap()[0];
    let chain = heat_chain_law(&m, &b, &x, dt, 200).unwrap()[0];
    let est = w2_to_gaussian_bootstrap(&s.coeff_samples(0, 0), inv, 200, 2).unwrap();
    let want = gaussian_w2(chain, inv);
    assert!((est.value - want).abs() <= 3.0 * est.half_width.unwrap(), "{} vs {want}", est.value);
}

#[test]
fn sliced_w2_behaviour() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = Gauss::new(0.0, 1.0).unwrap();
    let mu = [0.5, -0.3, 0.2];
    let sd = [1.0, 0.6, 1.4];
    let a: Vec<Vec<f64>> = (0..2000).map(|_| (0..3).map(|_| z.sample(&mut rng)).collect()).collect();
    let b: Vec<Vec<f64>> = (0..2000)
        .map(|_| (0..3).map(|i| mu[i] + sd[i] * z.sample(&mut rng)).collect())
        .collect();
    let method = W2Method::Sliced { n_proj: 64, seed: 1 };
    assert_eq!(w2_empirical(&a, &a, &method, None).unwrap().value, 0.0);
    let est = w2_empirical(&a, &b, &method, Some((100, 3))).unwrap();
    let full: f64 = (0..3).map(|i| mu[i] * mu[i] + (1.0 - sd[i]).powi(2)).sum::<f64>().sqrt();
    assert!(est.value > 0.0);
    assert!(est.value <= full + est.half_width.unwrap());
    let marg = w2_empirical(&a, &b, &W2Method::ModeMarginal1d { coeff: 0 }, None).unwrap();
    assert!((marg.value - 0.5).abs() < 0.1);
    assert!(matches!(
        w2_empirical(&a[..10], &b[..10], &method, None),
        Err(Error::InsufficientSamples { need: 50, .. })
    ));
    assert!(w2_empirical(&a, &b, &W2Method::GaussianOracle, None).is_err());
}

#[test]
fn heat_contraction_recovers_delta2() {
    let m = heat(16);
    let b = noise(&m, NoiseProfile::Flat { k_modes: 4, sigma: 0.1 });
    let x = mode_one(&m, 1.0);
    let y = m.zero_field();
    let c = contraction_certificate(&m, &b, &x, &y, 1.0, &SchemeSpec::semi_implicit(1e-3), 3).unwrap();
    let d2 = 2.0 * PI * PI;
    assert!((c.fitted_rate / -d2 - 1.0).abs() < 0.02, "{}", c.fitted_rate);
    assert_eq!(c.continuum_rate, -d2);
    // One implicit step shrinks mode 1 by exactly 1/(1+π²dt).
    assert!((c.predicted_rate + 2.0 * (PI * PI * 1e-3f64).ln_1p() / 1e-3).abs() < 1e-12);
    assert!((c.fitted_rate - c.predicted_rate).abs() < 1e-8);
    assert!(c.pass);
    assert!(contraction_certificate(&m, &b, &x, &x, 1.0, &SchemeSpec::semi_implicit(1e-3), 3).is_err());
}

#[test]
fn contraction_window_stops_at_underflow() {
    let m = heat(16);
    let b = noise(&m, NoiseProfile::Zero);
    let x = mode_one(&m, 1e-5);
    let c = contraction_certificate(&m, &b, &x, &m.zero_field(), 4.0, &SchemeSpec::semi_implicit(1e-3), 3).unwrap();
    assert!(c.window.1 < 2.2 && c.points >= 3);
    assert!(c.pass);
}

#[test]
fn nse_contraction_passes_with_small_noise() {
    let d = torus2(12);
    let m = model(ModelKind::NavierStokes2D { nu: 0.5 }, &d);
    let b = noise(&m, NoiseProfile::Flat { k_modes: 4, sigma: 0.05 });
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_field(&d, FieldKind::Solenoidal, 0.1, 2.0, &mut rng);
    let y = random_field(&d, FieldKind::Solenoidal, 0.1, 2.0, &mut rng);
    for seed in 0..3 {
        let c = contraction_certificate(&m, &b, &x, &y, 2.0, &SchemeSpec::semi_implicit(0.01), seed).unwrap();
        assert!(c.pass, "{c:?}");
    }
}

#[test]
fn moment_certificate_heat_cases() {
    let m = heat(16);
    let b0 = noise(&m, NoiseProfile::Zero);
    let x = mode_one(&m, 1.0);
    let spec = SchemeSpec::semi_implicit(1e-3);
    let cps = [0.0, 0.5, 1.0, 2.0];
    let s0 = run_ensemble(&m, &b0, &x, &spec, 2, 1, &opts(&cps, false)).unwrap();
    let c0 = moment_certificate(&s0, &heat_constants(&m, &b0, 0.5)).unwrap();
    assert!(c0.pass);
    assert!(c0.rows.windows(2).all(|w| w[1].rhs == w[0].rhs));

    let b = single(&m, 0.1);
    let s = run_ensemble(&m, &b, &x, &spec, 2000, 1, &opts(&cps, false)).unwrap();
    let cs = heat_constants(&m, &b, 0.5);
    assert!(moment_certificate(&s, &cs).unwrap().pass);
    let mut doubled = cs.clone();
    doubled.hs_norm *= 2f64.sqrt();
    let d = moment_certificate(&s, &doubled).unwrap();
    assert!(d.pass);
    let mut wrong = cs;
    wrong.alpha = 3.0;
    assert!(moment_certificate(&s, &wrong).is_err());
}

#[test]
fn exp_moment_certificate_cases() {
    let m = heat(16);
    let spec = SchemeSpec::semi_implicit(1e-3);
    let b0 = noise(&m, NoiseProfile::Zero);
    let x = mode_one(&m, 1.0);
    let s0 = run_ensemble(&m, &b0, &x, &spec, 2, 1, &opts(&[0.0, 1.0], false)).unwrap();
    let c = exp_moment_certificate(&s0, &heat_constants(&m, &b0, 0.5), 50, 1).unwrap();
    assert_eq!(c.verdict, Verdict::Pass);

    let b = single(&m, 0.05);
    let s = run_ensemble(&m, &b, &x, &spec, 10_000, 2, &opts(&[0.5, 1.0], false)).unwrap();
    let c = exp_moment_certificate(&s, &heat_constants(&m, &b, 0.5), 200, 1).unwrap();
    assert_eq!(c.verdict, Verdict::Pass, "{c:?}");

    let big = single(&m, 4.0);
    let s = run_ensemble(&m, &big, &x, &spec, 2000, 3, &opts(&[1.0], false)).unwrap();
    let mut cs = heat_constants(&m, &big, 0.5);
    cs.lambda = [0.5, 0.0, 0.0, 0.5];
    let c = exp_moment_certificate(&s, &cs, 200, 1).unwrap();
    assert_ne!(c.verdict, Verdict::Fail);
}

fn heat_setup<'a>(
    m: &'a DriftModel,
    b: &'a NoiseOperator,
    x: &'a SpectralField,
    spec: &'a SchemeSpec,
    cs: &'a ConstantSet,
) -> MixingSetup<'a> {
    MixingSetup {
        model: m,
        noise: b,
        x,
        spec,
        constants: cs,
        form: BoundForm::Heat { nu: 1.0 },
        checkpoints: (0..=1000).map(|i| i as f64 * 1e-3).collect(),
        seed: 1,
        workers: None,
    }
}

#[test]
fn heat_oracle_mixing_time_is_below_bound() {
    let m = heat(16);
    let b = single(&m, 0.1);
    let x = mode_one(&m, 1.0);
    let spec = SchemeSpec::semi_implicit(1e-3);
    let cs = heat_constants(&m, &b, 0.5);
    let r = empirical_mixing_time(&heat_setup(&m, &b, &x, &spec, &cs), &[0.1, 0.03, 0.01], &MixingCurve::HeatOracle).unwrap();
    for row in &r.rows {
        assert_eq!(row.verdict, Verdict::Pass, "{row:?}");
        assert!(row.tau_hat.unwrap() <= row.tau_bound);
    }
    let big = empirical_mixing_time(&heat_setup(&m, &b, &x, &spec, &cs), &[10.0], &MixingCurve::HeatOracle).unwrap();
    assert_eq!(big.rows[0].tau_hat, Some(0.0));
}

#[test]
fn noiseless_mixing_time_is_hitting_time() {
    let m = heat(16);
    let b = noise(&m, NoiseProfile::Zero);
    let x = mode_one(&m, 1.0);
    let spec = SchemeSpec::semi_implicit(1e-3);
    let cs = heat_constants(&m, &b, 0.5);
    let r = empirical_mixing_time(&heat_setup(&m, &b, &x, &spec, &cs), &[0.1], &MixingCurve::HeatOracle).unwrap();
    // Without noise the bound is exactly the hitting time of ε.
    let exact = (10.0f64).ln() / (PI * PI);
    let tau = r.rows[0].tau_hat.unwrap();
    assert!((r.rows[0].tau_bound - exact).abs() < 1e-12);
    assert!((tau - exact).abs() < 1e-12, "{tau} vs {exact}");
    assert_eq!(r.rows[0].verdict, Verdict::Pass);
}

#[test]
fn empirical_mixing_curve_runs_for_burgers() {
    let d = interval(16);
    let m = model(
        ModelKind::Semilinear {
            nu: 1.0,
            f: FSpec::Burgers,
            g: GSpec::Zero,
        },
        &d,
    );
    let b = noise(&m, NoiseProfile::Flat { k_modes: 2, sigma: 0.5 });
    let x = mode_one(&m, 1.0);
    let spec = SchemeSpec::semi_implicit(1e-3);
    let cs = ConstantSet::from_parts(m.constants(), &b).with_gamma(0.5 * m.constants().delta2);
    let setup = MixingSetup {
        form: BoundForm::General,
        checkpoints: vec![0.0, 0.1, 0.3, 0.6],
        ..heat_setup(&m, &b, &x, &spec, &cs)
    };
    let curve = MixingCurve::Empirical {
        paths: 200,
        method: W2Method::Sliced { n_proj: 32, seed: 2 },
        surrogate_samples: 400,
        burn_in: 1.0,
        spacing: 0.05,
    };
    let r = empirical_mixing_time(&setup, &[0.5, 0.05], &curve).unwrap();
    assert!(r.w2[0] > r.w2[3]);
    assert!(r.surrogate_drift.is_some());
    assert_eq!(r.rows.len(), 2);
}

#[test]
fn occupation_cases() {
    let m = heat(8);
    let spec = SchemeSpec::semi_implicit(1e-3);
    let b0 = noise(&m, NoiseProfile::Zero);
    let x = mode_one(&m, 1.0);
    let cs0 = heat_constants(&m, &b0, 0.5);
    let short = lyapunov_occupation(&m, &b0, &x, 0.5, 0.1, &spec, &cs0, 1, 0).unwrap();
    let long = lyapunov_occupation(&m, &b0, &x, 10.0, 0.1, &spec, &cs0, 1, 0).unwrap();
    assert!(long.fraction > short.fraction && long.fraction > 0.95);
    let huge = lyapunov_occupation(&m, &b0, &x, 0.5, 1e9, &spec, &cs0, 1, 0).unwrap();
    assert_eq!(huge.fraction, 1.0);

    // Stationary Θ = 2π²‖X‖² = σ²Z² for one noisy mode, so P(Θ ≤ σ²) = P(|Z| ≤ 1).
    let b = single(&m, 0.1);
    let cs = heat_constants(&m, &b, 0.5);
    let r = lyapunov_occupation(&m, &b, &m.zero_field(), 5.0, 0.01, &spec, &cs, 20, 4).unwrap();
    let want = 2.0 * normal_cdf(1.0) - 1.0;
    assert!((r.fraction - want).abs() <= 4.0 * r.se, "{} vs {want} (se {})", r.fraction, r.se);
    assert!(r.lower_bound.unwrap() <= r.fraction);
}

#[test]
fn tracking_frequency_cases() {
    let m = heat(8);
    let spec = SchemeSpec::semi_implicit(1e-3);
    let x = mode_one(&m, 1.0);
    let b0 = noise(&m, NoiseProfile::Zero);
    let f = stability_vs_deterministic(&m, &b0, &x, 1.0, 1e-6, &spec, 5, 0).unwrap();
    assert_eq!(f.frequency, 1.0);
    let b = single(&m, 0.01);
    let f = stability_vs_deterministic(&m, &b, &x, 1.0, 0.1, &spec, 200, 0).unwrap();
    assert!(f.ci_low > 0.0);
    let tiny = stability_vs_deterministic(&m, &b, &x, 1.0, 1e-12, &spec, 200, 0).unwrap();
    assert_eq!(tiny.frequency, 0.0);
    assert!(stability_vs_deterministic(&m, &b, &x, 1.0, 0.0, &spec, 10, 0).is_err());
}
