use std::f64::consts::PI;

use ergomix::checker::deterministic_decay_bound;
use ergomix::drift::*;
use ergomix::integrator::*;
use ergomix::noise::*;
use ergomix::spectral::*;
use ergomix::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn interval(n: usize) -> Domain {
    build_domain(Geometry::Interval { length: 1.0 }, Boundary::Dirichlet, n).unwrap()
}

fn torus2(n: usize) -> Domain {
    build_domain(Geometry::Torus { dim: 2 }, Boundary::PeriodicMeanZero, n).unwrap()
}

fn model(kind: ModelKind, d: &Domain) -> DriftModel {
    DriftModel::new(kind, d, &Overrides::default()).unwrap()
}

fn heat(d: &Domain) -> DriftModel {
    model(ModelKind::Heat { nu: 1.0 }, d)
}

fn burgers(d: &Domain) -> DriftModel {
    let kind = ModelKind::Semilinear {
        nu: 1.0,
        f: FSpec::Burgers,
        g: GSpec::Zero,
    };
    model(kind, d)
}

fn noise(m: &DriftModel, profile: NoiseProfile) -> NoiseOperator {
    build_noise(m.domain(), m.field_kind(), &profile).unwrap()
}

fn mode_one(m: &DriftModel, amp: f64) -> SpectralField {
    let mut u = m.zero_field();
    u.coeffs_mut()[0] = amp;
    u
}

fn random_state(m: &DriftModel, h: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_field(m.domain(), m.field_kind(), 1.0, 2.0, &mut rng);
    u.scaled(h / u.h_norm())
}

#[test]
fn heat_step_divides_by_implicit_multiplier() {
    let m = heat(&interval(16));
    let b = noise(&m, NoiseProfile::Zero);
    let u = step(&mode_one(&m, 1.0), &m, &b, &SchemeSpec::semi_implicit(0.01), RngStream::new(1, 0), 0).unwrap();
    let expected = 1.0 / (1.0 + PI * PI * 0.01);
    assert!((u.coeffs()[0] - expected).abs() < 1e-15);
    assert!(u.coeffs()[1..].iter().all(|c| *c == 0.0));
}

#[test]
fn tamed_heat_step_matches_formula() {
    let m = heat(&interval(8));
    let b = noise(&m, NoiseProfile::Zero);
    let dt = 0.01;
    let u = step(&mode_one(&m, 2.0), &m, &b, &SchemeSpec::tamed(dt, 1.0), RngStream::new(1, 0), 0).unwrap();
    let a = -2.0 * PI * PI;
    let expected = 2.0 + dt * a / (1.0 + dt * a.abs());
    assert!((u.coeffs()[0] - expected).abs() < 1e-14);
}

#[test]
fn zero_state_without_noise_stays_zero() {
    let d1 = interval(16);
    let d2 = torus2(8);
    let models = [
        heat(&d1),
        burgers(&d1),
        model(ModelKind::NavierStokes2D { nu: 0.5 }, &d2),
        model(ModelKind::PowerLawFluid { nu: 0.5, p: 2.5, dim: 2 }, &d2),
    ];
    for m in &models {
        let b = noise(m, NoiseProfile::Zero);
        for spec in [SchemeSpec::semi_implicit(1e-3), SchemeSpec::tamed(1e-3, 1.0)] {
            let rec = simulate_path(&m.zero_field(), m, &b, 0.05, &spec, RngStream::new(3, 0)).unwrap();
            assert!(rec.h_norm.iter().all(|h| *h == 0.0), "{}", m.kind().name());
            assert!(rec.residual.iter().all(|r| *r == 0.0));
        }
    }
}

#[test]
fn nse_semi_implicit_step_agrees_with_explicit_euler_to_second_order() {
    let d = torus2(16);
    let m = model(ModelKind::NavierStokes2D { nu: 0.5 }, &d);
    let b = noise(&m, NoiseProfile::Zero);
    let u = random_state(&m, 1.0, 5);
    let dt = 1e-6;
    let semi = step(&u, &m, &b, &SchemeSpec::semi_implicit(dt), RngStream::new(0, 0), 0).unwrap();
    let mut explicit = u.clone();
    explicit.axpy(dt, &apply_drift(&m, &u).unwrap()).unwrap();
    let diff = semi.sub(&explicit).unwrap();
    // (1 + a)^{-1} = 1 − a + a² − …, so semi − explicit = dt²(ν²λ²u − νλN(u)) + O(dt³).
    let n = m.explicit_part(&u).unwrap();
    let mut predicted = m.zero_field();
    for (i, p) in predicted.coeffs_mut().iter_mut().enumerate() {
        let r = m.implicit_rate(i);
        *p = dt * dt * (r * r * u.coeffs()[i] - r * n.coeffs()[i]);
    }
    let err = diff.sub(&predicted).unwrap().h_norm();
    assert!(err <= 1e-3 * predicted.h_norm(), "err {err}, predicted {}", predicted.h_norm());
    assert!(diff.h_norm() <= 1e-2 * dt * apply_drift(&m, &u).unwrap().h_norm());
}

#[test]
fn heat_decay_is_first_order_accurate() {
    let m = heat(&interval(16));
    let b = noise(&m, NoiseProfile::Zero);
    let errs: Vec<f64> = [2e-3, 1e-3, 5e-4]
        .iter()
        .map(|&dt: &f64| {
            let rec = deterministic_flow(&mode_one(&m, 1.0), &m, 1.0, &SchemeSpec::semi_implicit(dt)).unwrap();
            let mut worst: f64 = 0.0;
            for (t, h) in rec.times.iter().zip(&rec.h_norm) {
                let exact = (-PI * PI * t).exp();
                worst = worst.max((h / exact - 1.0).abs());
            }
            // log(1+a) = a − a²/2 + …, accumulated over t/dt steps.
            assert!(worst <= 1.1 * PI.powi(4) * dt / 2.0, "dt {dt}: {worst}");
            worst
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.9..2.1).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn deterministic_heat_stays_below_exponential_bound() {
    let m = heat(&interval(16));
    let x = random_state(&m, 1.0, 2);
    let rec = deterministic_flow(&x, &m, 1.0, &SchemeSpec::semi_implicit(1e-3)).unwrap();
    let k = m.constants();
    for (t, h) in rec.times.iter().zip(&rec.h_norm) {
        // (1 + a)^{-n} ≤ e^{-na} e^{na²/2}
        let slack = (PI.powi(4) * t * 1e-3 / 2.0).exp();
        let bound = deterministic_decay_bound(1.0, 2.0, k.c0, k.delta1, *t).sqrt();
        assert!(*h <= bound * slack, "t {t}: {h} > {bound}");
    }
    assert!(rec.stream.is_none());
}

fn power_law_excess(dt: f64) -> (f64, usize) {
    let d = torus2(8);
    let m = model(ModelKind::PowerLawFluid { nu: 1.0, p: 2.5, dim: 2 }, &d);
    let k = m.constants().clone();
    let x = random_state(&m, 2.0, 9);
    let rec = deterministic_flow(&x, &m, 1.0, &SchemeSpec::semi_implicit(dt)).unwrap();
    let mut worst: f64 = 0.0;
    for (t, h) in rec.times.iter().zip(&rec.h_norm) {
        let bound = deterministic_decay_bound(2.0, k.alpha, k.c0, k.delta1, *t);
        worst = worst.max(h * h - bound);
    }
    (worst.max(0.0), rec.len())
}

#[test]
fn power_law_flow_respects_comparison_bound() {
    let (coarse, n1) = power_law_excess(4e-3);
    let (fine, n2) = power_law_excess(2e-3);
    assert_eq!(n2, 2 * n1 - 1);
    assert!(fine <= coarse);
    assert!(fine <= 1e-3, "excess {fine}");
}

#[test]
fn burgers_sweep_finds_stable_step_size() {
    let d = interval(32);
    let m = burgers(&d);
    let b = noise(&m, NoiseProfile::Flat { k_modes: 4, sigma: 0.05 });
    let x = mode_one(&m, 1.0);
    let base = SchemeSpec::tamed(1e-3, 1.0);
    let dts = [0.2, 0.05, 0.01, 2e-3, 1e-3];
    let (pts, guard) = stability_sweep(&x, &m, &b, 1.0, &dts, &base, RngStream::new(17, 0)).unwrap();
    assert_eq!(pts.len(), dts.len());
    let guard = guard.expect("smallest step must be stable");
    let spec = SchemeSpec { dt: guard / 2.0, ..base };
    let rec = simulate_path(&x, &m, &b, 1.0, &spec, RngStream::new(17, 1)).unwrap();
    assert!(rec.h_norm.iter().all(|h| h.is_finite() && *h < 1e3));
    let semi = simulate_path(&x, &m, &b, 1.0, &SchemeSpec::semi_implicit(1e-3), RngStream::new(17, 2)).unwrap();
    assert!(semi.h_norm.iter().all(|h| h.is_finite()));
}

#[test]
fn guard_reports_step_and_stream() {
    let m = heat(&interval(8));
    let b = noise(&m, NoiseProfile::SingleMode { mode: 0, sigma: 50.0 });
    let spec = SchemeSpec {
        guard: 1.5,
        ..SchemeSpec::semi_implicit(1e-3)
    };
    match simulate_path(&mode_one(&m, 1.0), &m, &b, 1e3, &spec, RngStream::new(4, 7)) {
        Err(Error::Diverged { step, stream, .. }) => {
            assert_eq!(stream, 7);
            assert!(step < 1000);
        }
        other => panic!("expected divergence, got {:?}", other.map(|r| r.len())),
    }
}

#[test]
fn coupled_heat_difference_decays_deterministically() {
    let m = heat(&interval(16));
    let b = noise(&m, NoiseProfile::Flat { k_modes: 4, sigma: 0.1 });
    let dt = 1e-3;
    let spec = SchemeSpec::semi_implicit(dt);
    let x = random_state(&m, 1.0, 1);
    let mut y = x.clone();
    y.coeffs_mut()[0] += 0.5;
    let a = coupled_difference(&x, &y, &m, &b, &spec, 11);
    let c = coupled_difference(&x, &y, &m, &b, &spec, 12);
    for (k, (p, q)) in a.iter().zip(&c).enumerate() {
        let exact = 0.5 / (1.0 + PI * PI * dt).powi(k as i32);
        assert!((p - exact).abs() <= 1e-12, "step {k}");
        assert!((p - q).abs() <= 1e-12);
    }
}

fn coupled_difference(x: &SpectralField, y: &SpectralField, m: &DriftModel, b: &NoiseOperator, spec: &SchemeSpec, seed: u64) -> Vec<f64> {
    simulate_coupled(x, y, m, b, 0.2, spec, RngStream::new(seed, 0))
        .unwrap()
        .difference
        .h_norm
}

#[test]
fn coupled_equal_starts_never_separate() {
    let d = torus2(8);
    let m = model(ModelKind::NavierStokes2D { nu: 0.5 }, &d);
    let b = noise(&m, NoiseProfile::Flat { k_modes: 6, sigma: 0.2 });
    let x = random_state(&m, 1.0, 3);
    let rec = simulate_coupled(&x, &x, &m, &b, 0.2, &SchemeSpec::semi_implicit(0.01), RngStream::new(2, 0)).unwrap();
    assert!(rec.difference.h_norm.iter().all(|h| *h == 0.0));
    assert_eq!(rec.x.h_norm, rec.y.h_norm);
    assert!(rec.x.h_norm.last().unwrap() != rec.x.h_norm.first().unwrap());
}

#[test]
fn coupled_paths_match_single_paths() {
    let m = burgers(&interval(16));
    let b = noise(&m, NoiseProfile::Flat { k_modes: 3, sigma: 0.3 });
    let spec = SchemeSpec::semi_implicit(1e-3);
    let x = random_state(&m, 1.0, 4);
    let y = random_state(&m, 0.5, 5);
    let stream = RngStream::new(8, 3);
    let rec = simulate_coupled(&x, &y, &m, &b, 0.1, &spec, stream).unwrap();
    let px = simulate_path(&x, &m, &b, 0.1, &spec, stream).unwrap();
    let py = simulate_path(&y, &m, &b, 0.1, &spec, stream).unwrap();
    assert_eq!(rec.x.h_norm, px.h_norm);
    assert_eq!(rec.y.h_norm, py.h_norm);
}

#[test]
fn zero_noise_heat_residual_is_second_order() {
    let m = heat(&interval(8));
    let b = noise(&m, NoiseProfile::Zero);
    for dt in [1e-3, 1e-4] {
        let out = advance(&mode_one(&m, 1.0), &m, &b, &SchemeSpec::semi_implicit(dt), RngStream::new(0, 0), 0).unwrap();
        // (1+a)^{-2} − 1 + 2a = 3a² + O(a³), a = π²dt
        let a = PI * PI * dt;
        let exact = (1.0 + a).powi(-2) - 1.0 + 2.0 * a;
        assert!((out.residual - exact).abs() <= 1e-15);
        assert!((out.residual / (3.0 * a * a) - 1.0).abs() < 3.0 * a);
    }
}

#[test]
fn recomputed_residuals_match_inline_ones() {
    let m = burgers(&interval(16));
    let b = noise(&m, NoiseProfile::Flat { k_modes: 3, sigma: 0.2 });
    let spec = SchemeSpec::semi_implicit(1e-3).with_snapshots(1);
    let rec = simulate_path(&random_state(&m, 1.0, 6), &m, &b, 0.05, &spec, RngStream::new(1, 2)).unwrap();
    let r = energy_identity_residual(&rec, &m, &b).unwrap();
    assert_eq!(r.len(), rec.len() - 1);
    for (a, c) in r.iter().zip(&rec.residual[1..]) {
        assert!((a - c).abs() <= 1e-13 * (1.0 + c.abs()), "{a} vs {c}");
    }
}

#[test]
fn residual_of_zero_path_is_zero() {
    let m = heat(&interval(8));
    let b = noise(&m, NoiseProfile::Zero);
    let rec = deterministic_flow(&m.zero_field(), &m, 0.01, &SchemeSpec::semi_implicit(1e-3).with_snapshots(1)).unwrap();
    let r = energy_identity_residual(&rec, &m, &b).unwrap();
    assert_eq!(r.len(), 10);
    assert!(r.iter().all(|x| *x == 0.0));
}

#[test]
fn residual_needs_snapshots() {
    let m = heat(&interval(8));
    let b = noise(&m, NoiseProfile::Zero);
    let rec = deterministic_flow(&mode_one(&m, 1.0), &m, 0.01, &SchemeSpec::semi_implicit(1e-3)).unwrap();
    assert!(matches!(energy_identity_residual(&rec, &m, &b), Err(Error::NotConfigured(_))));
    let sparse = deterministic_flow(&mode_one(&m, 1.0), &m, 0.01, &SchemeSpec::semi_implicit(1e-3).with_snapshots(2)).unwrap();
    assert!(energy_identity_residual(&sparse, &m, &b).is_err());
}

#[test]
fn first_step_residual_mean_is_within_three_standard_errors() {
    let m = heat(&interval(16));
    let b = noise(&m, NoiseProfile::SingleMode { mode: 0, sigma: 0.1 });
    let spec = SchemeSpec::semi_implicit(1e-3);
    let n = 10_000;
    let r: Vec<f64> = (0..n)
        .map(|p| advance(&m.zero_field(), &m, &b, &spec, RngStream::new(99, p), 0).unwrap().residual)
        .collect();
    let mean = r.iter().sum::<f64>() / n as f64;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn accumulated_residual_is_first_order() {
    let m = heat(&interval(16));
    let b = noise(&m, NoiseProfile::Flat { k_modes: 2, sigma: 0.1 });
    let x = mode_one(&m, 1.0);
    let total = |dt: f64| -> f64 {
        let spec = SchemeSpec::semi_implicit(dt);
        let paths = 100;
        (0..paths)
            .map(|p| {
                let rec = simulate_path(&x, &m, &b, 0.1, &spec, RngStream::new(5, p)).unwrap();
                rec.residual.iter().sum::<f64>()
            })
            .sum::<f64>()
            / paths as f64
    };
    let (a, c) = (total(2e-3), total(1e-3));
    let ratio = a / c;
    assert!((1.8..2.2).contains(&ratio), "ratio {ratio} ({a}, {c})");
}

#[test]
fn csv_round_trip_with_tag() {
    let m = heat(&interval(8));
    let b = noise(&m, NoiseProfile::SingleMode { mode: 0, sigma: 0.1 });
    let rec = simulate_path(&mode_one(&m, 1.0), &m, &b, 0.01, &SchemeSpec::semi_implicit(1e-3), RngStream::new(1, 0)).unwrap();
    let mut buf = Vec::new();
    rec.write_csv(&mut buf, Some(("config_hash", "abc123"))).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["config_hash", "time", "h_norm", "v_norm", "residual"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), rec.len());
    for (row, h) in rows.iter().zip(&rec.h_norm) {
        assert_eq!(&row[0], "abc123");
        let parsed: f64 = row[2].parse().unwrap();
        assert!((parsed - h).abs() <= 1e-12 * h.abs());
    }
}

#[test]
fn record_stride_thins_output() {
    let m = heat(&interval(8));
    let b = noise(&m, NoiseProfile::Zero);
    let spec = SchemeSpec::semi_implicit(1e-3).with_record_stride(10);
    let rec = simulate_path(&mode_one(&m, 1.0), &m, &b, 0.1, &spec, RngStream::new(0, 0)).unwrap();
    assert_eq!(rec.len(), 11);
    assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
    assert!((rec.final_time() - 0.1).abs() < 1e-12);
}

#[test]
fn invalid_schemes_are_rejected() {
    let m = heat(&interval(8));
    let b = noise(&m, NoiseProfile::Zero);
    let x = mode_one(&m, 1.0);
    for spec in [
        SchemeSpec::semi_implicit(0.0),
        SchemeSpec::semi_implicit(f64::NAN),
        SchemeSpec::tamed(1e-3, 0.0),
        SchemeSpec::semi_implicit(1e-3).with_record_stride(0),
    ] {
        assert!(simulate_path(&x, &m, &b, 1.0, &spec, RngStream::new(0, 0)).is_err());
    }
    let other = heat(&interval(4));
    assert!(simulate_path(&other.zero_field(), &m, &b, 1.0, &SchemeSpec::semi_implicit(1e-3), RngStream::new(0, 0)).is_err());
}

proptest! {
    #[test]
    fn implicit_heat_multiplier_is_contractive(log_dt in -8.0f64..3.0, mode in 0usize..32) {
        let m = heat(&interval(32));
        let b = noise(&m, NoiseProfile::Zero);
        let mut x = m.zero_field();
        x.coeffs_mut()[mode] = 1.0;
        let dt = 10f64.powf(log_dt);
        let u = step(&x, &m, &b, &SchemeSpec::semi_implicit(dt), RngStream::new(0, 0), 0).unwrap();
        let r = u.coeffs()[mode];
        prop_assert!(r > 0.0 && r < 1.0);
    }
}
