//! Monte Carlo experiments: ensembles, Wasserstein-2 estimates, contraction
//! and moment certificates, mixing times, occupation and tracking frequencies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::checker::{compute_c123, mixing_time_bound, theta, BoundForm, ConstantSet};
use crate::drift::{DriftModel, ModelKind, Rho};
use crate::error::{config_err, Error, Result};
use crate::integrator::{check_start, deterministic_flow, simulate_coupled, simulate_path, step, SchemeSpec};
use crate::noise::{wilson_interval, NoiseOperator, RngStream};
use crate::spectral::SpectralField;

const Z95: f64 = 1.959964;

/// Outcome of a statistical certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Fail dominates Inconclusive dominates Pass.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn pool(workers: Option<usize>) -> Result<Option<rayon::ThreadPool>> {
    match workers {
        None => Ok(None),
        Some(0) => config_err("worker count must be at least 1"),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(Some)
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}"))),
    }
}

/// Runs `f` over 0..n in parallel and returns results in index order.
fn par_map<T: Send>(n: usize, workers: Option<usize>, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
    Ok(match pool(workers)? {
        Some(p) => p.install(run),
        None => run(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    /// Times at which statistics are taken (rounded to the step grid; 0 allowed).
    pub checkpoints: Vec<f64>,
    /// Keep every trajectory's coefficients at each checkpoint.
    pub keep_samples: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub seed: u64,
    pub n: usize,
    pub dt: f64,
    pub alpha: f64,
    pub beta: f64,
    /// ‖x‖_H of the common initial state.
    pub x_h_norm: f64,
    pub times: Vec<f64>,
    /// Mean and standard error of ‖X_t‖^{β+2}_H.
    pub mean_pow: Vec<f64>,
    pub se_pow: Vec<f64>,
    /// Mean and standard error of ∫₀ᵗ ‖X_r‖^β_H ‖X_r‖^α_V dr (trapezoidal).
    pub mean_int: Vec<f64>,
    pub se_int: Vec<f64>,
    /// Per-checkpoint, per-path values of the two quantities above.
    pub pow: Vec<Vec<f64>>,
    pub int: Vec<Vec<f64>>,
    /// Per-checkpoint, per-path coefficient vectors (empty unless requested).
    pub samples: Vec<Vec<Vec<f64>>>,
}

impl EnsembleStats {
    /// Values of one coefficient across paths at a checkpoint.
    pub fn coeff_samples(&self, checkpoint: usize, coeff: usize) -> Vec<f64> {
        self.samples[checkpoint].iter().map(|c| c[coeff]).collect()
    }
}

struct PathOut {
    pow: Vec<f64>,
    int: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

fn checkpoint_steps(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    if times.is_empty() {
        return config_err("at least one checkpoint is required");
    }
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0 && t.is_finite()) {
            return config_err(format!("checkpoint times must be nonnegative, got {t}"));
        }
        steps.push((t / dt).round() as usize);
    }
    if steps.windows(2).any(|w| w[1] <= w[0]) {
        return config_err("checkpoint times must be strictly increasing on the step grid");
    }
    Ok(steps)
}

/// n trajectories from x on streams 0..n of `seed`. Results do not depend on
/// the worker count.
pub fn run_ensemble(
    m: &DriftModel,
    b: &NoiseOperator,
    x: &SpectralField,
    spec: &SchemeSpec,
    n: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleStats> {
    if n < 2 {
        return Err(Error::InsufficientSamples { need: 2, have: n });
    }
    spec.validate()?;
    check_start(x, m, b)?;
    let steps = checkpoint_steps(&opts.checkpoints, spec.dt)?;
    let last = *steps.last().expect("non-empty");
    let k = m.constants();
    let (alpha, beta) = (k.alpha, k.beta);
    let dt = spec.dt;
    let weight = |u: &SpectralField| u.h_norm().powf(beta) * u.v_norm().powf(alpha);
    let outs = par_map(n, opts.workers, |p| -> Result<PathOut> {
        let stream = RngStream::new(seed, p as u64);
        let mut u = x.clone();
        let mut out = PathOut {
            pow: Vec::with_capacity(steps.len()),
            int: Vec::with_capacity(steps.len()),
            samples: Vec::new(),
        };
        let mut integral = 0.0;
        let mut w_prev = weight(&u);
        let mut next = 0;
        for s in 0..=last {
            if s == steps[next] {
                out.pow.push(u.h_norm().powf(beta + 2.0));
                out.int.push(integral);
                if opts.keep_samples {
                    out.samples.push(u.coeffs().to_vec());
                }
                next += 1;
                if next == steps.len() {
                    break;
                }
            }
            u = step(&u, m, b, spec, stream, s)?;
            let w = weight(&u);
            integral += 0.5 * dt * (w_prev + w);
            w_prev = w;
        }
        Ok(out)
    })?;
    let mut paths = Vec::with_capacity(n);
    for o in outs {
        paths.push(o?);
    }
    let nc = steps.len();
    let mut stats = EnsembleStats {
        seed,
        n,
        dt,
        alpha,
        beta,
        x_h_norm: x.h_norm(),
        times: steps.iter().map(|s| *s as f64 * dt).collect(),
        mean_pow: Vec::with_capacity(nc),
        se_pow: Vec::with_capacity(nc),
        mean_int: Vec::with_capacity(nc),
        se_int: Vec::with_capacity(nc),
        pow: Vec::with_capacity(nc),
        int: Vec::with_capacity(nc),
        samples: Vec::new(),
    };
    for c in 0..nc {
        let pow: Vec<f64> = paths.iter().map(|p| p.pow[c]).collect();
        let int: Vec<f64> = paths.iter().map(|p| p.int[c]).collect();
        let (mp, sp) = mean_se(&pow);
        let (mi, si) = mean_se(&int);
        stats.mean_pow.push(mp);
        stats.se_pow.push(sp);
        stats.mean_int.push(mi);
        stats.se_int.push(si);
        stats.pow.push(pow);
        stats.int.push(int);
        if opts.keep_samples {
            stats.samples.push(paths.iter_mut().map(|p| std::mem::take(&mut p.samples[c])).collect());
        }
    }
    Ok(stats)
}

/// A scalar Gaussian law N(mean, sd²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1 {
    pub mean: f64,
    pub sd: f64,
}

/// W₂ between two scalar Gaussians: √((m₁−m₂)² + (s₁−s₂)²).
pub fn gaussian_w2(a: Gaussian1, b: Gaussian1) -> f64 {
    ((a.mean - b.mean).powi(2) + (a.sd - b.sd).powi(2)).sqrt()
}

fn heat_rates(m: &DriftModel) -> Result<Vec<f64>> {
    match m.kind() {
        ModelKind::Heat { nu } => Ok((0..m.domain().n_modes()).map(|i| nu * m.domain().eigenvalue(i)).collect()),
        other => Err(Error::Unsupported(format!(
            "the Gaussian oracle needs the heat model, got {}",
            other.name()
        ))),
    }
}

fn sigmas(b: &NoiseOperator, n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for &(i, v) in b.active() {
        s[i] = v;
    }
    s
}

/// Exact per-mode law of the heat equation at time t (continuous time).
pub fn heat_law(m: &DriftModel, b: &NoiseOperator, x: &SpectralField, t: f64) -> Result<Vec<Gaussian1>> {
    let rates = heat_rates(m)?;
    let sig = sigmas(b, rates.len());
    Ok(rates
        .iter()
        .zip(&sig)
        .zip(x.coeffs())
        .map(|((&r, &s), &x0)| Gaussian1 {
            mean: x0 * (-r * t).exp(),
            sd: s * (-(-2.0 * r * t).exp_m1() / (2.0 * r)).sqrt(),
        })
        .collect())
}

/// Per-mode invariant law σ_k/√(2νλ_k) of the heat equation.
pub fn heat_stationary_law(m: &DriftModel, b: &NoiseOperator) -> Result<Vec<Gaussian1>> {
    let rates = heat_rates(m)?;
    let sig = sigmas(b, rates.len());
    Ok(rates
        .iter()
        .zip(&sig)
        .map(|(&r, &s)| Gaussian1 {
            mean: 0.0,
            sd: s / (2.0 * r).sqrt(),
        })
        .collect())
}

/// Exact per-mode law of the semi-implicit heat chain after `steps` steps:
/// u ← (u + σ√dt ξ)/(1 + νλdt).
pub fn heat_chain_law(m: &DriftModel, b: &NoiseOperator, x: &SpectralField, dt: f64, steps: usize) -> Result<Vec<Gaussian1>> {
    let rates = heat_rates(m)?;
    let sig = sigmas(b, rates.len());
    let n = steps as i32;
    Ok(rates
        .iter()
        .zip(&sig)
        .zip(x.coeffs())
        .map(|((&r, &s), &x0)| {
            let q = 1.0 / (1.0 + r * dt);
            let q2 = q * q;
            let var = s * s * dt * q2 * (1.0 - q2.powi(n)) / (1.0 - q2);
            Gaussian1 {
                mean: x0 * q.powi(n),
                sd: var.sqrt(),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum W2Method {
    /// √(mean over random unit directions of the 1D W₂²); a proxy that never
    /// exceeds the full W₂.
    Sliced { n_proj: usize, seed: u64 },
    /// Closed form for Gaussian laws.
    GaussianOracle,
    /// Exact 1D W₂ of one coefficient.
    ModeMarginal1d { coeff: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct W2Estimate {
    pub value: f64,
    pub method: W2Method,
    /// Half-width of the 95% percentile bootstrap interval.
    pub half_width: Option<f64>,
}

/// W₂ between law(X_t^x) and the invariant law of the heat equation.
pub fn w2_gaussian_oracle(m: &DriftModel, b: &NoiseOperator, x: &SpectralField, t: f64) -> Result<W2Estimate> {
    let now = heat_law(m, b, x, t)?;
    let inv = heat_stationary_law(m, b)?;
    Ok(W2Estimate {
        value: w2_product_gaussians(&now, &inv),
        method: W2Method::GaussianOracle,
        half_width: None,
    })
}

/// W₂ between two product Gaussian laws on the same modes.
pub fn w2_product_gaussians(a: &[Gaussian1], b: &[Gaussian1]) -> f64 {
    a.iter().zip(b).map(|(p, q)| gaussian_w2(*p, *q).powi(2)).sum::<f64>().sqrt()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact squared W₂ between two empirical measures on the line, by
/// integrating the squared difference of the quantile functions.
fn w2_sq_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    if na == nb {
        return a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / na as f64;
    }
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    let mut acc = 0.0;
    while i < na && j < nb {
        let ea = (i + 1) as f64 / na as f64;
        let eb = (j + 1) as f64 / nb as f64;
        let end = ea.min(eb);
        acc += (end - u) * (a[i] - b[j]).powi(2);
        u = end;
        if ea <= end {
            i += 1;
        }
        if eb <= end {
            j += 1;
        }
    }
    acc
}

/// Exact 1D W₂ between two samples.
pub fn w2_1d(a: &[f64], b: &[f64]) -> f64 {
    w2_sq_sorted(&sorted(a), &sorted(b)).sqrt()
}

fn phi(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// Exact squared W₂ between the empirical law of sorted `xs` and N(m, s²).
fn w2_sq_sorted_to_gaussian(xs: &[f64], g: Gaussian1) -> f64 {
    if g.sd == 0.0 {
        return xs.iter().map(|x| (x - g.mean).powi(2)).sum::<f64>() / xs.len() as f64;
    }
    let std = Normal::standard();
    let n = xs.len();
    let s = g.sd;
    // On [a, b]: ∫Φ⁻¹ = φ(z_a) − φ(z_b); ∫(Φ⁻¹)² = (b − a) − (z_bφ(z_b) − z_aφ(z_a)).
    let zphi = |z: f64| if z.is_infinite() { 0.0 } else { z * phi(z) };
    let mut za = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let ub = (i + 1) as f64 / n as f64;
        let zb = if i + 1 == n { f64::INFINITY } else { std.inverse_cdf(ub) };
        let w = 1.0 / n as f64;
        let m1 = phi(za) - phi(zb);
        let m2 = w - (zphi(zb) - zphi(za));
        let d = x - g.mean;
        acc += d * d * w - 2.0 * d * s * m1 + s * s * m2;
        za = zb;
    }
    acc.max(0.0)
}

/// Exact W₂ between an empirical sample and a scalar Gaussian.
pub fn w2_to_gaussian(xs: &[f64], g: Gaussian1) -> f64 {
    w2_sq_sorted_to_gaussian(&sorted(xs), g).sqrt()
}

fn percentile_half_width(mut reps: Vec<f64>) -> f64 {
    reps.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let idx = (p * (reps.len() - 1) as f64).round() as usize;
        reps[idx]
    };
    0.5 * (q(0.975) - q(0.025))
}

fn resample(xs: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).collect()
}

/// W₂ between an empirical sample and N(m, s²) with a bootstrap half-width.
pub fn w2_to_gaussian_bootstrap(xs: &[f64], g: Gaussian1, reps: usize, seed: u64) -> Result<W2Estimate> {
    if xs.len() < 2 {
        return Err(Error::InsufficientSamples { need: 2, have: xs.len() });
    }
    let value = w2_to_gaussian(xs, g);
    let half_width = (reps > 1).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..reps).map(|_| w2_to_gaussian(&resample(xs, &mut rng), g)).collect();
        percentile_half_width(v)
    });
    Ok(W2Estimate {
        value,
        method: W2Method::ModeMarginal1d { coeff: 0 },
        half_width,
    })
}

fn project(samples: &[Vec<f64>], dir: &[f64]) -> Vec<f64> {
    samples.iter().map(|s| s.iter().zip(dir).map(|(a, b)| a * b).sum()).collect()
}

fn directions(dim: usize, n_proj: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_proj)
        .map(|_| loop {
            let d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                break d.into_iter().map(|x| x / n).collect();
            }
        })
        .collect()
}

fn empirical_value(a: &[Vec<f64>], b: &[Vec<f64>], method: &W2Method, dirs: &[Vec<f64>]) -> f64 {
    match method {
        W2Method::Sliced { .. } => {
            let s: f64 = dirs.iter().map(|d| w2_sq_sorted(&sorted(&project(a, d)), &sorted(&project(b, d)))).sum();
            (s / dirs.len() as f64).sqrt()
        }
        W2Method::ModeMarginal1d { coeff } => {
            let pa: Vec<f64> = a.iter().map(|s| s[*coeff]).collect();
            let pb: Vec<f64> = b.iter().map(|s| s[*coeff]).collect();
            w2_1d(&pa, &pb)
        }
        W2Method::GaussianOracle => unreachable!("rejected by caller"),
    }
}

/// W₂ estimate between two sample clouds, with an optional bootstrap of
/// `reps` resamples of both sides.
pub fn w2_empirical(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    method: &W2Method,
    bootstrap: Option<(usize, u64)>,
) -> Result<W2Estimate> {
    let need = match method {
        W2Method::Sliced { .. } => 50,
        _ => 2,
    };
    let have = a.len().min(b.len());
    if have < need {
        return Err(Error::InsufficientSamples { need, have });
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|s| s.len() != dim) {
        return Err(Error::Shape {
            expected: dim,
            got: a.iter().chain(b).map(|s| s.len()).find(|l| *l != dim).unwrap_or(dim),
        });
    }
    let dirs = match method {
        W2Method::Sliced { n_proj, seed } => {
            if *n_proj == 0 {
                return config_err("sliced W2 needs at least one projection");
            }
            directions(dim, *n_proj, *seed)
        }
        W2Method::ModeMarginal1d { coeff } => {
            if *coeff >= dim {
                return config_err(format!("coefficient {coeff} outside dimension {dim}"));
            }
            Vec::new()
        }
        W2Method::GaussianOracle => {
            return Err(Error::Unsupported("the Gaussian oracle takes laws, not samples".into()));
        }
    };
    let value = empirical_value(a, b, method, &dirs);
    let half_width = match bootstrap {
        Some((reps, seed)) if reps > 1 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = Vec::with_capacity(reps);
            for _ in 0..reps {
                let ra: Vec<Vec<f64>> = (0..a.len()).map(|_| a[rng.random_range(0..a.len())].clone()).collect();
                let rb: Vec<Vec<f64>> = (0..b.len()).map(|_| b[rng.random_range(0..b.len())].clone()).collect();
                v.push(empirical_value(&ra, &rb, method, &dirs));
            }
            Some(percentile_half_width(v))
        }
        _ => None,
    };
    Ok(W2Estimate {
        value,
        method: method.clone(),
        half_width,
    })
}

fn rho_of(m: &DriftModel, v_norm: f64) -> f64 {
    let k = m.constants();
    match k.rho {
        Rho::Zero => 0.0,
        Rho::QuadraticV => k.c2 * v_norm * v_norm,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionCertificate {
    /// Least-squares slope of log‖X^x_t − X^y_t‖²_H over the fit window.
    pub fitted_rate: f64,
    /// Three standard errors of the slope.
    pub fit_error: f64,
    /// Rate the scheme should beat: the linear-implicit step turns −δ₂ into
    /// −(2/dt)·log(1 + δ₂dt/2), plus the window average of ρ along the cheaper
    /// of the two paths.
    pub predicted_rate: f64,
    /// Same with the exact −δ₂.
    pub continuum_rate: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub pass: bool,
    pub times: Vec<f64>,
    pub log_diff_sq: Vec<f64>,
}

/// Least squares slope and its standard error.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
    let se = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    (slope, icept, se)
}

/// Synchronous coupling from x and y; the decay rate of ‖X^x − X^y‖² over
/// [T/2, T] is compared with −δ₂ + ⟨ρ⟩ measured on the simulated path.
pub fn contraction_certificate(
    m: &DriftModel,
    b: &NoiseOperator,
    x: &SpectralField,
    y: &SpectralField,
    t: f64,
    spec: &SchemeSpec,
    seed: u64,
) -> Result<ContractionCertificate> {
    let d0 = x.sub(y)?;
    if d0.h_norm() == 0.0 {
        return config_err("contraction certificate needs x != y");
    }
    let rec = simulate_coupled(x, y, m, b, t, spec, RngStream::new(seed, 0))?;
    let times = &rec.difference.times;
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    let mut rho_x = Vec::new();
    let mut rho_y = Vec::new();
    let t0 = 0.5 * t;
    let mut t1 = t0;
    for i in 0..times.len() {
        if times[i] + 1e-12 < t0 {
            continue;
        }
        let d = rec.difference.h_norm[i];
        if d < 1e-14 {
            break;
        }
        ts.push(times[i]);
        ls.push(2.0 * d.ln());
        rho_x.push(rho_of(m, rec.x.v_norm[i]));
        rho_y.push(rho_of(m, rec.y.v_norm[i]));
        t1 = times[i];
    }
    if ts.len() < 3 {
        return Err(Error::InsufficientSamples { need: 3, have: ts.len() });
    }
    let (slope, _, se) = fit_line(&ts, &ls);
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let delta2 = m.constants().delta2;
    let rho = avg(&rho_x).min(avg(&rho_y));
    let predicted = -(2.0 / spec.dt) * (0.5 * delta2 * spec.dt).ln_1p() + rho;
    let fit_error = 3.0 * se;
    Ok(ContractionCertificate {
        fitted_rate: slope,
        fit_error,
        predicted_rate: predicted,
        continuum_rate: -delta2 + rho,
        window: (t0, t1),
        points: ts.len(),
        pass: slope <= predicted + fit_error + 1e-9 * predicted.abs(),
        times: ts,
        log_diff_sq: ls,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub t: f64,
    /// E‖X_t‖^{β+2} + λ₀δ₁(β+2)/2 · E∫‖X‖^β‖X‖^α_V
    pub lhs: f64,
    pub lhs_se: f64,
    /// ‖x‖^{β+2} + t(c₁+c₂)
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentCertificate {
    pub rows: Vec<MomentRow>,
    pub pass: bool,
}

fn matching(stats: &EnsembleStats, cs: &ConstantSet) -> Result<()> {
    if (stats.alpha - cs.alpha).abs() > 1e-12 || (stats.beta - cs.beta).abs() > 1e-12 {
        return config_err(format!(
            "ensemble exponents (alpha={}, beta={}) differ from the constant set ({}, {})",
            stats.alpha, stats.beta, cs.alpha, cs.beta
        ));
    }
    Ok(())
}

/// Checks the integrated moment inequality at every checkpoint with a
/// three-standard-error margin.
pub fn moment_certificate(stats: &EnsembleStats, cs: &ConstantSet) -> Result<MomentCertificate> {
    matching(stats, cs)?;
    let (c1, c2, _) = compute_c123(cs)?;
    let k = cs.lambda[0] * cs.delta1 * (cs.beta + 2.0) / 2.0;
    let start = stats.x_h_norm.powf(cs.beta + 2.0);
    let rows: Vec<MomentRow> = stats
        .times
        .iter()
        .enumerate()
        .map(|(c, &t)| {
            let comb: Vec<f64> = stats.pow[c].iter().zip(&stats.int[c]).map(|(p, i)| p + k * i).collect();
            let (lhs, se) = mean_se(&comb);
            let rhs = start + t * (c1 + c2);
            MomentRow {
                t,
                lhs,
                lhs_se: se,
                rhs,
                pass: lhs - 3.0 * se <= rhs * (1.0 + 1e-12),
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(MomentCertificate { rows, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpMomentRow {
    pub t: f64,
    /// Monte Carlo E[exp(‖X_t‖^{β+2} + λ₀δ₁(β+2)/2 ∫…)] divided by the bound.
    pub ratio: f64,
    pub half_width: f64,
    /// exp(‖x‖^{β+2} + t(c₁+c₂+c₃))
    pub bound: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpMomentCertificate {
    pub rows: Vec<ExpMomentRow>,
    pub verdict: Verdict,
}

/// Exponential moment check. Each path's exponential is divided by the
/// bound before averaging; heavy-tailed estimates are reported inconclusive.
pub fn exp_moment_certificate(stats: &EnsembleStats, cs: &ConstantSet, reps: usize, seed: u64) -> Result<ExpMomentCertificate> {
    matching(stats, cs)?;
    let (c1, c2, c3) = compute_c123(cs)?;
    let k = cs.lambda[0] * cs.delta1 * (cs.beta + 2.0) / 2.0;
    let start = stats.x_h_norm.powf(cs.beta + 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (c, &t) in stats.times.iter().enumerate() {
        let log_bound = start + t * (c1 + c2 + c3);
        let vals: Vec<f64> = stats.pow[c]
            .iter()
            .zip(&stats.int[c])
            .map(|(p, i)| (p + k * i - log_bound).exp())
            .collect();
        let n = vals.len() as f64;
        let sum: f64 = vals.iter().sum();
        let ratio = sum / n;
        let max = vals.iter().copied().fold(0.0, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        // A sample that dominates the mean only matters when the values spread.
        let dominated = max > 0.1 * sum && max > min * (1.0 + 1e-9);
        let finite = vals.iter().all(|v| v.is_finite()) && sum.is_finite();
        let half_width = if finite && reps > 1 {
            let boot: Vec<f64> = (0..reps).map(|_| resample(&vals, &mut rng).iter().sum::<f64>() / n).collect();
            percentile_half_width(boot)
        } else {
            f64::INFINITY
        };
        let heavy = !finite || dominated || half_width > 0.25 * ratio;
        let verdict = if heavy {
            Verdict::Inconclusive
        } else {
            Verdict::from_bool(ratio <= 1.0 + 3.0 * half_width)
        };
        rows.push(ExpMomentRow {
            t,
            ratio,
            half_width,
            bound: log_bound.exp(),
            verdict,
        });
    }
    let verdict = rows.iter().fold(Verdict::Pass, |v, r| v.combine(r.verdict));
    Ok(ExpMomentCertificate { rows, verdict })
}

/// Where the W₂ curve of an empirical mixing time comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingCurve {
    /// Closed-form heat laws at each checkpoint.
    HeatOracle,
    /// Ensemble of `paths` trajectories against a pooled long-run surrogate of
    /// the invariant law.
    Empirical {
        paths: usize,
        method: W2Method,
        surrogate_samples: usize,
        burn_in: f64,
        /// Surrogate sampling interval.
        spacing: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingRow {
    pub eps: f64,
    pub tau_hat: Option<f64>,
    pub tau_bound: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingReport {
    pub times: Vec<f64>,
    pub w2: Vec<f64>,
    pub rows: Vec<MixingRow>,
    /// Surrogate mean of ‖X‖²_H over the first and second halves.
    pub surrogate_drift: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct MixingSetup<'a> {
    pub model: &'a DriftModel,
    pub noise: &'a NoiseOperator,
    pub x: &'a SpectralField,
    pub spec: &'a SchemeSpec,
    pub constants: &'a ConstantSet,
    pub form: BoundForm,
    pub checkpoints: Vec<f64>,
    pub seed: u64,
    pub workers: Option<usize>,
}

fn surrogate(s: &MixingSetup, n: usize, burn_in: f64, spacing: f64) -> Result<(Vec<Vec<f64>>, (f64, f64, bool))> {
    if n < 4 {
        return Err(Error::InsufficientSamples { need: 4, have: n });
    }
    let stride = ((spacing / s.spec.dt).round() as usize).max(1);
    let burn = (burn_in / s.spec.dt).round() as usize;
    let stream = RngStream::new(s.seed ^ 0x5eed_5eed_5eed_5eed, u64::MAX);
    let mut u = s.x.clone();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while out.len() < n {
        u = step(&u, s.model, s.noise, s.spec, stream, k)?;
        k += 1;
        if k >= burn && (k - burn) % stride == 0 {
            out.push(u.coeffs().to_vec());
        }
    }
    let e: Vec<f64> = out.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let (a, b) = e.split_at(n / 2);
    let (ma, sa) = mean_se(a);
    let (mb, sb) = mean_se(b);
    let stable = (ma - mb).abs() <= 3.0 * (sa * sa + sb * sb).sqrt();
    Ok((out, (ma, mb, stable)))
}

/// First checkpoint at which W₂(law(X_t^x), μ*) ≤ ε, compared with the
/// closed-form bound for each ε.
/// Bisects the oracle W₂ curve for its first crossing of `e` in (lo, hi].
fn refine_crossing(s: &MixingSetup, mut lo: f64, mut hi: f64, e: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if w2_gaussian_oracle(s.model, s.noise, s.x, mid)?.value <= e {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn empirical_mixing_time(s: &MixingSetup, eps: &[f64], curve: &MixingCurve) -> Result<MixingReport> {
    let steps = checkpoint_steps(&s.checkpoints, s.spec.dt)?;
    let times: Vec<f64> = steps.iter().map(|k| *k as f64 * s.spec.dt).collect();
    let (w2, drift, stable) = match curve {
        MixingCurve::HeatOracle => {
            let w: Result<Vec<f64>> = times.iter().map(|&t| Ok(w2_gaussian_oracle(s.model, s.noise, s.x, t)?.value)).collect();
            (w?, None, true)
        }
        MixingCurve::Empirical {
            paths,
            method,
            surrogate_samples,
            burn_in,
            spacing,
        } => {
            let opts = EnsembleOptions {
                checkpoints: s.checkpoints.clone(),
                keep_samples: true,
                workers: s.workers,
            };
            let stats = run_ensemble(s.model, s.noise, s.x, s.spec, *paths, s.seed, &opts)?;
            let (sur, (ma, mb, stable)) = surrogate(s, *surrogate_samples, *burn_in, *spacing)?;
            let mut w = Vec::with_capacity(times.len());
            for c in 0..times.len() {
                w.push(w2_empirical(&stats.samples[c], &sur, method, None)?.value);
            }
            (w, Some((ma, mb)), stable)
        }
    };
    let horizon = *times.last().expect("non-empty");
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let tau_bound = mixing_time_bound(s.constants, s.x.h_norm(), e, s.form)?;
        let idx = w2.iter().position(|w| *w <= e);
        let hit = match (idx, curve) {
            // The oracle curve is continuous, so the crossing is refined between
            // the bracketing checkpoints instead of snapping to the grid.
            (Some(i), MixingCurve::HeatOracle) if i > 0 => Some(refine_crossing(s, times[i - 1], times[i], e)?),
            (Some(i), _) => Some(times[i]),
            (None, _) => None,
        };
        let verdict = if !stable {
            Verdict::Inconclusive
        } else {
            match hit {
                Some(t) => Verdict::from_bool(t <= tau_bound * (1.0 + 1e-12)),
                None if horizon >= tau_bound => Verdict::Fail,
                None => Verdict::Inconclusive,
            }
        };
        rows.push(MixingRow {
            eps: e,
            tau_hat: hit,
            tau_bound,
            verdict,
        });
    }
    Ok(MixingReport {
        times,
        w2,
        rows,
        surrogate_drift: drift,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationReport {
    /// Mean over paths of the fraction of recorded times with Θ(X_t) ≤ R.
    pub fraction: f64,
    pub se: f64,
    /// 1 − C(‖x‖²+1)/R, clamped at 0, for β = 0.
    pub lower_bound: Option<f64>,
    /// C = (‖x‖² + T(c₁+c₂)) / (λ₀T(‖x‖²+1)).
    pub c_estimate: Option<f64>,
}

/// Time-averaged occupation of the sublevel set {Θ ≤ R}.
///
/// For β = 0, Θ ≤ δ₁‖·‖^α_V and the integrated moment bound give
/// (1/T)E∫Θ ≤ (‖x‖² + T(c₁+c₂))/(λ₀T), hence the Markov-type lower bound.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_occupation(
    m: &DriftModel,
    b: &NoiseOperator,
    x: &SpectralField,
    t: f64,
    r: f64,
    spec: &SchemeSpec,
    cs: &ConstantSet,
    n_paths: usize,
    seed: u64,
) -> Result<OccupationReport> {
    if !(r > 0.0) {
        return config_err(format!("R must be positive, got {r}"));
    }
    if n_paths == 0 {
        return Err(Error::InsufficientSamples { need: 1, have: 0 });
    }
    let mut fr = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        let rec = simulate_path(x, m, b, t, spec, RngStream::new(seed, p as u64))?;
        // Skip t = 0 so the average is over (0, T].
        let inside = rec.h_norm[1..].iter().filter(|h| theta(cs, **h) <= r).count();
        fr.push(inside as f64 / (rec.len() - 1) as f64);
    }
    let (fraction, se) = mean_se(&fr);
    let (c_estimate, lower_bound) = if cs.beta == 0.0 {
        let (c1, c2, _) = compute_c123(cs)?;
        let x2 = x.h_norm_sq();
        let c = (x2 + t * (c1 + c2)) / (cs.lambda[0] * t * (x2 + 1.0));
        (Some(c), Some((1.0 - c * (x2 + 1.0) / r).max(0.0)))
    } else {
        (None, None)
    };
    Ok(OccupationReport {
        fraction,
        se: if n_paths > 1 { se } else { f64::NAN },
        lower_bound,
        c_estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrackingEstimate {
    pub frequency: f64,
    /// 95% Wilson interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub paths: usize,
}

/// Fraction of paths with sup over grid times of ‖X_t − u_t‖²_H ≤ ε, where u is
/// the noiseless flow from the same x.
#[allow(clippy::too_many_arguments)]
pub fn stability_vs_deterministic(
    m: &DriftModel,
    b: &NoiseOperator,
    x: &SpectralField,
    t: f64,
    eps: f64,
    spec: &SchemeSpec,
    n_paths: usize,
    seed: u64,
) -> Result<TrackingEstimate> {
    if !(eps > 0.0) {
        return config_err(format!("epsilon must be positive, got {eps}"));
    }
    if n_paths == 0 {
        return Err(Error::InsufficientSamples { need: 1, have: 0 });
    }
    let spec = SchemeSpec {
        snapshot_stride: Some(1),
        record_stride: 1,
        ..spec.clone()
    };
    let det = deterministic_flow(x, m, t, &spec)?;
    let mut hits = 0;
    for p in 0..n_paths {
        let stream = RngStream::new(seed, p as u64);
        let mut u = x.clone();
        let mut ok = true;
        for (k, (_, v)) in det.snapshots.iter().enumerate().skip(1) {
            u = step(&u, m, b, &spec, stream, k - 1)?;
            if u.sub(v)?.h_norm_sq() > eps {
                ok = false;
                break;
            }
        }
        if ok {
            hits += 1;
        }
    }
    let (lo, hi) = wilson_interval(hits, n_paths, Z95);
    Ok(TrackingEstimate {
        frequency: hits as f64 / n_paths as f64,
        ci_low: lo,
        ci_high: hi,
        paths: n_paths,
    })
}
