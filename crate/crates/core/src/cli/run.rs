//! Experiment execution and run-directory output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{CurveName, ExperimentBlock, Resolved};
use super::svg::{Plot, Series};
use crate::checker::{check_ergodicity, check_mixing, convexity_probe, deterministic_decay_bound, invariant_moment_bound, mixing_time_bound};
use crate::drift::ModelKind;
use crate::error::Result;
use crate::integrator::{deterministic_flow, simulate_path, SchemeSpec};
use crate::lab::*;
use crate::noise::{small_ball_frequency, RngStream};
use crate::spectral::BASIS_TAG;

pub const HASH_COLUMN: &str = "config_hash";

#[derive(Debug, Serialize)]
pub struct Seeds {
    pub seed: u64,
    /// Trajectory streams are (seed, i) for i in 0..streams.
    pub streams: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub basis_tag: String,
    pub experiment: String,
    pub seeds: Seeds,
    pub workers: Option<usize>,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<String>,
    pub verdict: Verdict,
    pub exit_code: i32,
    /// Resolved (λ₀, λ₁, λ₂, λ₃) and γ.
    pub lambda: [f64; 4],
    pub gamma: Option<f64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// Human-readable summary, one line per certificate.
    pub lines: Vec<String>,
}

pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 2,
    }
}

struct RunDir {
    path: PathBuf,
    hash: String,
    artifacts: Vec<String>,
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

impl RunDir {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path.join(name))?;
        let mut h = vec![HASH_COLUMN];
        h.extend_from_slice(header);
        w.write_record(&h)?;
        for r in rows {
            let mut rec = vec![self.hash.clone()];
            rec.extend(r.iter().cloned());
            w.write_record(&rec)?;
        }
        w.flush()?;
        self.artifacts.push(name.into());
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: &Plot) -> Result<()> {
        fs::write(self.path.join(name), plot.render())?;
        self.artifacts.push(name.into());
        Ok(())
    }
}

fn linspace(t: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| t * i as f64 / (n - 1) as f64).collect()
}

fn pass_str(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

/// Runs the configured experiment and writes the run directory.
pub fn run(r: &Resolved, out: &Path, workers: Option<usize>) -> Result<RunOutcome> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let hash = r.config.hash();
    let mut dir = RunDir {
        path: out.to_path_buf(),
        hash: hash.clone(),
        artifacts: Vec::new(),
    };
    fs::write(out.join("config.toml"), r.config.to_toml())?;
    dir.artifacts.push("config.toml".into());
    let mut lines = Vec::new();
    let seed = r.config.seed;
    let (verdict, streams) = match &r.config.experiment {
        ExperimentBlock::Check { eps } => (check(r, eps, &mut dir, &mut lines)?, 0),
        ExperimentBlock::Simulate { t } => {
            let rec = simulate_path(&r.x, &r.model, &r.noise, *t, &r.spec, RngStream::new(seed, 0))?;
            let f = fs::File::create(out.join("path.csv"))?;
            rec.write_csv(f, Some((HASH_COLUMN, &hash)))?;
            dir.artifacts.push("path.csv".into());
            dir.svg(
                "path.svg",
                &Plot {
                    title: "trajectory norms".into(),
                    xlabel: "t".into(),
                    ylabel: "norm".into(),
                    series: vec![
                        Series::new("|X_t|_H", rec.times.clone(), rec.h_norm.clone()),
                        Series::new("|X_t|_V", rec.times.clone(), rec.v_norm.clone()),
                    ],
                },
            )?;
            lines.push(format!("simulate: {} records to t = {}", rec.len(), rec.final_time()));
            (Verdict::Pass, 1)
        }
        ExperimentBlock::Couple { t, y } => {
            let yv = r.initial(y);
            let c = contraction_certificate(&r.model, &r.noise, &r.x, &yv, *t, &r.spec, seed)?;
            let t0 = c.times[0];
            let l0 = c.log_diff_sq[0];
            let line: Vec<f64> = c.times.iter().map(|s| l0 + c.predicted_rate * (s - t0)).collect();
            let rows: Vec<Vec<String>> = c
                .times
                .iter()
                .zip(&c.log_diff_sq)
                .zip(&line)
                .map(|((a, b), p)| vec![num(*a), num(*b), num(*p)])
                .collect();
            dir.csv("contraction.csv", &["t", "log_diff_sq", "predicted_line"], &rows)?;
            dir.csv(
                "contraction_summary.csv",
                &["fitted_rate", "fit_error", "predicted_rate", "continuum_rate", "points", "verdict"],
                &[vec![
                    num(c.fitted_rate),
                    num(c.fit_error),
                    num(c.predicted_rate),
                    num(c.continuum_rate),
                    c.points.to_string(),
                    pass_str(c.pass),
                ]],
            )?;
            dir.svg(
                "contraction.svg",
                &Plot {
                    title: "synchronous coupling".into(),
                    xlabel: "t".into(),
                    ylabel: "log |X^x - X^y|^2".into(),
                    series: vec![
                        Series::new("fitted data", c.times.clone(), c.log_diff_sq.clone()),
                        Series::new("predicted slope", c.times.clone(), line).dashed(),
                    ],
                },
            )?;
            lines.push(format!(
                "contraction: fitted {:.6} ± {:.2e}, predicted {:.6} -> {}",
                c.fitted_rate,
                c.fit_error,
                c.predicted_rate,
                pass_str(c.pass)
            ));
            (Verdict::from_bool(c.pass), 1)
        }
        ExperimentBlock::Moments {
            t,
            paths,
            checkpoints,
            exp_moment,
            bootstrap,
            occupation_r,
        } => (
            moments(r, *t, *paths, *checkpoints, *exp_moment, *bootstrap, *occupation_r, workers, &mut dir, &mut lines)?,
            *paths as u64,
        ),
        ExperimentBlock::Mixing { .. } => mixing(r, workers, &mut dir, &mut lines)?,
        ExperimentBlock::Decay { t, tolerance } => (decay(r, *t, *tolerance, &mut dir, &mut lines)?, 0),
        ExperimentBlock::Smallball { t, delta, eps, paths } => {
            let sb = small_ball_frequency(&r.noise, *delta, *t, r.spec.dt, *paths, seed)?;
            let tr = stability_vs_deterministic(&r.model, &r.noise, &r.x, *t, *eps, &r.spec, *paths, seed)?;
            dir.csv(
                "smallball.csv",
                &["quantity", "threshold", "frequency", "ci_low", "ci_high", "paths"],
                &[
                    vec!["sup |BW_t|_V <= delta".into(), num(*delta), num(sb.probability), num(sb.ci_low), num(sb.ci_high), sb.paths.to_string()],
                    vec!["sup |X_t - u_t|_H^2 <= eps".into(), num(*eps), num(tr.frequency), num(tr.ci_low), num(tr.ci_high), tr.paths.to_string()],
                ],
            )?;
            let ok = sb.ci_low > 0.0 && tr.ci_low > 0.0;
            lines.push(format!(
                "small ball: {:.4} [{:.4}, {:.4}]; tracking: {:.4} [{:.4}, {:.4}] -> {}",
                sb.probability,
                sb.ci_low,
                sb.ci_high,
                tr.frequency,
                tr.ci_low,
                tr.ci_high,
                pass_str(ok)
            ));
            (Verdict::from_bool(ok), *paths as u64)
        }
        ExperimentBlock::Convexity { alphas, betas, samples } => {
            let mut rows = Vec::new();
            let mut all = true;
            for &a in alphas {
                for &b in betas {
                    let c = convexity_probe(a, b, *samples, seed)?;
                    all &= c.pass;
                    lines.push(format!(
                        "convexity alpha={a} beta={b}: {} violations of {} -> {}",
                        c.violations,
                        c.samples,
                        pass_str(c.pass)
                    ));
                    rows.push(vec![
                        num(a),
                        num(b),
                        c.samples.to_string(),
                        c.violations.to_string(),
                        num(c.worst_relative),
                        c.hessian_violations.to_string(),
                        pass_str(c.pass),
                    ]);
                }
            }
            dir.csv(
                "convexity.csv",
                &["alpha", "beta", "samples", "violations", "worst_relative", "hessian_violations", "verdict"],
                &rows,
            )?;
            (Verdict::from_bool(all), 0)
        }
    };
    dir.artifacts.push("manifest.json".into());
    let manifest = RunManifest {
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        basis_tag: BASIS_TAG.into(),
        experiment: r.config.experiment.name().into(),
        seeds: Seeds { seed, streams },
        workers,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        artifacts: dir.artifacts.clone(),
        verdict,
        exit_code: exit_code(verdict),
        lambda: r.constants.lambda,
        gamma: r.constants.gamma,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out.join("manifest.json"), json + "\n")?;
    Ok(RunOutcome {
        verdict,
        dir: out.to_path_buf(),
        manifest,
        lines,
    })
}

fn check(r: &Resolved, eps: &[f64], dir: &mut RunDir, lines: &mut Vec<String>) -> Result<Verdict> {
    let cs = &r.constants;
    let rep = check_ergodicity(cs)?;
    let mut rows: Vec<(String, f64, f64, bool)> = vec![(
        "2(c1+c2+c3)C2/(lambda0 delta1 (beta+2)) <= delta2".into(),
        rep.ratio,
        rep.delta2,
        rep.ratio <= rep.delta2,
    )];
    if let Some(b) = &rep.borderline {
        rows.push(("|B|^2 <= lambda3 delta1 c0^alpha / alpha".into(), b.lhs, b.rhs, b.pass));
    }
    if cs.gamma.is_some() {
        let m = check_mixing(cs)?;
        let g = cs.gamma.unwrap_or(0.0);
        rows.push(("ratio <= delta2 - gamma".into(), m.ratio, m.delta2 - g, m.mixing_pass == Some(true)));
    }
    let b2 = r.noise.hs_norm_h().powi(2);
    let c0 = cs.c0;
    match r.model.kind() {
        ModelKind::Heat { nu } => {
            let rhs = cs.lambda[3] * nu * c0 * c0;
            rows.push(("|B|^2 <= lambda nu c0^2".into(), b2, rhs, b2 <= rhs));
        }
        ModelKind::NavierStokes2D { nu } => {
            let l = cs.lambda[0];
            let rhs = 0.25 * l * nu.powi(3) * c0 * c0;
            rows.push(("|B|^2 <= lambda nu^3 c0^2 / 4".into(), b2, rhs, b2 <= rhs));
            let rhs = (1.0 - l) * nu * c0 * c0;
            rows.push(("|B|^2 <= (1 - lambda) nu c0^2".into(), b2, rhs, b2 <= rhs));
            if let Some(g) = cs.gamma {
                let rhs = 0.25 * l * (nu.powi(3) * c0 * c0 - nu * nu * g);
                rows.push(("|B|^2 <= lambda (nu^3 c0^2 - nu^2 gamma) / 4".into(), b2, rhs, b2 <= rhs));
            }
        }
        _ => {}
    }
    for (name, ok) in &r.model.constants().side_conditions {
        rows.push((format!("side condition: {name}"), f64::NAN, f64::NAN, *ok));
    }
    let all = rows.iter().all(|r| r.3);
    for (name, lhs, rhs, ok) in &rows {
        lines.push(format!("{name}: {lhs:.6e} vs {rhs:.6e} -> {}", pass_str(*ok)));
    }
    let table: Vec<Vec<String>> = rows.iter().map(|(n, l, h, ok)| vec![n.clone(), num(*l), num(*h), pass_str(*ok)]).collect();
    dir.csv("report.csv", &["inequality", "lhs", "rhs", "verdict"], &table)?;
    dir.csv(
        "constants.csv",
        &["c1", "c2", "c3", "ratio", "delta2", "lambda0", "lambda1", "lambda2", "lambda3", "gamma"],
        &[vec![
            num(rep.c1),
            num(rep.c2),
            num(rep.c3),
            num(rep.ratio),
            num(rep.delta2),
            num(cs.lambda[0]),
            num(cs.lambda[1]),
            num(cs.lambda[2]),
            num(cs.lambda[3]),
            opt(cs.gamma),
        ]],
    )?;
    if rep.ergodicity_pass {
        let mb = invariant_moment_bound(cs)?;
        dir.csv(
            "moment_bounds.csv",
            &["moment_alpha_beta", "moment_1", "v_moment_alpha"],
            &[vec![num(mb.moment_alpha_beta), num(mb.moment_1), opt(mb.v_moment_alpha)]],
        )?;
        let xn = r.x.h_norm();
        let mut bounds = Vec::new();
        for &e in eps {
            let b = mixing_time_bound(cs, xn, e, r.bound_form()).ok();
            bounds.push(vec![num(e), opt(b)]);
        }
        dir.csv("mixing_bounds.csv", &["eps", "tau_bound"], &bounds)?;
    }
    Ok(Verdict::from_bool(all))
}

#[allow(clippy::too_many_arguments)]
fn moments(
    r: &Resolved,
    t: f64,
    paths: usize,
    n_cp: usize,
    exp: bool,
    reps: usize,
    occ: Option<f64>,
    workers: Option<usize>,
    dir: &mut RunDir,
    lines: &mut Vec<String>,
) -> Result<Verdict> {
    let opts = EnsembleOptions {
        checkpoints: linspace(t, n_cp),
        keep_samples: false,
        workers,
    };
    let seed = r.config.seed;
    let stats = run_ensemble(&r.model, &r.noise, &r.x, &r.spec, paths, seed, &opts)?;
    let mc = moment_certificate(&stats, &r.constants)?;
    let rows: Vec<Vec<String>> = mc.rows.iter().map(|m| vec![num(m.t), num(m.lhs), num(m.lhs_se), num(m.rhs), pass_str(m.pass)]).collect();
    dir.csv("moments.csv", &["t", "lhs", "lhs_se", "rhs", "verdict"], &rows)?;
    let ts: Vec<f64> = mc.rows.iter().map(|m| m.t).collect();
    dir.svg(
        "moments.svg",
        &Plot {
            title: "integrated moment inequality".into(),
            xlabel: "t".into(),
            ylabel: "value".into(),
            series: vec![
                Series::new("lhs", ts.clone(), mc.rows.iter().map(|m| m.lhs).collect()),
                Series::new("bound", ts, mc.rows.iter().map(|m| m.rhs).collect()).dashed(),
            ],
        },
    )?;
    lines.push(format!("moment certificate ({} checkpoints, {paths} paths) -> {}", mc.rows.len(), pass_str(mc.pass)));
    let mut v = Verdict::from_bool(mc.pass);
    if exp {
        let ec = exp_moment_certificate(&stats, &r.constants, reps, seed)?;
        let rows: Vec<Vec<String>> = ec
            .rows
            .iter()
            .map(|e| vec![num(e.t), num(e.ratio), num(e.half_width), num(e.bound), format!("{:?}", e.verdict).to_lowercase()])
            .collect();
        dir.csv("exp_moments.csv", &["t", "ratio", "half_width", "bound", "verdict"], &rows)?;
        lines.push(format!("exponential moment certificate -> {:?}", ec.verdict));
        v = v.combine(ec.verdict);
    }
    if let Some(rr) = occ {
        let o = lyapunov_occupation(&r.model, &r.noise, &r.x, t, rr, &r.spec, &r.constants, paths, seed)?;
        let ok = o.lower_bound.map_or(true, |lb| lb <= o.fraction + 3.0 * o.se.max(0.0));
        dir.csv(
            "occupation.csv",
            &["r", "fraction", "se", "lower_bound", "c_estimate", "verdict"],
            &[vec![num(rr), num(o.fraction), num(o.se), opt(o.lower_bound), opt(o.c_estimate), pass_str(ok)]],
        )?;
        lines.push(format!("occupation of {{Theta <= {rr}}}: {:.4} (lower bound {:?}) -> {}", o.fraction, o.lower_bound, pass_str(ok)));
        v = v.combine(Verdict::from_bool(ok));
    }
    Ok(v)
}

fn mixing(r: &Resolved, workers: Option<usize>, dir: &mut RunDir, lines: &mut Vec<String>) -> Result<(Verdict, u64)> {
    let ExperimentBlock::Mixing {
        t,
        eps,
        curve,
        checkpoints,
        paths,
        projections,
        surrogate_samples,
        burn_in,
        spacing,
    } = &r.config.experiment
    else {
        unreachable!("dispatched on kind")
    };
    let heat = matches!(r.model.kind(), ModelKind::Heat { .. });
    let use_oracle = match curve {
        Some(CurveName::Oracle) => true,
        Some(CurveName::Empirical) => false,
        None => heat,
    };
    let seed = r.config.seed;
    let curve = if use_oracle {
        MixingCurve::HeatOracle
    } else {
        let burn = burn_in.unwrap_or_else(|| r.constants.gamma.map_or(0.5 * t, |g| 5.0 * 2.0 / g));
        MixingCurve::Empirical {
            paths: *paths,
            method: W2Method::Sliced {
                n_proj: *projections,
                seed,
            },
            surrogate_samples: *surrogate_samples,
            burn_in: burn,
            spacing: *spacing,
        }
    };
    let setup = MixingSetup {
        model: &r.model,
        noise: &r.noise,
        x: &r.x,
        spec: &r.spec,
        constants: &r.constants,
        form: r.bound_form(),
        checkpoints: linspace(*t, *checkpoints),
        seed,
        workers,
    };
    let rep = empirical_mixing_time(&setup, eps, &curve)?;
    let rows: Vec<Vec<String>> = rep.times.iter().zip(&rep.w2).map(|(a, b)| vec![num(*a), num(*b)]).collect();
    dir.csv("w2.csv", &["t", "w2"], &rows)?;
    let mut v = Verdict::Pass;
    let mut table = Vec::new();
    let mut series = vec![Series::new(
        if use_oracle { "W2 (oracle)" } else { "W2 (sliced)" },
        rep.times.clone(),
        rep.w2.clone(),
    )];
    let ymax = rep.w2.iter().copied().fold(0.0, f64::max);
    for row in &rep.rows {
        v = v.combine(row.verdict);
        table.push(vec![num(row.eps), opt(row.tau_hat), num(row.tau_bound), format!("{:?}", row.verdict).to_lowercase()]);
        lines.push(format!("eps = {}: tau_hat {:?}, bound {:.6} -> {:?}", row.eps, row.tau_hat, row.tau_bound, row.verdict));
        if row.tau_bound <= *t {
            series.push(Series::new(format!("bound eps={}", row.eps), vec![row.tau_bound, row.tau_bound], vec![0.0, ymax]).dashed());
        }
    }
    dir.csv("mixing.csv", &["eps", "tau_hat", "tau_bound", "verdict"], &table)?;
    if let Some((a, b)) = rep.surrogate_drift {
        dir.csv("surrogate.csv", &["first_half_mean", "second_half_mean"], &[vec![num(a), num(b)]])?;
    }
    dir.svg(
        "w2.svg",
        &Plot {
            title: "distance to the invariant law".into(),
            xlabel: "t".into(),
            ylabel: "W2".into(),
            series,
        },
    )?;
    let streams = if use_oracle { 0 } else { *paths as u64 };
    Ok((v, streams))
}

fn decay(r: &Resolved, t: f64, tol: f64, dir: &mut RunDir, lines: &mut Vec<String>) -> Result<Verdict> {
    let k = &r.constants;
    let xn = r.x.h_norm();
    let mut residuals = Vec::new();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (i, dt) in [r.spec.dt, 0.5 * r.spec.dt].into_iter().enumerate() {
        let spec = SchemeSpec {
            dt,
            record_stride: r.spec.record_stride << i,
            ..r.spec.clone()
        };
        let rec = deterministic_flow(&r.x, &r.model, t, &spec)?;
        let mut worst: f64 = 0.0;
        let mut hs = Vec::new();
        let mut bs = Vec::new();
        for (s, h) in rec.times.iter().zip(&rec.h_norm) {
            let b = deterministic_decay_bound(xn, k.alpha, k.c0, k.delta1, *s);
            worst = worst.max(h * h - b);
            rows.push(vec![num(dt), num(*s), num(h * h), num(b)]);
            hs.push(h * h);
            bs.push(b);
        }
        series.push(Series::new(format!("|u_t|^2, dt={dt}"), rec.times.clone(), hs));
        if i == 0 {
            series.push(Series::new("comparison bound", rec.times.clone(), bs).dashed());
        }
        residuals.push(worst);
    }
    dir.csv("decay.csv", &["dt", "t", "h_norm_sq", "bound"], &rows)?;
    dir.csv(
        "decay_summary.csv",
        &["dt", "max_excess"],
        &[vec![num(r.spec.dt), num(residuals[0])], vec![num(0.5 * r.spec.dt), num(residuals[1])]],
    )?;
    dir.svg(
        "decay.svg",
        &Plot {
            title: "noiseless decay".into(),
            xlabel: "t".into(),
            ylabel: "|u_t|_H^2".into(),
            series,
        },
    )?;
    let ok = residuals[1] <= residuals[0] && residuals[1] <= tol;
    lines.push(format!(
        "decay: max excess {:.3e} at dt, {:.3e} at dt/2 (tolerance {tol:.1e}) -> {}",
        residuals[0],
        residuals[1],
        pass_str(ok)
    ));
    Ok(Verdict::from_bool(ok))
}
