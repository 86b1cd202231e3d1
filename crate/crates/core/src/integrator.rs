//! Time stepping of the Galerkin system, deterministic flows and
//! synchronously coupled pairs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{config_err, Error, Result};
use crate::noise::{NoiseOperator, RngStream};
use crate::spectral::SpectralField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// Linear part implicit (diagonal), nonlinearity and noise explicit.
    SemiImplicitEuler,
    /// u + dt A(u) / (1 + θ dt ‖A(u)‖_H) + ΔW
    TamedExplicitEuler {
        #[serde(default = "default_taming")]
        taming: f64,
    },
}

fn default_taming() -> f64 {
    1.0
}

fn default_guard() -> f64 {
    1e6
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    pub dt: f64,
    /// Abort once ‖u‖_H exceeds this.
    #[serde(default = "default_guard")]
    pub guard: f64,
    /// Record norms every `record_stride` steps.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Keep full coefficient snapshots every so many steps.
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
}

impl SchemeSpec {
    pub fn semi_implicit(dt: f64) -> Self {
        Self {
            scheme: Scheme::SemiImplicitEuler,
            dt,
            guard: default_guard(),
            record_stride: 1,
            snapshot_stride: None,
        }
    }

    pub fn tamed(dt: f64, taming: f64) -> Self {
        Self {
            scheme: Scheme::TamedExplicitEuler { taming },
            ..Self::semi_implicit(dt)
        }
    }

    pub fn with_snapshots(mut self, stride: usize) -> Self {
        self.snapshot_stride = Some(stride);
        self
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return config_err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.guard > 0.0) {
            return config_err("divergence guard must be positive");
        }
        if self.record_stride == 0 || self.snapshot_stride == Some(0) {
            return config_err("strides must be at least 1");
        }
        if let Scheme::TamedExplicitEuler { taming } = self.scheme {
            if !(taming > 0.0 && taming.is_finite()) {
                return config_err(format!("taming parameter must be positive, got {taming}"));
            }
        }
        Ok(())
    }

    /// Number of steps covering [0, T].
    pub fn steps_for(&self, t: f64) -> Result<usize> {
        self.validate()?;
        if !(t > 0.0 && t.is_finite()) {
            return config_err(format!("horizon must be positive, got {t}"));
        }
        Ok(((t / self.dt).round() as usize).max(1))
    }
}

/// One step together with the discrete Itô energy residual
/// ‖u'‖² − ‖u‖² − 2⟨A(u),u⟩dt − ‖B‖²_HS dt − 2⟨u, BΔW⟩.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: SpectralField,
    pub residual: f64,
}

fn diverged(step: usize, stream: RngStream, detail: impl Into<String>) -> Error {
    Error::Diverged {
        step,
        stream: stream.trajectory,
        detail: detail.into(),
    }
}

pub fn advance(
    u: &SpectralField,
    m: &DriftModel,
    b: &NoiseOperator,
    spec: &SchemeSpec,
    stream: RngStream,
    idx: usize,
) -> Result<StepOutput> {
    let dt = spec.dt;
    let explicit = m.explicit_part(u).map_err(|e| match e {
        Error::Diverged { detail, .. } => diverged(idx, stream, detail),
        other => other,
    })?;
    let mut inc = b.zero_field();
    b.add_increment(dt, stream, idx as u64, &mut inc);
    let uc = u.coeffs();
    let nc = explicit.coeffs();
    let ic = inc.coeffs();
    let mut pair = 0.0;
    let mut out = u.clone();
    match spec.scheme {
        Scheme::SemiImplicitEuler => {
            let oc = out.coeffs_mut();
            for i in 0..uc.len() {
                let rate = m.implicit_rate(i);
                pair += nc[i] * uc[i] - rate * uc[i] * uc[i];
                oc[i] = (uc[i] + dt * nc[i] + ic[i]) / (1.0 + rate * dt);
            }
        }
        Scheme::TamedExplicitEuler { taming } => {
            let a: Vec<f64> = (0..uc.len()).map(|i| nc[i] - m.implicit_rate(i) * uc[i]).collect();
            let an = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = dt / (1.0 + taming * dt * an);
            let oc = out.coeffs_mut();
            for i in 0..uc.len() {
                pair += a[i] * uc[i];
                oc[i] = uc[i] + scale * a[i] + ic[i];
            }
        }
    }
    let hn2 = out.h_norm_sq();
    if !hn2.is_finite() || !out.is_finite() {
        return Err(diverged(idx, stream, "non-finite state"));
    }
    if hn2.sqrt() > spec.guard {
        return Err(diverged(
            idx,
            stream,
            format!("h_norm {:.3e} above guard {:.3e}", hn2.sqrt(), spec.guard),
        ));
    }
    let hs2 = b.hs_norm_h().powi(2);
    let cross: f64 = uc.iter().zip(ic).map(|(x, w)| x * w).sum();
    let residual = hn2 - u.h_norm_sq() - 2.0 * pair * dt - hs2 * dt - 2.0 * cross;
    Ok(StepOutput {
        state: out,
        residual,
    })
}

/// A single step; `idx` selects the noise block of the stream.
pub fn step(
    u: &SpectralField,
    m: &DriftModel,
    b: &NoiseOperator,
    spec: &SchemeSpec,
    stream: RngStream,
    idx: usize,
) -> Result<SpectralField> {
    Ok(advance(u, m, b, spec, stream, idx)?.state)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub h_norm: Vec<f64>,
    pub v_norm: Vec<f64>,
    /// Energy residual of the step ending at each recorded time (0 at t = 0).
    pub residual: Vec<f64>,
    /// (step index, state) pairs.
    pub snapshots: Vec<(usize, SpectralField)>,
    pub dt: f64,
    pub stream: Option<RngStream>,
    pub snapshot_stride: Option<usize>,
}

impl PathRecord {
    fn start(x: &SpectralField, spec: &SchemeSpec, stream: Option<RngStream>) -> Self {
        let mut r = Self {
            times: vec![0.0],
            h_norm: vec![x.h_norm()],
            v_norm: vec![x.v_norm()],
            residual: vec![0.0],
            snapshots: Vec::new(),
            dt: spec.dt,
            stream,
            snapshot_stride: spec.snapshot_stride,
        };
        if spec.snapshot_stride.is_some() {
            r.snapshots.push((0, x.clone()));
        }
        r
    }

    fn push(&mut self, t: f64, u: &SpectralField, residual: f64) {
        self.times.push(t);
        self.h_norm.push(u.h_norm());
        self.v_norm.push(u.v_norm());
        self.residual.push(residual);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// CSV with columns time,h_norm,v_norm,residual; `tag` adds a leading
    /// constant column (used for the config hash).
    pub fn write_csv<W: Write>(&self, w: W, tag: Option<(&str, &str)>) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["time", "h_norm", "v_norm", "residual"];
        if let Some((name, _)) = tag {
            header.insert(0, name);
        }
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                format!("{:.12e}", self.times[i]),
                format!("{:.12e}", self.h_norm[i]),
                format!("{:.12e}", self.v_norm[i]),
                format!("{:.12e}", self.residual[i]),
            ];
            if let Some((_, value)) = tag {
                row.insert(0, value.to_string());
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn check_start(x: &SpectralField, m: &DriftModel, b: &NoiseOperator) -> Result<()> {
    if !x.domain().same_as(m.domain()) || !b.domain().same_as(m.domain()) {
        return Err(Error::DomainMismatch(
            "state, model and noise must share one domain".into(),
        ));
    }
    if x.components() != m.components() {
        return Err(Error::Shape {
            expected: m.components(),
            got: x.components(),
        });
    }
    if !x.is_finite() {
        return config_err("initial state has non-finite coefficients");
    }
    Ok(())
}

pub fn simulate_path(
    x: &SpectralField,
    m: &DriftModel,
    b: &NoiseOperator,
    t: f64,
    spec: &SchemeSpec,
    stream: RngStream,
) -> Result<PathRecord> {
    check_start(x, m, b)?;
    let n = spec.steps_for(t)?;
    let mut rec = PathRecord::start(x, spec, Some(stream));
    let mut u = x.clone();
    for k in 0..n {
        let out = advance(&u, m, b, spec, stream, k)?;
        u = out.state;
        let done = k + 1;
        if done % spec.record_stride == 0 || done == n {
            rec.push(done as f64 * spec.dt, &u, out.residual);
        }
        if let Some(s) = spec.snapshot_stride {
            if done % s == 0 || done == n {
                rec.snapshots.push((done, u.clone()));
            }
        }
    }
    Ok(rec)
}

/// State at time T without recording anything.
pub fn final_state(
    x: &SpectralField,
    m: &DriftModel,
    b: &NoiseOperator,
    t: f64,
    spec: &SchemeSpec,
    stream: RngStream,
) -> Result<SpectralField> {
    check_start(x, m, b)?;
    let n = spec.steps_for(t)?;
    let mut u = x.clone();
    for k in 0..n {
        u = step(&u, m, b, spec, stream, k)?;
    }
    Ok(u)
}

#[derive(Clone, Debug)]
pub struct CoupledRecord {
    pub x: PathRecord,
    pub y: PathRecord,
    /// h_norm and v_norm of X^x − X^y; the residual column is unused (0).
    pub difference: PathRecord,
}

/// Two solutions driven by the same increments.
pub fn simulate_coupled(
    x: &SpectralField,
    y: &SpectralField,
    m: &DriftModel,
    b: &NoiseOperator,
    t: f64,
    spec: &SchemeSpec,
    stream: RngStream,
) -> Result<CoupledRecord> {
    check_start(x, m, b)?;
    check_start(y, m, b)?;
    let n = spec.steps_for(t)?;
    let mut rx = PathRecord::start(x, spec, Some(stream));
    let mut ry = PathRecord::start(y, spec, Some(stream));
    let d0 = x.sub(y)?;
    let mut rd = PathRecord::start(&d0, spec, Some(stream));
    rd.snapshots.clear();
    let (mut u, mut v) = (x.clone(), y.clone());
    for k in 0..n {
        let ox = advance(&u, m, b, spec, stream, k)?;
        let oy = advance(&v, m, b, spec, stream, k)?;
        u = ox.state;
        v = oy.state;
        let done = k + 1;
        if done % spec.record_stride == 0 || done == n {
            let time = done as f64 * spec.dt;
            rx.push(time, &u, ox.residual);
            ry.push(time, &v, oy.residual);
            rd.push(time, &u.sub(&v)?, 0.0);
        }
        if let Some(s) = spec.snapshot_stride {
            if done % s == 0 || done == n {
                rx.snapshots.push((done, u.clone()));
                ry.snapshots.push((done, v.clone()));
            }
        }
    }
    Ok(CoupledRecord {
        x: rx,
        y: ry,
        difference: rd,
    })
}

/// du/dt = A(u): the path with B = 0.
pub fn deterministic_flow(
    x: &SpectralField,
    m: &DriftModel,
    t: f64,
    spec: &SchemeSpec,
) -> Result<PathRecord> {
    let zero = crate::noise::build_noise(m.domain(), m.field_kind(), &crate::noise::NoiseProfile::Zero)?;
    let mut rec = simulate_path(x, m, &zero, t, spec, RngStream::new(0, 0))?;
    rec.stream = None;
    Ok(rec)
}

/// Recomputes the per-step energy residuals from stored snapshots, regenerating
/// the increments from the recorded stream. Needs snapshots at every step.
pub fn energy_identity_residual(
    path: &PathRecord,
    m: &DriftModel,
    b: &NoiseOperator,
) -> Result<Vec<f64>> {
    if path.snapshot_stride != Some(1) || path.snapshots.len() < 2 {
        return Err(Error::NotConfigured(
            "energy residual needs snapshots at every step (snapshot_stride = 1)".into(),
        ));
    }
    let stream = path.stream.unwrap_or(RngStream::new(0, 0));
    let dt = path.dt;
    let hs2 = b.hs_norm_h().powi(2);
    let mut out = Vec::with_capacity(path.snapshots.len() - 1);
    for w in path.snapshots.windows(2) {
        let (k, u) = (&w[0].0, &w[0].1);
        let next = &w[1].1;
        let a = crate::drift::apply_drift(m, u)?;
        let mut inc = b.zero_field();
        if path.stream.is_some() {
            b.add_increment(dt, stream, *k as u64, &mut inc);
        }
        let r = next.h_norm_sq() - u.h_norm_sq() - 2.0 * a.inner(u)? * dt - hs2 * dt - 2.0 * u.inner(&inc)?;
        out.push(r);
    }
    Ok(out)
}

/// Outcome of one horizon in a step-size sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityPoint {
    pub dt: f64,
    pub stable: bool,
    pub max_h_norm: f64,
}

/// Runs the same stream at each dt and reports which stay below the guard.
/// `dt_guard` of the sweep is the largest dt such that it and every smaller
/// swept dt are stable.
pub fn stability_sweep(
    x: &SpectralField,
    m: &DriftModel,
    b: &NoiseOperator,
    t: f64,
    dts: &[f64],
    base: &SchemeSpec,
    stream: RngStream,
) -> Result<(Vec<StabilityPoint>, Option<f64>)> {
    let mut pts = Vec::new();
    for &dt in dts {
        let spec = SchemeSpec {
            dt,
            snapshot_stride: None,
            ..base.clone()
        };
        let p = match simulate_path(x, m, b, t, &spec, stream) {
            Ok(rec) => StabilityPoint {
                dt,
                stable: true,
                max_h_norm: rec.h_norm.iter().copied().fold(0.0, f64::max),
            },
            Err(Error::Diverged { .. }) => StabilityPoint {
                dt,
                stable: false,
                max_h_norm: f64::INFINITY,
            },
            Err(e) => return Err(e),
        };
        pts.push(p);
    }
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.dt.total_cmp(&b.dt));
    let mut guard = None;
    for p in &sorted {
        if p.stable {
            guard = Some(p.dt);
        } else {
            break;
        }
    }
    Ok((pts, guard))
}
