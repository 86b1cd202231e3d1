//! Experiment configuration: TOML text with named sections, validated into
//! ready-to-run objects.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checker::{default_lambdas, BoundForm, ConstantSet, HypothesisReport};
use crate::drift::{DriftModel, FSpec, GSpec, ModelKind, Overrides};
use crate::error::{Error, Result};
use crate::integrator::{Scheme, SchemeSpec};
use crate::noise::{build_noise, NoiseOperator, NoiseProfile};
use crate::spectral::{build_domain, random_field, solenoidal_direction, Boundary, Domain, FieldKind, Geometry, SpectralField};

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Run directory; the command line takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Record norms every this many steps.
    #[serde(default = "one")]
    pub checkpoint_stride: usize,
    pub domain: DomainBlock,
    pub model: ModelBlock,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default = "zero_noise")]
    pub noise: NoiseProfile,
    pub scheme: SchemeBlock,
    #[serde(default)]
    pub constants: ConstantsBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    pub experiment: ExperimentBlock,
}

fn zero_noise() -> NoiseProfile {
    NoiseProfile::Zero
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryName {
    #[serde(rename = "interval")]
    Interval,
    #[serde(rename = "rectangle")]
    Rectangle,
    #[serde(rename = "torus_1")]
    Torus1,
    #[serde(rename = "torus_2")]
    Torus2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub geometry: GeometryName,
    /// Interval length.
    #[serde(default = "unit")]
    pub length: f64,
    #[serde(default = "unit")]
    pub lx: f64,
    #[serde(default = "unit")]
    pub ly: f64,
    /// Truncation N (per axis in two dimensions).
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelBlock {
    Heat {
        nu: f64,
    },
    /// Semilinear model with f(x) = x and g = 0.
    Burgers {
        nu: f64,
    },
    Semilinear {
        nu: f64,
        f: FSpec,
        g: GSpec,
    },
    #[serde(rename = "navier_stokes_2d")]
    NavierStokes2D {
        nu: f64,
    },
    PowerLaw {
        nu: f64,
        p: f64,
        #[serde(default = "two")]
        dim: usize,
    },
}

fn two() -> usize {
    2
}

impl ModelBlock {
    pub fn kind(&self) -> ModelKind {
        match self.clone() {
            ModelBlock::Heat { nu } => ModelKind::Heat { nu },
            ModelBlock::Burgers { nu } => ModelKind::Semilinear {
                nu,
                f: FSpec::Burgers,
                g: GSpec::Zero,
            },
            ModelBlock::Semilinear { nu, f, g } => ModelKind::Semilinear { nu, f, g },
            ModelBlock::NavierStokes2D { nu } => ModelKind::NavierStokes2D { nu },
            ModelBlock::PowerLaw { nu, p, dim } => ModelKind::PowerLawFluid { nu, p, dim },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    SemiImplicit,
    Tamed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeBlock {
    #[serde(default = "semi")]
    pub kind: SchemeName,
    pub dt: f64,
    #[serde(default = "unit")]
    pub taming: f64,
    #[serde(default = "guard")]
    pub guard: f64,
}

fn semi() -> SchemeName {
    SchemeName::SemiImplicit
}

fn guard() -> f64 {
    1e6
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsBlock {
    /// (λ₀, λ₁, λ₂, λ₃); chosen by the checker when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<[f64; 4]>,
    /// Mixing rate γ; 0.99(δ₂ − ratio) when absent and positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialBlock {
    Zero,
    /// Amplitude on one basis mode; solenoidal fields point along k⊥/|k|.
    Mode { mode: usize, amplitude: f64 },
    Random { scale: f64, decay: f64, seed: u64 },
}

impl Default for InitialBlock {
    fn default() -> Self {
        InitialBlock::Mode {
            mode: 0,
            amplitude: 1.0,
        }
    }
}

fn eps_default() -> Vec<f64> {
    vec![0.1, 0.03, 0.01]
}

fn paths_default() -> usize {
    1000
}

fn five() -> usize {
    5
}

fn two_hundred() -> usize {
    200
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveName {
    /// Closed-form laws; heat only.
    Oracle,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentBlock {
    Check {
        #[serde(default = "eps_default")]
        eps: Vec<f64>,
    },
    Simulate {
        t: f64,
    },
    Couple {
        t: f64,
        #[serde(default = "initial_zero")]
        y: InitialBlock,
    },
    Moments {
        t: f64,
        #[serde(default = "paths_default")]
        paths: usize,
        /// Evenly spaced checkpoints on [0, T], endpoints included.
        #[serde(default = "five")]
        checkpoints: usize,
        #[serde(default)]
        exp_moment: bool,
        #[serde(default = "two_hundred")]
        bootstrap: usize,
        /// Sublevel R for the occupation report.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        occupation_r: Option<f64>,
    },
    Mixing {
        t: f64,
        #[serde(default = "eps_default")]
        eps: Vec<f64>,
        /// Oracle for heat, empirical otherwise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        curve: Option<CurveName>,
        #[serde(default = "two_hundred")]
        checkpoints: usize,
        #[serde(default = "paths_default")]
        paths: usize,
        #[serde(default = "projections")]
        projections: usize,
        #[serde(default = "paths_default")]
        surrogate_samples: usize,
        /// Defaults to 5 · 2/γ, or T/2 without γ.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burn_in: Option<f64>,
        #[serde(default = "spacing")]
        spacing: f64,
    },
    Decay {
        t: f64,
        /// Largest accepted positive excess over the comparison bound.
        #[serde(default = "decay_tol")]
        tolerance: f64,
    },
    Smallball {
        t: f64,
        delta: f64,
        eps: f64,
        #[serde(default = "paths_default")]
        paths: usize,
    },
    Convexity {
        #[serde(default = "alphas")]
        alphas: Vec<f64>,
        #[serde(default = "betas")]
        betas: Vec<f64>,
        #[serde(default = "convexity_samples")]
        samples: usize,
    },
}

fn initial_zero() -> InitialBlock {
    InitialBlock::Zero
}

fn projections() -> usize {
    64
}

fn spacing() -> f64 {
    0.05
}

fn decay_tol() -> f64 {
    1e-3
}

fn alphas() -> Vec<f64> {
    vec![2.0, 3.0, 4.0]
}

fn betas() -> Vec<f64> {
    vec![0.0, 1.0, 2.0]
}

fn convexity_samples() -> usize {
    100_000
}

impl ExperimentBlock {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentBlock::Check { .. } => "check",
            ExperimentBlock::Simulate { .. } => "simulate",
            ExperimentBlock::Couple { .. } => "couple",
            ExperimentBlock::Moments { .. } => "moments",
            ExperimentBlock::Mixing { .. } => "mixing",
            ExperimentBlock::Decay { .. } => "decay",
            ExperimentBlock::Smallball { .. } => "smallball",
            ExperimentBlock::Convexity { .. } => "convexity",
        }
    }

    /// Semantic problems with the experiment parameters.
    fn problems(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut pos = |name: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("[experiment] {name} must be positive, got {x}"));
            }
        };
        match self {
            ExperimentBlock::Check { eps } => eps.iter().for_each(|e| pos("eps", *e)),
            ExperimentBlock::Simulate { t } | ExperimentBlock::Couple { t, .. } | ExperimentBlock::Decay { t, .. } => pos("t", *t),
            ExperimentBlock::Moments { t, occupation_r, .. } => {
                pos("t", *t);
                if let Some(r) = occupation_r {
                    pos("occupation_r", *r);
                }
            }
            ExperimentBlock::Mixing { t, eps, spacing, burn_in, .. } => {
                pos("t", *t);
                pos("spacing", *spacing);
                eps.iter().for_each(|e| pos("eps", *e));
                if let Some(b) = burn_in {
                    if !(*b >= 0.0) {
                        v.push(format!("[experiment] burn_in must be nonnegative, got {b}"));
                    }
                }
            }
            ExperimentBlock::Smallball { t, delta, eps, .. } => {
                pos("t", *t);
                pos("delta", *delta);
                pos("eps", *eps);
            }
            ExperimentBlock::Convexity { .. } => {}
        }
        let counts: Vec<(&str, usize, usize)> = match self {
            ExperimentBlock::Moments { paths, checkpoints, .. } => vec![("paths", *paths, 2), ("checkpoints", *checkpoints, 2)],
            ExperimentBlock::Mixing {
                checkpoints,
                paths,
                projections,
                surrogate_samples,
                ..
            } => vec![
                ("checkpoints", *checkpoints, 2),
                ("paths", *paths, 2),
                ("projections", *projections, 1),
                ("surrogate_samples", *surrogate_samples, 2),
            ],
            ExperimentBlock::Smallball { paths, .. } => vec![("paths", *paths, 1)],
            ExperimentBlock::Convexity { samples, .. } => vec![("samples", *samples, 1)],
            _ => vec![],
        };
        for (name, n, min) in counts {
            if n < min {
                v.push(format!("[experiment] {name} must be at least {min}, got {n}"));
            }
        }
        if let ExperimentBlock::Mixing { eps, .. } | ExperimentBlock::Check { eps } = self {
            if eps.is_empty() {
                v.push("[experiment] eps list is empty".into());
            }
        }
        v
    }
}

impl ExperimentConfig {
    /// SHA-256 over the canonical JSON of the config without the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn scheme_spec(&self) -> SchemeSpec {
        let scheme = match self.scheme.kind {
            SchemeName::SemiImplicit => Scheme::SemiImplicitEuler,
            SchemeName::Tamed => Scheme::TamedExplicitEuler { taming: self.scheme.taming },
        };
        SchemeSpec {
            scheme,
            dt: self.scheme.dt,
            guard: self.scheme.guard,
            record_stride: self.checkpoint_stride,
            snapshot_stride: None,
        }
    }
}

/// Parses TOML text. Syntax and shape errors carry line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| {
        let pos = e.span().map(|s| line_col(text, s.start));
        Error::Config(match pos {
            Some((l, c)) => format!("line {l}, column {c}: {}", e.message()),
            None => e.message().to_string(),
        })
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

/// Everything an experiment needs, built from a validated config.
#[derive(Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub domain: Domain,
    pub model: DriftModel,
    pub noise: NoiseOperator,
    pub spec: SchemeSpec,
    pub constants: ConstantSet,
    pub x: SpectralField,
}

impl Resolved {
    pub fn bound_form(&self) -> BoundForm {
        match self.model.kind() {
            ModelKind::Heat { nu } => BoundForm::Heat { nu: *nu },
            ModelKind::NavierStokes2D { nu } => BoundForm::NavierStokes { nu: *nu },
            _ => BoundForm::General,
        }
    }

    pub fn initial(&self, b: &InitialBlock) -> SpectralField {
        initial_field(&self.model, b).expect("validated")
    }
}

fn initial_field(m: &DriftModel, b: &InitialBlock) -> std::result::Result<SpectralField, String> {
    let mut u = m.zero_field();
    match *b {
        InitialBlock::Zero => {}
        InitialBlock::Mode { mode, amplitude } => {
            let n = m.domain().n_modes();
            if mode >= n {
                return Err(format!("[initial] mode {mode} out of range (truncation has {n} modes)"));
            }
            if !amplitude.is_finite() {
                return Err(format!("[initial] amplitude must be finite, got {amplitude}"));
            }
            if m.field_kind() == FieldKind::Solenoidal && u.components() == 2 {
                let d = solenoidal_direction(m.domain().mode(mode).wavevector);
                u.coeffs_mut()[mode] = amplitude * d[0];
                u.coeffs_mut()[n + mode] = amplitude * d[1];
            } else {
                u.coeffs_mut()[mode] = amplitude;
            }
        }
        InitialBlock::Random { scale, decay, seed } => {
            use rand::SeedableRng;
            if !(scale >= 0.0 && scale.is_finite() && decay.is_finite()) {
                return Err(format!("[initial] scale must be nonnegative and decay finite, got ({scale}, {decay})"));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            u = random_field(m.domain(), m.field_kind(), scale, decay, &mut rng);
        }
    }
    Ok(u)
}

fn domain_of(b: &DomainBlock) -> Result<Domain> {
    let (g, bc) = match b.geometry {
        GeometryName::Interval => (Geometry::Interval { length: b.length }, Boundary::Dirichlet),
        GeometryName::Rectangle => (Geometry::Rectangle { lx: b.lx, ly: b.ly }, Boundary::Dirichlet),
        GeometryName::Torus1 => (Geometry::Torus { dim: 1 }, Boundary::PeriodicMeanZero),
        GeometryName::Torus2 => (Geometry::Torus { dim: 2 }, Boundary::PeriodicMeanZero),
    };
    build_domain(g, bc, b.n)
}

fn tagged(section: &str, e: Error) -> Vec<String> {
    match e {
        Error::ConfigList(v) => v.into_iter().map(|m| format!("[{section}] {m}")).collect(),
        Error::Config(m) | Error::Unsupported(m) => vec![format!("[{section}] {m}")],
        other => vec![format!("[{section}] {other}")],
    }
}

/// Builds every object and collects every semantic problem before failing.
pub fn resolve(config: ExperimentConfig) -> Result<Resolved> {
    let mut errs: Vec<String> = Vec::new();
    let domain = domain_of(&config.domain).map_err(|e| errs.extend(tagged("domain", e))).ok();
    let model = domain.as_ref().and_then(|d| {
        DriftModel::new(config.model.kind(), d, &config.overrides)
            .map_err(|e| errs.extend(tagged("model", e)))
            .ok()
    });
    let noise = model.as_ref().and_then(|m| {
        build_noise(m.domain(), m.field_kind(), &config.noise)
            .map_err(|e| errs.extend(tagged("noise", e)))
            .ok()
    });
    let spec = config.scheme_spec();
    if let Err(e) = spec.validate() {
        errs.extend(tagged("scheme", e));
    }
    let x = model.as_ref().and_then(|m| initial_field(m, &config.initial).map_err(|e| errs.push(e)).ok());
    if let (Some(m), ExperimentBlock::Couple { y, .. }) = (&model, &config.experiment) {
        if let Err(e) = initial_field(m, y) {
            errs.push(e.replace("[initial]", "[experiment.y]"));
        }
    }
    errs.extend(config.experiment.problems());

    let constants = match (&model, &noise) {
        (Some(m), Some(b)) => {
            let base = ConstantSet::from_parts(m.constants(), b);
            let lambda = config.constants.lambda.unwrap_or_else(|| default_lambdas(&base));
            let mut cs = base.with_lambda(lambda);
            cs.gamma = config.constants.gamma;
            let v = cs.violations();
            errs.extend(v.into_iter().map(|m| format!("[constants] {m}")));
            Some(cs)
        }
        _ => {
            if let Some(l) = config.constants.lambda {
                let s: f64 = l.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    errs.push(format!("[constants] lambda must sum to 1, got {s}"));
                }
            }
            None
        }
    };
    if !errs.is_empty() {
        return Err(Error::ConfigList(errs));
    }
    let mut constants = constants.expect("no errors");
    if constants.gamma.is_none() {
        constants.gamma = default_gamma(&constants);
    }
    Ok(Resolved {
        domain: domain.expect("no errors"),
        model: model.expect("no errors"),
        noise: noise.expect("no errors"),
        spec,
        constants,
        x: x.expect("no errors"),
        config,
    })
}

/// 0.99 (δ₂ − ratio) when the ergodicity ratio leaves room below δ₂.
pub fn default_gamma(cs: &ConstantSet) -> Option<f64> {
    let r: HypothesisReport = crate::checker::check_ergodicity(cs).ok()?;
    let room = cs.delta2 - r.ratio;
    (room > 0.0 && r.ergodicity_pass).then_some(0.99 * room)
}

pub fn load(text: &str) -> Result<Resolved> {
    resolve(parse_config(text)?)
}
