//! Drift operators A: V → V* of the four model families, their structural
//! constants, and sampled audits of the coercivity/monotonicity/cone/growth
//! inequalities.

mod audit;
mod eval;

pub use audit::{
    audit_coercivity, audit_cone, audit_growth, audit_monotonicity, calibrate_coercivity_delta1,
    calibrate_cone_delta4, calibrate_growth_k, calibrate_monotonicity_c2, sample_fields,
    AuditRecord, AuditSummary,
};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::spectral::{Domain, FieldKind, Geometry, SpectralField};

/// Transport coefficient f in f(u)·∇u.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    /// f(x) = x in one dimension.
    Burgers,
    /// f_i(x) = b_i tanh(x): bounded and Lipschitz with ‖f‖_∞ = Lip(f) = |b|.
    Tanh { coeffs: Vec<f64> },
}

impl FSpec {
    /// ‖f‖_∞, `None` when unbounded.
    pub fn sup_norm(&self) -> Option<f64> {
        match self {
            FSpec::Burgers => None,
            FSpec::Tanh { coeffs } => Some(coeffs.iter().map(|b| b * b).sum::<f64>().sqrt()),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            FSpec::Burgers => 1.0,
            FSpec::Tanh { coeffs } => coeffs.iter().map(|b| b * b).sum::<f64>().sqrt(),
        }
    }

    fn eval(&self, axis: usize, x: f64) -> f64 {
        match self {
            FSpec::Burgers => x,
            FSpec::Tanh { coeffs } => coeffs[axis] * x.tanh(),
        }
    }
}

/// Pointwise reaction term g with g(0) = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GSpec {
    Zero,
    /// g(x) = a x
    Linear { a: f64 },
    /// g(x) = a sin x
    Sine { a: f64 },
}

/// Constants (C, c, s, K, k) of the growth, one-sided Lipschitz and sign
/// conditions on g. Here `c` bounds (g(x)−g(y))(x−y) ≤ c (x−y)², which implies
/// the weighted form for every s ≤ 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GConstants {
    pub big_c: f64,
    pub c: f64,
    pub s: f64,
    pub big_k: f64,
    pub k: f64,
}

impl GSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GSpec::Zero => 0.0,
            GSpec::Linear { a } => a * x,
            GSpec::Sine { a } => a * x.sin(),
        }
    }

    pub fn constants(&self) -> GConstants {
        match *self {
            GSpec::Zero => GConstants {
                big_c: 0.0,
                c: 0.0,
                s: 0.0,
                big_k: 0.0,
                k: 0.0,
            },
            GSpec::Linear { a } => GConstants {
                big_c: a.abs(),
                c: a.max(0.0),
                s: 0.0,
                big_k: 0.0,
                k: a.max(0.0),
            },
            GSpec::Sine { a } => GConstants {
                big_c: a.abs(),
                c: a.abs(),
                s: 0.0,
                big_k: 0.0,
                k: a.abs(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Heat { nu: f64 },
    Semilinear { nu: f64, f: FSpec, g: GSpec },
    NavierStokes2D { nu: f64 },
    PowerLawFluid { nu: f64, p: f64, dim: usize },
}

impl ModelKind {
    pub fn nu(&self) -> f64 {
        match *self {
            ModelKind::Heat { nu }
            | ModelKind::Semilinear { nu, .. }
            | ModelKind::NavierStokes2D { nu }
            | ModelKind::PowerLawFluid { nu, .. } => nu,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Heat { .. } => "heat",
            ModelKind::Semilinear { .. } => "semilinear",
            ModelKind::NavierStokes2D { .. } => "navier_stokes_2d",
            ModelKind::PowerLawFluid { .. } => "power_law",
        }
    }

    pub fn field_kind(&self) -> FieldKind {
        match self {
            ModelKind::Heat { .. } | ModelKind::Semilinear { .. } => FieldKind::Scalar,
            ModelKind::NavierStokes2D { .. } | ModelKind::PowerLawFluid { .. } => {
                FieldKind::Solenoidal
            }
        }
    }
}

/// Optional user-supplied values for constants the theory leaves open.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub delta1: Option<f64>,
    pub c2: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta4: Option<f64>,
    pub c4: Option<f64>,
    pub growth_k: Option<f64>,
}

/// How the correction ρ(v) in the local monotonicity inequality is formed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rho {
    /// ρ ≡ 0
    Zero,
    /// ρ(v) = C₂‖v‖²_V
    QuadraticV,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftConstants {
    pub alpha: f64,
    pub beta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub c2: f64,
    pub rho: Rho,
    pub c0: f64,
    pub epsilon: Option<f64>,
    pub growth_k: Option<f64>,
    pub cone: Option<(f64, f64)>,
    /// Named side conditions required for the ergodicity claim, with their status.
    pub side_conditions: Vec<(String, bool)>,
}

impl DriftConstants {
    /// ρ(v) for the monotonicity inequality.
    pub fn rho(&self, v: &SpectralField) -> f64 {
        match self.rho {
            Rho::Zero => 0.0,
            Rho::QuadraticV => self.c2 * v.v_norm_sq(),
        }
    }

    pub fn side_conditions_hold(&self) -> bool {
        self.side_conditions.iter().all(|(_, ok)| *ok)
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        config_err(format!("{name} must be positive and finite, got {x}"))
    }
}

/// Measure of the periodic box of side 2π in `dim` dimensions.
fn periodic_box_measure(dim: usize) -> f64 {
    (2.0 * std::f64::consts::PI).powi(dim as i32)
}

/// Structural constants of a model for a domain with embedding constant c0.
///
/// `dim` is the spatial dimension of the domain.
pub fn derive_constants(
    kind: &ModelKind,
    c0: f64,
    dim: usize,
    ov: &Overrides,
) -> Result<DriftConstants> {
    positive("c0", c0)?;
    let nu = kind.nu();
    positive("nu", nu)?;
    let cone = match (ov.delta4, ov.c4) {
        (Some(d4), Some(c4)) => {
            if d4 < 0.0 || c4 < 0.0 {
                return config_err("cone constants must be nonnegative");
            }
            Some((d4, c4))
        }
        (None, None) => None,
        _ => return config_err("cone constants need both delta4 and c4"),
    };
    let mut out = match kind {
        ModelKind::Heat { .. } => DriftConstants {
            alpha: 2.0,
            beta: 0.0,
            delta1: 2.0 * nu,
            delta2: 2.0 * nu * c0 * c0,
            c2: 0.0,
            rho: Rho::Zero,
            c0,
            epsilon: None,
            growth_k: Some(nu * nu),
            cone,
            side_conditions: Vec::new(),
        },
        ModelKind::NavierStokes2D { .. } => DriftConstants {
            alpha: 2.0,
            beta: 0.0,
            delta1: 2.0 * nu,
            delta2: nu * c0 * c0,
            c2: 4.0 / nu,
            rho: Rho::QuadraticV,
            c0,
            epsilon: None,
            growth_k: None,
            cone,
            side_conditions: Vec::new(),
        },
        ModelKind::Semilinear { f, g, .. } => semilinear_constants(nu, f, g, c0, dim, ov, cone)?,
        ModelKind::PowerLawFluid { p, dim: pd, .. } => {
            if !(*p >= 2.0) {
                return config_err(format!("power-law exponent p must be at least 2, got {p}"));
            }
            if !(2..=3).contains(pd) {
                return config_err(format!("power-law dimension must be 2 or 3, got {pd}"));
            }
            // Strong monotonicity of the stress plus Jensen on the periodic box:
            // 2<A0 u, u> ≤ −4ν∫|e(u)|^p ≤ −4ν 2^{−p/2} |O|^{1−p/2} ‖u‖_V^p.
            let delta1 = 4.0 * nu * 2f64.powf(-p / 2.0) * periodic_box_measure(*pd).powf(1.0 - p / 2.0);
            let claimed = (p - (1.0 + *pd as f64 / 2.0)).abs() < 1e-12;
            DriftConstants {
                alpha: *p,
                beta: 0.0,
                delta1,
                delta2: nu * c0 * c0,
                c2: 4.0 / nu,
                rho: Rho::QuadraticV,
                c0,
                epsilon: None,
                growth_k: None,
                cone,
                side_conditions: vec![("p = 1 + d/2".to_string(), claimed)],
            }
        }
    };
    if let Some(d1) = ov.delta1 {
        positive("delta1", d1)?;
        out.delta1 = d1;
    }
    if let Some(c2) = ov.c2 {
        if !(c2 >= 0.0 && c2.is_finite()) {
            return config_err(format!("C2 must be nonnegative, got {c2}"));
        }
        out.c2 = c2;
        if c2 > 0.0 && out.rho == Rho::Zero {
            out.rho = Rho::QuadraticV;
        }
    }
    if let Some(k) = ov.growth_k {
        positive("growth K", k)?;
        out.growth_k = Some(k);
    }
    Ok(out)
}

fn semilinear_constants(
    nu: f64,
    f: &FSpec,
    g: &GSpec,
    c0: f64,
    dim: usize,
    ov: &Overrides,
    cone: Option<(f64, f64)>,
) -> Result<DriftConstants> {
    let gc = g.constants();
    let fsup = f.sup_norm();
    match (f, dim) {
        (FSpec::Burgers, 1) => {}
        (FSpec::Burgers, _) => return config_err("Burgers transport f(x)=x is one-dimensional"),
        (FSpec::Tanh { coeffs }, d) if coeffs.len() != d => {
            return config_err(format!("f needs {d} coefficient(s), got {}", coeffs.len()))
        }
        _ => {}
    }
    if !(1..=2).contains(&dim) {
        return config_err("semilinear models live in one or two dimensions");
    }
    let f_inf = fsup.unwrap_or(0.0);
    let gap = if dim == 1 {
        2.0 * nu * c0 * c0 - 2.0 * gc.c
    } else {
        2.0 * nu * c0 * c0 - 4.0 * c0 * f_inf - 2.0 * gc.c
    };
    if !(gap > 0.0) {
        return config_err(format!("no admissible epsilon: the slack interval (0, {gap}) is empty"));
    }
    let epsilon = ov.epsilon.unwrap_or(gap / 2.0);
    if !(epsilon > 0.0 && epsilon < gap) {
        return config_err(format!("epsilon must lie in (0, {gap}), got {epsilon}"));
    }
    // Coercivity: the transport pairing vanishes for Burgers and is bounded by
    // ‖f‖_∞/c0 ‖u‖²_V otherwise; g contributes at most k/c0² ‖u‖²_V.
    let delta1 = 2.0 * (nu - gc.k / (c0 * c0) - f_inf / c0);
    if !(delta1 > 0.0) && ov.delta1.is_none() {
        return config_err(format!("coercivity constant is not positive ({delta1})"));
    }
    // Burgers: 2<u u_x - v v_x, w> = ∫ v_x w² ≤ ‖v‖_V ‖w‖_H ‖w‖_V / √c0, then Young.
    // Bounded f: the transport chain with ‖w‖²_{L4} ≤ 2‖w‖_H‖w‖_V, then Young.
    let lip = f.lipschitz();
    let c2_default = match (f, dim) {
        (FSpec::Burgers, _) => c0 / (4.0 * epsilon),
        (FSpec::Tanh { .. }, 1) => lip * lip * (2.0 + c0.powf(-0.5)).powi(2) * c0 * c0 / epsilon,
        (FSpec::Tanh { .. }, _) => 4.0 * lip * lip * c0 * c0 / epsilon,
    };
    let c2 = ov.c2.unwrap_or(c2_default);
    let mut side = Vec::new();
    if dim == 1 {
        side.push(("c < nu c0^2".to_string(), gc.c < nu * c0 * c0));
    } else {
        side.push((
            "c/(2 nu c0^2) + |f|_inf/(nu c0) < 1/2".to_string(),
            gc.c / (2.0 * nu * c0 * c0) + f_inf / (nu * c0) < 0.5,
        ));
    }
    side.push((
        "|f|_inf/(nu c0) + k/(nu c0^2) < 2".to_string(),
        f_inf / (nu * c0) + gc.k / (nu * c0 * c0) < 2.0,
    ));
    side.push(("K = 0".to_string(), gc.big_k == 0.0));
    Ok(DriftConstants {
        alpha: 2.0,
        beta: 0.0,
        delta1,
        delta2: gap - epsilon,
        c2,
        rho: Rho::QuadraticV,
        c0,
        epsilon: Some(epsilon),
        growth_k: None,
        cone,
        side_conditions: side,
    })
}

/// A drift model bound to a discretized domain.
#[derive(Clone, Debug)]
pub struct DriftModel {
    kind: ModelKind,
    domain: Domain,
    constants: DriftConstants,
}

impl DriftModel {
    pub fn new(kind: ModelKind, domain: &Domain, overrides: &Overrides) -> Result<DriftModel> {
        let geometry = domain.geometry();
        match &kind {
            ModelKind::Heat { .. } => {}
            ModelKind::Semilinear { .. } => {
                if domain.is_torus() {
                    return config_err("semilinear model requires a Dirichlet interval or rectangle");
                }
            }
            ModelKind::NavierStokes2D { .. } => {
                if geometry != (Geometry::Torus { dim: 2 }) {
                    return config_err("model requires torus_2");
                }
            }
            ModelKind::PowerLawFluid { dim, .. } => {
                if *dim != 2 {
                    return Err(Error::Unsupported(
                        "power-law numerics run on torus_2 only; d=3 is available to the checker"
                            .into(),
                    ));
                }
                if geometry != (Geometry::Torus { dim: 2 }) {
                    return config_err("model requires torus_2");
                }
            }
        }
        let constants = derive_constants(&kind, domain.c0(), domain.dim(), overrides)?;
        Ok(DriftModel {
            kind,
            domain: domain.clone(),
            constants,
        })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn constants(&self) -> &DriftConstants {
        &self.constants
    }

    pub fn nu(&self) -> f64 {
        self.kind.nu()
    }

    pub fn field_kind(&self) -> FieldKind {
        self.kind.field_kind()
    }

    pub fn components(&self) -> usize {
        self.field_kind().components(&self.domain)
    }

    /// Rate of the implicit linear part for flat coefficient index i: ν λ_k.
    pub fn implicit_rate(&self, i: usize) -> f64 {
        self.nu() * self.domain.eigenvalue(i % self.domain.n_modes())
    }

    pub fn zero_field(&self) -> SpectralField {
        SpectralField::zeros(&self.domain, self.components())
    }

    pub(crate) fn check_field(&self, u: &SpectralField) -> Result<()> {
        if !u.domain().same_as(&self.domain) {
            return Err(Error::DomainMismatch(format!(
                "model on {:?}, field on {:?}",
                self.domain.geometry(),
                u.domain().geometry()
            )));
        }
        if u.components() != self.components() {
            return Err(Error::Shape {
                expected: self.components(),
                got: u.components(),
            });
        }
        Ok(())
    }

    /// A(u) minus its implicit linear part: A(u) + νλ_k u_k.
    pub fn explicit_part(&self, u: &SpectralField) -> Result<SpectralField> {
        self.check_field(u)?;
        let out = eval::explicit_part(self, u);
        if !out.is_finite() {
            return Err(Error::Diverged {
                step: 0,
                stream: 0,
                detail: "non-finite value in the nonlinearity".into(),
            });
        }
        Ok(out)
    }

    /// Transport part F(u): u∂ₓu for Burgers, −P[(u·∇)u] for the fluids, zero otherwise.
    pub fn transport(&self, u: &SpectralField) -> Result<SpectralField> {
        self.check_field(u)?;
        Ok(eval::transport(self, u))
    }
}

/// Coefficients of A(u) in the H-basis.
pub fn apply_drift(m: &DriftModel, u: &SpectralField) -> Result<SpectralField> {
    let mut out = m.explicit_part(u)?;
    let n = u.coeffs().len();
    for i in 0..n {
        out.coeffs_mut()[i] -= m.implicit_rate(i) * u.coeffs()[i];
    }
    Ok(out)
}

/// ⟨A(u), v⟩
pub fn pairing(m: &DriftModel, u: &SpectralField, v: &SpectralField) -> Result<f64> {
    m.check_field(v)?;
    apply_drift(m, u)?.inner(v)
}
