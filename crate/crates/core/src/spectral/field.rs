use rand::Rng;
use rand_distr::StandardNormal;

use super::domain::{Domain, Geometry};
use crate::error::{Error, Result};

/// Whether a field is scalar or a divergence-free velocity on the 2D torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Solenoidal,
}

impl FieldKind {
    pub fn components(self, domain: &Domain) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Solenoidal => domain.dim(),
        }
    }
}

/// Coefficients of a (possibly vector-valued) field in the orthonormal basis of H.
///
/// Layout is component-major: `coeffs[c * n_modes + k]`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    domain: Domain,
    components: usize,
    coeffs: Vec<f64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.domain.same_as(&other.domain)
            && self.components == other.components
            && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(domain: &Domain, components: usize) -> Self {
        assert!(components >= 1, "a field needs at least one component");
        Self {
            domain: domain.clone(),
            components,
            coeffs: vec![0.0; components * domain.n_modes()],
        }
    }

    pub fn from_coeffs(domain: &Domain, components: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = components * domain.n_modes();
        if components == 0 || coeffs.len() != expected {
            return Err(Error::Shape {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            domain: domain.clone(),
            components,
            coeffs,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_modes(&self) -> usize {
        self.domain.n_modes()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.n_modes();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.n_modes();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// Eigenvalue attached to flat coefficient index `i`.
    pub fn eigenvalue_at(&self, i: usize) -> f64 {
        self.domain.eigenvalue(i % self.n_modes())
    }

    pub fn h_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn v_norm_sq(&self) -> f64 {
        let n = self.n_modes();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| self.domain.eigenvalue(i % n) * c * c)
            .sum()
    }

    /// Dual norm through the discrete Riesz map: Σ c_k² / λ_k.
    pub fn vstar_norm_sq(&self) -> f64 {
        let n = self.n_modes();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * c / self.domain.eigenvalue(i % n))
            .sum()
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq().sqrt()
    }

    pub fn v_norm(&self) -> f64 {
        self.v_norm_sq().sqrt()
    }

    pub fn vstar_norm(&self) -> f64 {
        self.vstar_norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_compatible(&self, other: &SpectralField) -> Result<()> {
        if !self.domain.same_as(&other.domain) {
            return Err(Error::DomainMismatch(format!(
                "{:?} vs {:?}",
                self.domain.geometry(),
                other.domain.geometry()
            )));
        }
        if self.components != other.components {
            return Err(Error::Shape {
                expected: self.components,
                got: other.components,
            });
        }
        Ok(())
    }

    /// H inner product.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &SpectralField) -> Result<()> {
        self.check_compatible(other)?;
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }
}

pub fn h_norm(f: &SpectralField) -> f64 {
    f.h_norm()
}

pub fn v_norm(f: &SpectralField) -> f64 {
    f.v_norm()
}

pub fn vstar_norm(f: &SpectralField) -> f64 {
    f.vstar_norm()
}

/// Unit divergence-free direction k⊥/|k| attached to a torus_2 mode.
pub fn solenoidal_direction(k: [i64; 2]) -> [f64; 2] {
    let n = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
    [-(k[1] as f64) / n, k[0] as f64 / n]
}

fn require_torus2_vector(f: &SpectralField, what: &str) -> Result<()> {
    if f.domain().geometry() != (Geometry::Torus { dim: 2 }) || f.components() != 2 {
        return Err(Error::Unsupported(format!(
            "{what} needs a 2-component field on torus_2, got {} component(s) on {:?}",
            f.components(),
            f.domain().geometry()
        )));
    }
    Ok(())
}

/// Helmholtz–Leray projection with multiplier I − k kᵀ/|k|² per mode.
pub fn leray_project(f: &SpectralField) -> Result<SpectralField> {
    require_torus2_vector(f, "leray_project")?;
    let mut out = f.clone();
    leray_in_place(&mut out);
    Ok(out)
}

pub(crate) fn leray_in_place(f: &mut SpectralField) {
    let n = f.n_modes();
    let domain = f.domain().clone();
    let c = f.coeffs_mut();
    for i in 0..n {
        let m = domain.mode(i);
        let k = [m.wavevector[0] as f64, m.wavevector[1] as f64];
        let kk = m.eigenvalue;
        let dot = k[0] * c[i] + k[1] * c[n + i];
        c[i] -= dot * k[0] / kk;
        c[n + i] -= dot * k[1] / kk;
    }
}

/// Largest |k·a_k| / |k| over modes; zero for solenoidal fields.
pub fn divergence_residual(f: &SpectralField) -> Result<f64> {
    require_torus2_vector(f, "divergence_residual")?;
    let n = f.n_modes();
    let c = f.coeffs();
    let mut worst = 0.0f64;
    for i in 0..n {
        let m = f.domain().mode(i);
        let k = [m.wavevector[0] as f64, m.wavevector[1] as f64];
        let dot = (k[0] * c[i] + k[1] * c[n + i]) / m.eigenvalue.sqrt();
        worst = worst.max(dot.abs());
    }
    Ok(worst)
}

/// Gaussian random field with spectrum scale·(λ_k/λ_1)^(−decay/2).
///
/// Solenoidal fields draw one amplitude per mode along k⊥/|k|.
pub fn random_field<R: Rng + ?Sized>(
    domain: &Domain,
    kind: FieldKind,
    scale: f64,
    decay: f64,
    rng: &mut R,
) -> SpectralField {
    let ncomp = kind.components(domain);
    let n = domain.n_modes();
    let lam1 = domain.c0() * domain.c0();
    let mut f = SpectralField::zeros(domain, ncomp);
    for i in 0..n {
        let m = domain.mode(i);
        let amp = scale * (m.eigenvalue / lam1).powf(-decay / 2.0);
        match kind {
            FieldKind::Scalar => {
                let z: f64 = rng.sample(StandardNormal);
                f.coeffs_mut()[i] = amp * z;
            }
            FieldKind::Solenoidal => {
                let z: f64 = rng.sample(StandardNormal);
                if ncomp == 2 {
                    let d = solenoidal_direction(m.wavevector);
                    f.coeffs_mut()[i] = amp * z * d[0];
                    f.coeffs_mut()[n + i] = amp * z * d[1];
                } else {
                    f.coeffs_mut()[i] = amp * z;
                }
            }
        }
    }
    f
}
