//! Sampled checks of the structural inequalities and calibration sweeps for
//! the constants the theory leaves unspecified.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{apply_drift, pairing, DriftModel};
use crate::error::{Error, Result};
use crate::spectral::{random_field, SpectralField};

const TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuditRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl AuditRecord {
    fn new(lhs: f64, rhs: f64) -> Self {
        let pass = lhs <= rhs + TOL * (1.0 + rhs.abs());
        Self { lhs, rhs, pass }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuditSummary {
    pub samples: usize,
    pub passed: usize,
    /// Largest lhs − rhs seen; negative when every sample has slack.
    pub worst_excess: f64,
}

impl AuditSummary {
    pub fn from_records(records: &[AuditRecord]) -> Self {
        Self {
            samples: records.len(),
            passed: records.iter().filter(|r| r.pass).count(),
            worst_excess: records
                .iter()
                .map(|r| r.lhs - r.rhs)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn pass_rate(&self) -> f64 {
        if self.samples == 0 {
            return 1.0;
        }
        self.passed as f64 / self.samples as f64
    }

    pub fn all_pass(&self) -> bool {
        self.passed == self.samples
    }
}

/// `n` random fields of the model's kind with amplitudes spread over
/// several decades, so the audits see both small and large states.
pub fn sample_fields(m: &DriftModel, n: usize, decay: f64, seed: u64) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let scale = 10f64.powf(-2.0 + 4.0 * (i % 9) as f64 / 8.0);
            random_field(m.domain(), m.field_kind(), scale, decay, &mut rng)
        })
        .collect()
}

/// 2⟨A(u),u⟩ ≤ −δ₁‖u‖^α_V
pub fn audit_coercivity(m: &DriftModel, u: &SpectralField) -> Result<AuditRecord> {
    let k = m.constants();
    let lhs = 2.0 * pairing(m, u, u)?;
    let rhs = -k.delta1 * u.v_norm().powf(k.alpha);
    Ok(AuditRecord::new(lhs, rhs))
}

/// 2⟨A(u)−A(v), u−v⟩ ≤ (−δ₂ + ρ(v))‖u−v‖²_H, with η ≡ 0.
pub fn audit_monotonicity(
    m: &DriftModel,
    u: &SpectralField,
    v: &SpectralField,
) -> Result<AuditRecord> {
    let k = m.constants();
    let w = u.sub(v)?;
    let da = apply_drift(m, u)?.sub(&apply_drift(m, v)?)?;
    let lhs = 2.0 * da.inner(&w)?;
    let rhs = (-k.delta2 + k.rho(v)) * w.h_norm_sq();
    Ok(AuditRecord::new(lhs, rhs))
}

fn cone_constants(m: &DriftModel) -> Result<(f64, f64)> {
    m.constants()
        .cone
        .ok_or_else(|| Error::NotConfigured("cone constants (delta4, C4)".into()))
}

/// 2⟨A(u),u⟩ ≤ C₄ − δ₄‖A(u)‖_{V*}
pub fn audit_cone(m: &DriftModel, u: &SpectralField) -> Result<AuditRecord> {
    let (d4, c4) = cone_constants(m)?;
    let au = apply_drift(m, u)?;
    let lhs = 2.0 * au.inner(u)?;
    let rhs = c4 - d4 * au.vstar_norm();
    Ok(AuditRecord::new(lhs, rhs))
}

fn growth_ratio(m: &DriftModel, u: &SpectralField) -> Result<f64> {
    let k = m.constants();
    let a = apply_drift(m, u)?.vstar_norm().powf(k.alpha / (k.alpha - 1.0));
    let b = (1.0 + u.v_norm().powf(k.alpha)) * (1.0 + u.h_norm().powf(k.beta));
    Ok(a / b)
}

/// ‖A(u)‖_{V*}^{α/(α−1)} ≤ K(1+‖u‖^α_V)(1+‖u‖^β_H)
pub fn audit_growth(m: &DriftModel, u: &SpectralField) -> Result<AuditRecord> {
    let k = m
        .constants()
        .growth_k
        .ok_or_else(|| Error::NotConfigured("growth constant K".into()))?;
    let r = growth_ratio(m, u)?;
    Ok(AuditRecord::new(r, k))
}

fn need_samples(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InsufficientSamples { need: 1, have: 0 });
    }
    Ok(())
}

/// Smallest −2⟨A(u),u⟩/‖u‖^α_V over the samples: a sampled estimate of δ₁,
/// an upper bound on the true constant.
pub fn calibrate_coercivity_delta1(m: &DriftModel, samples: &[SpectralField]) -> Result<f64> {
    need_samples(samples.len())?;
    let alpha = m.constants().alpha;
    let mut best = f64::INFINITY;
    for u in samples {
        let v = u.v_norm();
        if v == 0.0 {
            continue;
        }
        best = best.min(-2.0 * pairing(m, u, u)? / v.powf(alpha));
    }
    Ok(best)
}

/// Smallest C₂ making the monotonicity inequality with ρ(v) = C₂‖v‖²_V hold on
/// every sampled pair, for the model's δ₂. Zero when no pair needs a correction.
pub fn calibrate_monotonicity_c2(
    m: &DriftModel,
    pairs: &[(SpectralField, SpectralField)],
) -> Result<f64> {
    need_samples(pairs.len())?;
    let d2 = m.constants().delta2;
    let mut c2 = 0.0f64;
    for (u, v) in pairs {
        let w = u.sub(v)?;
        let wn = w.h_norm_sq();
        if wn == 0.0 {
            continue;
        }
        let da = apply_drift(m, u)?.sub(&apply_drift(m, v)?)?;
        let excess = 2.0 * da.inner(&w)? / wn + d2;
        if excess <= 0.0 {
            continue;
        }
        let vv = v.v_norm_sq();
        if vv == 0.0 {
            return Err(Error::BoundUnavailable(
                "monotonicity fails at v = 0; no C2 can repair it".into(),
            ));
        }
        c2 = c2.max(excess / vv);
    }
    Ok(c2)
}

/// Largest δ₄ for which the cone inequality with the given C₄ holds on all samples.
pub fn calibrate_cone_delta4(m: &DriftModel, samples: &[SpectralField], c4: f64) -> Result<f64> {
    need_samples(samples.len())?;
    let mut d4 = f64::INFINITY;
    for u in samples {
        let au = apply_drift(m, u)?;
        let lhs = 2.0 * au.inner(u)?;
        let n = au.vstar_norm();
        if n == 0.0 {
            if lhs > c4 {
                return Err(Error::BoundUnavailable(format!(
                    "cone inequality fails with A(u) = 0 for C4 = {c4}"
                )));
            }
            continue;
        }
        d4 = d4.min((c4 - lhs) / n);
    }
    if !(d4 > 0.0) {
        return Err(Error::BoundUnavailable(format!(
            "no positive delta4 for C4 = {c4} (best {d4})"
        )));
    }
    Ok(d4)
}

/// Largest growth ratio over the samples: the smallest K they support.
pub fn calibrate_growth_k(m: &DriftModel, samples: &[SpectralField]) -> Result<f64> {
    need_samples(samples.len())?;
    let mut k = 0.0f64;
    for u in samples {
        k = k.max(growth_ratio(m, u)?);
    }
    Ok(k)
}
