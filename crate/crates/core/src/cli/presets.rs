//! Named configurations that satisfy the hypotheses of the four example
//! theorems with desk-scale numerics.

use super::config::*;
use crate::drift::Overrides;
use crate::error::{Error, Result};
use crate::noise::NoiseProfile;

pub const PRESETS: [&str; 4] = ["heat_thm22", "burgers_thm24", "nse_thm26", "powerlaw_thm28"];

/// ‖B‖²_HS of the NSE preset.
pub const NSE_NOISE_SQ: f64 = 0.01;
/// λ of the NSE preset.
pub const NSE_LAMBDA: f64 = 0.5;

/// ν with ‖B‖² = (1/8)λν³c₀², i.e. the ergodicity condition ‖B‖² ≤ (1/4)λν³c₀²
/// holds with a factor 2 to spare (c₀ = 1 on the 2π-torus).
pub fn nse_viscosity() -> f64 {
    (8.0 * NSE_NOISE_SQ / NSE_LAMBDA).cbrt()
}

/// Horizon used when a preset is run with another experiment kind.
fn horizon(name: &str) -> f64 {
    match name {
        "nse_thm26" => 10.0,
        _ => 2.0,
    }
}

/// Experiment block of the given kind with the preset's horizon and the
/// documented defaults.
pub fn experiment_for(name: &str, kind: &str) -> Result<ExperimentBlock> {
    let t = horizon(name);
    let text = match kind {
        "check" => "kind = \"check\"".to_string(),
        "simulate" | "couple" | "decay" => format!("kind = \"{kind}\"\nt = {t:?}"),
        "moments" => format!("kind = \"moments\"\nt = {t:?}"),
        "mixing" => format!("kind = \"mixing\"\nt = {t:?}"),
        "smallball" => format!("kind = \"smallball\"\nt = {t:?}\ndelta = 0.5\neps = 0.1"),
        "convexity" => "kind = \"convexity\"".to_string(),
        other => return Err(Error::Config(format!("unknown experiment kind '{other}'"))),
    };
    toml::from_str(&text).map_err(|e| Error::Config(e.message().to_string()))
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = |domain: DomainBlock, model: ModelBlock, noise: NoiseProfile, dt: f64, experiment: ExperimentBlock| ExperimentConfig {
        seed: 42,
        out: None,
        checkpoint_stride: 1,
        domain,
        model,
        overrides: Overrides::default(),
        noise,
        scheme: SchemeBlock {
            kind: SchemeName::SemiImplicit,
            dt,
            taming: 1.0,
            guard: 1e6,
        },
        constants: ConstantsBlock::default(),
        initial: InitialBlock::Mode {
            mode: 0,
            amplitude: 1.0,
        },
        experiment,
    };
    let interval = |n| DomainBlock {
        geometry: GeometryName::Interval,
        length: 1.0,
        lx: 1.0,
        ly: 1.0,
        n,
    };
    let torus = |n| DomainBlock {
        geometry: GeometryName::Torus2,
        ..interval(n)
    };
    match name {
        // ‖B‖² = 0.01 ≤ λνc₀² = 0.5π².
        "heat_thm22" => {
            let mut c = base(
                interval(16),
                ModelBlock::Heat { nu: 1.0 },
                NoiseProfile::SingleMode { mode: 0, sigma: 0.1 },
                1e-3,
                experiment_for(name, "mixing")?,
            );
            if let ExperimentBlock::Mixing { t, checkpoints, .. } = &mut c.experiment {
                *t = 1.0;
                *checkpoints = 1001;
            }
            c.constants.lambda = Some([0.5, 0.0, 0.0, 0.5]);
            Ok(c)
        }
        "burgers_thm24" => Ok(base(
            interval(16),
            ModelBlock::Burgers { nu: 1.0 },
            NoiseProfile::Flat { k_modes: 2, sigma: 0.1 },
            1e-3,
            experiment_for(name, "moments")?,
        )),
        // γ = 0.25 keeps ‖B‖² ≤ (1/4)λ(ν³c₀² − ν²γ) as well.
        "nse_thm26" => {
            let mut c = base(
                torus(32),
                ModelBlock::NavierStokes2D { nu: nse_viscosity() },
                NoiseProfile::Flat {
                    k_modes: 4,
                    sigma: (NSE_NOISE_SQ / 4.0).sqrt(),
                },
                0.02,
                experiment_for(name, "couple")?,
            );
            c.constants = ConstantsBlock {
                lambda: Some([NSE_LAMBDA, 0.0, 0.0, 1.0 - NSE_LAMBDA]),
                gamma: Some(0.25),
            };
            c.initial = InitialBlock::Random {
                scale: 0.1,
                decay: 2.0,
                seed: 1,
            };
            Ok(c)
        }
        "powerlaw_thm28" => Ok(base(
            torus(16),
            ModelBlock::PowerLaw { nu: 1.0, p: 2.0, dim: 2 },
            NoiseProfile::Flat { k_modes: 4, sigma: 0.05 },
            0.01,
            experiment_for(name, "decay")?,
        )),
        other => Err(Error::Config(format!(
            "unknown preset '{other}' (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}
