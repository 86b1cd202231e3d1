//! Diagonal additive noise B and reproducible Wiener increments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::spectral::{solenoidal_direction, Domain, FieldKind, SpectralField};

/// How the amplitudes σ_k are assigned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseProfile {
    /// No noise: the deterministic limit.
    Zero,
    /// One mode (position in the basis ordering) with amplitude σ.
    SingleMode { mode: usize, sigma: f64 },
    /// σ_k = amplitude · (√λ_k / c0)^(−q) on every retained mode, or on the
    /// `max_modes` lowest ones.
    PowerlawDecay {
        amplitude: f64,
        q: f64,
        #[serde(default)]
        max_modes: Option<usize>,
    },
    /// Equal amplitude on the `k_modes` lowest modes.
    Flat { k_modes: usize, sigma: f64 },
    /// Explicit (mode, σ) pairs.
    Explicit { modes: Vec<(usize, f64)> },
}

/// B = Σ σ_k e_k ⊗ e_k, diagonal in the H-basis. For solenoidal fields the
/// basis vector of mode k is e_k · k⊥/|k|.
#[derive(Clone, Debug)]
pub struct NoiseOperator {
    domain: Domain,
    kind: FieldKind,
    active: Vec<(usize, f64)>,
}

pub fn build_noise(domain: &Domain, kind: FieldKind, profile: &NoiseProfile) -> Result<NoiseOperator> {
    let n = domain.n_modes();
    let lowest = |k: usize| -> Result<Vec<usize>> {
        if k > n {
            return config_err(format!("{k} modes requested, truncation has {n}"));
        }
        Ok(domain.modes_by_eigenvalue().into_iter().take(k).collect())
    };
    let mut active: Vec<(usize, f64)> = match profile {
        NoiseProfile::Zero => Vec::new(),
        NoiseProfile::SingleMode { mode, sigma } => vec![(*mode, *sigma)],
        NoiseProfile::PowerlawDecay {
            amplitude,
            q,
            max_modes,
        } => {
            let c0 = domain.c0();
            lowest(max_modes.unwrap_or(n))?
                .into_iter()
                .map(|i| (i, amplitude * (domain.eigenvalue(i).sqrt() / c0).powf(-q)))
                .collect()
        }
        NoiseProfile::Flat { k_modes, sigma } => {
            lowest(*k_modes)?.into_iter().map(|i| (i, *sigma)).collect()
        }
        NoiseProfile::Explicit { modes } => modes.clone(),
    };
    for &(i, s) in &active {
        if i >= n {
            return config_err(format!("noise mode {i} outside truncation ({n} modes)"));
        }
        if !(s >= 0.0 && s.is_finite()) {
            return config_err(format!("noise amplitude must be nonnegative, got {s} on mode {i}"));
        }
    }
    active.sort_by_key(|a| a.0);
    if active.windows(2).any(|w| w[0].0 == w[1].0) {
        return config_err("noise mode listed twice");
    }
    active.retain(|a| a.1 > 0.0);
    Ok(NoiseOperator {
        domain: domain.clone(),
        kind,
        active,
    })
}

impl NoiseOperator {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn field_kind(&self) -> FieldKind {
        self.kind
    }

    /// Active (mode, σ) pairs in basis order.
    pub fn active(&self) -> &[(usize, f64)] {
        &self.active
    }

    pub fn is_zero(&self) -> bool {
        self.active.is_empty()
    }

    /// ‖B‖_{L₂(U,H)}
    pub fn hs_norm_h(&self) -> f64 {
        self.active.iter().map(|(_, s)| s * s).sum::<f64>().sqrt()
    }

    /// ‖B‖_{L₂(U,V)}
    pub fn hs_norm_v(&self) -> f64 {
        self.active
            .iter()
            .map(|&(i, s)| self.domain.eigenvalue(i) * s * s)
            .sum::<f64>()
            .sqrt()
    }

    /// Operator norm on H.
    pub fn op_norm(&self) -> f64 {
        self.active.iter().map(|a| a.1).fold(0.0, f64::max)
    }

    /// Adds B·(√dt ξ) for standard normal ξ drawn from `stream` at `step`.
    pub fn add_increment(&self, dt: f64, stream: RngStream, step: u64, out: &mut SpectralField) {
        if self.active.is_empty() {
            return;
        }
        let mut rng = stream.rng(step);
        let sign = stream.sign();
        let sq = dt.sqrt() * sign;
        let n = self.domain.n_modes();
        let vector = self.kind == FieldKind::Solenoidal && out.components() == 2;
        let c = out.coeffs_mut();
        for &(i, s) in &self.active {
            let z: f64 = rng.sample(StandardNormal);
            let a = s * sq * z;
            if vector {
                let d = solenoidal_direction(self.domain.mode(i).wavevector);
                c[i] += a * d[0];
                c[n + i] += a * d[1];
            } else {
                c[i] += a;
            }
        }
    }

    pub fn zero_field(&self) -> SpectralField {
        SpectralField::zeros(&self.domain, self.kind.components(&self.domain))
    }
}

/// Which member of an antithetic pair a stream drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Primary,
    /// The negated draws of the primary stream with the same trajectory index.
    Antithetic,
}

/// Counter-based stream: the draw at a step depends only on (seed, trajectory, role, step).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub trajectory: u64,
    pub role: Role,
}

impl RngStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        Self {
            seed,
            trajectory,
            role: Role::Primary,
        }
    }

    pub fn antithetic(self) -> Self {
        Self {
            role: Role::Antithetic,
            ..self
        }
    }

    /// Generator positioned at the block reserved for `step` (2^24 words per step).
    pub fn rng(&self, step: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.trajectory);
        r.set_word_pos((step as u128) << 24);
        r
    }

    fn sign(&self) -> f64 {
        match self.role {
            Role::Primary => 1.0,
            Role::Antithetic => -1.0,
        }
    }
}

/// B·ΔW over a step of length dt.
pub fn sample_increment(b: &NoiseOperator, dt: f64, stream: RngStream, step: u64) -> Result<SpectralField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return config_err(format!("dt must be positive, got {dt}"));
    }
    let mut out = b.zero_field();
    b.add_increment(dt, stream, step, &mut out);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallBallEstimate {
    pub probability: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub paths: usize,
}

/// Wilson score interval for a binomial proportion at normal quantile z.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of paths with sup over grid times of ‖B W_t‖_V ≤ δ.
pub fn small_ball_frequency(
    b: &NoiseOperator,
    delta: f64,
    t: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<SmallBallEstimate> {
    if !(delta > 0.0) {
        return config_err(format!("delta must be positive, got {delta}"));
    }
    if !(t > 0.0 && dt > 0.0 && dt <= t) {
        return config_err(format!("need 0 < dt <= T, got dt={dt}, T={t}"));
    }
    if n_paths == 0 {
        return Err(Error::InsufficientSamples { need: 1, have: 0 });
    }
    let steps = (t / dt).round().max(1.0) as u64;
    let d2 = delta * delta;
    let mut hits = 0;
    for p in 0..n_paths {
        let stream = RngStream::new(seed, p as u64);
        let mut w = b.zero_field();
        let mut inside = true;
        for s in 0..steps {
            b.add_increment(dt, stream, s, &mut w);
            if w.v_norm_sq() > d2 {
                inside = false;
                break;
            }
        }
        if inside {
            hits += 1;
        }
    }
    let (lo, hi) = wilson_interval(hits, n_paths, 1.959964);
    Ok(SmallBallEstimate {
        probability: hits as f64 / n_paths as f64,
        ci_low: lo,
        ci_high: hi,
        paths: n_paths,
    })
}
