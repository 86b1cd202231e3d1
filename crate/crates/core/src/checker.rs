//! Closed-form evaluation of the ergodicity/mixing hypotheses, the mixing-time
//! and invariant-moment bounds, and a sampled convexity probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drift::DriftConstants;
use crate::error::{Error, Result};
use crate::noise::NoiseOperator;

const EQ_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub alpha: f64,
    pub beta: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// C₂ of the monotonicity hypothesis.
    pub big_c2: f64,
    pub c0: f64,
    /// ‖B‖_{L₂(U,H)}
    pub hs_norm: f64,
    /// ‖B‖_{L(U,H)}
    pub op_norm: f64,
    /// λ₀..λ₃
    pub lambda: [f64; 4],
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl ConstantSet {
    /// Constants of a model and noise pair, with default λ split.
    pub fn from_parts(k: &DriftConstants, b: &NoiseOperator) -> Self {
        let mut cs = Self {
            alpha: k.alpha,
            beta: k.beta,
            delta1: k.delta1,
            delta2: k.delta2,
            big_c2: k.c2,
            c0: k.c0,
            hs_norm: b.hs_norm_h(),
            op_norm: b.op_norm(),
            lambda: [0.25; 4],
            gamma: None,
        };
        cs.lambda = default_lambdas(&cs);
        cs
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_lambda(mut self, lambda: [f64; 4]) -> Self {
        self.lambda = lambda;
        self
    }

    /// α = β + 2 up to rounding.
    pub fn borderline(&self) -> bool {
        (self.alpha - self.beta - 2.0).abs() <= EQ_TOL
    }

    /// Every violated invariant, not only the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let finite = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("C2", self.big_c2),
            ("c0", self.c0),
            ("hs_norm", self.hs_norm),
            ("op_norm", self.op_norm),
        ];
        for (name, x) in finite {
            if !x.is_finite() {
                v.push(format!("{name} must be finite, got {x}"));
            }
        }
        if !(self.alpha >= 2.0) {
            v.push(format!("alpha must be at least 2, got {}", self.alpha));
        }
        if !(self.beta >= 0.0) {
            v.push(format!("beta must be nonnegative, got {}", self.beta));
        }
        if self.beta > self.alpha - 2.0 + EQ_TOL {
            v.push(format!(
                "beta must not exceed alpha - 2 (alpha={}, beta={})",
                self.alpha, self.beta
            ));
        }
        for (name, x) in [("delta1", self.delta1), ("delta2", self.delta2), ("c0", self.c0)] {
            if !(x > 0.0) {
                v.push(format!("{name} must be positive, got {x}"));
            }
        }
        for (name, x) in [("C2", self.big_c2), ("hs_norm", self.hs_norm), ("op_norm", self.op_norm)] {
            if !(x >= 0.0) {
                v.push(format!("{name} must be nonnegative, got {x}"));
            }
        }
        let l = self.lambda;
        let sum: f64 = l.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            v.push(format!("lambda must sum to 1, got {sum}"));
        }
        let inside = |x: f64| x > 0.0 && x < 1.0;
        if self.beta == 0.0 {
            if l[1] != 0.0 || l[2] != 0.0 {
                v.push("lambda1 and lambda2 must be 0 when beta = 0".into());
            }
            for i in [0, 3] {
                if !inside(l[i]) {
                    v.push(format!("lambda{i} must lie in (0,1), got {}", l[i]));
                }
            }
        } else {
            for (i, x) in l.iter().enumerate() {
                if !inside(*x) {
                    v.push(format!("lambda{i} must lie in (0,1), got {x}"));
                }
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= self.delta2) {
                v.push(format!("gamma must lie in (0, delta2 = {}], got {g}", self.delta2));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(v))
        }
    }
}

/// Default λ split. For β = 0 and α = 2 the feasible band for λ₀ is
/// [2c₁C₂/(2δ₁δ₂), 1 − α‖B‖²/(δ₁c₀^α)] and λ₀ is its midpoint (0.5 when the
/// band is empty or unconstrained); λ₃ = 1 − λ₀. Otherwise equal parts.
pub fn default_lambdas(cs: &ConstantSet) -> [f64; 4] {
    if cs.beta != 0.0 {
        return [0.25; 4];
    }
    let c1 = cs.hs_norm * cs.hs_norm;
    let l0_min = 2.0 * c1 * cs.big_c2 / (cs.delta1 * 2.0 * cs.delta2);
    let l3_min = if cs.borderline() {
        cs.alpha * c1 / (cs.delta1 * cs.c0.powf(cs.alpha))
    } else {
        0.0
    };
    let (lo, hi) = (l0_min, 1.0 - l3_min);
    let l0 = if lo.is_finite() && hi.is_finite() && lo < hi && lo < 1.0 && hi > 0.0 {
        let mid = 0.5 * (lo.max(0.0) + hi.min(1.0));
        mid.clamp(1e-6, 1.0 - 1e-6)
    } else {
        0.5
    };
    [l0, 0.0, 0.0, 1.0 - l0]
}

/// (c₁, c₂, c₃) as displayed in the ergodicity hypothesis. c₂ uses the operator norm.
pub fn compute_c123(cs: &ConstantSet) -> Result<(f64, f64, f64)> {
    cs.validate()?;
    let (a, b) = (cs.alpha, cs.beta);
    let ca = cs.delta1 * cs.c0.powf(a);
    let (c1, c2) = if b == 0.0 {
        (cs.hs_norm * cs.hs_norm, 0.0)
    } else {
        let e = 2.0 * (a + b) / a;
        let c1 = a * (b + 2.0) / (2.0 * (a + b) * (cs.lambda[1] * ca * (a + b) / b).powf(b / a))
            * cs.hs_norm.powf(e);
        let c2 = b.powf((a + b) / a) * a * (b + 2.0)
            / ((a + b) * (cs.lambda[2] * ca * (a + b) / (2.0 * b)).powf(b / a))
            * cs.op_norm.powf(e);
        (c1, c2)
    };
    let c3 = if cs.borderline() {
        0.0
    } else {
        let g = a - b - 2.0;
        (b + 2.0) * g
            / (2.0 * (a + b) * (cs.lambda[3] * ca * (a + b) / (2.0 * b + 2.0)).powf((2.0 * b + 2.0) / g))
            * (b + 2.0).powf((a + b) / g)
            * cs.hs_norm.powf(2.0 * (a + b) / g)
    };
    Ok((c1, c2, c3))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BorderlineCheck {
    /// ‖B‖²_{L₂(U,H)}
    pub lhs: f64,
    /// λ₃δ₁c₀^α/α
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentBounds {
    /// Bound on ∫‖x‖^{α+β}_H dμ*.
    pub moment_alpha_beta: f64,
    /// Bound on ∫‖x‖_H dμ*.
    pub moment_1: f64,
    /// Bound on ∫‖x‖^α_V dμ* (β = 0 only).
    pub v_moment_alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// 2(c₁+c₂+c₃)C₂ / (λ₀δ₁(β+2))
    pub ratio: f64,
    pub delta2: f64,
    pub ergodicity_pass: bool,
    pub borderline: Option<BorderlineCheck>,
    pub gamma: Option<f64>,
    pub mixing_pass: Option<bool>,
    pub moments: Option<MomentBounds>,
}

fn report(cs: &ConstantSet) -> Result<HypothesisReport> {
    let (c1, c2, c3) = compute_c123(cs)?;
    let ratio = 2.0 * (c1 + c2 + c3) * cs.big_c2 / (cs.lambda[0] * cs.delta1 * (cs.beta + 2.0));
    let borderline = cs.borderline().then(|| {
        let lhs = cs.hs_norm * cs.hs_norm;
        let rhs = cs.lambda[3] * cs.delta1 * cs.c0.powf(cs.alpha) / cs.alpha;
        BorderlineCheck {
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    });
    let side = borderline.as_ref().map_or(true, |b| b.pass);
    let ergodicity_pass = ratio <= cs.delta2 && side;
    let moments = ergodicity_pass.then(|| moment_bounds(cs, c1, c2));
    Ok(HypothesisReport {
        c1,
        c2,
        c3,
        ratio,
        delta2: cs.delta2,
        ergodicity_pass,
        borderline,
        gamma: None,
        mixing_pass: None,
        moments,
    })
}

pub fn check_ergodicity(cs: &ConstantSet) -> Result<HypothesisReport> {
    report(cs)
}

pub fn check_mixing(cs: &ConstantSet) -> Result<HypothesisReport> {
    let gamma = cs
        .gamma
        .ok_or_else(|| Error::Config("mixing check needs gamma".into()))?;
    let mut r = report(cs)?;
    let side = r.borderline.as_ref().map_or(true, |b| b.pass);
    r.gamma = Some(gamma);
    r.mixing_pass = Some(r.ratio <= cs.delta2 - gamma && side);
    Ok(r)
}

fn moment_bounds(cs: &ConstantSet, c1: f64, c2: f64) -> MomentBounds {
    let (a, b) = (cs.alpha, cs.beta);
    let denom = cs.c0.powf(a) * cs.lambda[0] * cs.delta1;
    let m = 2.0 * (c1 + c2) / (denom * (b + 2.0));
    MomentBounds {
        moment_alpha_beta: m,
        moment_1: m.powf(1.0 / (a + b)),
        v_moment_alpha: (b == 0.0).then(|| (c1 + c2) / denom),
    }
}

pub fn invariant_moment_bound(cs: &ConstantSet) -> Result<MomentBounds> {
    let r = report(cs)?;
    r.moments
        .ok_or_else(|| Error::BoundUnavailable("ergodicity hypothesis fails".into()))
}

/// Which closed form of the mixing-time bound to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundForm {
    /// (2/γ)[C₂‖x‖^{β+2}/(λ₀δ₁(β+2)) + log(‖x‖ + m^{1/(α+β)}) + log(1/ε)]
    General,
    /// (1/(νc₀²))[log(‖x‖ + ‖B‖/(√(2λ₀ν)c₀)) + log(1/ε)]
    Heat { nu: f64 },
    /// (2/γ)[‖x‖²/(λ₀ν²) + log(‖x‖ + ‖B‖²/(√(2λ₀ν)c₀)) + log(1/ε)]
    NavierStokes { nu: f64 },
}

/// Upper bound on the ε-mixing time from initial state x, clamped at 0.
pub fn mixing_time_bound(cs: &ConstantSet, x_norm: f64, eps: f64, form: BoundForm) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
    }
    if !(x_norm >= 0.0) {
        return Err(Error::Config(format!("initial norm must be nonnegative, got {x_norm}")));
    }
    let l0 = cs.lambda[0];
    let b = cs.hs_norm;
    let raw = match form {
        BoundForm::Heat { nu } => {
            let r = report(cs)?;
            if !r.ergodicity_pass {
                return Err(Error::BoundUnavailable("ergodicity hypothesis fails".into()));
            }
            let arg = x_norm + b / ((2.0 * l0 * nu).sqrt() * cs.c0);
            ((arg).ln() + (1.0 / eps).ln()) / (nu * cs.c0 * cs.c0)
        }
        BoundForm::General | BoundForm::NavierStokes { .. } => {
            let r = check_mixing(cs)?;
            if r.mixing_pass != Some(true) {
                return Err(Error::BoundUnavailable(format!(
                    "mixing hypothesis fails: ratio {} > delta2 - gamma = {}",
                    r.ratio,
                    cs.delta2 - cs.gamma.unwrap_or(0.0)
                )));
            }
            let gamma = cs.gamma.expect("checked by check_mixing");
            match form {
                BoundForm::NavierStokes { nu } => {
                    let arg = x_norm + b * b / ((2.0 * l0 * nu).sqrt() * cs.c0);
                    2.0 / gamma * (x_norm * x_norm / (l0 * nu * nu) + arg.ln() + (1.0 / eps).ln())
                }
                _ => {
                    let (a, be) = (cs.alpha, cs.beta);
                    let lead = cs.big_c2 * x_norm.powf(be + 2.0) / (l0 * cs.delta1 * (be + 2.0));
                    let m = 2.0 * (r.c1 + r.c2) / (cs.c0.powf(a) * l0 * cs.delta1 * (be + 2.0));
                    let arg = x_norm + m.powf(1.0 / (a + be));
                    2.0 / gamma * (lead + arg.ln() + (1.0 / eps).ln())
                }
            }
        }
    };
    if raw.is_nan() {
        return Err(Error::BoundUnavailable("bound is undefined (log of 0)".into()));
    }
    Ok(raw.max(0.0))
}

/// Comparison bound on ‖u_t‖²_H for the noiseless flow:
/// α > 2: (‖x‖^{2−α} + ((α−2)/2)c₀^αδ₁t)^{−2/(α−2)}; α = 2: ‖x‖²e^{−c₀²δ₁t}.
pub fn deterministic_decay_bound(x_norm: f64, alpha: f64, c0: f64, delta1: f64, t: f64) -> f64 {
    if x_norm == 0.0 {
        return 0.0;
    }
    if (alpha - 2.0).abs() <= EQ_TOL {
        return x_norm * x_norm * (-c0 * c0 * delta1 * t).exp();
    }
    let k = c0.powf(alpha) * delta1;
    (x_norm.powf(2.0 - alpha) + 0.5 * (alpha - 2.0) * k * t).powf(-2.0 / (alpha - 2.0))
}

/// Lyapunov function Θ(x) = c₀^αδ₁‖x‖^α_H.
pub fn theta(cs: &ConstantSet, x_norm: f64) -> f64 {
    cs.c0.powf(cs.alpha) * cs.delta1 * x_norm.powf(cs.alpha)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub alpha: f64,
    pub beta: f64,
    pub samples: usize,
    /// Midpoint-type violations above 1e-12 relative.
    pub violations: usize,
    /// Largest (g(λp+(1−λ)q) − λg(p) − (1−λ)g(q)) / max(|lhs|, |rhs|).
    pub worst_relative: f64,
    /// Points with y ≠ 0 where a leading Hessian minor is negative.
    pub hessian_violations: usize,
    pub pass: bool,
}

fn g(alpha: f64, beta: f64, p: [f64; 2]) -> f64 {
    p[0].abs().powf(alpha) * p[1].abs().powf(beta)
}

/// g(λp + (1−λ)q) − λg(p) − (1−λ)g(q) for g(x,y) = |x|^α|y|^β; positive means
/// the convexity inequality fails at that triple.
pub fn convexity_gap(alpha: f64, beta: f64, p: [f64; 2], q: [f64; 2], lambda: f64) -> f64 {
    let mid = [
        lambda * p[0] + (1.0 - lambda) * q[0],
        lambda * p[1] + (1.0 - lambda) * q[1],
    ];
    g(alpha, beta, mid) - lambda * g(alpha, beta, p) - (1.0 - lambda) * g(alpha, beta, q)
}

/// Samples the convexity inequality of g(x,y) = |x|^α|y|^β on [−2,2]² and the
/// Hessian minors at the sampled points.
pub fn convexity_probe(alpha: f64, beta: f64, n_samples: usize, seed: u64) -> Result<ConvexityReport> {
    if !(alpha >= 2.0) || !(beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::Config(format!(
            "convexity probe needs alpha >= 2 and beta >= 0, got ({alpha}, {beta})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut hessian_violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let q = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let l: f64 = rng.random_range(0.0..=1.0);
        let rhs = l * g(alpha, beta, p) + (1.0 - l) * g(alpha, beta, q);
        let gap = convexity_gap(alpha, beta, p, q, l);
        let scale = (gap + rhs).abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        let rel = gap / scale;
        worst = worst.max(rel);
        if rel > 1e-12 {
            violations += 1;
        }
        let (x, y) = (p[0].abs(), p[1].abs());
        if y > 0.0 && x > 0.0 {
            let gxx = alpha * (alpha - 1.0) * x.powf(alpha - 2.0) * y.powf(beta);
            let gyy = beta * (beta - 1.0) * x.powf(alpha) * y.powf(beta - 2.0);
            let gxy = alpha * beta * x.powf(alpha - 1.0) * y.powf(beta - 1.0);
            let det = gxx * gyy - gxy * gxy;
            let size = (gxx * gyy).abs().max(gxy * gxy).max(f64::MIN_POSITIVE);
            if gxx < 0.0 || det < -1e-12 * size {
                hessian_violations += 1;
            }
        }
    }
    Ok(ConvexityReport {
        alpha,
        beta,
        samples: n_samples,
        violations,
        worst_relative: worst,
        hessian_violations,
        pass: violations == 0 && hessian_violations == 0,
    })
}
