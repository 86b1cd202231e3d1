//! Pseudo-spectral evaluation of the nonlinear parts of the drifts.

use super::{DriftModel, FSpec, GSpec, ModelKind};
use crate::spectral::{leray_in_place, Padding, SpectralField};

pub(super) fn explicit_part(m: &DriftModel, u: &SpectralField) -> SpectralField {
    match m.kind() {
        ModelKind::Heat { .. } => m.zero_field(),
        ModelKind::Semilinear { f, g, .. } => semilinear(u, f, g),
        ModelKind::NavierStokes2D { .. } => convection(u),
        ModelKind::PowerLawFluid { nu, p, .. } => {
            let mut out = stress_divergence(u, *nu, *p);
            let n = u.coeffs().len();
            for i in 0..n {
                out.coeffs_mut()[i] += nu * u.eigenvalue_at(i) * u.coeffs()[i];
            }
            let conv = convection(u);
            for (o, c) in out.coeffs_mut().iter_mut().zip(conv.coeffs()) {
                *o += c;
            }
            out
        }
    }
}

pub(super) fn transport(m: &DriftModel, u: &SpectralField) -> SpectralField {
    match m.kind() {
        ModelKind::Heat { .. } => m.zero_field(),
        ModelKind::Semilinear { f, .. } => semilinear(u, f, &GSpec::Zero),
        ModelKind::NavierStokes2D { .. } | ModelKind::PowerLawFluid { .. } => convection(u),
    }
}

/// Σ_i f_i(u) ∂_i u + g(u) on the doubled grid.
fn semilinear(u: &SpectralField, f: &FSpec, g: &GSpec) -> SpectralField {
    let domain = u.domain();
    let plan = domain.plan(Padding::Double);
    let c = u.component(0);
    let vals = plan.synth(c, None);
    let mut acc: Vec<f64> = vals.iter().map(|&x| g.eval(x)).collect();
    for axis in 0..domain.dim() {
        let d = plan.synth(c, Some(axis));
        for ((a, &x), &dx) in acc.iter_mut().zip(&vals).zip(&d) {
            *a += f.eval(axis, x) * dx;
        }
    }
    let coeffs = plan.analyze(&acc);
    SpectralField::from_coeffs(domain, 1, coeffs).expect("grid analysis keeps the mode count")
}

/// F(u) = −P[(u·∇)u], dealiased by the 3/2 rule.
fn convection(u: &SpectralField) -> SpectralField {
    let domain = u.domain();
    let plan = domain.plan(Padding::ThreeHalves);
    let (c1, c2) = (u.component(0), u.component(1));
    let (u1, u2) = plan.synth_pair((c1, None), (c2, None));
    let (d1u1, d2u1) = plan.synth_pair((c1, Some(0)), (c1, Some(1)));
    let (d1u2, d2u2) = plan.synth_pair((c2, Some(0)), (c2, Some(1)));
    let np = u1.len();
    let mut n1 = vec![0.0; np];
    let mut n2 = vec![0.0; np];
    for i in 0..np {
        n1[i] = -(u1[i] * d1u1[i] + u2[i] * d2u1[i]);
        n2[i] = -(u1[i] * d1u2[i] + u2[i] * d2u2[i]);
    }
    let (a, b) = plan.analyze_pair(&n1, &n2);
    let mut coeffs = a;
    coeffs.extend(b);
    let mut out = SpectralField::from_coeffs(domain, 2, coeffs).expect("two components");
    leray_in_place(&mut out);
    out
}

/// Spectral derivative of a torus coefficient vector laid out as (cos, sin) pairs.
fn torus_derivative(c: &[f64], waves: &[[i64; 2]], axis: usize, out: &mut [f64]) {
    for (w, k) in waves.iter().enumerate() {
        let kj = k[axis] as f64;
        let (a, b) = (c[2 * w], c[2 * w + 1]);
        out[2 * w] += kj * b;
        out[2 * w + 1] -= kj * a;
    }
}

/// P div τ(u) with τ(u) = 2ν(1+|e(u)|)^{p−2} e(u), evaluated on the doubled grid.
fn stress_divergence(u: &SpectralField, nu: f64, p: f64) -> SpectralField {
    let domain = u.domain();
    let plan = domain.plan(Padding::Double);
    let (c1, c2) = (u.component(0), u.component(1));
    let (e11, e22) = plan.synth_pair((c1, Some(0)), (c2, Some(1)));
    let (d2u1, d1u2) = plan.synth_pair((c1, Some(1)), (c2, Some(0)));
    let np = e11.len();
    let mut t11 = vec![0.0; np];
    let mut t12 = vec![0.0; np];
    let mut t22 = vec![0.0; np];
    for i in 0..np {
        let e12 = 0.5 * (d2u1[i] + d1u2[i]);
        let mag = (e11[i] * e11[i] + e22[i] * e22[i] + 2.0 * e12 * e12).sqrt();
        let s = 2.0 * nu * (1.0 + mag).powf(p - 2.0);
        t11[i] = s * e11[i];
        t12[i] = s * e12;
        t22[i] = s * e22[i];
    }
    let (h11, h12) = plan.analyze_pair(&t11, &t12);
    let h22 = plan.analyze(&t22);
    let waves: Vec<[i64; 2]> = domain.modes().chunks(2).map(|m| m[0].wavevector).collect();
    let n = domain.n_modes();
    let mut coeffs = vec![0.0; 2 * n];
    {
        let (o1, o2) = coeffs.split_at_mut(n);
        torus_derivative(&h11, &waves, 0, o1);
        torus_derivative(&h12, &waves, 1, o1);
        torus_derivative(&h12, &waves, 0, o2);
        torus_derivative(&h22, &waves, 1, o2);
    }
    let mut out = SpectralField::from_coeffs(domain, 2, coeffs).expect("two components");
    leray_in_place(&mut out);
    out
}
