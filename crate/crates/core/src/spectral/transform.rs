//! Collocation grids and the spectral <-> physical transforms.
//!
//! Dirichlet boxes use dense sine/cosine tables on the interior points of a
//! uniform grid (discrete sine transform of type I). Tori use complex FFTs.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::domain::{Domain, DomainSpec, Geometry, Padding};
use super::field::SpectralField;
use crate::error::{Error, Result};

/// Smallest integer ≥ n of the form 2^a 3^b 5^c.
pub fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

pub(crate) enum GridPlan {
    Dirichlet {
        dim: usize,
        n: usize,
        intervals: [usize; 2],
        lengths: [f64; 2],
        /// `sin[a][(j-1)*n + (k-1)] = sin(pi j k / M_a)`
        sin: [Vec<f64>; 2],
        cos: [Vec<f64>; 2],
    },
    Torus {
        dim: usize,
        points: usize,
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
        /// For each wavevector pair: (index of k, index of −k) in the spectrum.
        slots: Vec<(usize, usize)>,
        /// Wavevector per pair, as floats.
        waves: Vec<[f64; 2]>,
        basis_const: f64,
    },
}

fn trig_tables(m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut s = Vec::with_capacity((m - 1) * n);
    let mut c = Vec::with_capacity((m - 1) * n);
    for j in 1..m {
        for k in 1..=n {
            let arg = PI * (j * k) as f64 / m as f64;
            s.push(arg.sin());
            c.push(arg.cos());
        }
    }
    (s, c)
}

impl GridPlan {
    pub(crate) fn new(domain: &DomainSpec, padding: Padding) -> GridPlan {
        let n = domain.truncation();
        let dim = domain.dim();
        if domain.is_torus() {
            let raw = match padding {
                Padding::Exact => 2 * n + 1,
                Padding::ThreeHalves => 3 * n + 1,
                Padding::Double => 4 * n + 1,
            };
            let points = next_smooth(raw);
            let mut planner = FftPlanner::<f64>::new();
            let fwd = planner.plan_fft_forward(points);
            let inv = planner.plan_fft_inverse(points);
            let wrap = |k: i64| k.rem_euclid(points as i64) as usize;
            let mut slots = Vec::new();
            let mut waves = Vec::new();
            for pair in domain.modes().chunks(2) {
                let k = pair[0].wavevector;
                let (ip, im) = if dim == 1 {
                    (wrap(k[0]), wrap(-k[0]))
                } else {
                    (
                        wrap(k[0]) * points + wrap(k[1]),
                        wrap(-k[0]) * points + wrap(-k[1]),
                    )
                };
                slots.push((ip, im));
                waves.push([k[0] as f64, k[1] as f64]);
            }
            GridPlan::Torus {
                dim,
                points,
                fwd,
                inv,
                slots,
                waves,
                basis_const: (domain.measure() / 2.0).sqrt(),
            }
        } else {
            let m = match padding {
                Padding::Exact => n + 1,
                Padding::ThreeHalves => 3 * n / 2 + 1,
                Padding::Double => 2 * n + 1,
            };
            let (s0, c0) = trig_tables(m, n);
            let (s1, c1) = if dim == 2 { trig_tables(m, n) } else { (Vec::new(), Vec::new()) };
            GridPlan::Dirichlet {
                dim,
                n,
                intervals: [m, if dim == 2 { m } else { 0 }],
                lengths: domain.lengths(),
                sin: [s0, s1],
                cos: [c0, c1],
            }
        }
    }

    pub(crate) fn shape(&self) -> Vec<usize> {
        match self {
            GridPlan::Dirichlet { dim, intervals, .. } => {
                (0..*dim).map(|a| intervals[a] - 1).collect()
            }
            GridPlan::Torus { dim, points, .. } => vec![*points; *dim],
        }
    }

    pub(crate) fn n_points(&self) -> usize {
        self.shape().iter().product()
    }

    pub(crate) fn cell_volume(&self) -> f64 {
        match self {
            GridPlan::Dirichlet {
                dim,
                intervals,
                lengths,
                ..
            } => (0..*dim).map(|a| lengths[a] / intervals[a] as f64).product(),
            GridPlan::Torus { dim, points, .. } => (2.0 * PI / *points as f64).powi(*dim as i32),
        }
    }

    /// Physical values of one scalar component, optionally differentiated along `deriv`.
    pub(crate) fn synth(&self, coeffs: &[f64], deriv: Option<usize>) -> Vec<f64> {
        match self {
            GridPlan::Dirichlet { .. } => self.dirichlet_synth(coeffs, deriv),
            GridPlan::Torus { .. } => {
                let z = self.torus_synth_complex(coeffs, deriv, None);
                z.into_iter().map(|c| c.re).collect()
            }
        }
    }

    /// Two real syntheses at once. On tori they share one complex transform.
    pub(crate) fn synth_pair(
        &self,
        a: (&[f64], Option<usize>),
        b: (&[f64], Option<usize>),
    ) -> (Vec<f64>, Vec<f64>) {
        match self {
            GridPlan::Dirichlet { .. } => (self.synth(a.0, a.1), self.synth(b.0, b.1)),
            GridPlan::Torus { .. } => {
                let z = self.torus_synth_complex(a.0, a.1, Some(b));
                let re = z.iter().map(|c| c.re).collect();
                let im = z.iter().map(|c| c.im).collect();
                (re, im)
            }
        }
    }

    /// Galerkin coefficients of a grid function (discrete projection).
    pub(crate) fn analyze(&self, values: &[f64]) -> Vec<f64> {
        match self {
            GridPlan::Dirichlet { .. } => self.dirichlet_analyze(values),
            GridPlan::Torus { .. } => {
                let z: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                self.torus_analyze_complex(z, false).0
            }
        }
    }

    pub(crate) fn analyze_pair(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            GridPlan::Dirichlet { .. } => (self.analyze(a), self.analyze(b)),
            GridPlan::Torus { .. } => {
                let z: Vec<Complex64> = a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| Complex64::new(x, y))
                    .collect();
                let (ca, cb) = self.torus_analyze_complex(z, true);
                (ca, cb.expect("paired analysis"))
            }
        }
    }

    fn dirichlet_synth(&self, coeffs: &[f64], deriv: Option<usize>) -> Vec<f64> {
        let GridPlan::Dirichlet {
            dim,
            n,
            intervals,
            lengths,
            sin,
            cos,
        } = self
        else {
            unreachable!()
        };
        let n = *n;
        let factor = |axis: usize, k: usize| -> f64 {
            if deriv == Some(axis) {
                k as f64 * PI / lengths[axis]
            } else {
                1.0
            }
        };
        let table = |axis: usize| -> &Vec<f64> {
            if deriv == Some(axis) {
                &cos[axis]
            } else {
                &sin[axis]
            }
        };
        if *dim == 1 {
            let m = intervals[0];
            let norm = (2.0 / lengths[0]).sqrt();
            let t = table(0);
            let scaled: Vec<f64> = (0..n).map(|k| coeffs[k] * factor(0, k + 1) * norm).collect();
            (0..m - 1)
                .map(|j| {
                    let row = &t[j * n..(j + 1) * n];
                    row.iter().zip(&scaled).map(|(a, b)| a * b).sum()
                })
                .collect()
        } else {
            let (mx, my) = (intervals[0], intervals[1]);
            let norm = 2.0 / (lengths[0] * lengths[1]).sqrt();
            let tx = table(0);
            let ty = table(1);
            // temp[m][j] = sum_n c[m][n] fy_n ty[j][n]
            let mut temp = vec![0.0; n * (my - 1)];
            for mi in 0..n {
                let row_c = &coeffs[mi * n..(mi + 1) * n];
                let scaled: Vec<f64> = (0..n).map(|k| row_c[k] * factor(1, k + 1)).collect();
                for j in 0..my - 1 {
                    let row = &ty[j * n..(j + 1) * n];
                    temp[mi * (my - 1) + j] = row.iter().zip(&scaled).map(|(a, b)| a * b).sum();
                }
            }
            let mut out = vec![0.0; (mx - 1) * (my - 1)];
            for i in 0..mx - 1 {
                let trow = &tx[i * n..(i + 1) * n];
                let orow = &mut out[i * (my - 1)..(i + 1) * (my - 1)];
                for mi in 0..n {
                    let w = trow[mi] * factor(0, mi + 1) * norm;
                    if w == 0.0 {
                        continue;
                    }
                    let src = &temp[mi * (my - 1)..(mi + 1) * (my - 1)];
                    for (o, s) in orow.iter_mut().zip(src) {
                        *o += w * s;
                    }
                }
            }
            out
        }
    }

    fn dirichlet_analyze(&self, values: &[f64]) -> Vec<f64> {
        let GridPlan::Dirichlet {
            dim,
            n,
            intervals,
            lengths,
            sin,
            ..
        } = self
        else {
            unreachable!()
        };
        let n = *n;
        if *dim == 1 {
            let m = intervals[0];
            let w = (2.0 / lengths[0]).sqrt() * lengths[0] / m as f64;
            let mut out = vec![0.0; n];
            for j in 0..m - 1 {
                let row = &sin[0][j * n..(j + 1) * n];
                let v = values[j] * w;
                for (o, s) in out.iter_mut().zip(row) {
                    *o += v * s;
                }
            }
            out
        } else {
            let (mx, my) = (intervals[0], intervals[1]);
            let w = 2.0 / (lengths[0] * lengths[1]).sqrt() * (lengths[0] / mx as f64)
                * (lengths[1] / my as f64);
            // temp[i][n] = sum_j v[i][j] sy[j][n]
            let mut temp = vec![0.0; (mx - 1) * n];
            for i in 0..mx - 1 {
                let trow = &mut temp[i * n..(i + 1) * n];
                for j in 0..my - 1 {
                    let v = values[i * (my - 1) + j];
                    let srow = &sin[1][j * n..(j + 1) * n];
                    for (t, s) in trow.iter_mut().zip(srow) {
                        *t += v * s;
                    }
                }
            }
            let mut out = vec![0.0; n * n];
            for i in 0..mx - 1 {
                let srow = &sin[0][i * n..(i + 1) * n];
                let trow = &temp[i * n..(i + 1) * n];
                for mi in 0..n {
                    let a = srow[mi] * w;
                    let orow = &mut out[mi * n..(mi + 1) * n];
                    for (o, t) in orow.iter_mut().zip(trow) {
                        *o += a * t;
                    }
                }
            }
            out
        }
    }

    fn fft_nd(&self, data: &mut [Complex64], forward: bool) {
        let GridPlan::Torus {
            dim,
            points,
            fwd,
            inv,
            ..
        } = self
        else {
            unreachable!()
        };
        let plan = if forward { fwd } else { inv };
        plan.process(data);
        if *dim == 2 {
            transpose_square(data, *points);
            plan.process(data);
            transpose_square(data, *points);
        }
    }

    fn torus_synth_complex(
        &self,
        coeffs: &[f64],
        deriv: Option<usize>,
        second: Option<(&[f64], Option<usize>)>,
    ) -> Vec<Complex64> {
        let GridPlan::Torus {
            slots,
            waves,
            basis_const,
            ..
        } = self
        else {
            unreachable!()
        };
        let mut z = vec![Complex64::new(0.0, 0.0); self.n_points()];
        let scale = 0.5 / basis_const;
        let hat = |c: &[f64], d: Option<usize>, w: usize| -> Complex64 {
            let v = Complex64::new(c[2 * w], -c[2 * w + 1]) * scale;
            match d {
                Some(axis) => v * Complex64::new(0.0, waves[w][axis]),
                None => v,
            }
        };
        for (w, &(ip, im)) in slots.iter().enumerate() {
            let a = hat(coeffs, deriv, w);
            z[ip] += a;
            z[im] += a.conj();
            if let Some((c2, d2)) = second {
                let b = hat(c2, d2, w);
                let ib = Complex64::new(0.0, 1.0);
                z[ip] += ib * b;
                z[im] += ib * b.conj();
            }
        }
        self.fft_nd(&mut z, false);
        z
    }

    fn torus_analyze_complex(
        &self,
        mut z: Vec<Complex64>,
        paired: bool,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let GridPlan::Torus {
            slots, basis_const, ..
        } = self
        else {
            unreachable!()
        };
        self.fft_nd(&mut z, true);
        let norm = 2.0 * basis_const / self.n_points() as f64;
        let mut a = vec![0.0; 2 * slots.len()];
        let mut b = if paired { Some(vec![0.0; 2 * slots.len()]) } else { None };
        for (w, &(ip, im)) in slots.iter().enumerate() {
            let zp = z[ip];
            let zm = z[im].conj();
            let (fa, fb) = if paired {
                ((zp + zm) * 0.5, (zp - zm) * Complex64::new(0.0, -0.5))
            } else {
                (zp, Complex64::new(0.0, 0.0))
            };
            a[2 * w] = norm * fa.re;
            a[2 * w + 1] = -norm * fa.im;
            if let Some(b) = b.as_mut() {
                b[2 * w] = norm * fb.re;
                b[2 * w + 1] = -norm * fb.im;
            }
        }
        (a, b)
    }
}

fn transpose_square(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

/// Physical-space samples of a field on a collocation grid.
///
/// Values are component-major; within a component the first axis varies slowest.
/// Dirichlet grids hold interior points only (the field vanishes on the boundary).
#[derive(Clone, Debug)]
pub struct GridField {
    pub domain: Domain,
    pub padding: Padding,
    pub components: usize,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(domain: &Domain, padding: Padding, components: usize) -> Self {
        let plan = domain.plan(padding);
        let shape = plan.shape();
        let np = plan.n_points();
        Self {
            domain: domain.clone(),
            padding,
            components,
            shape,
            values: vec![0.0; np * components],
        }
    }

    pub fn n_points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.domain.plan(self.padding).cell_volume()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let np = self.n_points();
        &self.values[c * np..(c + 1) * np]
    }

    /// Pointwise Euclidean magnitude of the vector value.
    fn magnitude_sq(&self, p: usize) -> f64 {
        let np = self.n_points();
        (0..self.components)
            .map(|c| self.values[c * np + p].powi(2))
            .sum()
    }

    /// Quadrature L^p norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let vol = self.cell_volume();
        let s: f64 = (0..self.n_points())
            .map(|i| self.magnitude_sq(i).powf(p / 2.0))
            .sum();
        (s * vol).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0)
    }

    pub fn l4_norm(&self) -> f64 {
        self.lp_norm(4.0)
    }
}

pub fn to_grid(f: &SpectralField, padding: Padding) -> GridField {
    let plan = f.domain().plan(padding);
    let mut values = Vec::with_capacity(plan.n_points() * f.components());
    for c in 0..f.components() {
        values.extend(plan.synth(f.component(c), None));
    }
    GridField {
        domain: f.domain().clone(),
        padding,
        components: f.components(),
        shape: plan.shape(),
        values,
    }
}

/// Grid samples of ∂f/∂x_axis.
pub fn to_grid_derivative(f: &SpectralField, axis: usize, padding: Padding) -> Result<GridField> {
    if axis >= f.domain().dim() {
        return Err(Error::Unsupported(format!(
            "axis {axis} on a {}-dimensional domain",
            f.domain().dim()
        )));
    }
    let plan = f.domain().plan(padding);
    let mut values = Vec::with_capacity(plan.n_points() * f.components());
    for c in 0..f.components() {
        values.extend(plan.synth(f.component(c), Some(axis)));
    }
    Ok(GridField {
        domain: f.domain().clone(),
        padding,
        components: f.components(),
        shape: plan.shape(),
        values,
    })
}

/// Project grid samples back onto the retained modes; higher content is discarded.
pub fn from_grid(g: &GridField) -> Result<SpectralField> {
    let plan = g.domain.plan(g.padding);
    let np = plan.n_points();
    if g.values.len() != np * g.components {
        return Err(Error::Shape {
            expected: np * g.components,
            got: g.values.len(),
        });
    }
    let mut coeffs = Vec::with_capacity(g.domain.n_modes() * g.components);
    for c in 0..g.components {
        coeffs.extend(plan.analyze(&g.values[c * np..(c + 1) * np]));
    }
    SpectralField::from_coeffs(&g.domain, g.components, coeffs)
}

/// Grid coordinates of point `p` (flat index within one component).
pub fn grid_point(domain: &Domain, padding: Padding, p: usize) -> [f64; 2] {
    let plan = domain.plan(padding);
    let shape = plan.shape();
    let lengths = domain.lengths();
    let (i, j) = if shape.len() == 2 {
        (p / shape[1], p % shape[1])
    } else {
        (p, 0)
    };
    match (plan, domain.geometry()) {
        (GridPlan::Dirichlet { intervals, .. }, Geometry::Interval { .. }) => {
            [(i + 1) as f64 * lengths[0] / intervals[0] as f64, 0.0]
        }
        (GridPlan::Dirichlet { intervals, .. }, _) => [
            (i + 1) as f64 * lengths[0] / intervals[0] as f64,
            (j + 1) as f64 * lengths[1] / intervals[1] as f64,
        ],
        (GridPlan::Torus { points, .. }, _) => {
            let h = 2.0 * PI / *points as f64;
            [i as f64 * h, if shape.len() == 2 { j as f64 * h } else { 0.0 }]
        }
    }
}
