use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::transform::GridPlan;
use crate::error::{config_err, Result};

/// Version tag of the mode ordering. Bump when the ordering changes.
pub const BASIS_TAG: &str = "lex-v1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
    Torus { dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    PeriodicMeanZero,
}

/// Trigonometric factor of a basis function. Dirichlet boxes only use sines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Cosine,
    Sine,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    /// Wavenumbers; the second entry is zero in one dimension.
    pub wavevector: [i64; 2],
    pub parity: Parity,
    pub eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Padding {
    /// Smallest grid that represents the retained modes.
    Exact,
    /// 3/2 rule, alias-free for quadratic products.
    ThreeHalves,
    /// 2x grid, used for non-polynomial nonlinearities.
    Double,
}

impl Padding {
    pub(crate) fn slot(self) -> usize {
        match self {
            Padding::Exact => 0,
            Padding::ThreeHalves => 1,
            Padding::Double => 2,
        }
    }
}

/// A truncated orthonormal eigenbasis of the Laplacian on a box or torus.
pub struct DomainSpec {
    geometry: Geometry,
    boundary: Boundary,
    truncation: usize,
    modes: Vec<Mode>,
    sorted_eigenvalues: Vec<f64>,
    c0: f64,
    plans: [OnceLock<GridPlan>; 3],
}

pub type Domain = Arc<DomainSpec>;

impl fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainSpec")
            .field("geometry", &self.geometry)
            .field("boundary", &self.boundary)
            .field("truncation", &self.truncation)
            .field("n_modes", &self.modes.len())
            .field("c0", &self.c0)
            .finish()
    }
}

pub fn build_domain(geometry: Geometry, boundary: Boundary, n: usize) -> Result<Domain> {
    if n == 0 {
        return config_err("truncation N must be at least 1");
    }
    let modes = match (geometry, boundary) {
        (Geometry::Interval { length }, Boundary::Dirichlet) => {
            if !(length > 0.0 && length.is_finite()) {
                return config_err(format!("interval length must be positive, got {length}"));
            }
            (1..=n as i64)
                .map(|k| Mode {
                    wavevector: [k, 0],
                    parity: Parity::Sine,
                    eigenvalue: (k as f64 * PI / length).powi(2),
                })
                .collect::<Vec<_>>()
        }
        (Geometry::Rectangle { lx, ly }, Boundary::Dirichlet) => {
            if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
                return config_err(format!("rectangle sides must be positive, got ({lx}, {ly})"));
            }
            let mut out = Vec::with_capacity(n * n);
            for m in 1..=n as i64 {
                for k in 1..=n as i64 {
                    let lam = PI * PI * ((m * m) as f64 / (lx * lx) + (k * k) as f64 / (ly * ly));
                    out.push(Mode {
                        wavevector: [m, k],
                        parity: Parity::Sine,
                        eigenvalue: lam,
                    });
                }
            }
            out
        }
        (Geometry::Torus { dim: 1 }, Boundary::PeriodicMeanZero) => {
            let mut out = Vec::with_capacity(2 * n);
            for k in 1..=n as i64 {
                for parity in [Parity::Cosine, Parity::Sine] {
                    out.push(Mode {
                        wavevector: [k, 0],
                        parity,
                        eigenvalue: (k * k) as f64,
                    });
                }
            }
            out
        }
        (Geometry::Torus { dim: 2 }, Boundary::PeriodicMeanZero) => {
            let ni = n as i64;
            let mut out = Vec::new();
            for k1 in 0..=ni {
                for k2 in -ni..=ni {
                    if k1 == 0 && k2 <= 0 {
                        continue;
                    }
                    for parity in [Parity::Cosine, Parity::Sine] {
                        out.push(Mode {
                            wavevector: [k1, k2],
                            parity,
                            eigenvalue: (k1 * k1 + k2 * k2) as f64,
                        });
                    }
                }
            }
            out
        }
        (Geometry::Torus { dim }, Boundary::PeriodicMeanZero) => {
            return config_err(format!("torus dimension {dim} is not supported (use 1 or 2)"));
        }
        (g, b) => {
            return config_err(format!("unsupported geometry/boundary combination: {g:?} with {b:?}"));
        }
    };
    let mut sorted: Vec<f64> = modes.iter().map(|m| m.eigenvalue).collect();
    sorted.sort_by(f64::total_cmp);
    let c0 = sorted[0].sqrt();
    Ok(Arc::new(DomainSpec {
        geometry,
        boundary,
        truncation: n,
        modes,
        sorted_eigenvalues: sorted,
        c0,
        plans: Default::default(),
    }))
}

impl DomainSpec {
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Spatial dimension of the domain.
    pub fn dim(&self) -> usize {
        match self.geometry {
            Geometry::Interval { .. } => 1,
            Geometry::Rectangle { .. } => 2,
            Geometry::Torus { dim } => dim,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.geometry, Geometry::Torus { .. })
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        match self.geometry {
            Geometry::Interval { length } => length,
            Geometry::Rectangle { lx, ly } => lx * ly,
            Geometry::Torus { dim } => (2.0 * PI).powi(dim as i32),
        }
    }

    /// Side lengths per axis.
    pub fn lengths(&self) -> [f64; 2] {
        match self.geometry {
            Geometry::Interval { length } => [length, 0.0],
            Geometry::Rectangle { lx, ly } => [lx, ly],
            Geometry::Torus { dim } => [2.0 * PI, if dim == 2 { 2.0 * PI } else { 0.0 }],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> &Mode {
        &self.modes[i]
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.modes[i].eigenvalue
    }

    pub fn sorted_eigenvalues(&self) -> &[f64] {
        &self.sorted_eigenvalues
    }

    /// Embedding constant: ‖x‖_V ≥ c0 ‖x‖_H.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn basis_tag(&self) -> &'static str {
        BASIS_TAG
    }

    /// Position of a mode in the lexicographic ordering.
    pub fn index_of(&self, wavevector: [i64; 2], parity: Parity) -> Option<usize> {
        self.modes
            .binary_search_by(|m| (m.wavevector, m.parity).cmp(&(wavevector, parity)))
            .ok()
    }

    /// Mode indices ordered by eigenvalue, ties broken by position.
    pub fn modes_by_eigenvalue(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.modes.len()).collect();
        idx.sort_by(|&a, &b| {
            self.modes[a]
                .eigenvalue
                .total_cmp(&self.modes[b].eigenvalue)
                .then(a.cmp(&b))
        });
        idx
    }

    /// Same geometry, boundary and truncation.
    pub fn same_as(&self, other: &DomainSpec) -> bool {
        std::ptr::eq(self, other)
            || (self.geometry == other.geometry
                && self.boundary == other.boundary
                && self.truncation == other.truncation)
    }

    pub(crate) fn plan(&self, padding: Padding) -> &GridPlan {
        self.plans[padding.slot()].get_or_init(|| GridPlan::new(self, padding))
    }
}
