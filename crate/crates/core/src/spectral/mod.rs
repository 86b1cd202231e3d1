//! Truncated eigenbases, norms of the Gelfand triple V ⊂ H ⊂ V*, grid transforms
//! and the Leray projection.

mod domain;
mod field;
mod transform;

pub use domain::{build_domain, Boundary, Domain, DomainSpec, Geometry, Mode, Padding, Parity, BASIS_TAG};
pub use field::{
    divergence_residual, h_norm, leray_project, random_field, solenoidal_direction, v_norm,
    vstar_norm, FieldKind, SpectralField,
};
pub(crate) use field::leray_in_place;
pub use transform::{from_grid, grid_point, next_smooth, to_grid, to_grid_derivative, GridField};
