//! Velocity and spatial grids, sphere quadrature, phase-space fields and the
//! functionals (L1 norm, moments) every other module is built on.
//!
//! Vectors are stored as `[f64; 3]`; two-dimensional problems keep the third
//! component at zero.

mod field;
mod space;
mod sphere;
mod velocity;

pub use field::{compute_moments, l1_norm, slice_l1_norm, DistributionField, Moments};
pub use space::SpatialGrid;
pub use sphere::{gauss_legendre, SphereQuadrature};
pub use velocity::{Stencil, VelocityGrid};
pub(crate) use velocity::snap_to_node;

use crate::error::{Error, Result};

pub type Vector = [f64; 3];

/// Tolerance on |w| - 1 accepted for collision directions.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[inline]
pub fn dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vector) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &Vector, b: &Vector) -> Vector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Post-collision velocities for the pair `(u, v)` and impact direction `w`:
/// `u' = u - w (w.(u - v))`, `v' = v + w (w.(u - v))`.
///
/// The map conserves `u + v` and `|u|^2 + |v|^2` and is an involution for a
/// fixed `w`.
pub fn post_collision(u: &Vector, v: &Vector, w: &Vector) -> Result<(Vector, Vector)> {
    let n = norm(w);
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NonUnitVector { norm: n });
    }
    let proj = dot(w, &sub(u, v));
    let u_prime = [u[0] - w[0] * proj, u[1] - w[1] * proj, u[2] - w[2] * proj];
    let v_prime = [v[0] + w[0] * proj, v[1] + w[1] * proj, v[2] + w[2] * proj];
    Ok((u_prime, v_prime))
}

/// Surface measure of the unit sphere in `dim` dimensions (2 or 3).
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}
